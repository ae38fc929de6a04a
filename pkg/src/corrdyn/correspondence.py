"""Holomorphic correspondences: formal sums of bivariate components.

A correspondence is an ordered list of BivarPoly components with
multiplicities.  Forward images of x are the sphere roots of w -> P(x, w)
per component, backward images of y the roots of z -> P(z, y).  Root
counts on the sphere always match the formal fiber degree because missing
affine roots are reported at infinity, so the generic forward count is
d_fwd = sum m_t * deg_w(P_t) and the backward count d_top = sum m_t *
deg_z(P_t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPairs, ParseError
from .sphere import (DEFAULT_ROOT_TOL, BivarPoly, SpherePoint,
                     as_sphere_point, roots, sph_dist)

#: Residual bound under which a path step counts as incident.
INCIDENCE_TOL = 1e-8

#: Guard margin for the expansivity verdict.
EXPANSIVITY_MARGIN = 0.05


@dataclass(frozen=True)
class BranchPoint:
    """One point of a fiber, tagged with its component and branch slot.

    ``branch_index`` is the first of ``multiplicity`` consecutive branch
    slots occupied by this point inside its component; slots are numbered
    from 1 in canonical root order.
    """

    point: SpherePoint
    component: int
    branch_index: int
    multiplicity: int


@dataclass(frozen=True)
class Fiber:
    """A forward or backward image multiset with a degeneracy flag."""

    branches: tuple[BranchPoint, ...]
    degenerate: bool = False

    @property
    def total_multiplicity(self) -> int:
        return sum(b.multiplicity for b in self.branches)

    def points(self) -> list[SpherePoint]:
        return [b.point for b in self.branches]


def _canonical_key(point: SpherePoint):
    """Sort key (argument, modulus) in the computation chart, infinity last."""
    if point.is_infinity:
        return (1, 0.0, 0.0)
    v = point.value
    if point.inverted:
        arg = -math.atan2(v.imag, v.real)
        mod = 1.0 / abs(v)
    else:
        arg = math.atan2(v.imag, v.real)
        mod = abs(v)
    return (0, arg, mod)


@dataclass
class Correspondence:
    """A formal sum of bivariate polynomial components."""

    components: list[BivarPoly]
    root_tol: float = DEFAULT_ROOT_TOL

    def __post_init__(self):
        if not self.components:
            raise ParseError("correspondence needs at least one component")

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def d_fwd(self) -> int:
        return sum(c.multiplicity * c.deg_w for c in self.components)

    @property
    def d_top(self) -> int:
        return sum(c.multiplicity * c.deg_z for c in self.components)

    def degrees(self):
        """(d_fwd, d_top, per-component (lambda_t, delta_t, m_t))."""
        per = [(c.deg_w, c.deg_z, c.multiplicity) for c in self.components]
        return self.d_fwd, self.d_top, per

    # -- fibers ------------------------------------------------------------

    def _fiber(self, coeff_fn, x: SpherePoint) -> Fiber:
        branches: list[BranchPoint] = []
        degenerate = False
        for t, comp in enumerate(self.components, start=1):
            coeffs = coeff_fn(comp, x)
            scale = float(np.abs(coeffs).max())
            if scale == 0.0:
                # Whole fiber collapses; catastrophically non-generic.
                degenerate = True
                continue
            root_list = roots(coeffs, tol=self.root_tol)
            root_list.sort(key=lambda rm: _canonical_key(rm[0]))
            slot = 1
            for point, mult in root_list:
                if mult > 1:
                    degenerate = True
                total = mult * comp.multiplicity
                branches.append(BranchPoint(point, t, slot, total))
                slot += total
        return Fiber(tuple(branches), degenerate)

    def forward_images(self, x) -> Fiber:
        """Fiber of w -> P_t(x, w) over every component, with multiplicity."""
        return self._fiber(lambda comp, p: comp.coeffs_in_w(p), as_sphere_point(x))

    def backward_images(self, y) -> Fiber:
        """Fiber of z -> P_t(z, y) over every component, with multiplicity."""
        return self._fiber(lambda comp, p: comp.coeffs_in_z(p), as_sphere_point(y))

    def incidence_residual(self, x, y, component: int) -> float:
        return self.components[component - 1].incidence_residual(x, y)

    def fixed_points(self) -> list[tuple[SpherePoint, int]]:
        """Sphere solutions of P_t(z, z) = 0 over all components."""
        out = []
        for comp in self.components:
            d = comp.deg_z + comp.deg_w
            diag = np.zeros(d + 1, dtype=complex)
            for a in range(comp.deg_z + 1):
                for b in range(comp.deg_w + 1):
                    diag[a + b] += comp.table[a, b]
            if not np.abs(diag).max():
                continue
            out.extend(roots(diag, tol=self.root_tol))
        return out


def forward_images(corr: Correspondence, x) -> Fiber:
    return corr.forward_images(x)


def backward_images(corr: Correspondence, y) -> Fiber:
    return corr.backward_images(y)


def degrees(corr: Correspondence):
    return corr.degrees()


# ---------------------------------------------------------------------------
# Correspondence document format
# ---------------------------------------------------------------------------
#
# One component per block, blocks separated by blank lines.  Inside a
# block: first data line is the multiplicity (positive integer), each
# further line is "a b re im" giving the coefficient of z^a w^b.
# Comments start with '#'.


def parse_correspondence(text: str, root_tol: float = DEFAULT_ROOT_TOL) -> Correspondence:
    blocks: list[list[tuple[int, str]]] = [[]]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            if blocks[-1]:
                blocks.append([])
            continue
        blocks[-1].append((lineno, line))
    if blocks and not blocks[-1]:
        blocks.pop()
    if not blocks:
        raise ParseError("document contains no components")

    components = []
    for block in blocks:
        lineno, head = block[0]
        try:
            mult = int(head)
        except ValueError:
            raise ParseError(f"expected integer multiplicity, got {head!r}", line=lineno)
        if mult < 1:
            raise ParseError("multiplicity must be >= 1", line=lineno)
        entries = []
        max_a = max_b = 0
        for lineno, line in block[1:]:
            parts = line.split()
            if len(parts) != 4:
                raise ParseError("expected 'a b re im'", line=lineno)
            try:
                a, b = int(parts[0]), int(parts[1])
                re, im = float(parts[2]), float(parts[3])
            except ValueError:
                raise ParseError(f"bad coefficient entry {line!r}", line=lineno)
            if a < 0 or b < 0:
                raise ParseError("exponents must be nonnegative", line=lineno)
            entries.append((a, b, complex(re, im)))
            max_a, max_b = max(max_a, a), max(max_b, b)
        if not entries:
            raise ParseError("component has no coefficients", line=block[0][0])
        table = np.zeros((max_a + 1, max_b + 1), dtype=complex)
        for a, b, c in entries:
            table[a, b] += c
        components.append(BivarPoly(table, multiplicity=mult))
    return Correspondence(components, root_tol=root_tol)


def load_correspondence(spec_text: str, root_tol: float = DEFAULT_ROOT_TOL) -> Correspondence:
    """Parse and validate a correspondence document."""
    return parse_correspondence(spec_text, root_tol=root_tol)


# ---------------------------------------------------------------------------
# Expansivity probe
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpansivityResult:
    is_expansive: bool
    lambda_estimate: float
    pairs_used: int
    worst_ratio: float


def expansivity_probe(corr: Correspondence, region, samples: int,
                      probe_scale: float = 0.05,
                      margin: float = EXPANSIVITY_MARGIN,
                      seed: int | None = None) -> ExpansivityResult:
    """Estimate the backward contraction factor on a candidate support.

    For sampled close pairs (x0, y0) and every backward branch of x0, the
    best-matching backward branch of y0 with the same component symbol is
    found; the worst best-match ratio d(preimages)/d(x0, y0) over all
    pairs and branches gives lambda_estimate as its reciprocal.  The
    verdict requires lambda_estimate > 1 + margin.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    pairs = []
    for x0, y0 in region:
        x0, y0 = as_sphere_point(x0), as_sphere_point(y0)
        d = sph_dist(x0, y0)
        if 0.0 < d <= probe_scale:
            pairs.append((x0, y0, d))
    if not pairs:
        raise InsufficientPairs(
            f"no pair closer than probe scale {probe_scale}")
    rng = np.random.default_rng(seed)
    if len(pairs) > samples:
        idx = rng.choice(len(pairs), size=samples, replace=False)
        pairs = [pairs[int(i)] for i in idx]

    worst = 0.0
    for x0, y0, d in pairs:
        fx = corr.backward_images(x0)
        fy = corr.backward_images(y0)
        by_symbol: dict[int, list[SpherePoint]] = {}
        for b in fy.branches:
            by_symbol.setdefault(b.component, []).append(b.point)
        for b in fx.branches:
            candidates = by_symbol.get(b.component, [])
            if not candidates:
                continue
            best = min(sph_dist(b.point, q) for q in candidates)
            worst = max(worst, best / d)
    if worst == 0.0:
        # Backward branches collapsed to exact matches; treat as strongly
        # contracting rather than dividing by zero.
        return ExpansivityResult(True, math.inf, len(pairs), 0.0)
    lam = 1.0 / worst
    return ExpansivityResult(lam > 1.0 + margin, lam, len(pairs), worst)
