"""Riemann-sphere geometry and complex polynomial root finding.

Points are kept in whichever affine chart has magnitude at most one: a
point z with |z| <= 1 is stored directly, anything larger (including the
point at infinity) is stored as w = 1/z in the reciprocal chart.  All
distances are chordal, computed from normalized homogeneous coordinates,
so no operation ever forms a large intermediate.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidComponent, NonConvergence

#: Magnitude at which representation flips to the reciprocal chart.
R_SWITCH = 1.0

#: Default relative root tolerance (relative to the max coefficient).
DEFAULT_ROOT_TOL = 1e-12

#: Multiplier turning the root tolerance into a cluster-merge radius.
CLUSTER_RADIUS_FACTOR = 1e3

# Double precision cannot push a genuine multiple root cluster tighter
# than about sqrt(eps); detection must be at least this wide.
_CLUSTER_DETECT_FLOOR = 1e-7


class SpherePoint:
    """A point of the Riemann sphere in chart-safe canonical form.

    Exactly one chart is active: ``inverted=False`` stores the point z
    itself (|z| <= 1), ``inverted=True`` stores w with the point being
    1/w, and w = 0 encoding the point at infinity.
    """

    __slots__ = ("value", "inverted")

    def __init__(self, value: complex, inverted: bool = False):
        value = complex(value)
        if abs(value) > R_SWITCH:
            value = 1.0 / value
            inverted = not inverted
        self.value = value
        self.inverted = bool(inverted)

    @classmethod
    def from_complex(cls, z) -> "SpherePoint":
        return cls(complex(z), False)

    @classmethod
    def from_reciprocal(cls, w) -> "SpherePoint":
        """The point 1/w, with 1/0 meaning infinity."""
        return cls(complex(w), True)

    @classmethod
    def infinity(cls) -> "SpherePoint":
        return cls(0j, True)

    @classmethod
    def from_unit_vector(cls, vec) -> "SpherePoint":
        x, y, z = float(vec[0]), float(vec[1]), float(vec[2])
        if z <= 0.0:
            return cls(complex(x, y) / (1.0 - z), False)
        return cls(complex(x, -y) / (1.0 + z), True)

    @property
    def is_infinity(self) -> bool:
        return self.inverted and self.value == 0

    def to_complex(self) -> complex:
        if self.inverted:
            if self.value == 0:
                raise OverflowError("point at infinity has no finite value")
            return 1.0 / self.value
        return self.value

    def magnitude(self) -> float:
        """|z|, with infinity mapped to math.inf."""
        if self.inverted:
            a = abs(self.value)
            return math.inf if a == 0 else 1.0 / a
        return abs(self.value)

    def homogeneous(self) -> tuple[complex, complex]:
        """Normalized homogeneous coordinates (a, b) with the point a/b."""
        norm = math.sqrt(1.0 + abs(self.value) ** 2)
        if self.inverted:
            return 1.0 / norm, self.value / norm
        return self.value / norm, 1.0 / norm

    def unit_vector(self) -> np.ndarray:
        """Embedding into the unit sphere of R^3."""
        v = self.value
        s = 1.0 + abs(v) ** 2
        if self.inverted:
            w = 2.0 * v.conjugate() / s
            return np.array([w.real, w.imag, (1.0 - abs(v) ** 2) / s])
        w = 2.0 * v / s
        return np.array([w.real, w.imag, (abs(v) ** 2 - 1.0) / s])

    def __eq__(self, other):
        if not isinstance(other, SpherePoint):
            return NotImplemented
        return self.inverted == other.inverted and self.value == other.value

    def __hash__(self):
        return hash((self.inverted, self.value))

    def __repr__(self):
        if self.is_infinity:
            return "SpherePoint(inf)"
        if self.inverted:
            return f"SpherePoint(1/{self.value!r})"
        return f"SpherePoint({self.value!r})"


def as_sphere_point(x) -> SpherePoint:
    """Coerce a complex number or SpherePoint to a SpherePoint."""
    if isinstance(x, SpherePoint):
        return x
    return SpherePoint.from_complex(x)


def sph_dist(p, q) -> float:
    """Chordal distance on the Riemann sphere, range [0, 2].

    Equals 2|z - w| / (sqrt(1+|z|^2) sqrt(1+|w|^2)) for finite points and
    extends continuously to infinity.  Exactly symmetric; satisfies the
    triangle inequality up to floating rounding.
    """
    p = as_sphere_point(p)
    q = as_sphere_point(q)
    a1, b1 = p.homogeneous()
    a2, b2 = q.homogeneous()
    return min(2.0, 2.0 * abs(a1 * b2 - a2 * b1))


# ---------------------------------------------------------------------------
# Univariate polynomial helpers (ascending coefficient order)
# ---------------------------------------------------------------------------


def _polyval(coeffs: np.ndarray, z):
    out = np.zeros_like(np.asarray(z, dtype=complex))
    for c in coeffs[::-1]:
        out = out * z + c
    return out


def _polyder(coeffs: np.ndarray) -> np.ndarray:
    n = len(coeffs)
    if n <= 1:
        return np.zeros(1, dtype=complex)
    return coeffs[1:] * np.arange(1, n, dtype=float)


def _eval_scale(coeffs: np.ndarray, z) -> np.ndarray:
    """Sum_k |c_k| |z|^k, the natural backward-error scale at z."""
    az = np.abs(np.asarray(z, dtype=complex))
    out = np.zeros_like(az)
    for c in np.abs(coeffs)[::-1]:
        out = out * az + c
    return out


def _aberth(coeffs: np.ndarray, tol: float, rng: np.random.Generator,
            max_iter: int = 400):
    """Aberth-Ehrlich simultaneous iteration on a trimmed polynomial.

    coeffs is ascending with nonzero leading and constant terms.  Returns
    the root array; raises NonConvergence when the backward error stays
    above tol.
    """
    deg = len(coeffs) - 1
    dcoeffs = _polyder(coeffs)
    lead = abs(coeffs[-1])
    cauchy = 1.0 + max(np.abs(coeffs[:-1])) / lead
    c0 = abs(coeffs[0])
    r_geo = (c0 / lead) ** (1.0 / deg) if c0 > 0 else 1.0
    radius = min(max(r_geo, 0.25), cauchy)

    # Random perturbed initial circle; a fixed rotation offset breaks the
    # symmetric stall configurations of real polynomials.
    angles = 2.0 * np.pi * (np.arange(deg) + 0.3) / deg
    angles = angles + rng.uniform(-0.3, 0.3) + rng.uniform(-0.05, 0.05, deg)
    z = radius * np.exp(1j * angles) * (1.0 + rng.uniform(-0.02, 0.02, deg))

    active = np.ones(deg, dtype=bool)
    step_hist: list[float] = []
    for iteration in range(1, max_iter + 1):
        p = _polyval(coeffs, z)
        dp = _polyval(dcoeffs, z)
        bad = np.abs(dp) == 0.0
        if bad.any():
            z[bad] += (1e-8 + 1e-8j) * (1.0 + np.abs(z[bad]))
            continue
        newton = p / dp
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        sums = inv.sum(axis=1)
        denom = 1.0 - newton * sums
        denom = np.where(np.abs(denom) < 1e-300, 1.0, denom)
        step = newton / denom
        step[~active] = 0.0
        nonfinite = ~np.isfinite(step)
        if nonfinite.any():
            step[nonfinite] = 0.0
            z[nonfinite] += 1e-6 * (1.0 + np.abs(z[nonfinite])) * np.exp(
                1j * rng.uniform(0, 2 * np.pi, int(nonfinite.sum())))
        z = z - step
        asteps = np.abs(step)
        active = asteps > 5e-15 * (1.0 + np.abs(z))
        m = float(asteps.max())
        step_hist.append(m)
        if not active.any():
            break
        # Multiple roots plateau at the noise floor; stop once the step
        # size is no longer shrinking and accuracy is already adequate.
        if len(step_hist) >= 30 and m >= 0.25 * step_hist[-12]:
            resid = np.abs(_polyval(coeffs, z)) / np.maximum(
                _eval_scale(coeffs, z), 1e-300)
            if resid.max() <= tol:
                break

    resid = np.abs(_polyval(coeffs, z)) / np.maximum(_eval_scale(coeffs, z), 1e-300)
    if resid.max() > tol:
        raise NonConvergence(
            f"root iteration stalled at backward error {resid.max():.3e}",
            iterations=iteration)
    return z


def _stable_quadratic(c0: complex, c1: complex, c2: complex):
    disc = cmath.sqrt(c1 * c1 - 4.0 * c2 * c0)
    u = -c1 + disc
    v = -c1 - disc
    q = u if abs(u) >= abs(v) else v
    if q == 0:
        r = -c1 / (2.0 * c2)
        return [r, r]
    return [q / (2.0 * c2), 2.0 * c0 / q]


def _derivative_chain(coeffs: np.ndarray, order: int):
    out = [np.array(coeffs, dtype=complex)]
    for _ in range(order):
        out.append(_polyder(out[-1]))
    return out


def _merge_clusters(points: list[complex], coeffs: np.ndarray, tol: float):
    """Collapse numerically coincident roots into multiple roots.

    Clusters are detected at max(CLUSTER_RADIUS_FACTOR*tol, 1e-7) relative
    radius, then validated: the cluster mean is refined on the (m-1)-th
    derivative, and all lower derivatives must vanish to tolerance.  A
    cluster that fails validation is kept split.
    """
    n = len(points)
    if n == 0:
        return []
    radius = max(CLUSTER_RADIUS_FACTOR * tol, _CLUSTER_DETECT_FLOOR)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            lim = radius * (1.0 + min(abs(points[i]), abs(points[j])))
            if abs(points[i] - points[j]) <= lim:
                parent[find(i)] = find(j)

    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)

    dcoeffs = _polyder(coeffs)
    merged: list[tuple[complex, int]] = []
    for idx in groups.values():
        m = len(idx)
        if m == 1:
            r = points[idx[0]]
            # A single Newton polish step, kept only when it helps.
            dp = complex(_polyval(dcoeffs, r))
            if dp != 0:
                cand = r - complex(_polyval(coeffs, r)) / dp
                if abs(complex(_polyval(coeffs, cand))) <= abs(complex(_polyval(coeffs, r))):
                    r = cand
            merged.append((r, 1))
            continue
        chain = _derivative_chain(coeffs, m - 1)
        center = sum(points[i] for i in idx) / m
        top = chain[m - 1]
        dtop = _polyder(top)
        for _ in range(25):
            dv = complex(_polyval(dtop, center))
            if dv == 0:
                break
            delta = complex(_polyval(top, center)) / dv
            center -= delta
            if abs(delta) <= 1e-16 * (1.0 + abs(center)):
                break
        eta = max(tol, 1e3 * np.finfo(float).eps)
        ok = True
        for k in range(m):
            scale = float(_eval_scale(chain[k], center))
            if abs(complex(_polyval(chain[k], center))) > eta * max(scale, 1e-300):
                ok = False
                break
        if ok:
            merged.append((center, m))
        else:
            merged.extend((points[i], 1) for i in idx)
    return merged


def roots(coeffs, tol: float = DEFAULT_ROOT_TOL, seed: int = 810279):
    """All sphere roots of a univariate complex polynomial.

    Parameters
    ----------
    coeffs : sequence of complex
        Ascending coefficients c_0 ... c_d of the formal degree-d
        polynomial.  The formal degree is len(coeffs) - 1; if the leading
        coefficients are negligible the missing roots are reported at
        infinity.
    tol : float
        Relative tolerance: every returned finite root r satisfies
        |p(r)| <= tol * sum_k |c_k| |r|^k.
    seed : int
        Seed of the initial-circle perturbation; fixed by default so the
        function is a pure function of its inputs.

    Returns
    -------
    list of (SpherePoint, int)
        Root and multiplicity pairs; multiplicities sum to the formal
        degree.  Roots closer than about max(1e3*tol, 1e-7) are merged
        into a single multiple root when the derivatives agree.

    Raises
    ------
    ValueError
        If the polynomial is identically zero.
    NonConvergence
        If the simultaneous iteration cannot reach tol.
    """
    c = np.asarray(list(coeffs), dtype=complex)
    if c.size == 0:
        raise ValueError("empty coefficient list")
    scale = float(np.abs(c).max())
    if scale == 0.0:
        raise ValueError("polynomial is identically zero")
    formal_degree = c.size - 1

    # Degree drop: negligible leading coefficients become roots at
    # infinity.  Safe on the sphere: a root pushed to infinity this way
    # has magnitude at least 1/tol, a chordal perturbation of order tol.
    actual = formal_degree
    while actual > 0 and abs(c[actual]) <= tol * scale:
        actual -= 1
    inf_mult = formal_degree - actual
    c = c[: actual + 1]

    # Only exact zero constant terms are stripped: near zero the chordal
    # metric is |z| itself, so even a coefficient far below the global
    # scale can encode a genuine root (small coefficients are usually
    # accurate in relative terms).  Noise-level constant terms produce
    # roots within rounding of zero, which the cluster merge absorbs.
    zero_mult = 0
    while zero_mult < actual and c[zero_mult] == 0.0:
        zero_mult += 1
    c = c[zero_mult:]
    deg = len(c) - 1

    out: list[tuple[SpherePoint, int]] = []
    if deg == 0:
        finite: list[tuple[complex, int]] = []
    elif deg == 1:
        finite = [(-c[0] / c[1], 1)]
    elif deg == 2:
        pair = _stable_quadratic(c[0], c[1], c[2])
        finite = _merge_clusters(pair, c, tol)
    else:
        rng = np.random.default_rng(seed)
        z = _aberth(c, tol, rng)
        finite = _merge_clusters(list(z), c, tol)

    if zero_mult:
        # Keep zero merged with any residual tiny root of the cofactor.
        absorbed = []
        for r, m in finite:
            if abs(r) <= max(CLUSTER_RADIUS_FACTOR * tol, _CLUSTER_DETECT_FLOOR):
                zero_mult += m
            else:
                absorbed.append((r, m))
        finite = absorbed
        out.append((SpherePoint.from_complex(0.0), zero_mult))
    out.extend((SpherePoint.from_complex(r), m) for r, m in finite)
    if inf_mult:
        out.append((SpherePoint.infinity(), inf_mult))
    return out


# ---------------------------------------------------------------------------
# Bivariate polynomials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BivarPoly:
    """A bivariate polynomial component P(z, w) with a multiplicity.

    ``table[a, b]`` is the coefficient of z^a w^b.  Both partial degrees
    must be at least one and the declared leading rows must carry a
    nonzero entry, so each coordinate projection of the zero curve is
    surjective and every fiber is finite.
    """

    table: np.ndarray
    multiplicity: int = 1

    def __post_init__(self):
        table = np.asarray(self.table, dtype=complex)
        if table.ndim != 2:
            raise InvalidComponent("coefficient table must be 2-dimensional")
        # Trim trailing all-zero rows/columns so degrees are honest.
        while table.shape[0] > 1 and not table[-1, :].any():
            table = table[:-1, :]
        while table.shape[1] > 1 and not table[:, -1].any():
            table = table[:, :-1]
        object.__setattr__(self, "table", table)
        if self.multiplicity < 1:
            raise InvalidComponent("multiplicity must be a positive integer")
        if self.deg_z < 1 or self.deg_w < 1:
            raise InvalidComponent(
                f"component must have bidegree >= (1, 1), got "
                f"({self.deg_z}, {self.deg_w})")
        if not table[self.deg_z, :].any() or not table[:, self.deg_w].any():
            raise InvalidComponent("leading coefficient rows are zero")

    @property
    def deg_z(self) -> int:
        return self.table.shape[0] - 1

    @property
    def deg_w(self) -> int:
        return self.table.shape[1] - 1

    def _chart_powers(self, x: SpherePoint, size: int) -> np.ndarray:
        """Powers of the chart value: x^a directly, or u^(d-a) reciprocally.

        Either way the common factor dropped is nonzero, so fiber
        polynomials built from these powers have unchanged roots.
        """
        v = x.value
        pw = v ** np.arange(size)
        if x.inverted:
            return pw[::-1]
        return pw

    def coeffs_in_w(self, x: SpherePoint) -> np.ndarray:
        """Ascending coefficients of w -> P(x, w), scaled chart-safely."""
        px = self._chart_powers(as_sphere_point(x), self.deg_z + 1)
        return px @ self.table

    def coeffs_in_z(self, y: SpherePoint) -> np.ndarray:
        """Ascending coefficients of z -> P(z, y), scaled chart-safely."""
        py = self._chart_powers(as_sphere_point(y), self.deg_w + 1)
        return self.table @ py

    def incidence_residual(self, x, y) -> float:
        """Normalized |P(x, y)| in the charts of both points.

        Bounded by 1; a pair lies on the component when this is small.
        """
        x = as_sphere_point(x)
        y = as_sphere_point(y)
        px = self._chart_powers(x, self.deg_z + 1)
        py = self._chart_powers(y, self.deg_w + 1)
        value = px @ self.table @ py
        norm = float(np.abs(self.table).sum())
        return abs(value) / norm
