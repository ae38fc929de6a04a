"""Ruelle transfer operator on the active-cell approximation of the
invariant support.

The operator acts on functions over the active cells: (L_f g)(x) sums
exp(f(y)) g(y) over the backward branches y of x, counted with
multiplicity, with every preimage clamped to its nearest active cell.
Preimages beyond the one-ring dilation of the active set abort kernel
construction, since they mean the support approximation is not backward
invariant.  Power iteration extracts the maximal eigenvalue and positive
eigenfunction, the normalized branch weights define a backward Markov
kernel, and the stationary law of that kernel is the fixed point of the
adjoint operator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .correspondence import Correspondence, ExpansivityResult
from .errors import (NonConvergence, NonPositiveEigenfunction,
                     PreimageOutsideSupport)
from .grid import SphereGrid
from .measures import PathMeasure, SphereMeasure
from .paths import ForwardPath
from .sphere import as_sphere_point


class ActiveGrid:
    """Sorted active-cell subset of a sphere grid with nearest-cell lookup."""

    def __init__(self, grid: SphereGrid, cells):
        self.grid = grid
        self.cells = tuple(sorted(int(c) for c in set(cells)))
        if not self.cells:
            raise ValueError("active cell set is empty")
        self.position = {c: i for i, c in enumerate(self.cells)}
        self.centers = [grid.cell_center(c) for c in self.cells]
        self._center_vectors = np.array([p.unit_vector() for p in self.centers])

    @property
    def n_active(self) -> int:
        return len(self.cells)

    def position_of_point(self, point) -> int:
        """Active position of the point's cell, or of the nearest active
        cell center when the cell itself is inactive."""
        point = as_sphere_point(point)
        cell = self.grid.cell_index(point)
        pos = self.position.get(cell)
        if pos is not None:
            return pos
        gaps = np.linalg.norm(self._center_vectors - point.unit_vector(), axis=1)
        return int(np.argmin(gaps))


@dataclass
class GridFunction:
    """Real values over the active cells."""

    active: ActiveGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.active.n_active,):
            raise ValueError("values do not match the active cell count")
        if not np.isfinite(v).all():
            raise ValueError("values must be finite")
        self.values = v

    @classmethod
    def constant(cls, active: ActiveGrid, c: float) -> "GridFunction":
        return cls(active, np.full(active.n_active, float(c)))

    @classmethod
    def from_callable(cls, active: ActiveGrid, f) -> "GridFunction":
        return cls(active, np.array([f(p) for p in active.centers]))

    def value_at(self, point) -> float:
        return float(self.values[self.active.position_of_point(point)])

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())


class TransferKernel:
    """Backward-branch table over the active cells of one correspondence."""

    def __init__(self, corr: Correspondence, active: ActiveGrid):
        self.corr = corr
        self.active = active
        grid = active.grid
        dilated = grid.dilate(active.cells)
        src, tgt, mult, comp = [], [], [], []
        for i, center in enumerate(active.centers):
            fiber = corr.backward_images(center)
            for b in fiber.branches:
                cell = grid.cell_index(b.point)
                if cell in active.position:
                    j = active.position[cell]
                elif cell in dilated:
                    j = active.position_of_point(b.point)
                else:
                    raise PreimageOutsideSupport(
                        f"preimage of cell {active.cells[i]} lands in cell "
                        f"{cell}, beyond the dilation ring")
                src.append(i)
                tgt.append(j)
                mult.append(b.multiplicity)
                comp.append(b.component)
        self.src = np.asarray(src)
        self.tgt = np.asarray(tgt)
        self.mult = np.asarray(mult, dtype=float)
        self.comp = np.asarray(comp)

    def apply(self, f_values: np.ndarray, g_values: np.ndarray) -> np.ndarray:
        out = np.zeros(self.active.n_active)
        terms = self.mult * np.exp(f_values[self.tgt]) * g_values[self.tgt]
        np.add.at(out, self.src, terms)
        return out

    def rows(self):
        """Iterate (source position, entry index list)."""
        order = np.argsort(self.src, kind="stable")
        bounds = np.searchsorted(self.src[order], np.arange(self.active.n_active + 1))
        for i in range(self.active.n_active):
            yield i, order[bounds[i]:bounds[i + 1]]


def ruelle_apply(corr: Correspondence, f: GridFunction, g: GridFunction,
                 kernel: TransferKernel | None = None) -> GridFunction:
    """One application of the transfer operator with potential f."""
    if f.active is not g.active:
        raise ValueError("f and g must share one active grid")
    kernel = kernel or TransferKernel(corr, f.active)
    return GridFunction(f.active, kernel.apply(f.values, g.values))


# ---------------------------------------------------------------------------
# Hoelder diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderReport:
    lam: float
    alpha: float
    omegas: tuple[float, ...]
    sup_norm: float
    alpha_norm: float
    is_member: bool


def holder_norm(f: GridFunction, lam: float, k_max: int,
                tail_tol: float = 1e-3) -> HolderReport:
    """Oscillation moduli of f at the scales lam^-(k-1), k = 1 .. k_max.

    omega_k is the largest |f(x) - f(y)| over active-center pairs within
    distance lam^-(k-1); membership requires the last modulus to sit
    below the tail tolerance.
    """
    if lam <= 1.0:
        raise ValueError("lam must exceed 1")
    if k_max < 1:
        raise ValueError("need at least one scale")
    vecs = f.active._center_vectors
    diff = vecs[:, None, :] - vecs[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    gap = np.abs(f.values[:, None] - f.values[None, :])
    omegas = []
    for k in range(1, k_max + 1):
        mask = dist <= lam ** (-(k - 1))
        omegas.append(float(gap[mask].max()) if mask.any() else 0.0)
    sup = f.sup_norm()
    alpha_norm = sum(omegas) + sup
    return HolderReport(lam, 1.0 / lam, tuple(omegas), sup, alpha_norm,
                        omegas[-1] <= tail_tol)


# ---------------------------------------------------------------------------
# Spectral data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    h: GridFunction
    iterations: int
    residual: float
    gap_estimate: float | None


def power_iteration(corr: Correspondence, f: GridFunction,
                    tol: float = 1e-10, max_iter: int = 2000,
                    seed: int | None = 0,
                    kernel: TransferKernel | None = None,
                    expansivity: ExpansivityResult | None = None) -> SpectralResult:
    """Maximal eigenvalue and positive eigenfunction of the operator.

    Iterates g <- L_f g / sup|L_f g| from a strictly positive random
    start; converged once successive eigenvalue estimates differ by less
    than tol (relative) and the sup-norm eigen-residual is below
    tol * lam.
    """
    if expansivity is not None and not expansivity.is_expansive:
        warnings.warn(
            "correspondence fails the expansivity probe; spectral "
            "conclusions may not hold", stacklevel=2)
    kernel = kernel or TransferKernel(corr, f.active)
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.5, 1.5, size=f.active.n_active)
    lam_prev = None
    residuals = []
    for iteration in range(1, max_iter + 1):
        kg = kernel.apply(f.values, g)
        lam = float(kg.max())
        if lam <= 0 or not np.isfinite(lam):
            raise NonConvergence("operator iterate lost positivity",
                                 iterations=iteration)
        g_next = kg / lam
        residual = float(np.abs(kernel.apply(f.values, g_next) - lam * g_next).max())
        residuals.append(residual)
        if (lam_prev is not None
                and abs(lam - lam_prev) < tol * max(1.0, lam)
                and residual < tol * lam):
            gap = None
            if len(residuals) >= 4 and residuals[-2] > 0:
                tail = [residuals[i + 1] / residuals[i]
                        for i in range(len(residuals) - 4, len(residuals) - 1)
                        if residuals[i] > 0]
                gap = float(np.median(tail)) if tail else None
            h = GridFunction(f.active, g_next / g_next.max())
            return SpectralResult(lam, h, iteration, residual, gap)
        lam_prev = lam
        g = g_next
    raise NonConvergence(
        f"power iteration did not reach tol {tol} in {max_iter} steps",
        iterations=max_iter)


@dataclass(frozen=True)
class NormalizedWeights:
    """Branch weights exp(f(y)) h(y) / (lam h(x)), summing to one per cell."""

    active: ActiveGrid
    kernel: TransferKernel
    weights: np.ndarray
    row_sums: np.ndarray

    def transition_matrix(self) -> np.ndarray:
        n = self.active.n_active
        p = np.zeros((n, n))
        np.add.at(p, (self.kernel.src, self.kernel.tgt),
                  self.kernel.mult * self.weights)
        return p


def normalize(f: GridFunction, spectral: SpectralResult,
              kernel: TransferKernel) -> NormalizedWeights:
    """Branch-weight table of the normalized operator, the grid form of
    the statement that the normalized transfer of 1 is 1."""
    h = spectral.h.values
    if h.min() <= 0.0:
        raise NonPositiveEigenfunction(
            f"eigenfunction minimum {h.min()} is not positive")
    w = (np.exp(f.values[kernel.tgt]) * h[kernel.tgt]
         / (spectral.lam * h[kernel.src]))
    sums = np.zeros(f.active.n_active)
    np.add.at(sums, kernel.src, kernel.mult * w)
    return NormalizedWeights(f.active, kernel, w, sums)


# ---------------------------------------------------------------------------
# Adjoint fixed point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdjointResult:
    nu: SphereMeasure
    mu0: PathMeasure
    iterations: int
    l1_residual: float
    unique: bool


def _stationary(p: np.ndarray, start: np.ndarray, tol: float, max_iter: int):
    """Left fixed vector of p, iterated until the error bound is below tol.

    The L1 change per step only bounds the distance to the fixed point by
    change * rho / (1 - rho), so the contraction factor rho is estimated
    from successive changes and folded into the stopping rule.
    """
    v = start / start.sum()
    prev_gap = None
    for iteration in range(1, max_iter + 1):
        nxt = v @ p
        s = nxt.sum()
        if s <= 0:
            raise NonConvergence("kernel lost mass", iterations=iteration)
        nxt /= s
        gap = float(np.abs(nxt - v).sum())
        v = nxt
        if gap == 0.0:
            return v, iteration, gap
        if prev_gap is not None and prev_gap > 0:
            rho = min(gap / prev_gap, 1.0 - 1e-4)
            if gap * rho / (1.0 - rho) < tol:
                return v, iteration, gap
        prev_gap = gap
    raise NonConvergence(f"adjoint iteration did not reach tol {tol}",
                         iterations=max_iter)


def _chain_cylinders(active: ActiveGrid, kernel: TransferKernel,
                     weights: np.ndarray, nu: np.ndarray, depth: int,
                     prune: float = 1e-15):
    """Exact depth-D cylinder weights of the stationary backward chain."""
    row_entries = {i: idx for i, idx in kernel.rows()}
    chains = [((i,), (), float(nu[i])) for i in range(active.n_active)
              if nu[i] > prune]
    for _ in range(depth):
        nxt = []
        for positions, syms, w in chains:
            head = positions[0]
            for e in row_entries[head]:
                prob = kernel.mult[e] * weights[e]
                w2 = w * prob
                if w2 <= prune:
                    continue
                nxt.append(((int(kernel.tgt[e]),) + positions,
                            (int(kernel.comp[e]),) + syms, w2))
        chains = nxt
    cylinders: dict = {}
    for positions, syms, w in chains:
        key = tuple((active.cells[positions[i]], syms[i]) for i in range(depth))
        cylinders[key] = cylinders.get(key, 0.0) + w
    total = sum(cylinders.values())
    return {k: v / total for k, v in cylinders.items()}


def adjoint_fixed_point(corr: Correspondence, f: GridFunction,
                        spectral: SpectralResult, tol: float = 1e-10,
                        max_iter: int = 5000, seed: int | None = 0,
                        kernel: TransferKernel | None = None,
                        depth: int = 1) -> AdjointResult:
    """Stationary measure of the normalized backward kernel and the
    induced cylinder path measure.

    nu is the unique fixed point of the adjoint normalized operator on
    the active cells; mu0 records depth-D words of (cell, symbol) pairs
    generated by the stationary chain, so its position marginals all
    equal nu.  Two random starts are compared; disagreement beyond
    10 * tol flags non-uniqueness.
    """
    kernel = kernel or TransferKernel(corr, f.active)
    norm = normalize(f, spectral, kernel)
    p = norm.transition_matrix()
    n = f.active.n_active
    rng = np.random.default_rng(seed)
    v1, it1, gap1 = _stationary(p, np.full(n, 1.0), tol, max_iter)
    v2, _, _ = _stationary(p, rng.uniform(0.1, 1.0, size=n), tol, max_iter)
    unique = float(np.abs(v1 - v2).sum()) <= 10.0 * tol

    grid = f.active.grid
    w = np.zeros(grid.n_cells)
    for pos, cell in enumerate(f.active.cells):
        w[cell] = v1[pos]
    w /= w.sum()
    nu = SphereMeasure(grid, w, metadata={"tol": tol})
    cylinders = _chain_cylinders(f.active, kernel, norm.weights, v1, depth)
    mu0 = PathMeasure.from_cylinders(grid, cylinders, metadata={"depth": depth})
    return AdjointResult(nu, mu0, it1, gap1, unique)


# ---------------------------------------------------------------------------
# Convergence of normalized iterates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    errors: tuple[float, ...]
    rate: float | None
    constant: float


def convergence_check(corr: Correspondence, f: GridFunction, g: GridFunction,
                      spectral: SpectralResult, nu: SphereMeasure,
                      n_max: int = 40,
                      kernel: TransferKernel | None = None) -> ConvergenceReport:
    """Sup-norm distance of lam^-n L_f^n g from its limit h * integral of
    g/h against nu, for n = 1 .. n_max."""
    kernel = kernel or TransferKernel(corr, f.active)
    h = spectral.h.values
    nu_active = np.array([nu.weights[c] for c in f.active.cells])
    nu_active = nu_active / nu_active.sum()
    constant = float(np.sum(nu_active * g.values / h))
    target = constant * h
    errors = []
    current = g.values.copy()
    for _ in range(n_max):
        current = kernel.apply(f.values, current) / spectral.lam
        errors.append(float(np.abs(current - target).max()))
    # Estimate the geometric rate from the decaying stretch only; once
    # the error floors out at rounding level the ratios are meaningless.
    floor = 1e3 * min(errors) + 1e-300
    decaying = [errors[i + 1] / errors[i] for i in range(len(errors) - 1)
                if errors[i] > floor and errors[i + 1] > 0]
    rate = float(np.median(decaying)) if decaying else None
    return ConvergenceReport(tuple(errors), rate, constant)


def lifted_consistency_check(corr: Correspondence, f: GridFunction,
                             g: GridFunction, paths: list[ForwardPath],
                             samples: int | None = None,
                             seed: int | None = None) -> float:
    """Maximal gap between the path-space operator applied to the lift of
    g and the base operator value at the path start.

    The path-space side enumerates every one-step backward extension of
    each sampled path as an explicit path object and sums exp(F) G over
    them; the base side sums the weighted backward multiset directly.
    Both depend only on the starting coordinate, so the gap is pure
    floating noise.
    """
    if samples is not None and len(paths) > samples:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(paths), size=samples, replace=False)
        paths = [paths[int(i)] for i in idx]
    worst = 0.0
    for path in paths:
        x0 = path.points[0]
        fiber = corr.backward_images(x0)
        lifted = 0.0
        for b in fiber.branches:
            for j in range(b.multiplicity):
                ext = ForwardPath((b.point,) + path.points,
                                  (b.component,) + path.symbols,
                                  (b.branch_index + j,) + path.branches)
                y = ext.points[0]
                lifted += math.exp(f.value_at(y)) * g.value_at(y)
        base = 0.0
        for b in fiber.branches:
            base += b.multiplicity * math.exp(f.value_at(b.point)) * g.value_at(b.point)
        worst = max(worst, abs(lifted - base))
    return worst
