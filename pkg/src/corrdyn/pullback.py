"""Pullback equidistribution measures and their support.

Iterating backward images of a generic start point and spreading mass by
multiplicity over each level of the preimage tree produces measures that
converge weak-star to the equidistribution (Dinh-Sibony) measure of a
correspondence with d_top > d_fwd.  The support approximation feeds the
transfer-operator machinery: it is the active cell set, dilated by one
grid ring as a buffer for the invariance checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correspondence import Correspondence
from .errors import (DegenerateStart, DegreeConditionError, NotConverged)
from .grid import SphereGrid
from .measures import SphereMeasure, measure_distance
from .paths import ForwardPath
from .sphere import SpherePoint, as_sphere_point

#: Default certificate bound on the distance between the last two levels.
CERT_BOUND = 0.05

#: Allowed violation fraction in the backward-invariance check.
INVARIANCE_BUDGET = 0.01


def _systematic_thin(points, weights, cap: int, rng: np.random.Generator):
    """Unbiased thinning to cap equal-weight particles.

    The list is shuffled first: particles arrive grouped by parent, and a
    systematic stride aligned with the branching factor would otherwise
    keep picking the same branch of every parent.
    """
    perm = rng.permutation(len(points))
    total = float(weights.sum())
    targets = (rng.uniform(0.0, 1.0) + np.arange(cap)) / cap * total
    cum = np.cumsum(weights[perm])
    idx = np.searchsorted(cum, targets, side="right")
    idx = np.minimum(idx, len(points) - 1)
    w = total / cap
    return [points[int(perm[i])] for i in idx], np.full(cap, w)


def pullback_iterate(corr: Correspondence, x0, n: int, cap: int = 8192,
                     seed: int | None = None, grid: SphereGrid | None = None,
                     max_resample: int = 10,
                     resample_radius: float = 0.1) -> list[SphereMeasure]:
    """Level measures of the backward preimage tree from x0.

    Level k spreads weight multiplicity / d_top^k over the k-th preimages.
    Requires d_top > d_fwd.  A start with a degenerate backward fiber is
    re-sampled from a small disk around x0 up to max_resample times.
    Levels beyond cap particles are thinned by seeded systematic
    resampling, which preserves expected cell weights.
    """
    if corr.d_top <= corr.d_fwd:
        raise DegreeConditionError(
            f"pullback needs d_top > d_fwd, got ({corr.d_top}, {corr.d_fwd})")
    if n < 1:
        raise ValueError("need at least one pullback level")
    grid = grid or SphereGrid(400)
    rng = np.random.default_rng(seed)

    start = as_sphere_point(x0)
    attempts = 0
    while corr.backward_images(start).degenerate:
        attempts += 1
        if attempts > max_resample:
            raise DegenerateStart(
                f"no generic start found after {max_resample} re-samples")
        base = 0j if start.is_infinity else start.to_complex()
        jitter = resample_radius * rng.uniform(0.2, 1.0) * np.exp(
            1j * rng.uniform(0, 2 * np.pi))
        start = as_sphere_point(base + jitter)

    d_top = corr.d_top
    points: list[SpherePoint] = [start]
    weights = np.array([1.0])
    levels = [SphereMeasure.from_particles(grid, zip(points, weights),
                                           metadata={"level": 0})]
    for level in range(1, n + 1):
        nxt_points: list[SpherePoint] = []
        nxt_weights: list[float] = []
        for p, w in zip(points, weights):
            fiber = corr.backward_images(p)
            for b in fiber.branches:
                nxt_points.append(b.point)
                nxt_weights.append(w * b.multiplicity / d_top)
        points = nxt_points
        weights = np.asarray(nxt_weights)
        if len(points) > cap:
            points, weights = _systematic_thin(points, weights, cap, rng)
        levels.append(SphereMeasure.from_particles(
            grid, zip(points, weights), metadata={"level": level}))
    return levels


@dataclass(frozen=True)
class SupportResult:
    """Active-cell approximation of the measure support."""

    cells: frozenset[int]
    core: frozenset[int]
    certificate: float
    threshold: float

    @property
    def n_cells(self) -> int:
        return len(self.cells)


def ds_support(levels: list[SphereMeasure], threshold: float = 0.5,
               cert_bound: float = CERT_BOUND) -> SupportResult:
    """Cells carrying final-level mass above threshold / N, one-ring dilated.

    The weak-star gap between the last two levels is the convergence
    certificate; exceeding cert_bound raises NotConverged.
    """
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    certificate = measure_distance(levels[-2], levels[-1])
    if certificate > cert_bound:
        raise NotConverged(
            f"last levels differ by {certificate:.4f} > {cert_bound}")
    final = levels[-1]
    grid = final.grid
    cutoff = threshold / grid.n_cells
    core = frozenset(int(i) for i in np.nonzero(final.weights > cutoff)[0])
    return SupportResult(grid.dilate(core), core, certificate, threshold)


@dataclass(frozen=True)
class BackwardInvarianceReport:
    violations: int
    total: int
    passed: bool

    @property
    def fraction(self) -> float:
        return self.violations / self.total if self.total else 0.0


def check_backward_invariance(corr: Correspondence, omega, grid: SphereGrid,
                              samples: int = 64, seed: int | None = None
                              ) -> BackwardInvarianceReport:
    """Sample omega cells and test that all backward images stay inside
    the one-ring dilation of omega."""
    omega = frozenset(omega)
    if not omega:
        raise ValueError("omega is empty")
    rng = np.random.default_rng(seed)
    dilated = grid.dilate(omega)
    cells = sorted(omega)
    picks = rng.integers(0, len(cells), size=samples)
    violations = 0
    total = 0
    for pick in picks:
        x0 = grid.cell_center(cells[int(pick)])
        for b in corr.backward_images(x0).branches:
            total += 1
            if grid.cell_index(b.point) not in dilated:
                violations += 1
    passed = total > 0 and violations <= INVARIANCE_BUDGET * total
    return BackwardInvarianceReport(violations, total, passed)


def invariant_forward_paths(corr: Correspondence, omega, x0, n: int,
                            cap: int = 64, seed: int | None = None,
                            grid: SphereGrid | None = None) -> list[ForwardPath]:
    """Depth-first search for forward paths staying inside omega.

    Branches are pruned as soon as a point leaves the one-ring dilation
    of omega.  Returns up to cap depth-n paths; an empty list signals
    that omega may under-approximate the invariant support.
    """
    grid = grid or SphereGrid(400)
    omega = frozenset(omega)
    start = as_sphere_point(x0)
    if grid.cell_index(start) not in omega:
        raise ValueError("start cell is not inside omega")
    dilated = grid.dilate(omega)
    rng = np.random.default_rng(seed)

    found: list[ForwardPath] = []
    stack = [ForwardPath((start,), (), ())]
    while stack and len(found) < cap:
        path = stack.pop()
        if path.length == n:
            found.append(path)
            continue
        fiber = corr.forward_images(path.points[-1])
        children = []
        for b in fiber.branches:
            if grid.cell_index(b.point) not in dilated:
                continue
            for j in range(b.multiplicity):
                children.append(ForwardPath(path.points + (b.point,),
                                            path.symbols + (b.component,),
                                            path.branches + (b.branch_index + j,)))
        order = rng.permutation(len(children))
        for i in order:
            stack.append(children[int(i)])
    return found


def path_stays_inside(path: ForwardPath, omega, grid: SphereGrid) -> bool:
    """Predicate used by the search: every point's cell lies in omega's
    one-ring dilation."""
    dilated = grid.dilate(frozenset(omega))
    return all(grid.cell_index(p) in dilated for p in path.points)
