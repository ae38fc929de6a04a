"""Permissible iteration paths of a correspondence.

A forward path of length n records n+1 sphere points, the n component
symbols labelling each step, and the branch slot chosen inside each
fiber.  Backward paths use the same left-to-right layout with points
ordered oldest first, so symbols[i] always labels the incidence between
points[i] and points[i+1].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .correspondence import INCIDENCE_TOL, Correspondence
from .errors import EmptyPath, IndexOutOfRange, LengthMismatch
from .sphere import SpherePoint, as_sphere_point, sph_dist


@dataclass(frozen=True)
class ForwardPath:
    points: tuple[SpherePoint, ...]
    symbols: tuple[int, ...]
    branches: tuple[int, ...]

    def __post_init__(self):
        n = len(self.points) - 1
        if n < 0 or len(self.symbols) != n or len(self.branches) != n:
            raise LengthMismatch(
                f"need n+1 points and n symbols/branches, got "
                f"{len(self.points)}/{len(self.symbols)}/{len(self.branches)}")

    @property
    def length(self) -> int:
        return len(self.points) - 1

    def max_incidence_residual(self, corr: Correspondence) -> float:
        worst = 0.0
        for r in range(self.length):
            res = corr.incidence_residual(self.points[r], self.points[r + 1],
                                          self.symbols[r])
            worst = max(worst, res)
        return worst

    def is_permissible(self, corr: Correspondence, tol: float = INCIDENCE_TOL) -> bool:
        return self.max_incidence_residual(corr) <= tol


@dataclass(frozen=True)
class BackwardPath:
    """Backward iteration path, points ordered from deepest preimage to y0."""

    points: tuple[SpherePoint, ...]
    symbols: tuple[int, ...]
    branches: tuple[int, ...]

    def __post_init__(self):
        n = len(self.points) - 1
        if n < 0 or len(self.symbols) != n or len(self.branches) != n:
            raise LengthMismatch(
                f"need n+1 points and n symbols/branches, got "
                f"{len(self.points)}/{len(self.symbols)}/{len(self.branches)}")

    @property
    def length(self) -> int:
        return len(self.points) - 1

    def max_incidence_residual(self, corr: Correspondence) -> float:
        worst = 0.0
        for r in range(self.length):
            res = corr.incidence_residual(self.points[r], self.points[r + 1],
                                          self.symbols[r])
            worst = max(worst, res)
        return worst


class Enumeration(NamedTuple):
    paths: list
    truncated: bool


def _thin(items: list, cap: int, rng: np.random.Generator) -> list:
    if len(items) <= cap:
        return items
    idx = rng.choice(len(items), size=cap, replace=False)
    return [items[int(i)] for i in sorted(idx)]


def enumerate_forward_paths(corr: Correspondence, x0, n: int, cap: int = 4096,
                            seed: int | None = None) -> Enumeration:
    """All forward paths from x0 up to depth n, breadth first.

    A fiber point of multiplicity m spawns m children carrying distinct
    branch slots.  Whenever a level outgrows ``cap`` it is thinned to a
    seeded uniform subsample and the result is flagged truncated.
    """
    if n < 0:
        raise ValueError("depth must be nonnegative")
    if cap < 1:
        raise ValueError("cap must be positive")
    rng = np.random.default_rng(seed)
    level = [ForwardPath((as_sphere_point(x0),), (), ())]
    truncated = False
    for _ in range(n):
        nxt = []
        for path in level:
            fiber = corr.forward_images(path.points[-1])
            for b in fiber.branches:
                for j in range(b.multiplicity):
                    nxt.append(ForwardPath(path.points + (b.point,),
                                           path.symbols + (b.component,),
                                           path.branches + (b.branch_index + j,)))
        if len(nxt) > cap:
            nxt = _thin(nxt, cap, rng)
            truncated = True
        level = nxt
    return Enumeration(level, truncated)


def enumerate_backward_paths(corr: Correspondence, y0, n: int, cap: int = 4096,
                             seed: int | None = None) -> Enumeration:
    """All backward paths ending at y0 up to depth n, breadth first."""
    if n < 0:
        raise ValueError("depth must be nonnegative")
    if cap < 1:
        raise ValueError("cap must be positive")
    rng = np.random.default_rng(seed)
    level = [BackwardPath((as_sphere_point(y0),), (), ())]
    truncated = False
    for _ in range(n):
        nxt = []
        for path in level:
            fiber = corr.backward_images(path.points[0])
            for b in fiber.branches:
                for j in range(b.multiplicity):
                    nxt.append(BackwardPath((b.point,) + path.points,
                                            (b.component,) + path.symbols,
                                            (b.branch_index + j,) + path.branches))
        if len(nxt) > cap:
            nxt = _thin(nxt, cap, rng)
            truncated = True
        level = nxt
    return Enumeration(level, truncated)


# ---------------------------------------------------------------------------
# Metric, shift and projections
# ---------------------------------------------------------------------------


def path_metric(p: ForwardPath, q: ForwardPath) -> float:
    """Weighted sup metric on equal-length paths.

    max over r of 2^-r * sph_dist at coordinate r, joined with 2^-r for
    every symbol mismatch at step r.
    """
    if p.length != q.length:
        raise LengthMismatch(f"paths have lengths {p.length} and {q.length}")
    best = 0.0
    for r in range(p.length + 1):
        best = max(best, sph_dist(p.points[r], q.points[r]) / (1 << r))
    for r in range(1, p.length + 1):
        if p.symbols[r - 1] != q.symbols[r - 1]:
            best = max(best, 1.0 / (1 << r))
    return best


def shift(p: ForwardPath) -> ForwardPath:
    """Drop the initial point, first symbol and first branch."""
    if p.length < 1:
        raise EmptyPath("cannot shift a length-0 path")
    return ForwardPath(p.points[1:], p.symbols[1:], p.branches[1:])


def project_point(p, r: int) -> SpherePoint:
    if not 0 <= r <= p.length:
        raise IndexOutOfRange(f"point index {r} outside [0, {p.length}]")
    return p.points[r]


def project_symbol(p, r: int) -> int:
    if not 1 <= r <= p.length:
        raise IndexOutOfRange(f"symbol index {r} outside [1, {p.length}]")
    return p.symbols[r - 1]


# ---------------------------------------------------------------------------
# Separated and spanning families
# ---------------------------------------------------------------------------


def _is_separated(p: ForwardPath, q: ForwardPath, eps: float) -> bool:
    """Some coordinate farther than eps, or some symbol differs."""
    if p.symbols != q.symbols:
        return True
    for r in range(p.length + 1):
        if sph_dist(p.points[r], q.points[r]) > eps:
            return True
    return False


def _covers(p: ForwardPath, q: ForwardPath, eps: float) -> bool:
    """Same symbol word and strictly within eps at every coordinate."""
    if p.symbols != q.symbols:
        return False
    for r in range(p.length + 1):
        if sph_dist(p.points[r], q.points[r]) >= eps:
            return False
    return True


def separated_subset(paths: list[ForwardPath], eps: float,
                     weight: Callable[[ForwardPath], float] | None = None
                     ) -> list[ForwardPath]:
    """Greedy maximal separated family, heaviest paths first.

    The descending-weight greedy order makes the family a reproducible
    lower bound for the supremum of the weight sum over all separated
    families of the input.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not paths:
        return []
    n = paths[0].length
    if any(p.length != n for p in paths):
        raise LengthMismatch("all paths must share one length")
    order = range(len(paths))
    if weight is not None:
        values = [weight(p) for p in paths]
        order = sorted(order, key=lambda i: -values[i])
    admitted: list[ForwardPath] = []
    for i in order:
        cand = paths[i]
        if all(_is_separated(cand, a, eps) for a in admitted):
            admitted.append(cand)
    return admitted


def spanning_subset(paths: list[ForwardPath], eps: float,
                    weight: Callable[[ForwardPath], float] | None = None
                    ) -> list[ForwardPath]:
    """Greedy cover of the input at scale eps, lightest paths first.

    A path is admitted unless an already admitted path with the identical
    symbol word stays strictly within eps at every coordinate; the result
    eps-spans the whole input.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not paths:
        return []
    n = paths[0].length
    if any(p.length != n for p in paths):
        raise LengthMismatch("all paths must share one length")
    order = range(len(paths))
    if weight is not None:
        values = [weight(p) for p in paths]
        order = sorted(order, key=lambda i: values[i])
    admitted: list[ForwardPath] = []
    for i in order:
        cand = paths[i]
        if not any(_covers(a, cand, eps) for a in admitted):
            admitted.append(cand)
    return admitted
