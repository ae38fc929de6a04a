import cmath
import itertools

import numpy as np
import pytest

from corrdyn.errors import EmptyPath, IndexOutOfRange, LengthMismatch
from corrdyn.paths import (ForwardPath, enumerate_backward_paths,
                           enumerate_forward_paths, path_metric,
                           project_point, project_symbol, separated_subset,
                           shift, spanning_subset)
from corrdyn.sphere import SpherePoint, sph_dist


def sp(z):
    return SpherePoint.from_complex(z)


def make_path(points, symbols=None, branches=None):
    pts = tuple(sp(p) for p in points)
    n = len(pts) - 1
    symbols = tuple(symbols or [1] * n)
    branches = tuple(branches or [1] * n)
    return ForwardPath(pts, symbols, branches)


class TestEnumeration:
    def test_square_map_single_orbit(self, corr_z2):
        paths, truncated = enumerate_forward_paths(corr_z2, 2.0, 2)
        assert not truncated
        assert len(paths) == 1
        got = [p.to_complex() for p in paths[0].points]
        np.testing.assert_allclose(got, [2.0, 4.0, 16.0], rtol=1e-12)
        assert paths[0].symbols == (1, 1)

    def test_depth_zero(self, corr_z2):
        paths, _ = enumerate_forward_paths(corr_z2, 3.0, 0)
        assert len(paths) == 1
        assert paths[0].length == 0

    def test_mobius_pair_symbol_tree(self, corr_pair):
        # Oracle: apply the two maps directly through nested loops.
        maps = [lambda z: z + 1, lambda z: 2 * z]
        expected = {}
        for w in itertools.product((0, 1), repeat=2):
            z, orbit = 0.0, [0.0]
            for s in w:
                z = maps[s](z)
                orbit.append(z)
            expected[tuple(s + 1 for s in w)] = orbit
        paths, truncated = enumerate_forward_paths(corr_pair, 0.0, 2)
        assert not truncated
        assert len(paths) == 4
        for path in paths:
            orbit = expected[path.symbols]
            for got, want in zip(path.points, orbit):
                assert sph_dist(got, sp(want)) < 1e-10

    def test_symbol_count_is_m_to_the_n(self, corr_pair):
        for n in range(0, 9):
            paths, truncated = enumerate_forward_paths(corr_pair, 0.5, n, cap=300)
            assert not truncated
            assert len(paths) == 2 ** n

    def test_permissibility_of_enumerated_paths(self, corr_z2z3):
        paths, _ = enumerate_forward_paths(corr_z2z3, 0.7 + 0.2j, 3, cap=64)
        for p in paths:
            assert p.max_incidence_residual(corr_z2z3) <= 1e-8

    def test_backward_tree_of_square_map(self, corr_z2):
        # Oracle: the two-level square-root tree built by hand.
        paths, truncated = enumerate_backward_paths(corr_z2, 16.0, 2)
        assert not truncated
        assert len(paths) == 4
        starts = sorted((p.points[0].to_complex() for p in paths),
                        key=lambda z: (round(z.real, 6), round(z.imag, 6)))
        expected = sorted([2.0 + 0j, -2.0 + 0j, 2.0j, -2.0j],
                          key=lambda z: (round(z.real, 6), round(z.imag, 6)))
        np.testing.assert_allclose(starts, expected, atol=1e-9)
        for p in paths:
            mid = p.points[1].to_complex()
            assert abs(mid - 4.0) < 1e-9 or abs(mid + 4.0) < 1e-9

    def test_backward_critical_fiber_multiplicity(self, corr_z2):
        paths, _ = enumerate_backward_paths(corr_z2, 0.0, 1)
        assert len(paths) == 2
        assert all(sph_dist(p.points[0], sp(0)) < 1e-12 for p in paths)
        assert {p.branches[0] for p in paths} == {1, 2}

    def test_backward_mobius_single_path(self, corr_mobius):
        paths, _ = enumerate_backward_paths(corr_mobius, 0.3 + 0.4j, 5)
        assert len(paths) == 1

    def test_cap_thins_uniformly(self, corr_pair):
        paths, truncated = enumerate_forward_paths(corr_pair, 0.0, 6, cap=17, seed=5)
        assert truncated
        assert len(paths) == 17
        again, _ = enumerate_forward_paths(corr_pair, 0.0, 6, cap=17, seed=5)
        assert [p.symbols for p in paths] == [p.symbols for p in again]


class TestMetric:
    def test_identical_paths(self):
        p = make_path([1.0, 2.0, 4.0])
        assert path_metric(p, p) == 0.0

    def test_symbol_difference_alone(self):
        p = make_path([0.0, 1.0], symbols=[1])
        q = make_path([0.0, 1.0], symbols=[2])
        assert path_metric(p, q) == 0.5

    def test_initial_point_dominates(self):
        a, b = 0.0, 0.3047607330384463  # sph_dist(a, b) = 0.3 up to rounding
        d = sph_dist(sp(a), sp(b))
        p = make_path([a, 1.0])
        q = make_path([b, 1.0])
        assert path_metric(p, q) == pytest.approx(d, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            path_metric(make_path([0.0, 1.0]), make_path([0.0, 1.0, 2.0]))

    def test_metric_axioms_on_random_paths(self):
        rng = np.random.default_rng(41)
        paths = []
        for _ in range(40):
            pts = [complex(rng.normal(), rng.normal()) for _ in range(4)]
            syms = [int(rng.integers(1, 3)) for _ in range(3)]
            paths.append(make_path(pts, symbols=syms))
        idx = rng.integers(0, len(paths), size=(1000, 3))
        for i, j, k in idx:
            p, q, r = paths[i], paths[j], paths[k]
            assert path_metric(p, q) == path_metric(q, p)
            assert path_metric(p, q) <= path_metric(p, r) + path_metric(r, q) + 1e-12


class TestShiftAndProjections:
    def test_shift_drops_head(self, corr_z2):
        paths, _ = enumerate_forward_paths(corr_z2, 2.0, 2)
        shifted = shift(paths[0])
        np.testing.assert_allclose([p.to_complex() for p in shifted.points],
                                   [4.0, 16.0], rtol=1e-12)
        assert shifted.symbols == (1,)

    def test_iterated_shift_exhausts(self):
        p = make_path([1.0, 2.0, 3.0, 4.0])
        for _ in range(3):
            p = shift(p)
        assert p.length == 0
        with pytest.raises(EmptyPath):
            shift(p)

    def test_shift_projection_intertwining(self, corr_z2z3):
        paths, _ = enumerate_forward_paths(corr_z2z3, 0.4 + 0.1j, 3, cap=16)
        for p in paths:
            q = shift(p)
            for r in range(q.length + 1):
                assert project_point(q, r) == project_point(p, r + 1)

    def test_projection_bounds(self):
        p = make_path([1.0, 2.0], symbols=[1])
        assert project_point(p, 0) == sp(1.0)
        assert project_symbol(p, 1) == 1
        with pytest.raises(IndexOutOfRange):
            project_point(p, 2)
        with pytest.raises(IndexOutOfRange):
            project_symbol(p, 0)


class TestFamilies:
    def test_identical_paths_collapse(self):
        p = make_path([0.0, 1.0])
        assert len(separated_subset([p, p], eps=0.1)) == 1

    def test_symbol_distinct_paths_survive(self):
        p = make_path([0.0, 1.0], symbols=[1])
        q = make_path([0.0, 1.0], symbols=[2])
        assert len(separated_subset([p, q], eps=0.9)) == 2

    def test_all_symbol_words_survive(self, corr_pair):
        for n in range(1, 7):
            paths, _ = enumerate_forward_paths(corr_pair, 0.0, n, cap=200)
            fam = separated_subset(paths, eps=0.5)
            assert len(fam) == 2 ** n
            # Oracle: re-verify pairwise separation by the raw definition.
            for a, b in itertools.combinations(fam, 2):
                sep = a.symbols != b.symbols or any(
                    sph_dist(a.points[r], b.points[r]) > 0.5
                    for r in range(n + 1))
                assert sep

    def test_weight_order_prefers_heavy(self):
        p = make_path([0.0, 0.0])
        q = make_path([1e-6, 1e-6])
        fam = separated_subset([p, q], eps=0.1, weight=lambda path: abs(path.points[0].value) + 1)
        assert fam == [q]

    def test_spanning_singleton(self):
        p = make_path([0.0, 1.0])
        assert spanning_subset([p], eps=0.1) == [p]

    def test_spanning_merges_close_paths(self):
        p = make_path([0.0, 1.0])
        q = make_path([0.01, 1.01])
        assert len(spanning_subset([p, q], eps=0.25)) == 1

    def test_spanning_respects_symbols(self):
        p = make_path([0.0, 1.0], symbols=[1])
        q = make_path([0.0, 1.0], symbols=[2])
        assert len(spanning_subset([p, q], eps=0.25)) == 2

    def test_spanning_net_on_circle(self, corr_z2):
        eps = 0.3
        starts = [cmath.exp(1j * t) for t in np.linspace(0, 2 * np.pi, 60, endpoint=False)]
        paths = []
        for s in starts:
            got, _ = enumerate_forward_paths(corr_z2, s, 1)
            paths.extend(got)
        cover = spanning_subset(paths, eps=eps)
        # Oracle: greedy eps-packing of the start points.
        packed = []
        for s in starts:
            if all(sph_dist(sp(s), sp(t)) > eps for t in packed):
                packed.append(s)
        assert len(cover) >= len(packed) // 4
        # Every input path must be covered by the family.
        for p in paths:
            assert any(c.symbols == p.symbols and all(
                sph_dist(c.points[r], p.points[r]) < eps for r in range(2))
                for c in cover)

    def test_separated_family_spans_its_input(self, corr_pair):
        # Duality: whatever greedy separation rejects is eps-close to an
        # admitted path with the same symbols.
        for n in range(1, 4):
            paths, _ = enumerate_forward_paths(corr_pair, 0.25, n, cap=64)
            doubled = paths + paths
            fam = separated_subset(doubled, eps=0.4)
            for p in doubled:
                assert any(a.symbols == p.symbols and all(
                    sph_dist(a.points[r], p.points[r]) <= 0.4
                    for r in range(n + 1)) for a in fam)
