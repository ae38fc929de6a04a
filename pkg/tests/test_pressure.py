import math

import numpy as np
import pytest

from corrdyn.errors import ScheduleEmpty
from corrdyn.functions import fn_const, fn_re, fn_zero
from corrdyn.pressure import (circle_start_sampler, entropy_estimate,
                              pressure_estimate)
from corrdyn.sphere import SpherePoint


def single_start(z):
    return [SpherePoint.from_complex(z)]


class TestBasics:
    def test_empty_schedule(self, corr_mobius):
        with pytest.raises(ScheduleEmpty):
            pressure_estimate(corr_mobius, fn_zero, [])

    def test_mobius_zero_pressure(self, corr_mobius):
        report = pressure_estimate(corr_mobius, fn_zero, [(4, 0.1), (8, 0.1)],
                                   starts=single_start(0.3 + 0.2j), seed=1)
        assert report.pressure == 0.0

    def test_mobius_constant_potential(self, corr_mobius):
        c = 0.8125  # exactly representable
        report = pressure_estimate(corr_mobius, fn_const(c), [(4, 0.1), (8, 0.1)],
                                   starts=single_start(0.3 + 0.2j), seed=1)
        assert report.pressure == pytest.approx(c, abs=1e-13)

    def test_report_shape(self, corr_pair):
        report = entropy_estimate(corr_pair, [(2, 0.1), (4, 0.1), (4, 0.05)],
                                  starts=single_start(0.25), seed=2, cap=64)
        assert len(report.rows) == 3
        assert report.metadata["eps_min"] == 0.05
        assert report.n_starts == 1


class TestEntropyBenchmarks:
    def test_full_shift_entropy_exact(self, corr_pair):
        report = entropy_estimate(corr_pair, [(4, 0.05), (8, 0.05)],
                                  starts=single_start(0.25), seed=3, cap=512)
        assert report.pressure == pytest.approx(math.log(2), abs=1e-12)

    def test_square_map_circle_doubling(self, corr_z2):
        # Oracle: count pairwise (n, eps)-separated circle starts directly
        # in angle space, using the exact doubling of arc distances.
        n, eps = 8, 0.05
        seed = 4
        rng = np.random.default_rng([seed, 0])
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=256))
        kept: list[float] = []
        for a in angles:
            ok = True
            for b in kept:
                sep = False
                for r in range(n + 1):
                    d = abs((2.0 ** r * (a - b) + np.pi) % (2 * np.pi) - np.pi)
                    if 2.0 * math.sin(min(d, math.pi) / 2.0) > eps:
                        sep = True
                        break
                if not sep:
                    ok = False
                    break
            if ok:
                kept.append(a)
        oracle = math.log(len(kept)) / n

        report = entropy_estimate(corr_z2, [(n, eps)], start_points=256,
                                  seed=seed, start_sampler=circle_start_sampler())
        assert report.pressure == pytest.approx(oracle, abs=0.05)
        assert abs(report.pressure - math.log(2)) < 0.1

    def test_monotone_in_eps(self, corr_z2):
        report = entropy_estimate(corr_z2, [(4, 0.02), (4, 0.05), (4, 0.2)],
                                  start_points=128, seed=5,
                                  start_sampler=circle_start_sampler())
        by_eps = sorted(report.rows, key=lambda r: r.eps)
        for a, b in zip(by_eps, by_eps[1:]):
            assert b.sep_value <= a.sep_value + 1e-12

    def test_sandwich_on_rows(self, corr_z2, corr_pair):
        for corr, kwargs in ((corr_z2, dict(start_points=64, seed=6,
                                            start_sampler=circle_start_sampler())),
                             (corr_pair, dict(starts=single_start(0.25), seed=6))):
            report = entropy_estimate(corr, [(4, 0.05), (6, 0.05)], **kwargs)
            for row in report.rows:
                assert row.sandwich_ok


class TestShiftLaw:
    def test_constant_shift_identity(self, corr_z2):
        schedule = [(4, 0.05), (6, 0.05)]
        kwargs = dict(start_points=96, seed=7, start_sampler=circle_start_sampler())
        base = entropy_estimate(corr_z2, schedule, **kwargs)
        shifted = pressure_estimate(corr_z2, fn_const(0.7), schedule, **kwargs)
        assert shifted.pressure - base.pressure == pytest.approx(0.7, abs=1e-10)
        for r0, r1 in zip(base.rows, shifted.rows):
            assert r1.sep_value - r0.sep_value == pytest.approx(0.7, abs=1e-10)
            assert r1.n_separated == r0.n_separated

    def test_seed_reproducibility(self, corr_z2):
        kwargs = dict(start_points=50, seed=8, start_sampler=circle_start_sampler())
        a = pressure_estimate(corr_z2, fn_re, [(4, 0.05)], **kwargs)
        b = pressure_estimate(corr_z2, fn_re, [(4, 0.05)], **kwargs)
        assert a.pressure == b.pressure
        assert a.rows == b.rows


class TestDiagnostics:
    def test_richardson_fields_present(self, corr_pair):
        report = entropy_estimate(corr_pair, [(3, 0.05), (6, 0.05)],
                                  starts=single_start(0.25), seed=9, cap=128)
        assert report.richardson_slope is not None
        # Exact log 2 at both depths: flat in 1/n, so slope vanishes.
        assert report.richardson_slope == pytest.approx(0.0, abs=1e-9)
        assert report.extrapolated == pytest.approx(math.log(2), abs=1e-9)
