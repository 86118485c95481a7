import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcpatch.analysis.degenerate import (degenerate_residual, divergence_form, f_w, ratio_callable,
                                         rescale, scaling_invariance_check)
from bcpatch.barrier import barrier_field, solve_profile
from bcpatch.errors import DomainError
from bcpatch.grid import QuarterGrid

# eps = 1e-2, n = 1024, psi_0 start, default profile
PHI_SCALING_MISMATCH = 0.006605421019533374
PHI_RESIDUAL = 0.0011877552694492938


class TestF:
    def test_limit(self):
        assert f_w(0.0, 0.5) == 1.5
        assert f_w(1e-13, 0.5) == 1.5
        assert f_w(-1e-13, 0.5) == 1.5

    def test_value(self):
        assert abs(f_w(1.0, 0.5) - (2 ** 1.5 - 1) / 2 ** 0.5) < 1e-15
        assert abs(f_w(1.0, 0.5) - 1.29289) < 1e-5

    def test_continuous_at_threshold(self):
        assert abs(f_w(2e-12, 0.5) - 1.5) < 1e-11

    @given(st.floats(-0.999, 50.0), st.floats(0.05, 0.95))
    @settings(max_examples=200, deadline=None)
    def test_bounded_below_by_one(self, w, s):
        assert f_w(w, s) >= 1 - 1e-12

    def test_vectorized(self):
        out = f_w(np.array([0.0, 0.5, -0.5]), 0.3)
        assert out.shape == (3,) and out[0] == 1.3

    @pytest.mark.parametrize("w", [-1.0, -2.0])
    def test_domain(self, w):
        with pytest.raises(DomainError):
            f_w(w, 0.5)


class TestStencil:
    def test_constant_annihilated(self, profile):
        y = np.array([0.1, 0.3]), np.array([0.2, 0.05])
        out = divergence_form(lambda a, b: np.full_like(a, 2.0), profile, *y, 1e-3)
        assert not np.any(out)

    def test_constant_scaling_mismatch_zero(self, profile):
        assert scaling_invariance_check(lambda a, b: np.full_like(np.asarray(a, float), 0.3), 0.5, profile) == 0.0

    def test_power_scaling_mismatch_second_order(self, profile):
        def w(a, b):
            return np.hypot(a, b) ** 0.3

        errs = [scaling_invariance_check(w, 0.5, profile, h=h) for h in (4e-3, 2e-3, 1e-3)]
        assert errs[0] > errs[1] > errs[2]
        assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5

    def test_bad_arguments(self, profile):
        with pytest.raises(DomainError):
            scaling_invariance_check(lambda a, b: a, 0.0, profile)
        with pytest.raises(DomainError):
            scaling_invariance_check(lambda a, b: a, 0.5, profile, theta_margin=np.pi / 4)


class TestRescale:
    def test_barrier_gives_zero(self, profile):
        eps = 1e-2
        w = rescale(barrier_field(profile, eps, QuarterGrid(256)), profile, eps)
        inner = w.w[1:-1, 1:-1]
        assert np.max(np.abs(inner)) < 1e-13
        assert np.all(np.isnan(w.w[0])) and np.all(np.isnan(w.w[:, -1]))
        assert w.h == pytest.approx((1 / 512) / 0.1)
        assert w.radius == pytest.approx(1 / np.log(100))

    def test_callable_needs_interior(self, profile):
        eps = 1e-2
        w = rescale(barrier_field(profile, eps, QuarterGrid(64)), profile, eps)
        bad = type(w)(np.full_like(w.w, np.nan), w.h, w.eps, w.s, w.radius)
        with pytest.raises(DomainError):
            ratio_callable(bad)

    def test_callable_reproduces_nodes(self, profile, solve):
        eps = 1e-2
        w = rescale(solve(eps, 1024).field, profile, eps)
        wc = ratio_callable(w)
        y1, y2 = w.coords()
        sl = (slice(10, 40, 7), slice(10, 40, 5))
        assert np.max(np.abs(wc(y1[sl], y2[sl]) - w.w[sl])) < 1e-12


class TestConvergedRatio:
    def test_residual_pin(self, profile, solve):
        w = rescale(solve(1e-2, 1024).field, profile, 1e-2)
        out = degenerate_residual(w, profile)
        assert out["residual"] == pytest.approx(PHI_RESIDUAL, rel=1e-6)
        assert out["residual"] <= 1e-2
        assert 1.0 <= out["f_min"] <= out["f_max"] <= 1.5 + 0.02
        assert -1 < out["w_min"] <= out["w_max"] < 0

    def test_scaling_pin(self, profile, solve):
        w = rescale(solve(1e-2, 1024).field, profile, 1e-2)
        wc = ratio_callable(w)
        mis = scaling_invariance_check(wc, 0.5, profile, h=w.h, r_range=(16 * w.h / 0.5, w.radius * 0.999),
                                       theta_margin=np.pi / 16)
        assert mis == pytest.approx(PHI_SCALING_MISMATCH, rel=1e-6)

    def test_s_mismatch(self, profile, solve):
        # a ratio built against s = 0.8 cannot be checked with the s = 0.5 profile
        w = rescale(solve(1e-2, 1024).field, solve_profile(0.8), 1e-2)
        with pytest.raises(DomainError):
            degenerate_residual(w, profile)

    def test_empty_annulus(self, profile, solve):
        w = rescale(solve(1e-2, 1024).field, profile, 1e-2)
        with pytest.raises(DomainError):
            degenerate_residual(w, profile, r_lo=0.5, r_hi=0.4)

