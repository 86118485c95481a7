import numpy as np
import pytest

from bcpatch.analysis.sandwich import ratio_field, ratio_l2_check, sandwich_check
from bcpatch.barrier import barrier_field, barrier_values
from bcpatch.errors import DomainError, ResolutionError
from bcpatch.grid import QuarterGrid, SymmetricField
from bcpatch.poisson import compute_psi0

# quadrature of (psi_0 / barrier)^2 at eps = 1e-3 (oracle runs at n = 512, 1024)
RATIO_L2_PSI0 = {512: 0.22043, 1024: 0.22071}


class TestSandwich:
    def test_unresolved(self, profile):
        with pytest.raises(ResolutionError):
            sandwich_check(compute_psi0(1024), profile, 1e-3)

    def test_psi0_breaks_lower_bound(self, profile):
        eps = 1e-2
        rep = sandwich_check(compute_psi0(512), profile, eps)
        assert rep.upper_ok and rep.upper_violations == 0
        assert not rep.lower_ok and rep.lower_violations > 0
        assert not rep.to_json()["pass"]

    def test_plateau_breaks_upper_bound(self, profile):
        eps = 1e-2
        g = QuarterGrid(512)
        plateau = SymmetricField.from_interior(g, np.full((g.n - 1, g.n - 1), 2 * eps))
        rep = sandwich_check(plateau, profile, eps)
        assert rep.lower_ok and not rep.upper_ok
        assert rep.upper_margin == pytest.approx(-eps)
        x1, x2 = g.mesh()
        on_axes = (np.hypot(x1, x2) <= rep.radius) & ((x1 == 0) | (x2 == 0))
        assert rep.upper_violations == rep.nodes - on_axes.sum()

    def test_doubled_barrier_breaks_lower_bound(self, profile, solve):
        eps = 1e-2
        phi = solve(eps, 1024).field
        rep = sandwich_check(phi, 2 * barrier_values(profile, eps, phi.grid), eps)
        assert not rep.lower_ok and rep.lower_violations > 0

    @pytest.mark.slow
    def test_converged_solution(self, profile, solve):
        eps = 1e-3
        phi = solve(eps, 4096).field
        rep = sandwich_check(phi, profile, eps)
        assert rep.passed, rep.to_json()
        assert rep.nodes > 100


class TestRatioField:
    def test_barrier_gives_zero(self, profile):
        g = QuarterGrid(256)
        b = barrier_field(profile, 1e-3, g)
        W = ratio_field(b, profile, 1e-3)
        vals = W.W[~W.mask]
        assert vals.size > 0 and not np.any(vals)

    def test_doubled_barrier_gives_one(self, profile):
        g = QuarterGrid(256)
        b = barrier_field(profile, 1e-3, g)
        W = ratio_field(2 * b, profile, 1e-3)
        assert np.max(np.abs(W.W[~W.mask] - 1)) <= 1e-15

    def test_mask(self, profile):
        g = QuarterGrid(64)
        W = ratio_field(compute_psi0(64), profile, 1e-3, r_min=8 * g.h)
        r, _ = g.polar()
        assert np.all(W.mask[r < 8 * g.h])
        assert np.all(np.isnan(W.W[W.mask]))
        assert np.all(np.isfinite(W.W[~W.mask]))

    def test_r_min_floor(self, profile):
        g = QuarterGrid(64)
        with pytest.raises(DomainError):
            ratio_field(compute_psi0(64), profile, 1e-3, r_min=2 * g.h)

    @pytest.mark.slow
    def test_agrees_with_sandwich(self, profile, solve):
        eps = 1e-3
        phi = solve(eps, 4096).field
        rep = sandwich_check(phi, profile, eps)
        W = ratio_field(phi, profile, eps)
        r, _ = phi.grid.polar()
        region = (~W.mask) & (r <= rep.radius)
        assert rep.lower_ok
        assert np.all(W.W[region] >= -1e-8)


class TestRatioL2:
    def test_barrier(self, profile):
        g = QuarterGrid(512)
        out = ratio_l2_check(barrier_field(profile, 1e-3, g), profile, 1e-3)
        assert abs(out["integral"] - 0.25) <= 0.02 * 0.25

    def test_psi0_refinement(self, profile):
        vals = {n: ratio_l2_check(compute_psi0(n), profile, 1e-3)["integral"] for n in (512, 1024)}
        for n, v in vals.items():
            assert v == pytest.approx(RATIO_L2_PSI0[n], rel=1e-4)
        assert abs(vals[1024] / vals[512] - 1) <= 0.05

    def test_converged_finite(self, profile, solve):
        out = ratio_l2_check(solve(1e-2, 1024).field, profile, 1e-2)
        assert np.isfinite(out["integral"]) and out["integral"] > 0
        assert out["tail"] < 0.01 * out["bulk"]
