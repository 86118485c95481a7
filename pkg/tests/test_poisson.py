import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcpatch.errors import SingularityError
from bcpatch.grid import QuarterGrid, SymmetricField, sample_polar
from bcpatch.poisson import (SineSpectrum, apply_laplacian, compute_psi0, green_function,
                             invert_laplacian, laplacian_symbol, poisson_solve, psi0_coefficient,
                             torus_green, transform_forward, transform_inverse)

from oracles import green_fourier_rows, green_lattice_sum, psi0_coefficient_series

# mean-zero torus Green's function from the row-summed Fourier series at 30 digits
GREEN_ORACLE = {
    (0.1, 0.2): -0.04222679302058591,
    (0.3, 0.05): -0.004833723843622108,
    (0.25, 0.25): 0.013789725009540725,
    (0.4, 0.35): 0.046567647701412744,
    (0.05, 0.45): 0.026360789356264763,
}


def band_limited(rng, n, modes):
    c = np.zeros((n - 1, n - 1))
    c[:modes, :modes] = rng.standard_normal((modes, modes))
    return SineSpectrum(c)


class TestTransforms:
    def test_single_mode(self):
        n = 32
        f = SymmetricField.from_function(
            QuarterGrid(n), lambda x1, x2: np.sin(2 * np.pi * x1) * np.sin(2 * np.pi * x2))
        a = transform_forward(f).coeffs
        assert abs(a[0, 0] - 1) < 1e-12
        a = a.copy()
        a[0, 0] = 0
        assert np.max(np.abs(a)) <= 1e-12

    def test_zero(self):
        assert not np.any(transform_forward(SymmetricField.zeros(QuarterGrid(16))).coeffs)

    @pytest.mark.parametrize("n", [16, 128, 1024])
    def test_band_limited_round_trip(self, rng, n):
        spec = band_limited(rng, n, n // 2)
        back = transform_forward(transform_inverse(spec))
        scale = np.max(np.abs(spec.coeffs))
        assert np.max(np.abs(back.coeffs - spec.coeffs)) <= 1e-12 * scale
        f = transform_inverse(spec)
        again = transform_inverse(transform_forward(f))
        assert np.max(np.abs(again.values - f.values)) <= 1e-12 * f.sup_norm()


class TestLaplacian:
    def test_mode_11(self):
        out = invert_laplacian(SineSpectrum.single_mode(16, 1, 1))
        assert abs(out.coeffs[0, 0] + 1 / (8 * np.pi ** 2)) < 1e-15

    def test_mode_12(self):
        out = invert_laplacian(SineSpectrum.single_mode(16, 1, 2, amplitude=2.0))
        assert abs(out.coeffs[0, 1] + 1 / (10 * np.pi ** 2)) < 1e-15

    def test_zero(self):
        assert not np.any(invert_laplacian(SineSpectrum(np.zeros((15, 15)))).coeffs)

    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([8, 32, 256]), st.sampled_from(["spectral", "fd4"]))
    @settings(max_examples=20, deadline=None)
    def test_laplacian_inverts(self, seed, n, kind):
        spec = band_limited(np.random.default_rng(seed), n, n - 1)
        back = apply_laplacian(invert_laplacian(spec, kind), kind)
        assert np.max(np.abs(back.coeffs - spec.coeffs)) <= 1e-12 * np.max(np.abs(spec.coeffs))

    def test_fd4_symbol_approximates_spectral(self):
        # fourth-order stencil: relative symbol error t^4/90 + O(t^6), t = pi m / n
        n = 256
        t = np.pi * np.arange(1, n) / n
        err = np.abs(laplacian_symbol(n, "fd4") / laplacian_symbol(n, "spectral") - 1)
        low = t < 0.5
        assert np.all(err[low] <= t[low] ** 4 / 90 * 1.01)
        assert np.all(err[low] >= t[low] ** 4 / 90 * 0.9)

    def test_poisson_solve_recovers_mode(self):
        n = 64
        f = SymmetricField.from_function(
            QuarterGrid(n), lambda x1, x2: np.sin(2 * np.pi * x1) * np.sin(6 * np.pi * x2))
        u = poisson_solve(f)
        assert np.max(np.abs(u.values + f.values / (40 * np.pi ** 2))) < 1e-15


class TestPsi0:
    def test_leading_coefficient(self):
        assert abs(psi0_coefficient(1, 1) - 2 / np.pi ** 4) < 1e-12
        assert abs(psi0_coefficient_series(1, 1) - 2 / np.pi ** 4) < 1e-12
        a = transform_forward(compute_psi0(64)).coeffs
        assert abs(a[0, 0] - 2 / np.pi ** 4) < 1e-12

    def test_coefficients_match_series(self):
        a = transform_forward(compute_psi0(64)).coeffs
        for m in range(1, 12):
            for k in range(1, 12):
                assert abs(a[m - 1, k - 1] - psi0_coefficient_series(m, k)) < 1e-15

    def test_axes_and_positivity(self):
        psi = compute_psi0(256)
        assert not np.any(psi.values[0]) and not np.any(psi.values[:, 0])
        assert np.all(psi.interior > 0)
        assert np.all(psi.values >= 0)

    def test_diagonal_symmetry_exact(self):
        psi = compute_psi0(512)
        assert np.array_equal(psi.values, psi.values.T)

    def test_refinement(self):
        # shared nodes of n and 2n differ by at most C n^-2 ln n
        errs = []
        for n in (64, 128, 256, 512):
            a = compute_psi0(n).values
            b = compute_psi0(2 * n).values[::2, ::2]
            errs.append(np.max(np.abs(a - b)) * n * n / np.log(n))
        assert max(errs) < 0.1
        assert errs[-1] <= 1.5 * errs[0]

    def test_corner_asymptotics(self):
        psi = compute_psi0(1024)
        r = np.geomspace(1e-2, 3e-2, 8)
        ratio = sample_polar(psi, r, np.full_like(r, np.pi / 4)) / (-r ** 2 * np.log(r))
        assert 0.2 < ratio.min() and ratio.max() < 0.4

    def test_convolution_with_green(self):
        # psi_0(x) = sum over torus cells of G(x - y) (-sgn y1 sgn y2) dy, midpoint rule
        N = 512
        h = 1.0 / N
        yc = (np.arange(N) + 0.5) * h - 0.5
        Y1, Y2 = np.meshgrid(yc, yc, indexing="ij")
        rho = -np.sign(Y1) * np.sign(Y2)
        psi = compute_psi0(512)
        pts = np.random.default_rng(3).integers(8, 248, (10, 2)) / 512.0
        for x in pts:
            quad = np.sum(green_function(x[0] - Y1, x[1] - Y2) * rho) * h * h
            assert abs(quad - psi.values[int(x[0] * 1024), int(x[1] * 1024)]) < 1e-4


class TestGreen:
    @pytest.mark.parametrize("point", sorted(GREEN_ORACLE))
    def test_frozen_oracle(self, point):
        assert abs(green_function(*point) - GREEN_ORACLE[point]) < 1e-14

    @pytest.mark.parametrize("point", [(0.1, 0.2), (0.4, 0.35)])
    def test_live_oracles(self, point):
        # two independent routes: row-summed series and the brute-force lattice sum
        assert abs(green_function(*point) - green_fourier_rows(*point, dps=20)) < 1e-14
        assert abs(green_function(*point) - green_lattice_sum(*point, K=200)) < 1e-6

    def test_symmetry(self, rng):
        for _ in range(20):
            x, y = rng.uniform(0, 1, 2), rng.uniform(0, 1, 2)
            a, b = torus_green(x, y), torus_green(y, x)
            assert abs(a.total - b.total) <= 1e-12

    def test_periodic(self):
        assert abs(green_function(0.1, 0.2) - green_function(1.1, -0.8)) < 1e-14

    def test_coincident_points(self):
        with pytest.raises(SingularityError):
            torus_green((0.2, 0.3), (1.2, 0.3))

    def test_split_is_exact(self):
        g = torus_green((0.1, 0.1), (0.13, 0.17))
        assert g.total == g.log_part + g.regular_part
        assert abs(g.log_part - np.log(g.distance) / (2 * np.pi)) < 1e-15

    def test_mean_zero(self):
        N = 256
        y = (np.arange(N) + 0.5) / N
        Y1, Y2 = np.meshgrid(y, y, indexing="ij")
        assert abs(np.mean(green_function(Y1, Y2))) < 1e-4

    def test_regular_part_smooth_along_ray(self):
        y = np.array([0.2, 0.2])
        u = np.array([1.0, 1.0]) / np.sqrt(2)
        reg = [torus_green(y + d * u, y).regular_part for d in np.geomspace(1e-4, 1e-2, 10)]
        assert np.var(reg, ddof=1) <= 1e-3
