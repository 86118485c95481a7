import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from bcpatch.errors import DomainError, FieldError, ShapeError
from bcpatch.grid import (MAGIC, QuarterGrid, SymmetricField, extend_to_torus, gradient,
                          load_symmetric, read_field, restrict, sample_polar, weighted_integral,
                          write_field)
from bcpatch.poisson import compute_psi0, psi0_coefficient
from bcpatch.steady import fd4_gradient


def mode(n, m=1, k=1):
    return SymmetricField.from_function(
        QuarterGrid(n), lambda x1, x2: np.sin(2 * np.pi * m * x1) * np.sin(2 * np.pi * k * x2))


interior_values = st.sampled_from([8, 16, 32]).flatmap(
    lambda n: arrays(np.float64, (n - 1, n - 1), elements=st.floats(-1e3, 1e3)))


def random_field(interior):
    n = interior.shape[0] + 1
    return SymmetricField.from_interior(QuarterGrid(n), interior)


class TestQuarterGrid:
    @pytest.mark.parametrize("n", [4, 12, 0, -8])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(DomainError):
            QuarterGrid(n)

    def test_rejects_non_integers(self):
        with pytest.raises(DomainError):
            QuarterGrid(16.0)

    @pytest.mark.parametrize("n", [8, 64, 4096])
    def test_spacing(self, n):
        g = QuarterGrid(n)
        assert g.h * (2 * n) == 1.0
        assert g.coords[-1] == 0.5


class TestSymmetricField:
    def test_edges_must_vanish(self):
        v = np.zeros((9, 9))
        v[0, 3] = 1e-300
        with pytest.raises(FieldError):
            SymmetricField(QuarterGrid(8), v)

    def test_rejects_nonfinite(self):
        v = np.zeros((9, 9))
        v[3, 3] = np.nan
        with pytest.raises(FieldError):
            SymmetricField(QuarterGrid(8), v)

    def test_shape_checked(self):
        with pytest.raises(ShapeError):
            SymmetricField(QuarterGrid(8), np.zeros((8, 8)))

    def test_values_read_only(self):
        f = mode(8)
        with pytest.raises(ValueError):
            f.values[2, 2] = 1.0


class TestExtension:
    def test_zero(self):
        full = extend_to_torus(SymmetricField.zeros(QuarterGrid(16)))
        assert full.shape == (32, 32)
        assert not np.any(full)

    def test_single_mode_exact(self):
        n = 32
        full = extend_to_torus(mode(n))
        x = np.arange(2 * n) / (2 * n)
        exact = np.outer(np.sin(2 * np.pi * x), np.sin(2 * np.pi * x))
        exact[np.abs(exact) < 1e-15] = 0.0
        assert np.max(np.abs(full - exact)) < 1e-14

    @given(interior_values)
    @settings(max_examples=30, deadline=None)
    def test_round_trip_and_reflections(self, interior):
        f = random_field(interior)
        n = f.grid.n
        full = extend_to_torus(f)
        assert np.array_equal(restrict(full).values, f.values)
        i = np.arange(2 * n)
        mirror = (-i) % (2 * n)
        # F(-x1, x2) = -F(x1, x2) and F(x1, -x2) = -F(x1, x2), bit for bit
        assert np.array_equal(full[mirror], -full)
        assert np.array_equal(full[:, mirror], -full)
        # averaging with either reflection annihilates the field
        assert not np.any(full + full[mirror])
        assert not np.any(full + full[:, mirror])


class TestSamplePolar:
    def test_zero_field(self):
        assert sample_polar(SymmetricField.zeros(QuarterGrid(16)), 0.2, 0.3) == 0.0

    def test_reproduces_quadratic(self):
        f = SymmetricField.from_function(QuarterGrid(64), lambda x1, x2: x1 * x2)
        assert abs(sample_polar(f, 0.1, np.pi / 4) - 0.005) < 1e-9

    def test_out_of_domain(self):
        f = mode(16)
        with pytest.raises(DomainError):
            sample_polar(f, 0.6, 0.0)
        with pytest.raises(DomainError):
            sample_polar(f, 0.1, -0.1)

    def test_psi0_off_grid_against_series(self):
        # direct sum of the truncated sine series at the off-grid point
        n = 1024
        r = 0.01
        x = y = r / np.sqrt(2)
        m = np.arange(1, n, 2)
        coeff = psi0_coefficient(m[:, None], m[None, :])
        direct = np.sin(2 * np.pi * m * x) @ coeff @ np.sin(2 * np.pi * m * y)
        assert abs(sample_polar(compute_psi0(n), r, np.pi / 4) - direct) < 1e-6


class TestGradient:
    def test_single_mode(self):
        n = 64
        f = mode(n)
        d1, d2 = gradient(f)
        x1, x2 = f.grid.mesh()
        assert np.max(np.abs(d1 - 2 * np.pi * np.cos(2 * np.pi * x1) * np.sin(2 * np.pi * x2))) < 1e-10
        assert np.max(np.abs(d2 - 2 * np.pi * np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2))) < 1e-10

    def test_zero(self):
        d1, d2 = gradient(SymmetricField.zeros(QuarterGrid(16)))
        assert not np.any(d1) and not np.any(d2)

    @given(st.integers(1, 15), st.integers(1, 15))
    @settings(max_examples=25, deadline=None)
    def test_modes_differentiate_exactly(self, m, k):
        n = 16
        f = mode(n, m, k)
        d1, d2 = gradient(f)
        x1, x2 = f.grid.mesh()
        e1 = 2 * np.pi * m * np.cos(2 * np.pi * m * x1) * np.sin(2 * np.pi * k * x2)
        e2 = 2 * np.pi * k * np.sin(2 * np.pi * m * x1) * np.cos(2 * np.pi * k * x2)
        scale = 2 * np.pi * max(m, k)
        assert np.max(np.abs(d1 - e1)) <= 1e-12 * scale * n
        assert np.max(np.abs(d2 - e2)) <= 1e-12 * scale * n

    def test_psi0_against_finite_differences(self):
        n = 512
        psi = compute_psi0(n)
        d1, d2 = gradient(psi)
        f1, f2 = fd4_gradient(psi)
        x1, x2 = psi.grid.mesh()
        h = psi.grid.h
        away = (np.minimum(x1, x2) >= 8 * h) & (np.maximum(x1, x2) <= 0.5 - 8 * h)
        assert np.max(np.abs(d1 - f1)[away]) < 1e-5
        assert np.max(np.abs(d2 - f2)[away]) < 1e-5


class TestWeightedIntegral:
    def test_area(self):
        g = QuarterGrid(32)
        one = np.ones(g.shape)
        assert abs(weighted_integral(one, one, 1) - 0.25) < 1e-12

    def test_zero(self):
        g = QuarterGrid(32)
        assert weighted_integral(np.zeros(g.shape), np.ones(g.shape)) == 0.0

    def test_sine_squared(self):
        f = mode(64)
        assert abs(weighted_integral(f, np.ones(f.grid.shape), 2) - 1 / 16) < 1e-8

    def test_mismatched_grids(self):
        with pytest.raises(ShapeError):
            weighted_integral(mode(16), mode(32))

    @pytest.mark.parametrize("a", [1.0, 2.0, 3.0])
    def test_second_order_convergence(self, a):
        def integral(n):
            g = QuarterGrid(n)
            x1, x2 = g.mesh()
            return weighted_integral(np.exp(a * x1) * np.cos(x2), np.ones(g.shape), 1)

        exact = (np.exp(a / 2) - 1) / a * np.sin(0.5)
        for n in (16, 32, 64):
            assert abs(integral(n) - integral(2 * n)) * n * n <= 0.05 * a * a
        assert abs(integral(256) - exact) < 1e-5


class TestFieldFiles:
    def test_round_trip(self, tmp_path):
        f = mode(16, 3, 5)
        path, sidecar = write_field(tmp_path / "f.bin", f, s=0.5, eps=1e-3, kind="phi", generator="test")
        raw = path.read_bytes()
        assert raw[:8] == MAGIC
        assert int.from_bytes(raw[8:12], "little") == 16
        assert len(raw) == 12 + 8 * 17 * 17
        # i fastest
        assert np.frombuffer(raw[12:20], "<f8")[0] == f.values[0, 0]
        assert np.frombuffer(raw[20:28], "<f8")[0] == f.values[1, 0]
        v, meta = read_field(path)
        assert np.array_equal(v, f.values)
        assert meta == json.loads(sidecar.read_text())
        assert meta["kind"] == "phi" and meta["n"] == 16
        assert np.array_equal(load_symmetric(path).values, f.values)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.bin"
        p.write_bytes(b"NOTFIELD" + bytes(4))
        with pytest.raises(FieldError):
            read_field(p)

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(DomainError):
            write_field(tmp_path / "x.bin", mode(8), kind="banana")
