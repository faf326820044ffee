import numpy as np
import pytest
from hypothesis import given, strategies as st

from critnorm import initial_data
from critnorm.errors import ValidationError
from critnorm.spectral_core import Grid, SpectralField, VelocityState, divergence_defect, inverse_transform, transform
from critnorm.vorticity import compute_vorticity, horizontal_split, velocity_from_vorticity

from . import oracles


def rel(a, b):
    num = sum(np.linalg.norm(x.coeffs - y.coeffs) ** 2 for x, y in zip(a, b)) ** 0.5
    den = sum(np.linalg.norm(y.coeffs) ** 2 for y in b) ** 0.5
    return num / den if den else num


def zero_horizontal_mean(v):
    keep = v.grid.lattice.kh > 0
    return VelocityState(*(SpectralField(v.grid, c.coeffs * keep) for c in v.components))


class TestComputeVorticity:
    def test_zero(self, grid8):
        w = compute_vorticity(VelocityState.zeros(grid8))
        assert all(c.max_abs_coeff() == 0 for c in (*w.Omega, w.omega_h, w.d3v3))

    def test_shear(self, grid16):
        w = compute_vorticity(initial_data.shear(grid16))
        _, Y, _ = grid16.coordinates()
        expected = np.broadcast_to(-np.cos(Y), grid16.shape)
        np.testing.assert_allclose(inverse_transform(w.omega_h), expected, atol=1e-14)
        assert w.Omega[0].max_abs_coeff() < 1e-16 and w.Omega[1].max_abs_coeff() < 1e-16

    def test_taylor_green_against_symbolic_curl(self, grid16):
        coords, v = oracles.taylor_green_symbols()
        exprs = oracles.symbolic_curl(coords, v)
        w = compute_vorticity(initial_data.taylor_green(grid16))
        for got, expr in zip(w.Omega, exprs):
            np.testing.assert_allclose(inverse_transform(got), oracles.evaluate_on_grid(expr, coords, 16), atol=1e-13)

    def test_invariants_on_random_field(self, grid16):
        v = initial_data.random_solenoidal(grid16, seed=3, k_max=5)
        w = compute_vorticity(v)
        assert divergence_defect(*w.Omega) < 1e-12
        assert w.omega_h is w.Omega[2]
        kd = grid16.lattice.kd
        minus_div_h = -1j * (kd[0] * v.v1.coeffs + kd[1] * v.v2.coeffs)
        assert np.abs(w.d3v3.coeffs - minus_div_h).max() <= 1e-12 * max(w.d3v3.max_abs_coeff(), 1)


class TestHorizontalSplit:
    def test_curl_only_flow(self, grid16):
        X, Y, Z = grid16.coordinates()
        # psi = sin x sin y, v = (-d2 psi, d1 psi, 0)
        u1 = np.broadcast_to(-np.sin(X) * np.cos(Y), grid16.shape)
        u2 = np.broadcast_to(np.cos(X) * np.sin(Y), grid16.shape)
        v = VelocityState.from_physical((u1, u2, np.zeros(grid16.shape)), grid16)
        s = horizontal_split(v)
        assert max(c.max_abs_coeff() for c in s.v_div) < 1e-16
        assert rel(s.v_curl, (v.v1, v.v2)) < 1e-14

    def test_div_only_flow(self, grid16):
        # v^h = grad_h (sin x sin y cos z) balanced by v3 so that div v = 0
        X, Y, Z = grid16.coordinates()
        u1 = np.cos(X) * np.sin(Y) * np.cos(Z)
        u2 = np.sin(X) * np.cos(Y) * np.cos(Z)
        u3 = 2 * np.sin(X) * np.sin(Y) * np.sin(Z)
        v = VelocityState.from_physical((u1, u2, u3), grid16)
        s = horizontal_split(v)
        assert max(c.max_abs_coeff() for c in s.v_curl) < 1e-16
        assert rel(s.v_div, (v.v1, v.v2)) < 1e-14

    @pytest.mark.parametrize("seed", range(5))
    def test_reconstruction_and_structure(self, grid16, seed):
        v = zero_horizontal_mean(initial_data.random_solenoidal(grid16, seed=seed, k_max=5))
        s = horizontal_split(v)
        recon = [a + b for a, b in zip(s.v_curl, s.v_div)]
        assert rel(recon, (v.v1, v.v2)) < 1e-10
        assert max(c.max_abs_coeff() for c in s.shear_residual) < 1e-16
        kd = grid16.lattice.kd
        div_curl = kd[0] * s.v_curl[0].coeffs + kd[1] * s.v_curl[1].coeffs
        rot_div = kd[0] * s.v_div[1].coeffs - kd[1] * s.v_div[0].coeffs
        scale = max(c.max_abs_coeff() for c in (v.v1, v.v2))
        assert np.abs(div_curl).max() < 1e-12 * scale * 8
        assert np.abs(rot_div).max() < 1e-12 * scale * 8

    def test_parts_orthogonal(self, grid16):
        v = zero_horizontal_mean(initial_data.random_solenoidal(grid16, seed=11, k_max=5))
        s = horizontal_split(v)
        pair = sum(np.vdot(a.coeffs, b.coeffs).real for a, b in zip(s.v_curl, s.v_div))
        norm = sum(np.vdot(a.coeffs, a.coeffs).real for a in (*s.v_curl, *s.v_div))
        assert abs(pair) < 1e-10 * norm

    def test_vertical_shear_goes_to_residual(self, grid16):
        # v^h depending on x3 only has k_h = 0
        _, _, Z = grid16.coordinates()
        u = np.broadcast_to(np.sin(Z) + 0.3 * np.cos(2 * Z), grid16.shape)
        v = VelocityState.from_physical((u, 0.5 * u, np.zeros(grid16.shape)), grid16)
        s = horizontal_split(v)
        assert max(c.max_abs_coeff() for c in (*s.v_curl, *s.v_div)) == 0.0
        assert rel(s.shear_residual, (v.v1, v.v2)) < 1e-15


class TestBiotSavart:
    def test_zero(self, grid8):
        z = SpectralField.zeros(grid8)
        v = velocity_from_vorticity((z, z, z))
        assert all(c.max_abs_coeff() == 0 for c in v.components)

    def test_inverse_shear(self, grid16):
        _, Y, _ = grid16.coordinates()
        z = SpectralField.zeros(grid16)
        om3 = transform(np.broadcast_to(-np.cos(Y), grid16.shape), grid16)
        v = velocity_from_vorticity((z, z, om3))
        assert rel(v.components, initial_data.shear(grid16).components) < 1e-14

    def test_taylor_green_roundtrip(self, grid16):
        v = initial_data.taylor_green(grid16)
        assert rel(velocity_from_vorticity(compute_vorticity(v).Omega).components, v.components) < 1e-10

    @given(st.integers(0, 2**31 - 1))
    def test_roundtrip_property(self, seed):
        g = Grid.cubic(8)
        v = initial_data.random_solenoidal(g, seed=seed, k_max=2.5)
        back = velocity_from_vorticity(compute_vorticity(v).Omega)
        assert rel(back.components, v.components) < 1e-10
        again = compute_vorticity(back).Omega
        assert rel(again, compute_vorticity(v).Omega) < 1e-10

    def test_rejects_non_solenoidal(self, grid8):
        X, Y, Z = grid8.coordinates()
        bad = transform(np.sin(X + 0 * Y + 0 * Z), grid8)
        z = SpectralField.zeros(grid8)
        with pytest.raises(ValidationError):
            velocity_from_vorticity((bad, z, z))
