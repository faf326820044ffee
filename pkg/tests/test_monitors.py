import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from critnorm import initial_data
from critnorm.errors import ParameterError
from critnorm.monitors import (
    KINDS,
    KlipsSample,
    MonitorSeries,
    MonitorSpec,
    bkm_sup,
    collect_series,
    criterion_integrand,
    endpoint_bp,
    envelope_factor,
    evaluate,
    gronwall_envelope,
    htheta_monitors,
    klips_residuals,
    klips_sample,
    monitor_snapshots,
    rescale_velocity,
    vorticity_monitors,
)
from critnorm.ns_solver import SolverConfig, integrate
from critnorm.spectral_core import Grid, VelocityState, lp_norm, transform

from . import oracles

MEAN_ABS_COS_POW_1_5 = 0.5564178944493822  # oracles.mean_abs_cos_power(1.5)


def vertical_mode(grid, amp, m=(2, 0, 0)):
    """v = (0, 0, amp cos(k.x)) with k horizontal: divergence-free."""
    z = np.zeros(grid.shape)
    return VelocityState.from_physical((z, z, oracles.cosine_mode(grid.n[0], m, amp, 0.0, grid.L[0])), grid)


class TestSpec:
    def test_defaults(self):
        s = MonitorSpec("CriterionIntegral")
        assert (s.p, s.theta, s.e) == (5.0, 0.125, (0.0, 0.0, 1.0))

    @pytest.mark.parametrize(
        "kw",
        [
            dict(kind="Nope"),
            dict(kind="CriterionIntegral", p=4.0),
            dict(kind="CriterionIntegral", p=6.0),
            dict(kind="HThetaEnergy", theta=0.09),  # must exceed 1/2 - 2/5
            dict(kind="HThetaEnergy", theta=1 / 6),
            dict(kind="CriterionIntegral", e=(1.0, 1.0, 0.0)),
            dict(kind="CriterionIntegral", e=(1.0, 0.0)),
            dict(kind="EndpointBp", p_matrix=((1.0,) * 3,) * 3),
            dict(kind="GronwallEnvelope", gronwall_c=0.0),
            dict(kind="VorticityL32", refine=0),
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ParameterError):
            MonitorSpec(**kw)

    def test_theta_window_tracks_p(self):
        MonitorSpec("HThetaEnergy", p=4.5, theta=0.06)
        with pytest.raises(ParameterError):
            MonitorSpec("HThetaEnergy", p=5.5, theta=0.13)

    def test_unit_vector_normalized_within_tolerance(self):
        s = MonitorSpec("CriterionIntegral", e=(0.6, 0.8, 0.0))
        assert s.e == (0.6, 0.8, 0.0)


class TestInstantaneous:
    @pytest.mark.parametrize("kind", KINDS)
    def test_zero_field(self, grid8, kind):
        vals = evaluate(VelocityState.zeros(grid8), MonitorSpec(kind))
        assert all(v == 0.0 for v in vals.values())

    @pytest.mark.parametrize("amp, p", [(0.5, 5.0), (2.0, 4.5), (1.0, 5.8)])
    def test_criterion_single_mode(self, grid16, amp, p):
        v = vertical_mode(grid16, amp)
        l2 = lp_norm(v.v3, 2)
        assert criterion_integrand(v, (0, 0, 1), p) == pytest.approx((2 ** (0.5 + 2 / p) * l2) ** p, rel=1e-12)

    def test_criterion_direction(self, grid16):
        v = initial_data.taylor_green(grid16)
        assert criterion_integrand(v, (0, 0, 1)) == 0.0
        assert criterion_integrand(v, (1, 0, 0)) > 0.0

    def test_shear_omega34_against_quadrature(self, grid32):
        _, w34, _ = vorticity_monitors(initial_data.shear(grid32))
        exact = grid32.volume * MEAN_ABS_COS_POW_1_5
        assert w34**2 == pytest.approx(exact, rel=1e-3)

    @given(st.integers(0, 2**31 - 1))
    def test_definitional_identity(self, seed):
        g = Grid.cubic(8)
        v = initial_data.random_solenoidal(g, seed=seed, k_max=3)
        _, w34, _ = vorticity_monitors(v)
        from critnorm.vorticity import compute_vorticity

        assert w34**2 == pytest.approx(lp_norm(compute_vorticity(v).omega_h, 1.5) ** 1.5, rel=1e-10)

    def test_htheta_single_mode(self, grid16):
        # v3 = cos(x1 + 2 x3) with a compensating horizontal part
        X, Y, Z = grid16.coordinates()
        ph = X + 2 * Z + 0 * Y
        v = VelocityState.from_physical((-2 * np.cos(ph), np.zeros(grid16.shape), np.cos(ph)), grid16)
        h, gh, d33 = htheta_monitors(v, 0.125)
        base = oracles.htheta_single_mode((1, 0, 2), 1.0, 0.125)
        assert h == pytest.approx(2 * base, rel=1e-13)
        assert gh == pytest.approx(2 * math.sqrt(5) * base, rel=1e-13)
        assert d33 == pytest.approx(4 * base, rel=1e-13)

    def test_htheta_without_vertical_velocity(self, grid16):
        assert htheta_monitors(initial_data.taylor_green(grid16)) == (0.0, 0.0, 0.0)

    def test_endpoint_single_mode(self, grid16):
        amp = 0.8
        v = vertical_mode(grid16, amp)
        bp = endpoint_bp(v, ((3.0,) * 3,) * 3)
        sigma = 2 - 2 / 3
        # d1 v3 = -2 amp sin(2 x1): a single mode of amplitude 2 amp
        expected = oracles.heat_single_mode(16, (2, 0, 0), 2 * amp, math.pi / 2, sigma)
        assert bp[2, 0] == pytest.approx(expected, rel=1e-12)
        assert np.count_nonzero(bp) == 1

    def test_endpoint_continuous_sup_bound(self, grid16):
        # sup_t t^{s/2} e^{-t k^2} = (s / (2 e k^2))^{s/2}; sampling can only lower it
        amp, k = 0.8, 2.0
        bp = endpoint_bp(vertical_mode(grid16, amp), ((3.0,) * 3,) * 3)[2, 0]
        s = 2 - 2 / 3
        cont = (s / (2 * math.e * k * k)) ** (s / 2) * 2 * amp
        assert 0.85 * cont <= bp <= cont

    def test_bkm(self, grid16):
        assert bkm_sup(initial_data.shear(grid16)) == pytest.approx(1.0, rel=1e-12)


class TestScaling:
    @pytest.mark.parametrize("seed", [0, 1])
    def test_instantaneous_scaling_laws(self, grid16, seed):
        v = initial_data.perturbed_taylor_green(grid16, perturbation=0.4, seed=seed)
        w = rescale_velocity(v, 2.0)
        assert w.grid.L[0] == pytest.approx(math.pi)
        assert vorticity_monitors(w)[0] == pytest.approx(vorticity_monitors(v)[0], rel=1e-12)
        assert criterion_integrand(w) == pytest.approx(4 * criterion_integrand(v), rel=1e-12)
        assert htheta_monitors(w)[0] == pytest.approx(htheta_monitors(v)[0], rel=1e-12)
        np.testing.assert_allclose(endpoint_bp(w) ** 3, 4 * endpoint_bp(v) ** 3, rtol=1e-12)

    def test_time_rescaled(self, grid16):
        v = initial_data.taylor_green(grid16).with_time(0.4)
        assert rescale_velocity(v, 2.0).time == pytest.approx(0.1)

    def test_refined_rescaling_keeps_values(self, grid16):
        v = initial_data.perturbed_taylor_green(grid16, perturbation=0.4)
        w = rescale_velocity(v, 2.0, refine=2)
        assert w.grid.n == (32, 32, 32)
        assert criterion_integrand(w) == pytest.approx(4 * criterion_integrand(v), rel=1e-12)


class TestSeries:
    def test_running_integral_matches_trapezoid(self):
        t = np.array([0.0, 0.1, 0.3, 0.6])
        y = np.array([1.0, 2.0, 0.5, 4.0])
        s = MonitorSeries("x", t, y)
        manual = [0.0]
        for i in range(1, 4):
            manual.append(manual[-1] + 0.5 * (y[i] + y[i - 1]) * (t[i] - t[i - 1]))
        np.testing.assert_array_equal(s.running_integral, manual)
        assert s.final_integral == manual[-1]

    def test_nondecreasing_for_nonnegative(self):
        rng = np.random.default_rng(0)
        s = MonitorSeries("x", np.cumsum(rng.random(20)), rng.random(20))
        assert np.all(np.diff(s.running_integral) >= 0)

    def test_csv(self):
        s = MonitorSeries("x", np.array([0.0, 0.5]), np.array([1.0, 3.0]))
        assert s.to_csv() == "time,value,running_integral\n0.0,1.0,0.0\n0.5,3.0,1.0\n"

    def test_empty(self):
        s = MonitorSeries("x", np.zeros(0), np.zeros(0))
        assert s.final_integral == 0.0 and s.to_csv() == "time,value,running_integral\n"

    def test_collect_preserves_order(self):
        series = collect_series([(0.0, {"b": 1.0, "a": 2.0}), (1.0, {"b": 3.0, "a": 4.0})])
        assert list(series) == ["b", "a"]
        np.testing.assert_array_equal(series["a"].values, [2.0, 4.0])

    def test_threaded_aggregation_identical(self, grid16):
        traj = integrate(initial_data.perturbed_taylor_green(grid16, perturbation=0.3), SolverConfig(dt=5e-3, t_end=0.03, snapshot_every=2))
        specs = [MonitorSpec(k) for k in KINDS]
        one = monitor_snapshots(traj.snapshots, specs, threads=1)
        three = monitor_snapshots(traj.snapshots, specs, threads=3)
        assert list(one) == list(three)
        for name in one:
            assert one[name].to_csv() == three[name].to_csv()

    def test_taylor_green_integrals_converge(self, grid16):
        traj = integrate(initial_data.perturbed_taylor_green(grid16, perturbation=0.3), SolverConfig(dt=1e-2, t_end=3.0, snapshot_every=10))
        s = monitor_snapshots(traj.snapshots, [MonitorSpec("CriterionIntegral")])
        ri = next(iter(s.values())).running_integral
        assert ri[-1] - ri[-5] < 1e-3 * ri[-1]


class TestKlips:
    def test_zero_sample(self, grid8):
        s = klips_sample(VelocityState.zeros(grid8))
        assert s == KlipsSample((0.0,) * 3, (0.0,) * 3, (0.0,) * 3)

    def test_energy_uses_two_thirds(self, grid16):
        v = initial_data.shear(grid16)
        s = klips_sample(v)
        assert s.energy[2] == pytest.approx(2 / 3 * vorticity_monitors(v)[1] ** 2, rel=1e-12)
        assert s.dissipation[2] == pytest.approx(8 / 9 * vorticity_monitors(v)[2] ** 2, rel=1e-12)

    def test_short_run_balance(self, grid16):
        v = initial_data.perturbed_taylor_green(grid16, perturbation=0.3, seed=1)
        traj = integrate(v, SolverConfig(dt=2e-3, t_end=0.08, snapshot_every=2))
        samples = [klips_sample(s, refine=2) for s in traj.snapshots]
        res = klips_residuals(traj.snapshot_times, samples)
        assert res.max() < 1e-3


class TestEnvelope:
    def test_factor_monotone(self):
        ri = np.linspace(0, 3, 50)
        e = envelope_factor(ri, 1.5)
        assert np.all(np.diff(e) >= 0) and e[0] == pytest.approx(math.exp(1.5))

    def test_overflow_is_inf(self):
        assert math.isinf(envelope_factor(np.array([1e4]), 1.0)[0])

    def test_zero_flow(self):
        t = np.linspace(0, 1, 5)
        env = gronwall_envelope(MonitorSeries("c", t, np.zeros(5)), 0.0, 1.0)
        assert env.holds
        assert np.all(env.vorticity_measured == 0) and np.all(env.vorticity_bound == 0)

    def test_rejects_constant(self):
        with pytest.raises(ParameterError):
            gronwall_envelope(MonitorSeries("c", np.zeros(1), np.zeros(1)), 1.0, 0.0)

    def test_decaying_flow_report(self, grid16):
        traj = integrate(initial_data.perturbed_taylor_green(grid16, perturbation=0.3), SolverConfig(dt=5e-3, t_end=0.1, snapshot_every=4))
        s = monitor_snapshots(traj.snapshots, [MonitorSpec("GronwallEnvelope")])
        crit = s["criterion_e001_p5"]
        env = gronwall_envelope(
            crit,
            s["vorticity_l32"].values[0],
            1.0,
            omega34_l2=s["omega34_l2"].values,
            grad_omega34_sq=s["grad_omega34_l2sq"].values,
            d3v3_htheta=s["d3v3_htheta"].values,
            grad_d3v3_htheta_sq=s["grad_d3v3_htheta_sq"].values,
        )
        assert isinstance(env.holds, bool)
        assert env.vorticity_margin.shape == crit.times.shape
        assert np.all(env.factor[1:] >= env.factor[:-1])
