"""Scaling-invariant blow-up monitors evaluated along trajectories.

Every monitor kind produces one or more named scalar series sampled at the
snapshot times; each series carries its trapezoidal running integral.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson, trapezoid

from .errors import ParameterError
from .littlewood_paley import heat_norm, htheta_norm, sobolev_norm
from .spectral_core import (
    Grid,
    SpectralField,
    VelocityState,
    curl,
    inverse_transform,
    lp_norm_physical,
    rebox,
    resample,
    signed_power_gradient_sq,
    signed_power_physical,
)

KINDS = (
    "CriterionIntegral",
    "VorticityL32",
    "Omega34Energy",
    "HThetaEnergy",
    "D3sqHTheta",
    "EndpointBp",
    "BKMSupNorm",
    "GronwallEnvelope",
    "EnergyBalance",
    "KlipsBalance",
)

DEFAULT_P = 5.0
DEFAULT_THETA = 0.125
DEFAULT_BP = 3.0


def _unit(e) -> tuple[float, float, float]:
    arr = np.asarray(e, dtype=np.float64)
    if arr.shape != (3,):
        raise ParameterError(f"direction must have three components, got {e}")
    if abs(float(np.linalg.norm(arr)) - 1.0) > 1e-12:
        raise ParameterError(f"direction {e} is not a unit vector")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class MonitorSpec:
    """Monitor kind with its parameters.

    ``p`` must lie in (4, 6), ``theta`` in (1/2 - 2/p, 1/6); ``p_matrix`` holds
    the nine endpoint exponents in (1, inf); ``gronwall_c`` is the user-supplied
    envelope constant.
    """

    kind: str
    e: tuple[float, float, float] = (0.0, 0.0, 1.0)
    p: float = DEFAULT_P
    theta: float = DEFAULT_THETA
    p_matrix: tuple[tuple[float, ...], ...] = ((DEFAULT_BP,) * 3,) * 3
    gronwall_c: float = 1.0
    refine: int = 1

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ParameterError(f"unknown monitor kind {self.kind!r}; available {KINDS}")
        object.__setattr__(self, "e", _unit(self.e))
        p, th = float(self.p), float(self.theta)
        if not (4.0 < p < 6.0):
            raise ParameterError(f"p must lie in (4, 6), got {p}")
        if not (0.5 - 2.0 / p < th < 1.0 / 6.0):
            raise ParameterError(f"theta must lie in ({0.5 - 2.0 / p:.6g}, 1/6) for p={p}, got {th}")
        pm = np.asarray(self.p_matrix, dtype=np.float64)
        if pm.shape != (3, 3) or not np.all((pm > 1.0) & np.isfinite(pm)):
            raise ParameterError("p_matrix must be 3x3 with entries in (1, inf)")
        if not (self.gronwall_c > 0 and math.isfinite(self.gronwall_c)):
            raise ParameterError("Gronwall constant must be positive")
        if int(self.refine) < 1:
            raise ParameterError("quadrature refinement must be >= 1")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "p_matrix", tuple(tuple(float(x) for x in row) for row in pm))


@dataclass
class MonitorSeries:
    name: str
    times: np.ndarray
    values: np.ndarray

    @property
    def running_integral(self) -> np.ndarray:
        if self.times.size == 0:
            return np.zeros(0)
        return cumulative_trapezoid(self.values, self.times, initial=0.0)

    @property
    def final_integral(self) -> float:
        ri = self.running_integral
        return float(ri[-1]) if ri.size else 0.0

    def to_csv(self) -> str:
        lines = ["time,value,running_integral"]
        for t, v, r in zip(self.times, self.values, self.running_integral):
            lines.append(f"{float(t)!r},{float(v)!r},{float(r)!r}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Instantaneous monitors
# ---------------------------------------------------------------------------


def _component(v: VelocityState, e) -> SpectralField:
    e = _unit(e)
    return v.v1 * e[0] + v.v2 * e[1] + v.v3 * e[2]


def criterion_integrand(v: VelocityState, e=(0.0, 0.0, 1.0), p: float = DEFAULT_P) -> float:
    """||v.e||^p in the homogeneous H^{1/2 + 2/p}."""
    return sobolev_norm(_component(v, e), 0.5 + 2.0 / p) ** p


def _omega(v: VelocityState) -> SpectralField:
    kd = v.grid.lattice.kd
    return SpectralField(v.grid, 1j * (kd[0] * v.v2.coeffs - kd[1] * v.v1.coeffs))


def _vector_lp(fields: Sequence[np.ndarray], grid: Grid, p: float) -> float:
    mag = np.sqrt(sum(f * f for f in fields))
    return lp_norm_physical(mag, grid, p)


def vorticity_monitors(v: VelocityState, refine: int = 1) -> tuple[float, float, float]:
    """(||Omega||_{L^{3/2}}, ||omega_{3/4}||_{L^2}, ||grad omega_{3/4}||_{L^2}).

    ``omega`` is the third vorticity component; the gradient norm uses the
    integration-by-parts form, evaluated on a grid refined ``refine`` times.
    """
    g = v.grid
    Om = [inverse_transform(c) for c in curl(v.components)]
    w = Om[2]
    l32 = _vector_lp(Om, g, 1.5)
    w34 = math.sqrt(float(np.sum(np.abs(w) ** 1.5)) * g.cell_volume)
    grad_sq = signed_power_gradient_sq(_omega(v), 0.75, method="weak", refine=refine)
    return l32, w34, math.sqrt(max(grad_sq, 0.0))


def htheta_monitors(v: VelocityState, theta: float = DEFAULT_THETA) -> tuple[float, float, float]:
    """(||d3v3||, ||grad d3v3||, ||d3^2 v3||) in H_theta."""
    kd = v.grid.lattice.kd
    g = v.grid
    d3v3 = SpectralField(g, 1j * kd[2] * v.v3.coeffs)
    grad_sq = sum(htheta_norm(SpectralField(g, 1j * kd[i] * d3v3.coeffs), theta) ** 2 for i in range(3))
    d33 = SpectralField(g, 1j * kd[2] * d3v3.coeffs)
    return htheta_norm(d3v3, theta), math.sqrt(grad_sq), htheta_norm(d33, theta)


def endpoint_bp(v: VelocityState, p_matrix=((DEFAULT_BP,) * 3,) * 3) -> np.ndarray:
    """3x3 array of ||d_l v^k||_{B_{p_kl}}, row k (component), column l (derivative)."""
    pm = np.asarray(p_matrix, dtype=np.float64)
    if pm.shape != (3, 3) or np.any(pm <= 1.0):
        raise ParameterError("p_matrix must be 3x3 with entries in (1, inf)")
    g = v.grid
    kd = g.lattice.kd
    out = np.zeros((3, 3))
    for k in range(3):
        for ell in range(3):
            d = SpectralField(g, 1j * kd[ell] * v[k].coeffs)
            out[k, ell] = heat_norm(d, 2.0 - 2.0 / pm[k, ell])
    return out


def bkm_sup(v: VelocityState) -> float:
    Om = [inverse_transform(c) for c in curl(v.components)]
    return float(np.sqrt(np.max(sum(o * o for o in Om))))


@dataclass(frozen=True)
class KlipsSample:
    """Per-component L^{3/2} energy quantities of Omega at one instant.

    ``energy`` = (2/3)||a_{3/4}||^2, ``dissipation`` = (8/9)||grad a_{3/4}||^2,
    ``source`` = int (Omega . grad v)^i a_{1/2}.
    """

    energy: tuple[float, float, float]
    dissipation: tuple[float, float, float]
    source: tuple[float, float, float]


def klips_sample(v: VelocityState, refine: int = 1) -> KlipsSample:
    g = v.grid
    Om = curl(v.components)
    if refine != 1:
        fine = g.refined(refine)
        Om = [resample(c, fine) for c in Om]
        vv = [resample(c, fine) for c in v.components]
        g = fine
    else:
        vv = list(v.components)
    kd = g.lattice.kd
    Om_phys = [inverse_transform(c) for c in Om]
    energy, diss, src = [], [], []
    for i in range(3):
        a = Om_phys[i]
        # (Omega . grad) v^i
        f = sum(Om_phys[j] * inverse_transform(SpectralField(g, 1j * kd[j] * vv[i].coeffs)) for j in range(3))
        a_half = signed_power_physical(a, 0.5)
        energy.append(2.0 / 3.0 * float(np.sum(np.abs(a) ** 1.5)) * g.cell_volume)
        diss.append(8.0 / 9.0 * signed_power_gradient_sq(Om[i], 0.75, method="weak"))
        src.append(float(np.sum(f * a_half)) * g.cell_volume)
    return KlipsSample(tuple(energy), tuple(diss), tuple(src))


def _time_integral(values: np.ndarray, times: np.ndarray) -> float:
    if times.size < 2:
        return 0.0
    if times.size == 2:
        return float(trapezoid(values, times))
    return float(simpson(values, x=times))


def klips_residuals(times: Sequence[float], samples: Sequence[KlipsSample]) -> np.ndarray:
    """Relative defect of the L^{3/2} balance per Omega component.

    ``(2/3)||a_{3/4}(T)||^2 + int D - (2/3)||a_{3/4}(0)||^2 - int S``, divided
    by the initial energy; time integrals by Simpson's rule.
    """
    t = np.asarray(times, dtype=np.float64)
    out = np.zeros(3)
    for i in range(3):
        e = np.array([s.energy[i] for s in samples])
        d = np.array([s.dissipation[i] for s in samples])
        s_ = np.array([s.source[i] for s in samples])
        defect = e[-1] + _time_integral(d, t) - e[0] - _time_integral(s_, t)
        out[i] = abs(defect) / e[0] if e[0] > 0 else abs(defect)
    return out


# ---------------------------------------------------------------------------
# Envelope
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Envelope:
    times: np.ndarray
    factor: np.ndarray  # E(t)
    vorticity_bound: np.ndarray
    vorticity_measured: np.ndarray
    htheta_bound: np.ndarray
    htheta_measured: np.ndarray
    C: float

    @property
    def vorticity_margin(self) -> np.ndarray:
        return self.vorticity_bound - self.vorticity_measured

    @property
    def htheta_margin(self) -> np.ndarray:
        return self.htheta_bound - self.htheta_measured

    @property
    def holds(self) -> bool:
        return bool(np.all(self.vorticity_margin >= 0) and np.all(self.htheta_margin >= 0))


def envelope_factor(criterion_running_integral: np.ndarray, C: float) -> np.ndarray:
    """E(t) = exp(C exp(C int_0^t ||v3||^p)), with overflow mapped to inf."""
    with np.errstate(over="ignore"):
        return np.exp(C * np.exp(C * np.asarray(criterion_running_integral, dtype=np.float64)))


def gronwall_envelope(
    criterion: MonitorSeries,
    omega0_l32: float,
    C: float,
    p: float = DEFAULT_P,
    omega34_l2: Sequence[float] | None = None,
    grad_omega34_sq: Sequence[float] | None = None,
    d3v3_htheta: Sequence[float] | None = None,
    grad_d3v3_htheta_sq: Sequence[float] | None = None,
) -> Envelope:
    """Envelope curves and the measured left-hand sides they bound.

    Bound curves: ``||Omega_0||_{3/2}^{(p+3)/2} E(t)`` for
    ``||omega_{3/4}||^{2(p+3)/3} + (int ||grad omega_{3/4}||^2)^{(p+3)/3}``, and
    ``||Omega_0||_{3/2}^2 E(t)`` for ``||d3v3||^2_{H_theta} + int ||grad d3v3||^2_{H_theta}``.
    Missing measured series are taken as zero.
    """
    if not (C > 0):
        raise ParameterError("Gronwall constant must be positive")
    t = criterion.times
    E = envelope_factor(criterion.running_integral, C)
    zeros = np.zeros_like(t)
    w = np.asarray(omega34_l2, dtype=np.float64) if omega34_l2 is not None else zeros
    gw = np.asarray(grad_omega34_sq, dtype=np.float64) if grad_omega34_sq is not None else zeros
    h = np.asarray(d3v3_htheta, dtype=np.float64) if d3v3_htheta is not None else zeros
    gh = np.asarray(grad_d3v3_htheta_sq, dtype=np.float64) if grad_d3v3_htheta_sq is not None else zeros
    expo = (p + 3.0) / 3.0
    int_gw = cumulative_trapezoid(gw, t, initial=0.0) if t.size else zeros
    int_gh = cumulative_trapezoid(gh, t, initial=0.0) if t.size else zeros
    vort_measured = w ** (2.0 * expo) + int_gw**expo
    ht_measured = h**2 + int_gh
    with np.errstate(invalid="ignore"):
        vort_bound = omega0_l32 ** ((p + 3.0) / 2.0) * E
        ht_bound = omega0_l32**2 * E
    vort_bound = np.where(np.isnan(vort_bound), 0.0, vort_bound)
    ht_bound = np.where(np.isnan(ht_bound), 0.0, ht_bound)
    return Envelope(t, E, vort_bound, vort_measured, ht_bound, ht_measured, float(C))


# ---------------------------------------------------------------------------
# Snapshot evaluation and aggregation
# ---------------------------------------------------------------------------


def _e_tag(e) -> str:
    return "".join(f"{x:g}" for x in e)


def evaluate(v: VelocityState, spec: MonitorSpec) -> dict[str, float]:
    """Named instantaneous values contributed by ``spec`` at one snapshot."""
    k = spec.kind
    if k == "CriterionIntegral":
        return {f"criterion_e{_e_tag(spec.e)}_p{spec.p:g}": criterion_integrand(v, spec.e, spec.p)}
    if k == "VorticityL32":
        return {"vorticity_l32": vorticity_monitors(v, spec.refine)[0]}
    if k == "Omega34Energy":
        _, w34, gw = vorticity_monitors(v, spec.refine)
        return {"omega34_l2": w34, "grad_omega34_l2sq": gw * gw}
    if k == "HThetaEnergy":
        h, gh, _ = htheta_monitors(v, spec.theta)
        return {"d3v3_htheta": h, "grad_d3v3_htheta_sq": gh * gh}
    if k == "D3sqHTheta":
        return {"d33v3_htheta_sq": htheta_monitors(v, spec.theta)[2] ** 2}
    if k == "EndpointBp":
        norms = endpoint_bp(v, spec.p_matrix)
        pm = np.asarray(spec.p_matrix)
        return {f"bp_integrand_k{a + 1}l{b + 1}": float(norms[a, b] ** pm[a, b]) for a in range(3) for b in range(3)}
    if k == "BKMSupNorm":
        return {"vorticity_sup": bkm_sup(v)}
    if k == "GronwallEnvelope":
        out = {f"criterion_e{_e_tag(spec.e)}_p{spec.p:g}": criterion_integrand(v, spec.e, spec.p)}
        l32, w34, gw = vorticity_monitors(v, spec.refine)
        h, gh, _ = htheta_monitors(v, spec.theta)
        out.update(
            {
                "vorticity_l32": l32,
                "omega34_l2": w34,
                "grad_omega34_l2sq": gw * gw,
                "d3v3_htheta": h,
                "grad_d3v3_htheta_sq": gh * gh,
            }
        )
        return out
    if k == "EnergyBalance":
        k2 = v.grid.lattice.k2
        diss = v.grid.volume * sum(float(np.sum(k2 * np.abs(c.coeffs) ** 2)) for c in v.components)
        return {"energy": v.energy(), "dissipation": diss}
    if k == "KlipsBalance":
        s = klips_sample(v, spec.refine)
        out = {}
        for i in range(3):
            out[f"klips_c{i + 1}_energy"] = s.energy[i]
            out[f"klips_c{i + 1}_dissipation"] = s.dissipation[i]
            out[f"klips_c{i + 1}_source"] = s.source[i]
        return out
    raise ParameterError(f"unknown monitor kind {k!r}")  # pragma: no cover


def evaluate_all(v: VelocityState, specs: Sequence[MonitorSpec]) -> dict[str, float]:
    out: dict[str, float] = {}
    for spec in specs:
        out.update(evaluate(v, spec))
    return out


class MonitorAggregator:
    """Evaluates snapshots on a worker pool; results are reduced in submission order."""

    def __init__(self, specs: Sequence[MonitorSpec], threads: int = 1):
        self.specs = tuple(specs)
        self._pool = ThreadPoolExecutor(max_workers=max(1, int(threads))) if threads > 1 else None
        self._pending: list = []

    def submit(self, v: VelocityState) -> None:
        if self._pool is None:
            self._pending.append((v.time, evaluate_all(v, self.specs)))
        else:
            self._pending.append((v.time, self._pool.submit(evaluate_all, v, self.specs)))

    def finish(self) -> dict[str, MonitorSeries]:
        rows = []
        for t, res in self._pending:
            rows.append((t, res if isinstance(res, dict) else res.result()))
        if self._pool is not None:
            self._pool.shutdown(wait=True)
        return collect_series(rows)

    def __call__(self, v: VelocityState, idx: int = 0) -> None:
        self.submit(v)


def collect_series(rows: Iterable[tuple[float, dict[str, float]]]) -> dict[str, MonitorSeries]:
    rows = list(rows)
    times = np.array([t for t, _ in rows], dtype=np.float64)
    names: list[str] = []
    for _, vals in rows:
        for name in vals:
            if name not in names:
                names.append(name)
    return {
        name: MonitorSeries(name, times, np.array([vals[name] for _, vals in rows], dtype=np.float64))
        for name in names
    }


def monitor_snapshots(states: Sequence[VelocityState], specs: Sequence[MonitorSpec], threads: int = 1) -> dict[str, MonitorSeries]:
    agg = MonitorAggregator(specs, threads)
    for s in states:
        agg.submit(s)
    return agg.finish()


def klips_from_series(series: dict[str, MonitorSeries]) -> np.ndarray:
    """Per-component relative L^{3/2} balance defect from aggregated series."""
    t = series["klips_c1_energy"].times
    samples = [
        KlipsSample(
            tuple(series[f"klips_c{i + 1}_energy"].values[n] for i in range(3)),
            tuple(series[f"klips_c{i + 1}_dissipation"].values[n] for i in range(3)),
            tuple(series[f"klips_c{i + 1}_source"].values[n] for i in range(3)),
        )
        for n in range(t.size)
    ]
    return klips_residuals(t, samples)


# ---------------------------------------------------------------------------
# Scaling
# ---------------------------------------------------------------------------


def rescale_velocity(v: VelocityState, lam: float, refine: int = 1) -> VelocityState:
    """v_lam(x) = lam v(lam x) on the box L/lam with ``refine`` times the modes.

    The time stamp becomes t / lam^2.
    """
    g = v.grid
    target = Grid(tuple(n * refine for n in g.n), tuple(L / lam for L in g.L))
    comps = [rebox(c, target, amplitude=lam) for c in v.components]
    return VelocityState(*comps, time=v.time / lam**2)
