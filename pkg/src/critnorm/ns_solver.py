"""Pseudo-spectral Navier-Stokes on the periodic box and the reformulated system.

Time stepping is fourth-order Runge-Kutta in integrating-factor (Lawson)
form: the viscous factor ``exp(-nu |k|^2 tau)`` is applied exactly and the
Leray-projected, dealiased rotational nonlinearity ``P[v x Omega]`` is
integrated explicitly. The hot loop works on half-spectrum arrays.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson, trapezoid

from .errors import BlowUpSuspected, ParameterError, ShapeError
from .littlewood_paley import htheta_inner
from .spectral_core import (
    Grid,
    SpectralField,
    VelocityState,
    _half_to_full,
    forward_half,
    inverse_half,
    inverse_transform,
    product_physical,
    signed_power_physical,
)
from .vorticity import horizontal_split

log = logging.getLogger(__name__)

SCHEMES = ("if-rk4",)


@dataclass(frozen=True)
class SolverConfig:
    nu: float = 1.0
    dt: float = 1e-3
    t_end: float = 0.5
    scheme: str = "if-rk4"
    dealias: bool = True
    snapshot_every: int = 10
    cfl_limit: float = 0.5

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ParameterError(f"t_end must be nonnegative, got {self.t_end}")
        if not (self.nu >= 0 and math.isfinite(self.nu)):
            raise ParameterError(f"viscosity must be nonnegative, got {self.nu}")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.scheme!r}; available {SCHEMES}")
        if not self.dealias:
            raise ParameterError("dealiasing cannot be disabled")
        if int(self.snapshot_every) < 1:
            raise ParameterError("snapshot cadence must be >= 1 step")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


# ---------------------------------------------------------------------------
# Half-spectrum kernel
# ---------------------------------------------------------------------------


class HalfSpectrumOps:
    """Precomputed half-spectrum arrays for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        h = grid.n[2] // 2 + 1
        lat = grid.lattice
        cut = lambda a: a[..., :h] if a.shape[2] > 1 else a  # noqa: E731
        self.kd = tuple(cut(k) for k in lat.kd)
        self.k2 = cut(lat.k2)
        self.kd2 = cut(lat.kd2)
        self.band = cut(lat.band)
        zero = self.kd2 == 0
        self.inv_kd2 = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, self.kd2))
        weight = np.full(h, 2.0)
        weight[0] = 1.0
        if grid.n[2] % 2 == 0:
            weight[-1] = 1.0
        self.hweight = weight.reshape(1, 1, h)
        self.shape = grid.shape

    # conversions
    def to_half(self, v: VelocityState) -> np.ndarray:
        return np.stack([c.half() for c in v.components])

    def to_state(self, u: np.ndarray, time: float) -> VelocityState:
        return VelocityState(*(SpectralField(self.grid, _half_to_full(c, self.grid)) for c in u), time=time)

    # sums over the full spectrum from half arrays
    def sum_sq(self, u: np.ndarray, weight: np.ndarray | None = None) -> float:
        a = u.real**2 + u.imag**2
        if a.ndim == 4:
            a = a.sum(axis=0)
        if weight is not None:
            a = a * weight
        return float(np.sum(a * self.hweight))

    def energy(self, u: np.ndarray) -> float:
        return 0.5 * self.grid.volume * self.sum_sq(u)

    def dissipation(self, u: np.ndarray) -> float:
        """||grad v||^2."""
        return self.grid.volume * self.sum_sq(u, self.k2)

    def project(self, w: np.ndarray) -> np.ndarray:
        kd = self.kd
        dot = (kd[0] * w[0] + kd[1] * w[1] + kd[2] * w[2]) * self.inv_kd2
        return np.stack([w[i] - kd[i] * dot for i in range(3)])

    def curl(self, u: np.ndarray) -> np.ndarray:
        kd = self.kd
        return np.stack(
            [
                1j * (kd[1] * u[2] - kd[2] * u[1]),
                1j * (kd[2] * u[0] - kd[0] * u[2]),
                1j * (kd[0] * u[1] - kd[1] * u[0]),
            ]
        )

    def nonlinear(self, u: np.ndarray, want_max: bool = False):
        """P[D(v x Omega)] on half arrays; optionally also max|v|."""
        vel = [inverse_half(c, self.shape) for c in u]
        vort = [inverse_half(c, self.shape) for c in self.curl(u)]
        cross = (
            vel[1] * vort[2] - vel[2] * vort[1],
            vel[2] * vort[0] - vel[0] * vort[2],
            vel[0] * vort[1] - vel[1] * vort[0],
        )
        w = np.stack([forward_half(c) * self.band for c in cross])
        out = self.project(w)
        if want_max:
            vmax = float(np.sqrt(np.max(vel[0] ** 2 + vel[1] ** 2 + vel[2] ** 2)))
            return out, vmax
        return out


# ---------------------------------------------------------------------------
# Public operators on VelocityState
# ---------------------------------------------------------------------------


def _full(grid: Grid, half: np.ndarray) -> SpectralField:
    return SpectralField(grid, _half_to_full(half, grid))


def nonlinear_term(v: VelocityState) -> tuple[SpectralField, SpectralField, SpectralField]:
    """``-P[(v.grad)v]`` evaluated as ``P[D(v x Omega)]``."""
    ops = _ops(v.grid)
    n = ops.nonlinear(ops.to_half(v))
    return tuple(_full(v.grid, c) for c in n)


def convective_term(v: VelocityState) -> tuple[SpectralField, SpectralField, SpectralField]:
    """``-P[D((v.grad)v)]`` in convective form (independent check of the rotational form)."""
    g = v.grid
    kd = g.lattice.kd
    vel = [c.physical() for c in v.components]
    out = []
    for m in range(3):
        acc = np.zeros(g.shape)
        for ell in range(3):
            acc += vel[ell] * inverse_transform(SpectralField(g, 1j * kd[ell] * v[m].coeffs))
        out.append(-product_physical(acc, g).coeffs)
    ops = _ops(g)
    proj = ops.project(np.stack([c[..., : g.n[2] // 2 + 1] for c in out]))
    return tuple(_full(g, c) for c in proj)


def tendency(v: VelocityState, nu: float = 1.0) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Instantaneous dv/dt = P[D(v x Omega)] + nu lap v."""
    k2 = v.grid.lattice.k2
    return tuple(SpectralField(v.grid, n.coeffs - nu * k2 * c.coeffs) for n, c in zip(nonlinear_term(v), v.components))


def _velocity_gradient(v: VelocityState) -> list[list[np.ndarray]]:
    """grad[l][m] = d_l v^m in physical space."""
    g = v.grid
    kd = g.lattice.kd
    return [[inverse_transform(SpectralField(g, 1j * kd[ell] * v[m].coeffs)) for m in range(3)] for ell in range(3)]


def _strain_source(grad: list[list[np.ndarray]], dims: int = 3) -> np.ndarray:
    """sum_{l,m < dims} d_l v^m d_m v^l (physical)."""
    acc = np.zeros_like(grad[0][0])
    for ell in range(dims):
        for m in range(dims):
            acc += grad[ell][m] * grad[m][ell]
    return acc


def _apply_inv_lap(c: np.ndarray, grid: Grid) -> np.ndarray:
    kd2 = grid.lattice.kd2
    zero = kd2 == 0
    return np.where(zero, 0.0, -c / np.where(zero, 1.0, kd2))


def _d33_inv_lap(c: np.ndarray, grid: Grid) -> np.ndarray:
    return -(grid.lattice.kd[2] ** 2) * _apply_inv_lap(c, grid)


def pressure(v: VelocityState) -> SpectralField:
    """Pi = -lap^-1 sum_{l,m} d_l v^m d_m v^l (zero mean, dealiased source)."""
    g = v.grid
    src = product_physical(_strain_source(_velocity_gradient(v)), g)
    return SpectralField(g, -_apply_inv_lap(src.coeffs, g))


# ---------------------------------------------------------------------------
# Time integration
# ---------------------------------------------------------------------------

_OPS_CACHE: dict[Grid, HalfSpectrumOps] = {}


def _ops(grid: Grid) -> HalfSpectrumOps:
    ops = _OPS_CACHE.get(grid)
    if ops is None:
        if len(_OPS_CACHE) > 8:
            _OPS_CACHE.clear()
        ops = _OPS_CACHE[grid] = HalfSpectrumOps(grid)
    return ops


class _Stepper:
    def __init__(self, grid: Grid, cfg: SolverConfig):
        self.ops = _ops(grid)
        self.cfg = cfg
        h = cfg.dt
        self.e_half = np.exp(-cfg.nu * self.ops.k2 * (0.5 * h))
        self.e_full = self.e_half * self.e_half
        self.last_vmax = 0.0

    def step(self, u: np.ndarray) -> np.ndarray:
        h = self.cfg.dt
        N = self.ops.nonlinear
        eh, ef = self.e_half, self.e_full
        # overflow is detected by the callers' finiteness checks
        with np.errstate(over="ignore", invalid="ignore"):
            k1, self.last_vmax = N(u, want_max=True)
            k2 = N(eh * (u + 0.5 * h * k1))
            k3 = N(eh * u + 0.5 * h * k2)
            k4 = N(ef * u + h * (eh * k3))
            return ef * u + (h / 6.0) * (ef * k1 + 2.0 * eh * (k2 + k3) + k4)


def step(state: VelocityState, cfg: SolverConfig) -> VelocityState:
    """Advance one time step of size ``cfg.dt``."""
    st = _Stepper(state.grid, cfg)
    u = st.step(st.ops.to_half(state))
    if not np.isfinite(u).all():
        raise BlowUpSuspected("non-finite values after one step", last_state=state, step=1)
    return st.ops.to_state(u, state.time + cfg.dt)


@dataclass
class Trajectory:
    """Snapshots plus per-step energy diagnostics."""

    config: SolverConfig
    snapshots: list[VelocityState] = field(default_factory=list)
    snapshot_times: list[float] = field(default_factory=list)
    step_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    energy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dissipation: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cfl_advisories: int = 0
    completed: bool = True
    blowup_step: int | None = None

    def energy_residual(self) -> float:
        """|E(T) + nu int ||grad v||^2 - E(0)| / E(0), Simpson in time."""
        return energy_identity_residual(self.step_times, self.energy, self.dissipation, self.config.nu)


def energy_identity_residual(times, energy, dissipation, nu: float = 1.0) -> float:
    times = np.asarray(times)
    if times.size < 2:
        return 0.0
    e0 = float(energy[0])
    if times.size > 2:
        integral = float(simpson(np.asarray(dissipation), x=times))
    else:
        integral = float(trapezoid(dissipation, times))
    defect = float(energy[-1]) + nu * integral - e0
    return abs(defect) / e0 if e0 > 0 else abs(defect)


SnapshotCallback = Callable[[VelocityState, int], None]


def integrate(
    v0: VelocityState,
    cfg: SolverConfig,
    on_snapshot: SnapshotCallback | None = None,
    keep_snapshots: bool = True,
) -> Trajectory:
    """Integrate from ``v0`` for ``cfg.n_steps`` steps.

    Snapshots (every ``snapshot_every`` steps plus the final step) are passed
    to ``on_snapshot`` and kept in memory unless ``keep_snapshots`` is False.
    On non-finite values a :class:`BlowUpSuspected` is raised carrying the
    partial trajectory as ``exc.trajectory``.
    """
    grid = v0.grid
    st = _Stepper(grid, cfg)
    ops = st.ops
    n_steps = cfg.n_steps
    traj = Trajectory(config=cfg)
    times = np.empty(n_steps + 1)
    energy = np.empty(n_steps + 1)
    diss = np.empty(n_steps + 1)
    u = ops.to_half(v0)
    t0 = v0.time
    times[0] = t0
    energy[0] = ops.energy(u)
    diss[0] = ops.dissipation(u)
    dx = min(grid.spacing)

    def emit(state: VelocityState, idx: int) -> None:
        traj.snapshot_times.append(state.time)
        if keep_snapshots:
            traj.snapshots.append(state)
        if on_snapshot is not None:
            on_snapshot(state, idx)

    emit(v0, 0)
    last_state = v0
    for n in range(1, n_steps + 1):
        u_new = st.step(u)
        e = ops.energy(u_new)
        if not math.isfinite(e) or not np.isfinite(u_new).all():
            traj.completed = False
            traj.blowup_step = n
            traj.step_times, traj.energy, traj.dissipation = times[:n], energy[:n], diss[:n]
            last = ops.to_state(u, t0 + (n - 1) * cfg.dt)
            exc = BlowUpSuspected(f"non-finite values at step {n}", last_state=last, step=n)
            exc.trajectory = traj
            raise exc
        if st.last_vmax * cfg.dt > cfg.cfl_limit * dx:
            traj.cfl_advisories += 1
            if traj.cfl_advisories == 1:
                log.warning("CFL advisory exceeded at step %d (dt=%g, max|v|=%g)", n, cfg.dt, st.last_vmax)
        u = u_new
        times[n] = t0 + n * cfg.dt
        energy[n] = e
        diss[n] = ops.dissipation(u)
        if n % cfg.snapshot_every == 0 or n == n_steps:
            last_state = ops.to_state(u, times[n])
            emit(last_state, n)
    traj.step_times, traj.energy, traj.dissipation = times, energy, diss
    return traj


# ---------------------------------------------------------------------------
# Reformulated system: residuals, F and Q decompositions
# ---------------------------------------------------------------------------


def _deriv(f: SpectralField, axis: int) -> SpectralField:
    return SpectralField(f.grid, 1j * f.grid.lattice.kd[axis] * f.coeffs)


def _lap(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, -f.grid.lattice.k2 * f.coeffs)


def _advect(v: VelocityState, f: SpectralField, vel=None) -> np.ndarray:
    """Physical v . grad f."""
    vel = vel or [c.physical() for c in v.components]
    return sum(vel[i] * _deriv(f, i).physical() for i in range(3))


@dataclass(frozen=True)
class TildeResidual:
    r_omega: SpectralField
    r_d3v3: SpectralField
    scale_omega: float
    scale_d3v3: float

    @property
    def relative(self) -> tuple[float, float]:
        a = self.r_omega.max_abs_coeff()
        b = self.r_d3v3.max_abs_coeff()
        return (a / self.scale_omega if self.scale_omega else a, b / self.scale_d3v3 if self.scale_d3v3 else b)


def tilde_ns_residual(state: VelocityState, dvdt: Sequence[SpectralField], nu: float = 1.0) -> TildeResidual:
    """LHS - RHS of the equations for omega = d1 v2 - d2 v1 and d3 v3.

    Products are dealiased. Relative scales are the largest coefficient among
    the individual terms of each equation.
    """
    g = state.grid
    if any(c.grid != g for c in dvdt):
        raise ShapeError("tendency lives on another grid")
    v1, v2, v3 = state.components
    vel = [c.physical() for c in state.components]
    grad = _velocity_gradient(state)  # grad[l][m] = d_l v^m
    omega = _deriv(v2, 0) - _deriv(v1, 1)
    d3v3 = _deriv(v3, 2)

    dt_omega = _deriv(dvdt[1], 0) - _deriv(dvdt[0], 1)
    adv_omega = product_physical(_advect(state, omega, vel), g)
    visc_omega = _lap(omega) * nu
    rhs_omega = product_physical(
        grad[2][2] * omega.physical() + grad[1][2] * grad[2][0] - grad[0][2] * grad[2][1], g
    )
    r_omega = dt_omega + adv_omega - visc_omega - rhs_omega

    dt_d3v3 = _deriv(dvdt[2], 2)
    adv_d3v3 = product_physical(_advect(state, d3v3, vel), g)
    visc_d3v3 = _lap(d3v3) * nu
    stretch = product_physical(sum(grad[2][i] * grad[i][2] for i in range(3)), g)
    src = product_physical(_strain_source(grad), g)
    rhs_d3v3 = SpectralField(g, _d33_inv_lap(src.coeffs, g))
    r_d3v3 = dt_d3v3 + adv_d3v3 - visc_d3v3 + stretch - rhs_d3v3

    scale = lambda *fs: max(f.max_abs_coeff() for f in fs)  # noqa: E731
    return TildeResidual(
        r_omega,
        r_d3v3,
        scale(dt_omega, adv_omega, visc_omega, rhs_omega),
        scale(dt_d3v3, adv_d3v3, visc_d3v3, stretch, rhs_d3v3),
    )


@dataclass(frozen=True)
class FTerms:
    """Integrals of the omega-equation source against omega_{1/2}.

    ``F1`` stretching, ``F2`` through v_curl, ``F3`` through v_div and
    ``F_shear`` through the k_h = 0 residual of the horizontal split.
    """

    F1: float
    F2: float
    F3: float
    F_shear: float

    @property
    def total(self) -> float:
        return self.F1 + self.F2 + self.F3 + self.F_shear

    def __iter__(self):
        return iter((self.F1, self.F2, self.F3))


def _quad(values: np.ndarray, grid: Grid) -> float:
    return float(np.sum(values) * grid.cell_volume)


def f_terms(state: VelocityState) -> FTerms:
    g = state.grid
    v1, v2, v3 = state.components
    omega = (_deriv(v2, 0) - _deriv(v1, 1)).physical()
    w_half = signed_power_physical(omega, 0.5)
    d1v3 = _deriv(v3, 0).physical()
    d2v3 = _deriv(v3, 1).physical()
    d3v3 = _deriv(v3, 2).physical()
    split = horizontal_split(state)

    def coupling(pair) -> float:
        a = _deriv(pair[0], 2).physical()
        b = _deriv(pair[1], 2).physical()
        return _quad((d2v3 * a - d1v3 * b) * w_half, g)

    return FTerms(
        F1=_quad(d3v3 * np.abs(omega) ** 1.5, g),
        F2=coupling(split.v_curl),
        F3=coupling(split.v_div),
        F_shear=coupling(split.shear_residual),
    )


def f_direct(state: VelocityState) -> float:
    """int F omega_{1/2} with F the full right-hand side of the omega equation."""
    g = state.grid
    grad = _velocity_gradient(state)
    v1, v2 = state.v1, state.v2
    omega = (_deriv(v2, 0) - _deriv(v1, 1)).physical()
    F = grad[2][2] * omega + grad[1][2] * grad[2][0] - grad[0][2] * grad[2][1]
    return _quad(F * signed_power_physical(omega, 0.5), g)


@dataclass(frozen=True)
class QTerms:
    Q1: float
    Q2: float
    Q3: float

    @property
    def total(self) -> float:
        return self.Q1 + self.Q2 + self.Q3

    def __iter__(self):
        return iter((self.Q1, self.Q2, self.Q3))


def q_fields(state: VelocityState) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Q1, Q2, Q3 as dealiased spectral fields."""
    g = state.grid
    grad = _velocity_gradient(state)
    d3v3 = _deriv(state.v3, 2)
    sq = product_physical(grad[2][2] ** 2, g).coeffs
    sh = product_physical(_strain_source(grad, dims=2), g).coeffs
    mix = product_physical(grad[2][0] * grad[0][2] + grad[2][1] * grad[1][2], g).coeffs
    q1 = sq - _d33_inv_lap(sq, g) - _d33_inv_lap(sh, g)
    q2 = mix - 2.0 * _d33_inv_lap(mix, g)
    q3 = product_physical(_advect(state, d3v3), g)
    return SpectralField(g, q1), SpectralField(g, q2), q3


def q_terms(state: VelocityState, theta: float = 0.125) -> QTerms:
    """(Q_n | d3v3)_{H_theta} for n = 1, 2, 3."""
    if not (0.0 < theta < 0.5):
        raise ParameterError(f"theta must lie in (0, 1/2), got {theta}")
    d3v3 = _deriv(state.v3, 2)
    q = q_fields(state)
    return QTerms(*(htheta_inner(qn, d3v3, theta) for qn in q))


def htheta_energy_rates(state: VelocityState, theta: float = 0.125, nu: float = 1.0) -> tuple[float, float]:
    """(d/dt 1/2 ||d3v3||^2_{H_theta}, ||grad d3v3||^2_{H_theta}) from the instantaneous tendency."""
    d3v3 = _deriv(state.v3, 2)
    dvdt = tendency(state, nu)
    rate = htheta_inner(_deriv(dvdt[2], 2), d3v3, theta)
    grad_sq = sum(htheta_inner(_deriv(d3v3, i), _deriv(d3v3, i), theta) for i in range(3))
    return rate, grad_sq
