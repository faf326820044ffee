"""Vorticity, horizontal Biot-Savart splitting and velocity recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spectral_core import (
    SpectralField,
    VelocityState,
    curl,
    divergence_defect,
)

SOLENOIDAL_TOL = 1e-10


@dataclass(frozen=True)
class VorticityState:
    """Full vorticity, its third component and the vertical stretching d3v3."""

    Omega: tuple[SpectralField, SpectralField, SpectralField]
    omega_h: SpectralField
    d3v3: SpectralField

    @property
    def grid(self):
        return self.omega_h.grid


@dataclass(frozen=True)
class HorizontalSplit:
    """v^h = v_curl + v_div + shear_residual (the last lives on k_h = 0)."""

    v_curl: tuple[SpectralField, SpectralField]
    v_div: tuple[SpectralField, SpectralField]
    shear_residual: tuple[SpectralField, SpectralField]


def compute_vorticity(v: VelocityState) -> VorticityState:
    Omega = curl(v.components)
    kd3 = v.grid.lattice.kd[2]
    d3v3 = SpectralField(v.grid, 1j * kd3 * v.v3.coeffs)
    return VorticityState(Omega=Omega, omega_h=Omega[2], d3v3=d3v3)


def _inv_lap_h(c: np.ndarray, grid) -> np.ndarray:
    kdh2 = grid.lattice.kdh2
    zero = kdh2 == 0
    return np.where(zero, 0.0, -c / np.where(zero, 1.0, kdh2))


def horizontal_split(v: VelocityState) -> HorizontalSplit:
    """Horizontal Biot-Savart decomposition.

    ``v_curl = (-d2, d1) lap_h^-1 omega`` and ``v_div = -grad_h lap_h^-1 d3v3``.
    Modes with ``k_h = 0`` are invisible to ``lap_h^-1`` and end up in
    ``shear_residual``.
    """
    g = v.grid
    kd = g.lattice.kd
    c1, c2, c3 = (x.coeffs for x in v.components)
    omega = 1j * (kd[0] * c2 - kd[1] * c1)
    d3v3 = 1j * kd[2] * c3
    psi = _inv_lap_h(omega, g)
    phi = _inv_lap_h(d3v3, g)
    curl_1 = -1j * kd[1] * psi
    curl_2 = 1j * kd[0] * psi
    div_1 = -1j * kd[0] * phi
    div_2 = -1j * kd[1] * phi
    mk = lambda c: SpectralField(g, c)  # noqa: E731
    return HorizontalSplit(
        v_curl=(mk(curl_1), mk(curl_2)),
        v_div=(mk(div_1), mk(div_2)),
        shear_residual=(mk(c1 - curl_1 - div_1), mk(c2 - curl_2 - div_2)),
    )


def velocity_from_vorticity(Omega, time: float = 0.0) -> VelocityState:
    """Biot-Savart law ``v = curl(-lap^-1 Omega)``; zero mean velocity."""
    Omega = tuple(Omega)
    defect = divergence_defect(*Omega)
    if defect > SOLENOIDAL_TOL:
        raise ValidationError(f"vorticity is not solenoidal (relative defect {defect:.3e})")
    g = Omega[0].grid
    kd2 = g.lattice.kd2
    zero = kd2 == 0
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, kd2))
    stream = tuple(SpectralField(g, w.coeffs * inv) for w in Omega)
    return VelocityState(*curl(stream), time=time)
