"""Initial velocity fields: Taylor-Green, shear, random solenoidal."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError
from .spectral_core import (
    Grid,
    SpectralField,
    VelocityState,
    hermitian_symmetrize,
    leray_coeffs,
    transform,
)


def _base_wavenumbers(grid: Grid) -> tuple[float, float, float]:
    return tuple(2.0 * math.pi / Li for Li in grid.L)


def zero(grid: Grid) -> VelocityState:
    return VelocityState.zeros(grid)


def taylor_green(grid: Grid, amplitude: float = 1.0) -> VelocityState:
    """A (sin x cos y cos z, -cos x sin y cos z, 0) with x scaled to the box."""
    x, y, z = grid.coordinates()
    a, b, c = _base_wavenumbers(grid)
    u = amplitude * np.sin(a * x) * np.cos(b * y) * np.cos(c * z)
    v = -amplitude * (a / b) * np.cos(a * x) * np.sin(b * y) * np.cos(c * z)
    w = np.zeros(grid.shape)
    return VelocityState.from_physical((u, v, w), grid)


def shear(grid: Grid, amplitude: float = 1.0, mode: int = 1) -> VelocityState:
    """Unidirectional flow (A sin(m k0 y), 0, 0)."""
    _, y, _ = grid.coordinates()
    b = _base_wavenumbers(grid)[1]
    u = np.broadcast_to(amplitude * np.sin(mode * b * y), grid.shape)
    z = np.zeros(grid.shape)
    return VelocityState.from_physical((u, z, z), grid)


def random_solenoidal(
    grid: Grid,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    slope: float = 5.0 / 3.0,
    k_max: float = 4.0,
    k_min: float = 1.0,
    rms: float = 1.0,
) -> VelocityState:
    """Divergence-free field with energy spectrum ~ k^-slope on k_min <= |m| <= k_max.

    ``|m|`` is the integer lattice radius; only 2/3-band modes are filled.
    ``rms`` sets the root-mean-square velocity (sqrt(2 E / V)).
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lat = grid.lattice
    mrad = np.sqrt(lat.modes[0] ** 2 + lat.modes[1] ** 2 + lat.modes[2] ** 2)
    mask = (mrad >= k_min) & (mrad <= k_max) & lat.band
    if not mask.any():
        raise ConfigurationError(f"band [{k_min}, {k_max}] holds no resolved modes on grid {grid.n}")
    weight = np.where(mask, np.where(mrad > 0, mrad, 1.0) ** (-(slope + 2.0) / 2.0), 0.0)
    comps = []
    for _ in range(3):
        noise = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        comps.append(hermitian_symmetrize(noise * weight))
    proj = leray_coeffs(comps, grid)
    energy2 = sum(float(np.vdot(c, c).real) for c in proj)
    if energy2 == 0.0:
        raise ConfigurationError("random field vanished after projection")
    scale = rms / math.sqrt(energy2)
    return VelocityState(*(SpectralField(grid, c * scale) for c in proj))


def perturbed_taylor_green(
    grid: Grid,
    amplitude: float = 1.0,
    perturbation: float = 0.1,
    seed: int = 0,
    k_max: float = 3.0,
) -> VelocityState:
    """Taylor-Green plus a random solenoidal perturbation with vertical velocity."""
    tg = taylor_green(grid, amplitude)
    pert = random_solenoidal(grid, seed=seed, k_max=k_max, rms=perturbation * abs(amplitude) if amplitude else perturbation)
    return VelocityState(*(a + b for a, b in zip(tg.components, pert.components)))


def from_name(name: str, grid: Grid, params: dict | None = None, seed: int = 0) -> VelocityState:
    """Library lookup used by run configurations."""
    params = dict(params or {})
    if name == "zero":
        return zero(grid)
    if name == "taylor_green":
        return taylor_green(grid, **params)
    if name == "shear":
        return shear(grid, **params)
    if name == "random_solenoidal":
        return random_solenoidal(grid, seed=seed, **params)
    if name == "perturbed_taylor_green":
        return perturbed_taylor_green(grid, seed=seed, **params)
    raise ConfigurationError(f"unknown initial data {name!r}")


NAMES = ("zero", "taylor_green", "shear", "random_solenoidal", "perturbed_taylor_green")
