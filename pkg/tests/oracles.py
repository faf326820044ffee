"""Reference computations written independently of the package.

They use explicit DFT matrices, closed-form mode sums and scalar loops; the
numbers frozen into the tests were produced by these functions.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


# --- cutoff profiles, from their defining formulas --------------------------


def smooth_step(x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    a = math.exp(-1.0 / x)
    b = math.exp(-1.0 / (1.0 - x))
    return a / (a + b)


def chi(t: float) -> float:
    return 1.0 - smooth_step((abs(t) - 0.75) / (4.0 / 3.0 - 0.75))


def phi(t: float) -> float:
    return chi(t / 2.0) - chi(t)


# --- transforms ---------------------------------------------------------------


def dft_matrix(n: int) -> np.ndarray:
    j = np.arange(n)
    return np.exp(-2j * math.pi * np.outer(j, j) / n) / n


def dft3(values: np.ndarray) -> np.ndarray:
    """Forward Fourier-series coefficients by explicit matrix products."""
    out = values.astype(np.complex128)
    for axis in range(3):
        F = dft_matrix(values.shape[axis])
        out = np.moveaxis(np.tensordot(F, np.moveaxis(out, axis, 0), axes=1), 0, axis)
    return out


def grid_points(n: int, L: float = TWO_PI) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.arange(n) * (L / n)
    return np.meshgrid(x, x, x, indexing="ij")


def cosine_mode(n: int, m, amp: float = 1.0, phase: float = 0.0, L: float = TWO_PI) -> np.ndarray:
    X, Y, Z = grid_points(n, L)
    k = [TWO_PI * mi / L for mi in m]
    return amp * np.cos(k[0] * X + k[1] * Y + k[2] * Z + phase)


# --- single-mode norms ----------------------------------------------------------


def _mode_weight(m, L):
    k = np.array(m, dtype=float) * TWO_PI / L
    return float(np.hypot(k[0], k[1])), abs(float(k[2])), float(np.linalg.norm(k))


def sobolev_single_mode(m, amp: float, s: float, L: float = TWO_PI) -> float:
    """Homogeneous H^s norm of amp*cos(k.x + phase) on the box [0, L]^3."""
    _, _, kk = _mode_weight(m, L)
    return math.sqrt(L**3 * 2.0 * (amp / 2.0) ** 2 * kk ** (2 * s))


def hss_single_mode(m, amp: float, s: float, sp: float, L: float = TWO_PI) -> float:
    kh, kv, _ = _mode_weight(m, L)
    if kh == 0 or kv == 0:
        return 0.0
    return math.sqrt(L**3 * 2.0 * (amp / 2.0) ** 2 * kh ** (2 * s) * kv ** (2 * sp))


def htheta_single_mode(m, amp: float, theta: float, L: float = TWO_PI) -> float:
    return hss_single_mode(m, amp, -0.5 + theta, -theta, L)


def besov_single_mode(n: int, m, amp: float, phase: float, s: float, p: float, q: float, L: float = TWO_PI) -> float:
    """Isotropic homogeneous Besov norm; block L^p norms by grid quadrature of the closed-form block."""
    _, _, kk = _mode_weight(m, L)
    base = cosine_mode(n, m, 1.0, phase, L)
    cell = (L / n) ** 3
    terms = []
    for j in range(-10, 20):
        w = phi(kk / 2.0**j)
        if w == 0.0:
            continue
        vals = np.abs(amp * w * base)
        lp = float(vals.max()) if math.isinf(p) else float((np.sum(vals**p) * cell) ** (1.0 / p))
        terms.append(2.0 ** (j * s) * lp)
    if math.isinf(q):
        return max(terms)
    return sum(t**q for t in terms) ** (1.0 / q)


def heat_single_mode(n: int, m, amp: float, phase: float, sigma: float, L: float = TWO_PI) -> float:
    """max over t = 4^-j of t^{sigma/2} * max_grid |e^{-t k^2} amp cos|, j over the lattice-derived range."""
    _, _, kk = _mode_weight(m, L)
    kmin = TWO_PI / L
    kmax = math.sqrt(3.0) * (n // 2) * TWO_PI / L
    peak = float(np.abs(cosine_mode(n, m, amp, phase, L)).max())
    best = 0.0
    for j in range(math.floor(math.log2(kmin)) - 2, math.ceil(math.log2(kmax)) + 3):
        t = 4.0 ** (-j)
        best = max(best, t ** (sigma / 2.0) * math.exp(-t * kk * kk) * peak)
    return best


# --- flows ----------------------------------------------------------------------------


def taylor_green_l2(amp: float = 1.0, L: float = TWO_PI) -> float:
    """L^2 norm of (A sin x cos y cos z, -A cos x sin y cos z, 0) on [0, L]^3 with x scaled to the box."""
    return math.sqrt(2.0 * amp**2 * (L / 2.0) ** 3)


def shear_energy(t: float, amp: float, mode: int, nu: float, L: float = TWO_PI) -> float:
    """(1/2)||A e^{-nu k^2 t} sin(k y)||^2 for the exact shear solution."""
    k = mode * TWO_PI / L
    return 0.5 * amp**2 * (L / 2.0) * L * L * math.exp(-2.0 * nu * k * k * t)


def mean_abs_cos_power(p: float) -> float:
    """Average of |cos|^p over a period."""
    return math.gamma((p + 1.0) / 2.0) / (math.sqrt(math.pi) * math.gamma(p / 2.0 + 1.0))


def holder_seminorm_brute(alpha: float, exponent: float, samples: int = 2001) -> float:
    """sup |G(x) - G(y)| / |x - y|^alpha for G(r) = sign(r)|r|^exponent on [-1, 1]^2."""
    x = np.linspace(-1.0, 1.0, samples)
    G = np.sign(x) * np.abs(x) ** exponent
    dx = np.abs(x[:, None] - x[None, :])
    dG = np.abs(G[:, None] - G[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dx > 0, dG / dx**alpha, 0.0)
    return float(r.max())


# --- symbolic references (sympy is a test-only dependency) --------------------


def _sympy():
    import sympy

    return sympy


def taylor_green_symbols():
    sp = _sympy()
    x, y, z = sp.symbols("x y z", real=True)
    v = (sp.sin(x) * sp.cos(y) * sp.cos(z), -sp.cos(x) * sp.sin(y) * sp.cos(z), sp.Integer(0))
    return (x, y, z), v


def symbolic_curl(coords, v):
    x, y, z = coords
    return (
        _sympy().diff(v[2], y) - _sympy().diff(v[1], z),
        _sympy().diff(v[0], z) - _sympy().diff(v[2], x),
        _sympy().diff(v[1], x) - _sympy().diff(v[0], y),
    )


def evaluate_on_grid(expr, coords, n: int, L: float = TWO_PI) -> np.ndarray:
    sp = _sympy()
    f = sp.lambdify(coords, expr, "numpy")
    X, Y, Z = grid_points(n, L)
    return np.broadcast_to(np.asarray(f(X, Y, Z), dtype=float), X.shape).copy()


def taylor_green_pressure_symbolic():
    """Closed-form pressure and a symbolic proof that -lap(Pi) = sum d_l v^m d_m v^l."""
    sp = _sympy()
    coords, v = taylor_green_symbols()
    x, y, z = coords
    pi_expr = (sp.cos(2 * x) + sp.cos(2 * y)) * (2 + sp.cos(2 * z)) / 16
    source = sum(sp.diff(v[m], coords[l]) * sp.diff(v[l], coords[m]) for l in range(3) for m in range(3))
    lap = sum(sp.diff(pi_expr, c, 2) for c in coords)
    defect = sp.simplify(sp.expand_trig(sp.expand(-lap - source)))
    return coords, pi_expr, defect
