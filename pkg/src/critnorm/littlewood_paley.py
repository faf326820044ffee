"""Dyadic frequency blocks, Besov-type norms and the Bony decomposition.

Blocks are homogeneous: the zero frequency of the relevant magnitude
(``|k|`` for isotropic blocks, ``|k_h|`` or ``|k_3|`` for the directional
ones) belongs to no block, so ``sum_j Delta_j f`` is ``f`` with those modes
removed and ``S_j = sum_{j' < j} Delta_j'`` is ``chi(2^-j r)`` away from
``r = 0`` and zero at ``r = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Mapping

import numpy as np

from .errors import ParameterError
from .spectral_core import (
    Grid,
    SpectralField,
    _parse_p,
    dealias,
    inverse_transform,
    lp_norm,
    transform,
)

MODES = ("iso", "horizontal", "vertical")

CHI_FLAT = 0.75
CHI_EDGE = 4.0 / 3.0
PHI_LOW = 0.75
PHI_HIGH = 8.0 / 3.0

# ---------------------------------------------------------------------------
# Cutoff profiles
# ---------------------------------------------------------------------------


def _bump(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", divide="ignore"):
        out[pos] = np.exp(-1.0 / x[pos])
    return out


def _ramp(x: np.ndarray) -> np.ndarray:
    """Smooth step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    if np.any(mid):
        a = _bump(x[mid])
        b = _bump(1.0 - x[mid])
        out[mid] = a / (a + b)
    return out


@dataclass(frozen=True)
class CutoffPair:
    """Radial profiles chi (low-pass) and phi (annular)."""

    def chi(self, tau) -> np.ndarray:
        t = np.abs(np.asarray(tau, dtype=np.float64))
        return 1.0 - _ramp((t - CHI_FLAT) / (CHI_EDGE - CHI_FLAT))

    def phi(self, tau) -> np.ndarray:
        t = np.asarray(tau, dtype=np.float64)
        return self.chi(0.5 * t) - self.chi(t)

    # invariant helpers
    def partition_defect(self, tau: np.ndarray, j_lo: int = -60, j_hi: int = 60) -> float:
        """max |sum_{j in [j_lo, j_hi]} phi(2^-j tau) - 1| over ``tau``."""
        tau = np.asarray(tau, dtype=np.float64)
        total = np.zeros_like(tau)
        for j in range(j_lo, j_hi + 1):
            total += self.phi(np.ldexp(tau, -j))
        return float(np.max(np.abs(total - 1.0)))

    def low_partition_defect(self, tau: np.ndarray, j_hi: int = 60) -> float:
        """max |chi(tau) + sum_{j=0..j_hi} phi(2^-j tau) - 1|."""
        tau = np.asarray(tau, dtype=np.float64)
        total = self.chi(tau)
        for j in range(0, j_hi + 1):
            total = total + self.phi(np.ldexp(tau, -j))
        return float(np.max(np.abs(total - 1.0)))


_CUTOFFS = CutoffPair()


def make_cutoffs(check: bool = True) -> CutoffPair:
    """Build the cutoff pair and assert its invariants on a sample grid."""
    cp = _CUTOFFS
    if check:
        tau = np.concatenate([np.linspace(0.0, 4.0, 4001), np.geomspace(1e-3, 1e3, 2001)])
        if np.any(cp.chi(tau[np.abs(tau) <= CHI_FLAT]) != 1.0):
            raise AssertionError("chi is not flat on |tau| <= 3/4")
        if np.any(cp.chi(tau[np.abs(tau) >= CHI_EDGE]) != 0.0):
            raise AssertionError("chi leaks outside |tau| <= 4/3")
        outside = (np.abs(tau) <= PHI_LOW) | (np.abs(tau) >= PHI_HIGH)
        if np.any(cp.phi(tau[outside]) != 0.0):
            raise AssertionError("phi leaks outside 3/4 <= |tau| <= 8/3")
        pos = tau[tau > 0]
        if cp.partition_defect(pos) > 1e-12 or cp.low_partition_defect(pos) > 1e-12:
            raise AssertionError("partition of unity violated")
    return cp


# ---------------------------------------------------------------------------
# Block index ranges and block multipliers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockIndexRange:
    j_min: int
    j_max: int

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.j_min, self.j_max + 1))

    def __contains__(self, j: int) -> bool:
        return self.j_min <= j <= self.j_max

    def __len__(self) -> int:
        return max(0, self.j_max - self.j_min + 1)


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ParameterError(f"block mode must be one of {MODES}, got {mode!r}")
    return mode


def _radius(grid: Grid, mode: str) -> np.ndarray:
    lat = grid.lattice
    return {"iso": lat.kmag, "horizontal": lat.kh, "vertical": lat.kv}[mode]


@lru_cache(maxsize=64)
def block_range(grid: Grid, mode: str = "iso") -> BlockIndexRange:
    """Indices j for which phi(2^-j r) is nonzero at some lattice radius."""
    _check_mode(mode)
    r = np.unique(_radius(grid, mode))
    r = r[r > 0]
    lo = math.floor(math.log2(PHI_LOW * r.min() / PHI_HIGH)) - 1
    hi = math.ceil(math.log2(r.max() / PHI_LOW)) + 1
    keep = [j for j in range(lo, hi + 1) if np.any(_CUTOFFS.phi(np.ldexp(r, -j)) != 0.0)]
    return BlockIndexRange(min(keep), max(keep))


@lru_cache(maxsize=512)
def block_symbol(grid: Grid, mode: str, j: int, kind: str = "delta") -> np.ndarray:
    """Real broadcastable multiplier of Delta_j (``kind="delta"``) or S_j (``"low"``)."""
    _check_mode(mode)
    r = _radius(grid, mode)
    scaled = np.ldexp(r, -int(j))
    if kind == "delta":
        sym = _CUTOFFS.phi(scaled)
    elif kind == "low":
        sym = np.where(r > 0, _CUTOFFS.chi(scaled), 0.0)
    else:
        raise ParameterError(f"block kind must be 'delta' or 'low', got {kind!r}")
    sym.flags.writeable = False
    return sym


def dyadic_block(f: SpectralField, mode: str, j: int, kind: str = "delta") -> SpectralField:
    """Delta_j or S_j of ``f`` in the given mode; out-of-range j gives the
    natural value (zero for Delta_j)."""
    return SpectralField(f.grid, f.coeffs * block_symbol(f.grid, mode, int(j), kind))


def blocks(f: SpectralField, mode: str = "iso") -> dict[int, SpectralField]:
    return {j: dyadic_block(f, mode, j) for j in block_range(f.grid, mode)}


def block_lp_norms(f: SpectralField, mode: str, p) -> dict[int, float]:
    """L^p norm of each retained block (zero blocks skip the transform)."""
    out = {}
    for j in block_range(f.grid, mode):
        c = f.coeffs * block_symbol(f.grid, mode, j)
        out[j] = 0.0 if not np.any(c) else lp_norm(SpectralField(f.grid, c), p)
    return out


# ---------------------------------------------------------------------------
# Norm specifications
# ---------------------------------------------------------------------------

_FAMILY_ALIASES = {
    "besov": "besov",
    "aniso": "aniso",
    "anisobesov": "aniso",
    "hss": "hss",
    "sobolevaniso": "hss",
    "htheta": "htheta",
    "heat": "heat",
    "heatbesov": "heat",
    "leb": "leb",
    "lebesgue": "leb",
    "sobolev": "sobolev",
}

_FAMILY_PARAMS = {
    "besov": ("s", "p", "q"),
    "aniso": ("s1", "p", "q1", "s2", "q2"),
    "hss": ("s", "sp"),
    "htheta": ("theta",),
    "heat": ("sigma",),
    "leb": ("p",),
    "sobolev": ("s",),
}


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _num(token: str, name: str) -> float:
    t = token.strip().lower()
    if t in ("inf", "infinity", "+inf"):
        return math.inf
    try:
        if "/" in t:
            a, b = t.split("/", 1)
            return float(a) / float(b)
        return float(t)
    except (ValueError, ZeroDivisionError):
        raise ParameterError(f"cannot parse value {token!r} for {name!r}") from None


@dataclass(frozen=True)
class NormSpec:
    """Declarative norm description.

    Families and parameters (text encoding ``family:key=value,...``):

    ``besov`` (s, p, q), ``aniso`` (s1, p, q1, s2, q2), ``hss`` (s, sp) for
    ``H^{s,s'}``, ``htheta`` (theta), ``heat`` (sigma; or p with
    sigma = 2 - 2/p), ``leb`` (p), ``sobolev`` (s) for the isotropic
    homogeneous ``H^s``.
    """

    family: str
    params: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        fam = _FAMILY_ALIASES.get(str(self.family).lower())
        if fam is None:
            raise ParameterError(f"unknown norm family {self.family!r}")
        params = dict((str(k), float(v)) for k, v in (self.params.items() if isinstance(self.params, Mapping) else self.params))
        if fam == "heat" and "p" in params and "sigma" not in params:
            p = params.pop("p")
            if not (1.0 < p <= math.inf):
                raise ParameterError(f"heat norm exponent p must lie in (1, inf], got {p}")
            params["sigma"] = 2.0 - 2.0 / p
        expected = _FAMILY_PARAMS[fam]
        missing = [k for k in expected if k not in params]
        extra = [k for k in params if k not in expected]
        if missing or extra:
            raise ParameterError(f"{fam} norm needs parameters {expected}; missing {missing}, unexpected {extra}")
        _validate(fam, params)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "params", tuple((k, params[k]) for k in expected))

    def __getitem__(self, key: str) -> float:
        return dict(self.params)[key]

    def encode(self) -> str:
        return f"{self.family}:" + ",".join(f"{k}={_fmt(v)}" for k, v in self.params)

    def __str__(self) -> str:
        return self.encode()

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        if ":" not in text:
            raise ParameterError(f"norm spec {text!r} lacks 'family:' prefix")
        fam, _, body = text.partition(":")
        params = {}
        for tok in filter(None, (t.strip() for t in body.split(","))):
            if "=" not in tok:
                raise ParameterError(f"malformed token {tok!r} in norm spec {text!r}")
            k, _, v = tok.partition("=")
            k = k.strip().lower()
            if k in params:
                raise ParameterError(f"duplicate key {k!r} in norm spec {text!r}")
            params[k] = _num(v, k)
        return cls(fam.strip(), tuple(params.items()))

    # convenience constructors
    @classmethod
    def besov(cls, s, p, q) -> "NormSpec":
        return cls("besov", (("s", s), ("p", p), ("q", q)))

    @classmethod
    def aniso(cls, s1, p, q1, s2, q2) -> "NormSpec":
        return cls("aniso", (("s1", s1), ("p", p), ("q1", q1), ("s2", s2), ("q2", q2)))

    @classmethod
    def hss(cls, s, sp) -> "NormSpec":
        return cls("hss", (("s", s), ("sp", sp)))

    @classmethod
    def htheta(cls, theta) -> "NormSpec":
        return cls("htheta", (("theta", theta),))

    @classmethod
    def heat(cls, sigma) -> "NormSpec":
        return cls("heat", (("sigma", sigma),))

    @classmethod
    def bp(cls, p) -> "NormSpec":
        return cls("heat", (("p", p),))

    @classmethod
    def lebesgue(cls, p) -> "NormSpec":
        return cls("leb", (("p", p),))

    @classmethod
    def sobolev(cls, s) -> "NormSpec":
        return cls("sobolev", (("s", s),))


def _validate(fam: str, prm: dict[str, float]) -> None:
    for k, v in prm.items():
        if math.isnan(v):
            raise ParameterError(f"{k} is NaN")
    for k in ("p", "q", "q1", "q2"):
        if k in prm and prm[k] < 1:
            raise ParameterError(f"{k} must lie in [1, inf], got {prm[k]}")
    for k in ("s", "s1", "s2", "sp"):
        if k in prm and math.isinf(prm[k]):
            raise ParameterError(f"{k} must be finite")
    if fam == "htheta" and not (0.0 < prm["theta"] < 0.5):
        raise ParameterError(f"theta must lie in (0, 1/2), got {prm['theta']}")
    if fam == "heat" and not (0.0 < prm["sigma"] < math.inf):
        raise ParameterError(f"heat norm needs sigma > 0, got {prm['sigma']}")


def parse_normspec(text: str) -> NormSpec:
    return NormSpec.parse(text)


# ---------------------------------------------------------------------------
# Norm evaluation
# ---------------------------------------------------------------------------


def _lq(values, q: float) -> float:
    v = np.asarray(list(values), dtype=np.float64)
    if v.size == 0:
        return 0.0
    if math.isinf(q):
        return float(v.max())
    m = float(v.max())
    if m == 0.0:
        return 0.0
    return m * float(np.sum((v / m) ** q)) ** (1.0 / q)


def besov_norm(f: SpectralField, s: float, p, q) -> float:
    """Homogeneous isotropic Besov norm over retained blocks."""
    norms = block_lp_norms(f, "iso", p)
    return _lq((2.0 ** (j * s) * v for j, v in norms.items()), q)


def _block_norm(f: SpectralField, c: np.ndarray, p: float) -> float:
    if p == 2.0:
        # discrete Parseval: identical to the grid quadrature up to round-off
        return math.sqrt(f.grid.volume * float(np.vdot(c, c).real))
    return lp_norm(SpectralField(f.grid, c), p)


def aniso_block_table(f: SpectralField, p) -> dict[tuple[int, int], float]:
    """L^p norms of every nonzero block Delta_k^h Delta_l^v f, keyed by (k, l)."""
    g = f.grid
    p = _parse_p(p)
    table = {}
    for k in block_range(g, "horizontal"):
        ch = f.coeffs * block_symbol(g, "horizontal", k)
        if not np.any(ch):
            continue
        for ell in block_range(g, "vertical"):
            c = ch * block_symbol(g, "vertical", ell)
            if np.any(c):
                table[(k, ell)] = _block_norm(f, c, p)
    return table


def aniso_from_table(table: dict[tuple[int, int], float], s1: float, q1: float, s2: float, q2: float) -> float:
    """Combine a block table into the (B^{s1}_{p,q1})_h (B^{s2}_{p,q2})_v norm."""
    rows: dict[int, list[float]] = {}
    for (k, ell), v in sorted(table.items()):
        rows.setdefault(k, []).append(2.0 ** (ell * s2) * v)
    return _lq((2.0 ** (k * s1) * _lq(inner, q2) for k, inner in rows.items()), q1)


def iso_block_table(f: SpectralField, p) -> dict[int, float]:
    """Like :func:`block_lp_norms` but with the Parseval shortcut at p = 2."""
    g = f.grid
    p = _parse_p(p)
    out = {}
    for j in block_range(g, "iso"):
        c = f.coeffs * block_symbol(g, "iso", j)
        if np.any(c):
            out[j] = _block_norm(f, c, p)
    return out


def besov_from_table(table: dict[int, float], s: float, q: float) -> float:
    return _lq((2.0 ** (j * s) * v for j, v in sorted(table.items())), q)


def aniso_besov_norm(f: SpectralField, s1: float, p, q1: float, s2: float, q2: float) -> float:
    """Vertical l^q2 sum inside the horizontal l^q1 sum."""
    return aniso_from_table(aniso_block_table(f, p), s1, q1, s2, q2)


def hss_weight(grid: Grid, s: float, sp: float) -> np.ndarray:
    """|k_h|^{2s} |k_3|^{2s'} with k_h = 0 and k_3 = 0 modes removed."""
    lat = grid.lattice
    kh, kv = lat.kh, lat.kv
    keep = (kh > 0) & (kv > 0)
    with np.errstate(divide="ignore"):
        w = np.where(keep, np.where(kh > 0, kh, 1.0) ** (2 * s) * np.where(kv > 0, kv, 1.0) ** (2 * sp), 0.0)
    return w


_hss_weight_cached = lru_cache(maxsize=64)(hss_weight)


def hss_norm(f: SpectralField, s: float, sp: float) -> float:
    w = _hss_weight_cached(f.grid, float(s), float(sp))
    return math.sqrt(f.grid.volume * float(np.sum(w * (f.coeffs.real**2 + f.coeffs.imag**2))))


def htheta_weight(grid: Grid, theta: float) -> np.ndarray:
    return _hss_weight_cached(grid, -0.5 + float(theta), -float(theta))


def htheta_norm(f: SpectralField, theta: float) -> float:
    return hss_norm(f, -0.5 + theta, -theta)


def htheta_inner(a: SpectralField, b: SpectralField, theta: float) -> float:
    """Weighted coefficient pairing that induces the H_theta norm."""
    w = htheta_weight(a.grid, theta)
    return a.grid.volume * float(np.sum(w * (a.coeffs * np.conj(b.coeffs)).real))


@lru_cache(maxsize=64)
def _iso_weight(grid: Grid, s: float) -> np.ndarray:
    k = grid.lattice.kmag
    with np.errstate(divide="ignore"):
        w = np.where(k > 0, np.where(k > 0, k, 1.0) ** (2 * s), 0.0)
    w.flags.writeable = False
    return w


def sobolev_norm(f: SpectralField, s: float) -> float:
    """Homogeneous isotropic H^s norm (k = 0 excluded)."""
    w = _iso_weight(f.grid, float(s))
    return math.sqrt(f.grid.volume * float(np.sum(w * (f.coeffs.real**2 + f.coeffs.imag**2))))


def heat_times(grid: Grid) -> np.ndarray:
    """Sample times t_m = 2^(-2m), m from floor(log2 k_min) - 2 to ceil(log2 k_max) + 2."""
    kmin, kmax = grid.nonzero_k_range("iso")
    m_lo = math.floor(math.log2(kmin)) - 2
    m_hi = math.ceil(math.log2(kmax)) + 2
    return np.array([2.0 ** (-2 * m) for m in range(m_lo, m_hi + 1)])


def heat_norm(f: SpectralField, sigma: float) -> float:
    """max_m t_m^{sigma/2} ||exp(t_m lap) f||_inf, zero mode removed."""
    g = f.grid
    k2 = g.lattice.k2
    c = np.array(f.coeffs)
    c[0, 0, 0] = 0.0
    if not np.any(c):
        return 0.0
    best = 0.0
    for t in heat_times(g):
        sm = SpectralField(g, c * np.exp(-t * k2))
        best = max(best, t ** (0.5 * sigma) * lp_norm(sm, math.inf))
    return best


def norm(f: SpectralField, spec: NormSpec | str) -> float:
    """Evaluate ``spec`` on ``f``."""
    if isinstance(spec, str):
        spec = NormSpec.parse(spec)
    prm = dict(spec.params)
    fam = spec.family
    if fam == "besov":
        return besov_norm(f, prm["s"], prm["p"], prm["q"])
    if fam == "aniso":
        return aniso_besov_norm(f, prm["s1"], prm["p"], prm["q1"], prm["s2"], prm["q2"])
    if fam == "hss":
        return hss_norm(f, prm["s"], prm["sp"])
    if fam == "htheta":
        return htheta_norm(f, prm["theta"])
    if fam == "heat":
        return heat_norm(f, prm["sigma"])
    if fam == "leb":
        return lp_norm(f, prm["p"])
    if fam == "sobolev":
        return sobolev_norm(f, prm["s"])
    raise ParameterError(f"unknown norm family {fam!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# Mixed Lebesgue norms
# ---------------------------------------------------------------------------


def _axis_lp(values: np.ndarray, p: float, axes, cell: float) -> np.ndarray:
    a = np.abs(values)
    if math.isinf(p):
        return a.max(axis=axes)
    return (np.sum(a**p, axis=axes) * cell) ** (1.0 / p)


def mixed_lebesgue(values: np.ndarray, grid: Grid, p_h, q_v) -> float:
    """||f||_{L^p_h(L^q_v)}: vertical L^q first, then horizontal L^p."""
    p_h = float(p_h)
    q_v = float(q_v)
    dz = grid.L[2] / grid.n[2]
    dA = grid.L[0] * grid.L[1] / (grid.n[0] * grid.n[1])
    inner = _axis_lp(values, q_v, 2, dz)
    return float(_axis_lp(inner, p_h, (0, 1), dA))


def mixed_norm(f: SpectralField, p_h, q_v) -> float:
    return mixed_lebesgue(inverse_transform(f), f.grid, p_h, q_v)


def vertical_besov_horizontal_lp(f: SpectralField, s: float, p, q) -> float:
    """||f||_{L^p_h((B^s_{p,q})_v)}: per horizontal point, the vertical Besov
    norm of the column; then L^p over the horizontal plane."""
    g = f.grid
    p = float(p)
    dz = g.L[2] / g.n[2]
    dA = g.L[0] * g.L[1] / (g.n[0] * g.n[1])
    cols = []
    for ell in block_range(g, "vertical"):
        c = f.coeffs * block_symbol(g, "vertical", ell)
        if not np.any(c):
            continue
        col = _axis_lp(inverse_transform(SpectralField(g, c)), p, 2, dz)
        cols.append(2.0 ** (ell * s) * col)
    if not cols:
        return 0.0
    stack = np.stack(cols)
    if math.isinf(q):
        per_point = stack.max(axis=0)
    else:
        per_point = np.sum(stack**q, axis=0) ** (1.0 / q)
    return float(_axis_lp(per_point, p, (0, 1), dA))


# ---------------------------------------------------------------------------
# Bony decomposition
# ---------------------------------------------------------------------------


def _paraproduct(a: SpectralField, b: SpectralField) -> np.ndarray:
    g = a.grid
    a0 = a.coeffs[0, 0, 0].real
    acc = np.zeros(g.shape)
    for j in block_range(g, "iso"):
        db = b.coeffs * block_symbol(g, "iso", j)
        if not np.any(db):
            continue
        low = a.coeffs * block_symbol(g, "iso", j - 1, "low")
        low_phys = inverse_transform(SpectralField(g, low)) + a0
        acc += low_phys * inverse_transform(SpectralField(g, db))
    return acc


def bony_decompose(a: SpectralField, b: SpectralField) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Return ``(T(a,b), T(b,a), R(a,b))``, each dealiased.

    ``T(a,b) = sum_j (a_0 + S_{j-1}a) Delta_j b`` and
    ``R(a,b) = a_0 b_0 + sum_j Delta_j a (Delta_{j-1} + Delta_j + Delta_{j+1}) b``,
    where ``a_0`` is the mean. The three parts sum to the dealiased product.
    """
    g = a.grid
    if b.grid != g:
        raise ParameterError("bony_decompose needs fields on one grid")
    t_ab = dealias(transform(_paraproduct(a, b), g))
    t_ba = dealias(transform(_paraproduct(b, a), g))
    rem = np.full(g.shape, a.coeffs[0, 0, 0].real * b.coeffs[0, 0, 0].real)
    for j in block_range(g, "iso"):
        da = a.coeffs * block_symbol(g, "iso", j)
        if not np.any(da):
            continue
        wide = sum(block_symbol(g, "iso", jj) for jj in (j - 1, j, j + 1))
        db = b.coeffs * wide
        if not np.any(db):
            continue
        rem = rem + inverse_transform(SpectralField(g, da)) * inverse_transform(SpectralField(g, db))
    r_ab = dealias(transform(rem, g))
    return t_ab, t_ba, r_ab
