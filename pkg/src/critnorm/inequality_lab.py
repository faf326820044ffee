"""Randomized numerical checks of functional inequalities.

Each suite evaluates LHS and RHS of one family of inequalities on a seeded
corpus of band-limited fields, reports the empirical constant (sup of
LHS/RHS), and repeats the evaluation for the first samples on a grid refined
by zero-padding to show the constant does not drift with resolution.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import ParameterError, ValidationError
from .initial_data import random_solenoidal
from .littlewood_paley import (
    aniso_block_table,
    aniso_from_table,
    besov_from_table,
    hss_norm,
    htheta_inner,
    htheta_norm,
    htheta_weight,
    iso_block_table,
    mixed_lebesgue,
    sobolev_norm,
    vertical_besov_horizontal_lp,
)
from .spectral_core import (
    Grid,
    Multiplier,
    SpectralField,
    VelocityState,
    apply_multiplier,
    divergence_defect,
    hermitian_symmetrize,
    inverse_transform,
    lp_norm,
    lp_norm_physical,
    product,
    resample,
    signed_power,
    signed_power_gradient_sq,
    signed_power_physical,
)

SEMANTICS = (
    "A check passes when LHS/RHS stays finite over the corpus and its supremum "
    "moves by less than the stated margin under one grid refinement. Numerical "
    "evidence can fail to falsify an inequality; it cannot prove one."
)

CORPUS_KINDS = ("scalar", "solenoidal", "single_mode", "aniso_band")
HARD_TOLERANCE = 1e-12
DEFAULT_MARGIN = 0.10
ROUGH_MARGIN = 0.15
DEFAULT_COUNT = 200
DEFAULT_REFINE_COUNT = 25
DEFAULT_N = 32


# ---------------------------------------------------------------------------
# Corpora
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Corpus:
    """Seeded family of band-limited test fields.

    Sample ``i`` is drawn from ``default_rng([seed, stream, i])`` on the
    ``n``-point grid; evaluation on finer grids zero-pads those coefficients,
    so every resolution sees the same function.

    ``k_min``/``k_max`` bound the integer radius ``|m|`` for the isotropic
    kinds; ``h_band``/``v_band`` bound ``|m_h|`` and ``|m_3|`` for
    ``aniso_band``. ``exclude_axes`` drops modes with ``m_h = 0`` or
    ``m_3 = 0`` from solenoidal fields.
    """

    seed: int = 0
    count: int = DEFAULT_COUNT
    kind: str = "scalar"
    n: int = DEFAULT_N
    k_min: float = 1.0
    k_max: float = 5.0
    h_band: tuple[float, float] = (2.0, 4.0)
    v_band: tuple[float, float] = (2.0, 4.0)
    amplitude: float = 1.0
    stream: int = 0
    exclude_axes: bool = False

    def __post_init__(self) -> None:
        if self.kind not in CORPUS_KINDS:
            raise ParameterError(f"unknown corpus kind {self.kind!r}; expected one of {CORPUS_KINDS}")
        if self.count < 0:
            raise ParameterError("corpus count must be non-negative")
        if not (0 < self.k_min <= self.k_max):
            raise ParameterError(f"need 0 < k_min <= k_max, got {self.k_min}, {self.k_max}")
        for lo, hi in (self.h_band, self.v_band):
            if not (0 < lo <= hi):
                raise ParameterError(f"band limits must satisfy 0 < lo <= hi, got ({lo}, {hi})")
        if self.amplitude < 0:
            raise ParameterError("amplitude must be non-negative")
        if self.n < 8 or self.n % 2:
            raise ParameterError("corpus grid size must be even and >= 8")
        if not _support_mask(self).any():
            raise ValidationError(f"corpus band holds no dealiased modes on {self.n}^3: {self}")

    @property
    def grid(self) -> Grid:
        return Grid.cubic(self.n)

    def derived(self, **changes) -> "Corpus":
        return replace(self, **changes)

    def support_mask(self) -> np.ndarray:
        return _support_mask(self)

    def field(self, i: int, grid: Grid | None = None):
        """Sample ``i``; a :class:`SpectralField`, or a :class:`VelocityState`
        for the solenoidal kind."""
        if not 0 <= i < self.count:
            raise IndexError(f"sample {i} outside corpus of size {self.count}")
        out = _generate(self, i)
        self.check(out)
        if grid is None or grid == self.grid:
            return out
        if isinstance(out, VelocityState):
            return VelocityState(*(resample(c, grid) for c in out.components))
        return resample(out, grid)

    def check(self, f) -> None:
        """Raise :class:`ValidationError` unless ``f`` meets the declared constraints."""
        comps = f.components if isinstance(f, VelocityState) else (f,)
        mask = self.support_mask()
        for c in comps:
            if c.grid != self.grid:
                raise ValidationError("field lives on a different grid than its corpus")
            if np.any(c.coeffs[~mask] != 0):
                raise ValidationError("field has coefficients outside the declared band")
            if c.coeffs[0, 0, 0] != 0:
                raise ValidationError("corpus fields must have zero mean")
        if isinstance(f, VelocityState) and divergence_defect(*comps) > 1e-12:
            raise ValidationError("solenoidal corpus produced a divergent field")


@lru_cache(maxsize=32)
def _support_mask(c: Corpus) -> np.ndarray:
    g = Grid.cubic(c.n)
    m = g.lattice.modes
    mh = np.sqrt(m[0] ** 2 + m[1] ** 2)
    mv = np.abs(m[2]) + 0 * mh
    if c.kind == "aniso_band":
        mask = (mh >= c.h_band[0]) & (mh <= c.h_band[1]) & (mv >= c.v_band[0]) & (mv <= c.v_band[1])
    else:
        mr = np.sqrt(mh**2 + mv**2)
        mask = (mr >= c.k_min) & (mr <= c.k_max)
        if c.exclude_axes:
            mask &= (mh > 0) & (mv > 0)
    mask = mask & g.lattice.band
    mask.flags.writeable = False
    return mask


@lru_cache(maxsize=32)
def _support_indices(c: Corpus) -> tuple[np.ndarray, ...]:
    return np.nonzero(_support_mask(c))


def _generate(c: Corpus, i: int):
    g = c.grid
    rng = np.random.default_rng([c.seed, c.stream, i])
    if c.kind == "solenoidal":
        v = random_solenoidal(g, seed=rng, k_min=c.k_min, k_max=c.k_max, rms=1.0)
        if c.exclude_axes:
            # the band mask removes axis modes after projection; projection commutes with it
            mask = c.support_mask()
            v = VelocityState(*(SpectralField(g, x.coeffs * mask) for x in v.components))
            scale = math.sqrt(2.0 * v.energy() / g.volume)
            v = VelocityState(*(x * (1.0 / scale) for x in v.components))
        return VelocityState(*(x * c.amplitude for x in v.components))
    idx = _support_indices(c)
    coeffs = np.zeros(g.shape, dtype=np.complex128)
    if c.kind == "single_mode":
        pick = int(rng.integers(idx[0].size))
        phase = rng.uniform(0.0, 2.0 * math.pi)
        p = tuple(int(a[pick]) for a in idx)
        q = tuple((-np.array(p)) % np.array(g.shape))
        coeffs[p] += 0.5 * c.amplitude * np.exp(1j * phase)
        coeffs[q] += 0.5 * c.amplitude * np.exp(-1j * phase)
        return SpectralField(g, coeffs)
    coeffs[idx] = rng.standard_normal(idx[0].size) + 1j * rng.standard_normal(idx[0].size)
    coeffs = hermitian_symmetrize(coeffs)
    total = float(np.vdot(coeffs, coeffs).real)
    if total > 0:
        coeffs *= c.amplitude / math.sqrt(total)
    return SpectralField(g, coeffs)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def ratio(lhs: float, rhs: float) -> float:
    """LHS/RHS with 0/0 = 0 and x/0 = inf."""
    if lhs == 0.0:
        return 0.0
    if rhs == 0.0:
        return math.inf
    return lhs / rhs


@dataclass(frozen=True)
class CheckSpec:
    name: str
    params: Mapping[str, float | str] = field(default_factory=dict)
    hard: bool = False
    informational: bool = False
    margin: float = DEFAULT_MARGIN


@dataclass
class CheckReport:
    name: str
    params: dict
    hard: bool
    informational: bool
    lhs: list[float]
    rhs: list[float]
    ratios: list[float]
    max_ratio: float
    violations: list[int]
    hard_violations: list[int]
    coarse_sup: float
    fine_sup: float
    refinement_change: float
    margin: float

    @property
    def stable(self) -> bool:
        return self.refinement_change <= self.margin

    @property
    def passed(self) -> bool:
        if self.informational:
            return True
        return not self.violations and not self.hard_violations and self.stable

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stable"] = self.stable
        d["passed"] = self.passed
        return d


@dataclass
class InequalityReport:
    lemma_id: str
    operation: str
    semantics: str
    corpora: dict
    coarse_n: int
    fine_n: int
    refine_count: int
    checks: list[CheckReport]
    cross_checks: dict = field(default_factory=dict)

    @property
    def violations(self) -> list[tuple[str, int]]:
        return [(c.name, i) for c in self.checks for i in c.violations]

    @property
    def hard_violations(self) -> list[tuple[str, int]]:
        return [(c.name, i) for c in self.checks for i in c.hard_violations]

    @property
    def unstable(self) -> list[str]:
        return [c.name for c in self.checks if not c.informational and not c.stable]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckReport:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def max_ratios(self) -> dict[str, float]:
        return {c.name: c.max_ratio for c in self.checks}

    def to_dict(self) -> dict:
        return {
            "lemma_id": self.lemma_id,
            "operation": self.operation,
            "semantics": self.semantics,
            "corpora": self.corpora,
            "grids": {"coarse": self.coarse_n, "fine": self.fine_n},
            "refine_count": self.refine_count,
            "checks": [c.to_dict() for c in self.checks],
            "cross_checks": self.cross_checks,
            "summary": {
                "passed": self.passed,
                "violations": len(self.violations),
                "hard_violations": len(self.hard_violations),
                "unstable": self.unstable,
            },
        }

    def to_json(self) -> str:
        return json.dumps(_json_safe(self.to_dict()), sort_keys=True, indent=1, allow_nan=False) + "\n"


def _json_safe(x):
    if isinstance(x, float):
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return _json_safe(x.item())
    return x


def _sup(values: Sequence[float]) -> float:
    return max(values, default=0.0)


def _refinement_change(coarse: float, fine: float) -> float:
    if coarse == fine:
        return 0.0
    if not (math.isfinite(coarse) and math.isfinite(fine)) or coarse == 0.0:
        return math.inf
    return abs(fine - coarse) / abs(coarse)


def _assemble(spec: CheckSpec, coarse: list[tuple[float, float]], fine: list[tuple[float, float]]) -> CheckReport:
    lhs = [float(a) for a, _ in coarse]
    rhs = [float(b) for _, b in coarse]
    ratios = [ratio(a, b) for a, b in zip(lhs, rhs)]
    fine_ratios = [ratio(float(a), float(b)) for a, b in fine]
    violations = [i for i, r in enumerate(ratios) if not math.isfinite(r)]
    violations += [len(ratios) + i for i, r in enumerate(fine_ratios) if not math.isfinite(r)]
    hard = []
    if spec.hard:
        hard = [i for i, r in enumerate(ratios) if r > 1.0 + HARD_TOLERANCE]
        hard += [len(ratios) + i for i, r in enumerate(fine_ratios) if r > 1.0 + HARD_TOLERANCE]
    coarse_sup = _sup(ratios[: len(fine_ratios)])
    fine_sup = _sup(fine_ratios)
    return CheckReport(
        name=spec.name,
        params=dict(spec.params),
        hard=spec.hard,
        informational=spec.informational,
        lhs=lhs,
        rhs=rhs,
        ratios=ratios,
        max_ratio=_sup(ratios),
        violations=violations,
        hard_violations=hard,
        coarse_sup=coarse_sup,
        fine_sup=fine_sup,
        refinement_change=_refinement_change(coarse_sup, fine_sup),
        margin=spec.margin,
    )


# ---------------------------------------------------------------------------
# Field helpers
# ---------------------------------------------------------------------------


def _deriv(f: SpectralField, orders: Sequence[int]) -> SpectralField:
    kd = f.grid.lattice.kd
    c = f.coeffs
    for axis, o in enumerate(orders):
        if o:
            c = c * (1j * kd[axis]) ** o
    return SpectralField(f.grid, c)


def _grad_htheta(f: SpectralField, theta: float) -> float:
    """||grad f||_{H_theta} as one weighted coefficient sum."""
    g = f.grid
    w = htheta_weight(g, theta) * g.lattice.kd2
    return math.sqrt(g.volume * float(np.sum(w * np.abs(f.coeffs) ** 2)))


def _omega34_norms(w: SpectralField) -> tuple[float, float]:
    """(||w_{3/4}||_{L^2}, ||grad w_{3/4}||_{L^2}); the gradient in weak form."""
    a = inverse_transform(w)
    l2 = math.sqrt(float(np.sum(np.abs(a) ** 1.5)) * w.grid.cell_volume)
    grad = math.sqrt(max(signed_power_gradient_sq(w, 0.75, method="weak"), 0.0))
    return l2, grad


def holder_constant_G() -> float:
    """C^{2/3} seminorm of G(r) = r|r|^{-1/3}; the extremal pair is (r, -r)."""
    return 2.0 ** (1.0 / 3.0)


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.6g}"


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ParameterError(msg)


# ---------------------------------------------------------------------------
# Bernstein inequalities
# ---------------------------------------------------------------------------

BERNSTEIN_PAIRS = ((1.0, 2.0), (2.0, math.inf), (1.5, 3.0))
BALL_RADIUS = 1.0
RING = (0.75, 8.0 / 3.0)
_H_MULTI = {0: ((0, 0),), 1: ((1, 0), (0, 1)), 2: ((2, 0), (1, 1), (0, 2))}


def bernstein_scales(corpus: Corpus) -> dict[str, int]:
    """Dyadic ball and ring exponents matching the corpus support.

    Raises :class:`ValidationError` when the support does not fit a ring
    ``2^k {3/4 <= r <= 8/3}`` in both directions.
    """
    if corpus.kind != "aniso_band":
        raise ValidationError("Bernstein checks need an aniso_band corpus with declared horizontal/vertical bands")
    out = {}
    for tag, (lo, hi) in (("h", corpus.h_band), ("v", corpus.v_band)):
        out[f"ball_{tag}"] = max(0, math.ceil(math.log2(hi / BALL_RADIUS)))
        k = math.ceil(math.log2(hi / RING[1]))
        if RING[0] * 2.0**k > lo:
            raise ValidationError(f"band [{lo}, {hi}] does not fit a dyadic ring 2^k[3/4, 8/3]")
        out[f"ring_{tag}"] = k
    return out


def _bernstein_checks() -> list[CheckSpec]:
    out = []
    for p2, p1 in BERNSTEIN_PAIRS:
        for order in (0, 1, 2):
            out.append(CheckSpec(f"ball_h/p2={_fmt(p2)},p1={_fmt(p1)}/order={order}", {"p2": p2, "p1": p1, "q": 2.0, "order": order}))
    for q2, q1 in BERNSTEIN_PAIRS:
        for order in (0, 1, 2):
            out.append(CheckSpec(f"ball_v/q2={_fmt(q2)},q1={_fmt(q1)}/order={order}", {"q2": q2, "q1": q1, "p": 2.0, "order": order}))
    for tag in ("h", "v"):
        for p, q in BERNSTEIN_PAIRS:
            for order in (1, 2):
                out.append(CheckSpec(f"ring_{tag}/p={_fmt(p)},q={_fmt(q)}/N={order}", {"p": p, "q": q, "N": order}))
    return out


def _eval_bernstein(fields: dict, scales: dict[str, int]) -> dict:
    a = fields["a"]
    g = a.grid
    phys = {}

    def P(orders):
        if orders not in phys:
            phys[orders] = inverse_transform(_deriv(a, orders))
        return phys[orders]

    def mixed(orders, p, q):
        return mixed_lebesgue(P(orders), g, p, q)

    out = {}
    kb, lb, kr, lr = scales["ball_h"], scales["ball_v"], scales["ring_h"], scales["ring_v"]
    for p2, p1 in BERNSTEIN_PAIRS:
        base = mixed((0, 0, 0), p2, 2.0)
        for order in (0, 1, 2):
            lhs = max(mixed((i, j, 0), p1, 2.0) for i, j in _H_MULTI[order])
            rhs = 2.0 ** (kb * (order + 2.0 * (1.0 / p2 - 1.0 / p1))) * base
            out[f"ball_h/p2={_fmt(p2)},p1={_fmt(p1)}/order={order}"] = (lhs, rhs)
    for q2, q1 in BERNSTEIN_PAIRS:
        base = mixed((0, 0, 0), 2.0, q2)
        for order in (0, 1, 2):
            lhs = mixed((0, 0, order), 2.0, q1)
            rhs = 2.0 ** (lb * (order + (1.0 / q2 - 1.0 / q1))) * base
            out[f"ball_v/q2={_fmt(q2)},q1={_fmt(q1)}/order={order}"] = (lhs, rhs)
    for p, q in BERNSTEIN_PAIRS:
        lhs = mixed((0, 0, 0), p, q)
        for order in (1, 2):
            rhs_h = 2.0 ** (-kr * order) * max(mixed((i, j, 0), p, q) for i, j in _H_MULTI[order])
            rhs_v = 2.0 ** (-lr * order) * mixed((0, 0, order), p, q)
            out[f"ring_h/p={_fmt(p)},q={_fmt(q)}/N={order}"] = (lhs, rhs_h)
            out[f"ring_v/p={_fmt(p)},q={_fmt(q)}/N={order}"] = (lhs, rhs_v)
    return out


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------

EMBED_S = (0.5, 0.9, 1.3)
EMBED_THETA_FRACTIONS = (0.2, 0.5, 0.8)
EMBED_PQ = ((2.0, 2.0), (3.0, 2.0), (2.0, 1.0))
SOBOLEV_INCLUSION = ((1.5, 3.0, 0.5, 0.5, 2.0, 2.0), (2.0, 4.0, 0.5, 0.5, 2.0, 2.0), (1.5, 3.0, 1.0, 0.5, 1.0, 1.0), (2.0, 4.0, 1.0, 0.25, 1.0, 2.0))
ISOANISO_UPPER = ((0.3, 0.4), (0.0, 0.5), (0.5, 0.0), (1.0, 1.0), (0.25, 0.75))
ISOANISO_LOWER = ((-0.3, -0.4), (-0.5, 0.0), (-0.25, -0.25), (0.0, -0.5))


def _embedding_checks_43() -> list[CheckSpec]:
    out = []
    for s in EMBED_S:
        for p, q in EMBED_PQ:
            _require(s > 0 and p >= q, f"embedding needs s > 0 and p >= q, got s={s}, p={p}, q={q}")
            out.append(CheckSpec(f"lp_vertical_besov/s={_fmt(s)},p={_fmt(p)},q={_fmt(q)}", {"s": s, "p": p, "q": q}))
    for p2, p1, s1, s2, q1, q2 in SOBOLEV_INCLUSION:
        _require(p2 <= p1, "aniso inclusion needs p2 <= p1")
        out.append(
            CheckSpec(
                f"aniso_inclusion/p2={_fmt(p2)},p1={_fmt(p1)},s1={_fmt(s1)},s2={_fmt(s2)},q1={_fmt(q1)},q2={_fmt(q2)}",
                {"p2": p2, "p1": p1, "s1": s1, "s2": s2, "q1": q1, "q2": q2},
            )
        )
    return out


def _eval_embedding_43(fields: dict) -> dict:
    a = fields["a"]
    out = {}
    iso = {p: iso_block_table(a, p) for p in {p for p, _ in EMBED_PQ}}
    for s in EMBED_S:
        for p, q in EMBED_PQ:
            out[f"lp_vertical_besov/s={_fmt(s)},p={_fmt(p)},q={_fmt(q)}"] = (
                vertical_besov_horizontal_lp(a, s, p, q),
                besov_from_table(iso[p], s, q),
            )
    tables = {}
    for p2, p1, s1, s2, q1, q2 in SOBOLEV_INCLUSION:
        for p in (p1, p2):
            if p not in tables:
                tables[p] = aniso_block_table(a, p)
        d = 1.0 / p2 - 1.0 / p1
        out[f"aniso_inclusion/p2={_fmt(p2)},p1={_fmt(p1)},s1={_fmt(s1)},s2={_fmt(s2)},q1={_fmt(q1)},q2={_fmt(q2)}"] = (
            aniso_from_table(tables[p1], s1 - 2.0 * d, q1, s2 - d, q2),
            aniso_from_table(tables[p2], s1, q1, s2, q2),
        )
    return out


def _embedding_checks_44() -> list[CheckSpec]:
    out = []
    for s in EMBED_S:
        for frac in EMBED_THETA_FRACTIONS:
            theta = frac * s
            _require(0 < theta < s, f"theta must lie in (0, s), got {theta}")
            for p, q in EMBED_PQ:
                out.append(CheckSpec(f"iso_to_aniso/s={_fmt(s)},theta={_fmt(theta)},p={_fmt(p)},q={_fmt(q)}", {"s": s, "theta": theta, "p": p, "q": q}))
    return out


def _eval_embedding_44(fields: dict) -> dict:
    a = fields["a"]
    ps = sorted({p for p, _ in EMBED_PQ})
    aniso = {p: aniso_block_table(a, p) for p in ps}
    iso = {p: iso_block_table(a, p) for p in ps}
    out = {}
    for s in EMBED_S:
        for frac in EMBED_THETA_FRACTIONS:
            theta = frac * s
            for p, q in EMBED_PQ:
                out[f"iso_to_aniso/s={_fmt(s)},theta={_fmt(theta)},p={_fmt(p)},q={_fmt(q)}"] = (
                    aniso_from_table(aniso[p], s - theta, q, theta, 1.0),
                    besov_from_table(iso[p], s, q),
                )
    return out


def _isoaniso_checks() -> list[CheckSpec]:
    out = []
    for s, sp in ISOANISO_UPPER:
        _require(s >= 0 and sp >= 0, "upper branch needs s, s' >= 0")
        out.append(CheckSpec(f"upper/s={_fmt(s)},sp={_fmt(sp)}", {"s": s, "sp": sp, "branch": "upper"}, hard=True))
    for s, sp in ISOANISO_LOWER:
        _require(s <= 0 and sp <= 0, "lower branch needs s, s' <= 0")
        out.append(CheckSpec(f"lower/s={_fmt(s)},sp={_fmt(sp)}", {"s": s, "sp": sp, "branch": "lower"}, hard=True))
    return out


def _eval_isoaniso(fields: dict) -> dict:
    a, b = fields["a"], fields["b"]
    out = {}
    for s, sp in ISOANISO_UPPER:
        out[f"upper/s={_fmt(s)},sp={_fmt(sp)}"] = (hss_norm(a, s, sp), sobolev_norm(a, s + sp))
    for s, sp in ISOANISO_LOWER:
        out[f"lower/s={_fmt(s)},sp={_fmt(sp)}"] = (sobolev_norm(b, s + sp), hss_norm(b, s, sp))
    return out


INITIAL_THETAS = (0.05, 0.125, 0.25, 0.4)


def _initial_htheta_checks() -> list[CheckSpec]:
    return [CheckSpec(f"d3w3_htheta/theta={_fmt(t)}", {"theta": t}) for t in INITIAL_THETAS]


def _eval_initial_htheta(fields: dict) -> dict:
    w = fields["w"]
    d3w3 = _deriv(w.v3, (0, 0, 1))
    rhs = math.sqrt(sum(sobolev_norm(c, 0.5) ** 2 for c in w.components))
    return {f"d3w3_htheta/theta={_fmt(t)}": (htheta_norm(d3w3, t), rhs) for t in INITIAL_THETAS}


# ---------------------------------------------------------------------------
# Product laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProductIndices:
    p1: float
    p2: float
    q: float
    s1: float
    s2: float
    sigma1: float
    sigma2: float

    def classify(self) -> str:
        """'interior' or 'endpoint'; raises :class:`ParameterError` outside the hypotheses."""
        p1, p2, q = self.p1, self.p2, self.q
        _require(q >= 1 and p1 >= p2 >= 1 and 1 / p1 + 1 / p2 <= 1 + 1e-15, f"exponents violate the product-law hypotheses: {self}")
        _require(self.s1 + self.s2 > 0 and self.sigma1 + self.sigma2 > 0, f"regularity sums must be positive: {self}")
        endpoint = False
        for val, bound in ((self.s1, 2 / p1), (self.s2, 2 / p2), (self.sigma1, 1 / p1), (self.sigma2, 1 / p2)):
            if val > bound + 1e-15:
                raise ParameterError(f"regularity index {val} exceeds its bound {bound}: {self}")
            if abs(val - bound) <= 1e-15:
                if q != 1:
                    raise ParameterError(f"index {val} on its bound {bound} requires q = 1: {self}")
                endpoint = True
        return "endpoint" if endpoint else "interior"

    @property
    def target(self) -> tuple[float, float]:
        return self.s1 + self.s2 - 2 / self.p2, self.sigma1 + self.sigma2 - 1 / self.p2

    @property
    def tag(self) -> str:
        return ",".join(f"{k}={_fmt(v)}" for k, v in asdict(self).items())


PRODUCT_INTERIOR = (
    ProductIndices(2, 2, 1, 0.5, 0.5, 0.25, 0.25),
    ProductIndices(2, 2, 2, 0.6, 0.3, 0.3, 0.1),
    ProductIndices(2, 2, 1, 0.8, -0.2, 0.4, -0.1),
    ProductIndices(4, 2, 2, 0.3, 0.5, 0.2, 0.2),
    ProductIndices(3, 1.5, 2, 0.4, 0.6, 0.2, 0.3),
    ProductIndices(4, 4, 2, 0.3, 0.3, 0.15, 0.15),
)
PRODUCT_ENDPOINT = (ProductIndices(2, 2, 1, 1.0, 1.0, 0.5, 0.5),)
PRODUCT_CRITICAL = PRODUCT_INTERIOR[0]


def _product_checks() -> list[CheckSpec]:
    out = []
    for ix in PRODUCT_INTERIOR + PRODUCT_ENDPOINT:
        cls = ix.classify()
        info = cls == "endpoint"
        params = {**asdict(ix), "class": "hypothesis-boundary, informational only" if info else "interior"}
        out.append(CheckSpec(f"product/{ix.tag}", params, informational=info))
    crit = {**asdict(PRODUCT_CRITICAL), "class": "interior"}
    out.append(CheckSpec("symmetric_a_eq_b", crit))
    out.append(CheckSpec("high_times_low", crit))
    return out


def _product_value(ix: ProductIndices, tab) -> tuple[float, float]:
    s, sig = ix.target
    lhs = aniso_from_table(tab("ab", ix.p1), s, ix.q, sig, ix.q)
    rhs = aniso_from_table(tab("a", ix.p1), ix.s1, ix.q, ix.sigma1, ix.q) * aniso_from_table(tab("b", ix.p2), ix.s2, ix.q, ix.sigma2, ix.q)
    return lhs, rhs


def _eval_product(fields: dict) -> dict:
    cache: dict = {}
    prods = {
        "main": {"a": fields["a"], "b": fields["b"]},
        "sym": {"a": fields["a"], "b": fields["a"]},
        "hl": {"a": fields["a_high"], "b": fields["b_low"]},
    }

    def tables(key):
        f = prods[key]
        if "ab" not in f:
            f["ab"] = product(f["a"], f["b"])

        def tab(role, p):
            k = (key, role, p)
            if k not in cache:
                cache[k] = aniso_block_table(f[role], p)
            return cache[k]

        return tab

    out = {}
    for ix in PRODUCT_INTERIOR + PRODUCT_ENDPOINT:
        out[f"product/{ix.tag}"] = _product_value(ix, tables("main"))
    out["symmetric_a_eq_b"] = _product_value(PRODUCT_CRITICAL, tables("sym"))
    out["high_times_low"] = _product_value(PRODUCT_CRITICAL, tables("hl"))
    return out


# ---------------------------------------------------------------------------
# Interpolation inequalities
# ---------------------------------------------------------------------------

INTERP_S = (-0.5, 0.0, 0.5, 5.0 / 6.0)
INTERP_ALPHA_THETA = tuple((a, t) for a in (0.1, 0.25, 0.4) for t in (0.1, 0.25, 0.4))
HOLDER_CASE = {"s": 0.9, "alpha": 2.0 / 3.0, "p": 2.0, "q": 2.0}


def _estimbas_checks() -> list[CheckSpec]:
    out = [CheckSpec("grad_l32", {"exponent": 1.5}, margin=ROUGH_MARGIN)]
    for s in INTERP_S:
        _require(-0.5 <= s <= 5.0 / 6.0, f"s must lie in [-1/2, 5/6], got {s}")
        out.append(CheckSpec(f"sobolev_interp/s={_fmt(s)}", {"s": s}, margin=ROUGH_MARGIN))
    out.append(CheckSpec("dual_sobolev", {"s": -0.5, "p": 1.5}))
    return out


def _eval_estimbas(fields: dict) -> tuple[dict, dict]:
    a = fields["a"]
    g = a.grid
    grads = [inverse_transform(_deriv(a, e)) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
    grad_l32 = lp_norm_physical(np.sqrt(sum(x * x for x in grads)), g, 1.5)
    a34, grad_a34 = _omega34_norms(a)
    out = {"grad_l32": (grad_l32, grad_a34 * a34 ** (1.0 / 3.0))}
    for s in INTERP_S:
        out[f"sobolev_interp/s={_fmt(s)}"] = (sobolev_norm(a, s), a34 ** (5.0 / 6.0 - s) * grad_a34 ** (0.5 + s))
    l32 = lp_norm(a, 1.5)
    out["dual_sobolev"] = (sobolev_norm(a, -0.5), l32)
    route_gap = abs(a34 ** (4.0 / 3.0) - l32) / l32 if l32 > 0 else 0.0
    return out, {"l32_two_route_gap": route_gap}


def _interp_htheta_checks() -> list[CheckSpec]:
    out = []
    for alpha, theta in INTERP_ALPHA_THETA:
        _require(0 < alpha < 0.5 and 0 < theta < 0.5, "(alpha, theta) must lie in (0, 1/2)^2")
        out.append(CheckSpec(f"aniso_interp/alpha={_fmt(alpha)},theta={_fmt(theta)}", {"alpha": alpha, "theta": theta}))
    return out


def _eval_interp_htheta(fields: dict) -> dict:
    a = fields["a"]
    tab = aniso_block_table(a, 2.0)
    out = {}
    for alpha, theta in INTERP_ALPHA_THETA:
        lhs = aniso_from_table(tab, 0.0, 1.0, 0.5 - alpha, 1.0)
        rhs = htheta_norm(a, theta) ** alpha * _grad_htheta(a, theta) ** (1.0 - alpha)
        out[f"aniso_interp/alpha={_fmt(alpha)},theta={_fmt(theta)}"] = (lhs, rhs)
    return out


def _holder_checks() -> list[CheckSpec]:
    c = HOLDER_CASE
    _require(0 < c["s"] < 1 and 0 < c["alpha"] < 1, "Holder composition needs s, alpha in (0, 1)")
    return [CheckSpec("holder_composition", dict(c), margin=ROUGH_MARGIN)]


def _eval_holder(fields: dict) -> tuple[dict, dict]:
    a = fields["a"]
    c = HOLDER_CASE
    al = c["alpha"]
    Ga = signed_power(a, al)
    lhs = besov_from_table(iso_block_table(Ga, c["p"] / al), al * c["s"], c["q"] / al)
    rhs = holder_constant_G() * besov_from_table(iso_block_table(a, c["p"]), c["s"], c["q"]) ** al
    # omega_{1/2} = G(omega_{3/4}) pointwise
    phys = inverse_transform(a)
    via_g = signed_power_physical(signed_power_physical(phys, 0.75), al)
    direct = signed_power_physical(phys, 0.5)
    scale = float(np.max(np.abs(direct), initial=0.0))
    gap = float(np.max(np.abs(via_g - direct), initial=0.0)) / scale if scale > 0 else 0.0
    return {"holder_composition": (lhs, rhs)}, {"half_power_composition_gap": gap}


# ---------------------------------------------------------------------------
# Trilinear estimates
# ---------------------------------------------------------------------------

TRILINEAR_SIGMAS = (0.8, 0.9, 0.95)
TRILINEAR_THETAS = (0.05, 0.125)
LEMMA61_CASES = ((5.0, 0.125), (4.0, 0.125), (5.0, 0.25))
LEMMA62_CASES = ((5.0, 0.125), (4.0, 0.2))
PROP21_CASES = tuple((a, t) for a in (0.1, 0.25, 0.4) for t in (0.125, 0.25))
MULTIPLIERS = {
    "id": None,
    "d33_inv_lap": (1.0, 0.0),
    "id_minus_d33_inv_lap": (1.0, -1.0),
    "id_minus_2d33_inv_lap": (1.0, -2.0),
}


def _apply_bounded(f: SpectralField, name: str) -> SpectralField:
    if name == "id":
        return f
    if name == "d33_inv_lap":
        return apply_multiplier(f, Multiplier.d33_inv_laplacian())
    _, c = MULTIPLIERS[name]
    return f + apply_multiplier(f, Multiplier.d33_inv_laplacian()) * c


def _trilinear_checks() -> list[CheckSpec]:
    out = []
    for sigma in TRILINEAR_SIGMAS:
        _require(0.75 < sigma < 1.0, f"sigma must lie in (3/4, 1), got {sigma}")
        s = 1.5 - 2.0 * sigma / 3.0
        out.append(CheckSpec(f"b1_l32/sigma={_fmt(sigma)}", {"sigma": sigma, "s": s}, margin=ROUGH_MARGIN))
        for theta in TRILINEAR_THETAS:
            _require(0 < theta < 1.0 / 6.0, f"theta must lie in (0, 1/6), got {theta}")
            out.append(CheckSpec(f"b1_htheta/sigma={_fmt(sigma)},theta={_fmt(theta)}", {"sigma": sigma, "s": s, "theta": theta}, margin=ROUGH_MARGIN))
    for p, theta in LEMMA61_CASES:
        _require(0 < theta < 0.5 - 1.0 / p, f"need 0 < theta < 1/2 - 1/p, got p={p}, theta={theta}")
        for name in MULTIPLIERS:
            out.append(CheckSpec(f"lemma61/A={name},p={_fmt(p)},theta={_fmt(theta)}", {"A": name, "p": p, "theta": theta}))
    for p, theta in LEMMA62_CASES:
        _require(0 < theta < 0.5 - 1.0 / p and theta < 2.0 / p, f"need 0 < theta < min(1/2 - 1/p, 2/p), got p={p}, theta={theta}")
        for ell in (1, 2):
            out.append(CheckSpec(f"lemma62/l={ell},p={_fmt(p)},theta={_fmt(theta)}", {"l": ell, "p": p, "theta": theta}, margin=ROUGH_MARGIN))
    for alpha, theta in PROP21_CASES:
        _require(0 < alpha < 0.5 and 0 < theta < 0.5, "(alpha, theta) must lie in (0, 1/2)^2")
        out.append(CheckSpec(f"biot_savart_aniso/alpha={_fmt(alpha)},theta={_fmt(theta)}", {"alpha": alpha, "theta": theta}, margin=ROUGH_MARGIN))
    return out


def _pair(a: SpectralField, b: SpectralField) -> float:
    return a.grid.volume * float(np.vdot(b.coeffs, a.coeffs).real)


def _eval_trilinear(fields: dict) -> dict:
    f, a, w = fields["f"], fields["a"], fields["omega"]
    g = f.grid
    out = {}
    # |int d_i lap_h^-1 f  d_j a  w_{1/2}|, maximized over i, j in {1, 2}
    inv_h = apply_multiplier(f, Multiplier.inv_laplacian_h())
    w_half = signed_power(w, 0.5)
    lhs = 0.0
    for i in (0, 1):
        fi = _deriv(inv_h, [1 if k == i else 0 for k in range(3)])
        for j in (0, 1):
            aj = _deriv(a, [1 if k == j else 0 for k in range(3)])
            lhs = max(lhs, abs(_pair(product(fi, aj), w_half)))
    w34 = signed_power(w, 0.75)
    f_l32 = lp_norm(f, 1.5)
    for sigma in TRILINEAR_SIGMAS:
        s = 1.5 - 2.0 * sigma / 3.0
        common = sobolev_norm(a, s) * sobolev_norm(w34, sigma) ** (2.0 / 3.0)
        out[f"b1_l32/sigma={_fmt(sigma)}"] = (lhs, f_l32 * common)
        for theta in TRILINEAR_THETAS:
            out[f"b1_htheta/sigma={_fmt(sigma)},theta={_fmt(theta)}"] = (lhs, htheta_norm(f, theta) * common)

    fg = product(f, fields["g"])
    d3v3 = _deriv(a, (0, 0, 1))
    for p, theta in LEMMA61_CASES:
        s2 = 0.5 - theta - 1.0 / p
        rhs = hss_norm(f, theta, s2) * hss_norm(fields["g"], theta, s2) * sobolev_norm(a, 0.5 + 2.0 / p)
        for name in MULTIPLIERS:
            lhs61 = abs(htheta_inner(_apply_bounded(fg, name), d3v3, theta))
            out[f"lemma61/A={name},p={_fmt(p)},theta={_fmt(theta)}"] = (lhs61, rhs)

    v = fields["v"]
    vd3v3 = _deriv(v.v3, (0, 0, 1))
    omega = SpectralField(g, _deriv(v.v2, (1, 0, 0)).coeffs - _deriv(v.v1, (0, 1, 0)).coeffs)
    o34, grad_o34 = _omega34_norms(omega)
    v_tabs = [aniso_block_table(v[ell], 2.0) for ell in (0, 1)]
    for p, theta in LEMMA62_CASES:
        d_h = htheta_norm(vd3v3, theta)
        grad_d_h = _grad_htheta(vd3v3, theta)
        bracket = o34 ** (1.0 / 3.0 + 2.0 / p) * grad_o34 ** (1.0 - 2.0 / p) + d_h ** (2.0 / p) * grad_d_h ** (1.0 - 2.0 / p)
        rhs = sobolev_norm(v.v3, 0.5 + 2.0 / p) * bracket * grad_d_h
        for ell in (1, 2):
            orders = [1 if k == ell - 1 else 0 for k in range(3)]
            term = product(v[ell - 1], _deriv(vd3v3, orders))
            out[f"lemma62/l={ell},p={_fmt(p)},theta={_fmt(theta)}"] = (abs(htheta_inner(term, vd3v3, theta)), rhs)
    for alpha, theta in PROP21_CASES:
        lhs21 = sum(aniso_from_table(t, 1.0, 1.0, 0.5 - alpha, 1.0) for t in v_tabs)
        rhs21 = o34 ** (1.0 / 3.0 + alpha) * grad_o34 ** (1.0 - alpha)
        rhs21 += htheta_norm(vd3v3, theta) ** alpha * _grad_htheta(vd3v3, theta) ** (1.0 - alpha)
        out[f"biot_savart_aniso/alpha={_fmt(alpha)},theta={_fmt(theta)}"] = (lhs21, rhs21)
    return out


# ---------------------------------------------------------------------------
# Suite registry and runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Suite:
    lemma_id: str
    operation: str
    primary_kind: str
    roles: tuple[tuple[str, tuple[tuple[str, object], ...]], ...]
    checks: Callable[[], list[CheckSpec]]
    evaluate: Callable[..., object]

    def corpora(self, primary: Corpus) -> dict[str, Corpus]:
        out = {}
        for i, (role, changes) in enumerate(self.roles):
            out[role] = primary if i == 0 else primary.derived(stream=primary.stream + i, **dict(changes))
        return out


def _r(role: str, **changes) -> tuple[str, tuple[tuple[str, object], ...]]:
    return role, tuple(sorted(changes.items()))


_ANISO_LOW = {"kind": "aniso_band", "h_band": (1.0, 2.0), "v_band": (1.0, 2.0)}
_ANISO_HIGH = {"kind": "aniso_band", "h_band": (3.0, 5.0), "v_band": (3.0, 5.0)}

SUITES: dict[str, Suite] = {
    s.lemma_id: s
    for s in (
        Suite("lemma4.2-bernstein", "verify_bernstein", "aniso_band", (_r("a"),), _bernstein_checks, _eval_bernstein),
        Suite("lemma4.3-embedding", "verify_embeddings", "scalar", (_r("a"),), _embedding_checks_43, _eval_embedding_43),
        Suite("lemma4.4-isoaniso", "verify_embeddings", "scalar", (_r("a"),), _embedding_checks_44, _eval_embedding_44),
        Suite("eq-isoanisoinclud", "verify_embeddings", "scalar", (_r("a"), _r("b", kind="aniso_band")), _isoaniso_checks, _eval_isoaniso),
        Suite("eq-initialdataHtheta", "verify_embeddings", "solenoidal", (_r("w"),), _initial_htheta_checks, _eval_initial_htheta),
        Suite(
            "lemma4.6-product",
            "verify_product_laws",
            "aniso_band",
            (_r("a"), _r("b", kind="aniso_band"), _r("a_high", **_ANISO_HIGH), _r("b_low", **_ANISO_LOW)),
            _product_checks,
            _eval_product,
        ),
        Suite("lemma3.2-estimbasomega34", "verify_interpolations", "scalar", (_r("a"),), _estimbas_checks, _eval_estimbas),
        Suite("lemma-interpolHtheta", "verify_interpolations", "scalar", (_r("a"),), _interp_htheta_checks, _eval_interp_htheta),
        Suite("lemma5.1-holder", "verify_interpolations", "scalar", (_r("a"),), _holder_checks, _eval_holder),
        Suite(
            "eq-b.1-trilinear",
            "verify_anisotropic_trilinear",
            "aniso_band",
            (
                _r("f"),
                _r("a", kind="scalar"),
                _r("omega", kind="scalar"),
                _r("g", kind="aniso_band"),
                _r("v", kind="solenoidal", exclude_axes=True),
            ),
            _trilinear_checks,
            _eval_trilinear,
        ),
    )
}
SUITE_IDS = tuple(SUITES)


def default_corpus(lemma_id: str, seed: int = 0, count: int = DEFAULT_COUNT, n: int = DEFAULT_N) -> Corpus:
    return Corpus(seed=seed, count=count, kind=get_suite(lemma_id).primary_kind, n=n)


def get_suite(lemma_id: str) -> Suite:
    try:
        return SUITES[lemma_id]
    except KeyError:
        raise ParameterError(f"unknown suite id {lemma_id!r}; known: {', '.join(SUITE_IDS)}") from None


def _split(result) -> tuple[dict, dict]:
    if isinstance(result, tuple):
        return result
    return result, {}


def run_suite(
    lemma_id: str,
    corpus: Corpus | None = None,
    *,
    seed: int = 0,
    count: int | None = None,
    refine_count: int = DEFAULT_REFINE_COUNT,
    refine_factor: int = 2,
    threads: int = 1,
) -> InequalityReport:
    """Evaluate one suite; samples run on a thread pool, results are reduced in index order."""
    suite = get_suite(lemma_id)
    if corpus is None:
        corpus = default_corpus(lemma_id, seed=seed, count=DEFAULT_COUNT if count is None else count)
    elif count is not None:
        corpus = corpus.derived(count=count)
    if refine_factor < 1 or refine_count < 0:
        raise ParameterError("refine_factor must be >= 1 and refine_count >= 0")
    corpora = suite.corpora(corpus)
    checks = suite.checks()
    extra = {}
    if lemma_id == "lemma4.2-bernstein":
        extra["scales"] = bernstein_scales(corpora["a"])
    coarse_grid = corpus.grid
    fine_grid = coarse_grid.refined(refine_factor)
    n_fine = min(refine_count, corpus.count)
    tasks = [(i, coarse_grid) for i in range(corpus.count)] + [(i, fine_grid) for i in range(n_fine)]

    def work(task):
        i, grid = task
        fields = {role: c.field(i, grid) for role, c in corpora.items()}
        return _split(suite.evaluate(fields, **extra))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    coarse, fine = results[: corpus.count], results[corpus.count :]
    reports = [_assemble(spec, [r[0][spec.name] for r in coarse], [r[0][spec.name] for r in fine]) for spec in checks]
    cross = {}
    for key in sorted({k for _, c in results for k in c}):
        cross[key] = max(c[key] for _, c in results)
    return InequalityReport(
        lemma_id=lemma_id,
        operation=suite.operation,
        semantics=SEMANTICS,
        corpora={role: asdict(c) for role, c in corpora.items()},
        coarse_n=coarse_grid.n[0],
        fine_n=fine_grid.n[0],
        refine_count=n_fine,
        checks=reports,
        cross_checks=cross,
    )


def _operation_runner(operation: str):
    ids = tuple(k for k, s in SUITES.items() if s.operation == operation)

    def run(corpus: Corpus | None = None, lemma_id: str = ids[0], **kwargs) -> InequalityReport:
        if lemma_id not in ids:
            raise ParameterError(f"{operation} covers {ids}, not {lemma_id!r}")
        return run_suite(lemma_id, corpus, **kwargs)

    run.__name__ = operation
    run.__doc__ = f"Run one of the suites {', '.join(ids)} (default {ids[0]})."
    run.lemma_ids = ids
    return run


verify_bernstein = _operation_runner("verify_bernstein")
verify_embeddings = _operation_runner("verify_embeddings")
verify_product_laws = _operation_runner("verify_product_laws")
verify_interpolations = _operation_runner("verify_interpolations")
verify_anisotropic_trilinear = _operation_runner("verify_anisotropic_trilinear")


def run_all(seed: int = 0, count: int = DEFAULT_COUNT, refine_count: int = DEFAULT_REFINE_COUNT, threads: int = 1) -> dict[str, InequalityReport]:
    return {lid: run_suite(lid, seed=seed, count=count, refine_count=refine_count, threads=threads) for lid in SUITE_IDS}
