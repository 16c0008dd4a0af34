"""KANOVA decomposition of covariance kernels and projected kernels.

A kernel ``k`` on ``D × D`` with ``D = D_1 × ... × D_d`` splits uniquely into
``4**d`` terms ``k_{u,v} = (T_u ⊗ T_v) k`` indexed by pairs of coordinate
subsets.  For tensor-product kernels ``k = ∏ k_i`` every term factorizes per
dimension, which is what makes ``d = 30`` tractable::

    k_{u,v}(x, y) = ∏_{u∩v} k0_i(x_i, y_i) · ∏_{u∖v} (E_i(x_i) - ℰ_i)
                    · ∏_{v∖u} (E_i(y_i) - ℰ_i) · ∏_{rest} ℰ_i

All kernels here are callables ``k(x, y)`` that broadcast over leading axes;
the last axis holds the ``d`` coordinates.  A Gram matrix is therefore
``k(X[:, None, :], Y[None, :, :])``.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple

import numpy as np

from . import subsets as ss
from .errors import (
    EvaluationError,
    InvalidArgumentError,
    PreconditionError,
    ResourceLimitError,
)
from .kernels import Kernel1D
from .quadrature import (
    DEFAULT_ORDER,
    Measure1D,
    ProductMeasure,
    gauss_legendre,
    split_rule,
)

MAX_EXPLICIT_TERMS = 4**10
GENERIC_MAX_DIM = 3
GENERIC_BUDGET = 200_000

FAMILY_NAMES = (
    "k_full",
    "k_anova",
    "k_A*+O",
    "k_A+O*",
    "k_inter",
    "k_A*",
    "k_A",
    "k_sparse",
)
SPARSE_SUBSETS = (ss.EMPTY, ss.mask([0]), ss.mask([1]), ss.mask([1, 2]), ss.mask([3, 4]))


# ---------------------------------------------------------------------------
# tensor-product kernels
# ---------------------------------------------------------------------------


class _Pieces(NamedTuple):
    """Per-dimension building blocks, stacked along the last axis."""

    k: np.ndarray  # k_i(x_i, y_i)
    k0: np.ndarray  # centred factor
    Ex: np.ndarray  # E_i(x_i)
    Ey: np.ndarray  # E_i(y_i)
    calE: np.ndarray  # ℰ_i, shape (d,)

    @property
    def ex(self):
        return self.Ex - self.calE

    @property
    def ey(self):
        return self.Ey - self.calE


@dataclass(frozen=True)
class ProductKernel:
    """``k(x, y) = ∏_i k_i(x_i, y_i)`` with the uniform measure on each factor domain."""

    factors: tuple[Kernel1D, ...]
    measures: ProductMeasure | None = None

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise InvalidArgumentError("a product kernel needs at least one factor")
        object.__setattr__(self, "factors", factors)
        if self.measures is None:
            measures = ProductMeasure(tuple(Measure1D(f.domain) for f in factors))
            object.__setattr__(self, "measures", measures)
        if self.measures.d != len(factors):
            raise InvalidArgumentError("measure dimension does not match the number of factors")
        for f, m in zip(factors, self.measures.coordinates):
            if f.domain != m.support:
                raise InvalidArgumentError("factor domains must match the measure supports")

    @classmethod
    def isotropic(cls, factor: Kernel1D, d: int, order: int = DEFAULT_ORDER) -> "ProductKernel":
        measures = ProductMeasure(tuple(Measure1D(factor.domain, quadrature_order=order) for _ in range(d)))
        return cls((factor,) * d, measures)

    @property
    def d(self) -> int:
        return len(self.factors)

    @functools.cached_property
    def double_integrals(self) -> np.ndarray:
        return np.array([f.double_integral() for f in self.factors])

    def _coords(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise InvalidArgumentError(f"expected points with {self.d} coordinates, got shape {x.shape}")
        return x

    def __call__(self, x, y):
        x, y = self._coords(x), self._coords(y)
        out = 1.0
        for i, f in enumerate(self.factors):
            out = out * f(x[..., i], y[..., i])
        return np.asarray(out)

    def embeddings(self, x) -> np.ndarray:
        """``E_i(x_i)`` stacked along the last axis."""
        x = self._coords(x)
        return np.stack([f.mean_embedding(x[..., i]) for i, f in enumerate(self.factors)], axis=-1)

    def pieces(self, x, y) -> _Pieces:
        x, y = self._coords(x), self._coords(y)
        Ex, Ey = self.embeddings(x), self.embeddings(y)
        k = np.stack([f(x[..., i], y[..., i]) for i, f in enumerate(self.factors)], axis=-1)
        calE = self.double_integrals
        k, Ex, Ey = np.broadcast_arrays(k, Ex, Ey)
        return _Pieces(k, k - Ex - Ey + calE, Ex, Ey, calE)


def _term_from_pieces(pc: _Pieces, u: int, v: int) -> np.ndarray:
    out = np.ones(pc.k.shape[:-1])
    for i in range(pc.calE.size):
        bit = 1 << i
        if u & bit and v & bit:
            out = out * pc.k0[..., i]
        elif u & bit:
            out = out * (pc.Ex[..., i] - pc.calE[i])
        elif v & bit:
            out = out * (pc.Ey[..., i] - pc.calE[i])
        else:
            out = out * pc.calE[i]
    return out


def kanova_term_product(pk: ProductKernel, u: int, v: int, x, y) -> np.ndarray:
    """KANOVA term ``k_{u,v}(x, y)`` of a tensor-product kernel."""
    ss.check(u, pk.d)
    ss.check(v, pk.d)
    _check_inside(pk.measures, x, y)
    return _term_from_pieces(pk.pieces(x, y), u, v)


def _check_inside(measures: ProductMeasure, *points):
    for p in points:
        if not measures.contains(p):
            raise InvalidArgumentError("evaluation point outside the kernel domain")


def _truncated_star(pc: _Pieces, max_card: int) -> np.ndarray:
    """Σ_{|u| <= max_card} ∏_{i∈u} k0_i ∏_{i∉u} ℰ_i by dynamic programming."""
    shape = pc.k.shape[:-1]
    e = [np.ones(shape)] + [np.zeros(shape) for _ in range(max_card)]
    for i in range(pc.calE.size):
        ci, ki = pc.calE[i], pc.k0[..., i]
        for j in range(max_card, 0, -1):
            e[j] = e[j] * ci + e[j - 1] * ki
        e[0] = e[0] * ci
    return sum(e)


def _anova(pc: _Pieces) -> np.ndarray:
    return np.prod(pc.calE + pc.k0, axis=-1)


# ---------------------------------------------------------------------------
# generic (non-product) kernels by quadrature
# ---------------------------------------------------------------------------


def _pair_rule(meas: Measure1D, n: int, x_fixed: bool, y_fixed: bool, xi: float, yi: float):
    """Joint nodes in (x_i, y_i) for one coordinate, with kinks at x_i = y_i resolved."""
    iv = meas.support
    if x_fixed and y_fixed:
        return np.array([xi]), np.array([yi]), np.ones(1)
    if x_fixed:
        r = split_rule(n, iv, xi)
        return np.full(len(r), xi), r.nodes, r.weights
    if y_fixed:
        r = split_rule(n, iv, yi)
        return r.nodes, np.full(len(r), yi), r.weights
    outer = gauss_legendre(n, iv)
    xs, ys, ws = [], [], []
    for t, w in zip(outer.nodes, outer.weights):
        r = split_rule(n, iv, t)
        xs.append(r.nodes)
        ys.append(np.full(len(r), t))
        ws.append(w * r.weights)
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def _generic_order(measures: ProductMeasure, budget: int) -> int:
    d = measures.d
    n = max(m.quadrature_order for m in measures.coordinates)
    while n > 1 and (2 * n * n) ** d > budget:
        n -= 1
    return n


def _partial_integral(k, measures, n, x, y, u1: int, v1: int) -> float:
    """∫ k(x, y) ν_{-u1}(dx_{-u1}) ν_{-v1}(dy_{-v1})."""
    X = np.zeros((1, 0))
    Y = np.zeros((1, 0))
    W = np.ones(1)
    for i, meas in enumerate(measures.coordinates):
        xs, ys, ws = _pair_rule(meas, n, bool(u1 >> i & 1), bool(v1 >> i & 1), x[i], y[i])
        m = len(ws)
        X = np.column_stack([np.repeat(X, m, axis=0), np.tile(xs, W.size)])
        Y = np.column_stack([np.repeat(Y, m, axis=0), np.tile(ys, W.size)])
        W = np.repeat(W, m) * np.tile(ws, W.size)
    vals = np.asarray(k(X, Y), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise EvaluationError("kernel returned non-finite values during integration")
    return float(np.dot(W, vals))


def kanova_term_generic(
    k: Callable,
    u: int,
    v: int,
    x,
    y,
    measures: ProductMeasure,
    budget: int = GENERIC_BUDGET,
) -> np.ndarray:
    """KANOVA term of an arbitrary kernel by the Möbius sum of partial integrals.

    ``x`` and ``y`` are single points of shape ``(d,)`` or stacks of pairs of
    shape ``(N, d)``.  Limited to ``d <= 3``: the ``(u', v') = (∅, ∅)``
    integral is ``2d``-dimensional.
    """
    d = measures.d
    if d > GENERIC_MAX_DIM:
        raise ResourceLimitError(
            f"generic KANOVA terms need {2 * d}-dimensional integrals (d={d} > {GENERIC_MAX_DIM}); "
            "use kanova_term_product for tensor-product kernels"
        )
    ss.check(u, d)
    ss.check(v, d)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    x, y = np.broadcast_arrays(x, y)
    _check_inside(measures, x, y)
    n = _generic_order(measures, budget)
    cu, cv = ss.card(u), ss.card(v)
    cache: dict = {}
    out = np.empty(x.shape[0])
    for r in range(x.shape[0]):
        total = 0.0
        for u1 in ss.subsets_of(u):
            for v1 in ss.subsets_of(v):
                key = (
                    u1,
                    v1,
                    tuple(x[r, list(ss.members(u1))]),
                    tuple(y[r, list(ss.members(v1))]),
                )
                if key not in cache:
                    cache[key] = _partial_integral(k, measures, n, x[r], y[r], u1, v1)
                sign = -1.0 if (cu + cv - ss.card(u1) - ss.card(v1)) % 2 else 1.0
                total += sign * cache[key]
        out[r] = total
    return out


# ---------------------------------------------------------------------------
# closed forms for additive / ortho-additive components
# ---------------------------------------------------------------------------


class AdditiveComponents(NamedTuple):
    pi_A: np.ndarray  # (T_A ⊗ T_A) k
    TO_TA: np.ndarray  # (T_O ⊗ T_A) k
    TA_TO: np.ndarray  # (T_A ⊗ T_O) k
    pi_O: np.ndarray  # (T_O ⊗ T_O) k


@functools.lru_cache(maxsize=None)
def _factor_is_positive(f: Kernel1D, probes: int = 21) -> bool:
    t = np.linspace(f.domain.lower, f.domain.upper, probes)
    return bool(np.min(f(t[:, None], t[None, :])) > 0.0)


def _require_positive(pk: ProductKernel):
    for i, f in enumerate(pk.factors):
        if not _factor_is_positive(f):
            raise PreconditionError(
                f"factor {i + 1} ({f.describe()}) is not strictly positive on its domain; "
                "the additive/ortho-additive closed forms do not apply"
            )


def _additive_from_pieces(pc: _Pieces) -> AdditiveComponents:
    d = pc.calE.size
    calE = pc.calE
    total = float(np.prod(calE))
    ax = total * (1.0 - d + np.sum(pc.Ex / calE, axis=-1))
    ay = total * (1.0 - d + np.sum(pc.Ey / calE, axis=-1))
    pi_A = ax * ay / total + total * np.sum(pc.k / calE - pc.Ex * pc.Ey / calE**2, axis=-1)
    to_ta = np.prod(pc.Ex, axis=-1) * (1.0 - d + np.sum(pc.k / pc.Ex, axis=-1)) - pi_A
    ta_to = np.prod(pc.Ey, axis=-1) * (1.0 - d + np.sum(pc.k / pc.Ey, axis=-1)) - pi_A
    pi_O = np.prod(pc.k, axis=-1) - to_ta - ta_to - pi_A
    return AdditiveComponents(pi_A, to_ta, ta_to, pi_O)


def additive_components(pk: ProductKernel, x, y) -> AdditiveComponents:
    """Additive part ``π_A k``, ortho-additive part ``π_O k`` and their cross terms.

    ``A`` is the constant plus main effects, ``O`` every interaction.  The
    four components sum to ``k``.  Requires every factor to be strictly
    positive on its domain.
    """
    _require_positive(pk)
    _check_inside(pk.measures, x, y)
    return _additive_from_pieces(pk.pieces(x, y))


# ---------------------------------------------------------------------------
# projectors and projected kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectorSpec:
    """Which KANOVA terms a projected kernel keeps, and with what weights.

    Modes
    -----
    ``simple``   ``π_u = T_u ⊗ T_u``
    ``full``     ``π_U = Σ_{u,v∈U} T_u ⊗ T_v`` (``subsets=None`` means all of P(I))
    ``star``     ``π*_U = Σ_{u∈U} T_u ⊗ T_u`` (``max_card`` truncates by cardinality)
    ``weighted`` ``Σ_{u,v} α_u α_v T_u ⊗ T_v``
    ``custom``   explicit symmetric ``{(u, v): weight}``; p.s.d. is not guaranteed
    ``family``   one of the named kernels in :data:`FAMILY_NAMES`
    """

    mode: str
    subsets: tuple[int, ...] | None = None
    max_card: int | None = None
    alpha: tuple[tuple[int, float], ...] | None = None
    pairs: tuple[tuple[tuple[int, int], float], ...] | None = None
    family: str | None = None

    def __post_init__(self):
        if self.mode not in ("simple", "full", "star", "weighted", "custom", "family"):
            raise InvalidArgumentError(f"unknown projector mode {self.mode!r}")
        if self.mode == "simple" and (self.subsets is None or len(self.subsets) != 1):
            raise InvalidArgumentError("simple projector needs exactly one subset")
        if self.mode in ("full", "star") and self.subsets is not None and len(self.subsets) == 0:
            raise InvalidArgumentError(f"{self.mode} projector needs a non-empty collection of subsets")
        if self.mode == "weighted":
            if not self.alpha:
                raise InvalidArgumentError("weighted projector needs coefficients")
            if not all(math.isfinite(a) for _, a in self.alpha):
                raise InvalidArgumentError("weighted projector coefficients must be finite")
        if self.mode == "custom":
            table = dict(self.pairs or ())
            if not table:
                raise InvalidArgumentError("custom projector needs at least one (u, v) pair")
            for (u, v), w in table.items():
                if table.get((v, u)) != w:
                    raise InvalidArgumentError(
                        f"custom projector pairs must be symmetric: ({ss.fmt(u)}, {ss.fmt(v)}) has no "
                        "mirror with equal weight"
                    )
        if self.mode == "family" and self.family not in FAMILY_NAMES:
            raise InvalidArgumentError(f"unknown kernel family {self.family!r}; expected one of {FAMILY_NAMES}")

    @classmethod
    def simple(cls, u: int) -> "ProjectorSpec":
        return cls("simple", subsets=(u,))

    @classmethod
    def full(cls, U: Iterable[int] | None = None) -> "ProjectorSpec":
        return cls("full", subsets=None if U is None else tuple(sorted(set(U))))

    @classmethod
    def star(cls, U: Iterable[int] | None = None, max_card: int | None = None) -> "ProjectorSpec":
        return cls("star", subsets=None if U is None else tuple(sorted(set(U))), max_card=max_card)

    @classmethod
    def weighted(cls, alpha: Mapping[int, float]) -> "ProjectorSpec":
        return cls("weighted", alpha=tuple(sorted((int(u), float(a)) for u, a in alpha.items())))

    @classmethod
    def custom(cls, pairs: Mapping[tuple[int, int], float]) -> "ProjectorSpec":
        return cls("custom", pairs=tuple(sorted(((int(u), int(v)), float(w)) for (u, v), w in pairs.items())))

    @classmethod
    def named(cls, name: str) -> "ProjectorSpec":
        return cls("family", family=name)

    def masks(self) -> list[int]:
        if self.mode == "weighted":
            return [u for u, _ in self.alpha]
        if self.mode == "custom":
            return [m for (u, v), _ in self.pairs for m in (u, v)]
        return list(self.subsets or ())


@dataclass(frozen=True)
class DiagonalSupport:
    """Diagonal KANOVA terms ``(u, u)`` kept by a projector, with coefficients.

    ``cards`` lists whole cardinality classes kept with coefficient 1;
    ``explicit`` holds individual subsets (only those whose cardinality is not
    already covered by ``cards``).
    """

    d: int
    cards: frozenset[int] = frozenset()
    explicit: Mapping[int, float] = field(default_factory=dict)

    def coefficient(self, u: int) -> float:
        if ss.card(u) in self.cards:
            return 1.0
        return self.explicit.get(u, 0.0)

    def contains(self, u: int) -> bool:
        return self.coefficient(u) != 0.0


def _diag_support(d: int, cards=(), explicit: Mapping[int, float] | None = None) -> DiagonalSupport:
    cards = frozenset(c for c in cards if 0 <= c <= d)
    explicit = {u: w for u, w in (explicit or {}).items() if ss.card(u) not in cards and w != 0.0}
    return DiagonalSupport(d, cards, explicit)


def _is_additive_set(U: Iterable[int], d: int) -> bool:
    return set(U) == {0} | {1 << i for i in range(d)}


@dataclass(frozen=True)
class DecomposedKernel:
    """A projected kernel ``Σ w_{u,v} k_{u,v}`` over a tensor-product base kernel."""

    base: ProductKernel
    projector: ProjectorSpec

    def __post_init__(self):
        d = self.base.d
        for u in self.projector.masks():
            ss.check(u, d)
        if self.projector.mode == "family" and self.projector.family == "k_sparse" and d < 5:
            raise InvalidArgumentError(f"k_sparse references coordinates up to 5; got d={d}")
        if self.projector.mode in ("full", "star") and self.projector.subsets is None and self.projector.max_card is None:
            return
        n = self._explicit_terms()
        if n > MAX_EXPLICIT_TERMS:
            raise ResourceLimitError(f"projector would enumerate {n} KANOVA terms (limit {MAX_EXPLICIT_TERMS})")

    def _explicit_terms(self) -> int:
        p = self.projector
        if p.mode == "full" and self.strategy == "term_sum":
            return len(p.subsets) ** 2
        if p.mode == "weighted":
            return len(p.alpha) ** 2
        if p.mode == "custom":
            return len(p.pairs)
        if p.mode in ("star", "simple") and p.subsets is not None:
            return len(p.subsets)
        return 0

    @property
    def d(self) -> int:
        return self.base.d

    @property
    def measures(self) -> ProductMeasure:
        return self.base.measures

    @property
    def psd_checked(self) -> bool:
        """False for custom pair sets, whose positive semi-definiteness is not guaranteed."""
        return self.projector.mode != "custom"

    @property
    def name(self) -> str:
        p = self.projector
        if p.mode == "family":
            return p.family
        return p.mode

    @functools.cached_property
    def strategy(self) -> str:
        p, d = self.projector, self.base.d
        if p.mode == "family":
            if p.family == "k_sparse":
                return "term_sum"
            if p.family in ("k_A", "k_A*+O", "k_A+O*"):
                return "additive_closed_form"
            return "symmetric_function_fast_path"
        if p.mode == "star" and (p.subsets is None or p.max_card is not None):
            return "symmetric_function_fast_path"
        if p.mode == "full":
            if p.subsets is None or set(p.subsets) == set(ss.all_subsets(d)):
                return "symmetric_function_fast_path"
            if _is_additive_set(p.subsets, d) and all(map(_factor_is_positive, self.base.factors)):
                return "additive_closed_form"
        return "term_sum"

    def __call__(self, x, y):
        _check_inside(self.base.measures, x, y)
        pc = self.base.pieces(x, y)
        return self._evaluate(pc)

    def _evaluate(self, pc: _Pieces) -> np.ndarray:
        p = self.projector
        if p.mode == "family":
            return _family_eval(p.family, pc)
        if p.mode == "simple":
            return _term_from_pieces(pc, p.subsets[0], p.subsets[0])
        if p.mode == "star":
            if p.subsets is None:
                return _anova(pc) if p.max_card is None else _truncated_star(pc, p.max_card)
            kept = [u for u in p.subsets if p.max_card is None or ss.card(u) <= p.max_card]
            return sum((_term_from_pieces(pc, u, u) for u in kept), np.zeros(pc.k.shape[:-1]))
        if p.mode == "full":
            if self.strategy == "symmetric_function_fast_path":
                return np.prod(pc.k, axis=-1)
            if self.strategy == "additive_closed_form":
                return _additive_from_pieces(pc).pi_A
            return sum(
                (_term_from_pieces(pc, u, v) for u in p.subsets for v in p.subsets),
                np.zeros(pc.k.shape[:-1]),
            )
        if p.mode == "weighted":
            out = np.zeros(pc.k.shape[:-1])
            for u, a in p.alpha:
                for v, b in p.alpha:
                    out = out + a * b * _term_from_pieces(pc, u, v)
            return out
        out = np.zeros(pc.k.shape[:-1])
        for (u, v), w in p.pairs:
            out = out + w * _term_from_pieces(pc, u, v)
        return out

    def diagonal_support(self) -> DiagonalSupport:
        p, d = self.projector, self.base.d
        all_cards = range(d + 1)
        if p.mode == "family":
            if p.family in ("k_full", "k_anova", "k_A*+O", "k_A+O*"):
                return _diag_support(d, all_cards)
            if p.family in ("k_A*", "k_A"):
                return _diag_support(d, (0, 1))
            if p.family == "k_inter":
                return _diag_support(d, (0, 1, 2))
            return _diag_support(d, (), {u: 1.0 for u in SPARSE_SUBSETS})
        if p.mode in ("full", "star"):
            if p.subsets is None:
                cards = all_cards if p.max_card is None else range(p.max_card + 1)
                return _diag_support(d, cards)
            kept = [u for u in p.subsets if p.max_card is None or ss.card(u) <= p.max_card]
            return _diag_support(d, (), {u: 1.0 for u in kept})
        if p.mode == "simple":
            return _diag_support(d, (), {p.subsets[0]: 1.0})
        if p.mode == "weighted":
            return _diag_support(d, (), {u: a * a for u, a in p.alpha})
        return _diag_support(d, (), {u: w for (u, v), w in p.pairs if u == v})


def _family_eval(name: str, pc: _Pieces) -> np.ndarray:
    if name == "k_full":
        return np.prod(pc.k, axis=-1)
    if name == "k_anova":
        return _anova(pc)
    if name == "k_A*":
        return _truncated_star(pc, 1)
    if name == "k_inter":
        return _truncated_star(pc, 2)
    if name == "k_sparse":
        return sum(_term_from_pieces(pc, u, u) for u in SPARSE_SUBSETS)
    closed = _additive_from_pieces(pc)
    if name == "k_A":
        return closed.pi_A
    if name == "k_A*+O":
        return closed.pi_O + _truncated_star(pc, 1)
    if name == "k_A+O*":
        return _anova(pc) - _truncated_star(pc, 1) + closed.pi_A
    raise InvalidArgumentError(f"unknown kernel family {name!r}")


def projected_eval(dk: DecomposedKernel, x, y) -> np.ndarray:
    return dk(x, y)


def family_kernel(pk: ProductKernel, name: str) -> DecomposedKernel:
    if name in ("k_A", "k_A*+O", "k_A+O*"):
        _require_positive(pk)
    return DecomposedKernel(pk, ProjectorSpec.named(name))


def standard_family(pk: ProductKernel, include_sparse: bool | None = None) -> dict[str, DecomposedKernel]:
    """The reference kernel and its seven projections, keyed by name.

    ``k_sparse`` needs ``d >= 5`` and is left out below that unless
    explicitly requested (which then raises).
    """
    if include_sparse is None:
        include_sparse = pk.d >= 5
    names = [n for n in FAMILY_NAMES if include_sparse or n != "k_sparse"]
    return {name: family_kernel(pk, name) for name in names}


# ---------------------------------------------------------------------------
# empirical positive semi-definiteness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpdReport:
    min_eigenvalue: float
    passed: bool
    n: int
    tol: float
    psd_guaranteed: bool = True

    def as_dict(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "pass": self.passed,
            "n": self.n,
            "tol": self.tol,
            "psd_guaranteed": self.psd_guaranteed,
        }


def check_spd(kernel: Callable, n: int, d: int, seed: int = 0, tol: float = 1e-8, lower=0.0, upper=1.0) -> SpdReport:
    """Smallest Gram eigenvalue at ``n`` uniform random points.

    Passes iff ``min_eig >= -tol * n``.
    """
    if n < 2:
        raise InvalidArgumentError("check_spd needs n >= 2")
    rng = np.random.default_rng(seed)
    X = rng.uniform(lower, upper, size=(n, d))
    K = np.asarray(kernel(X[:, None, :], X[None, :, :]), dtype=float)
    K = np.broadcast_to(K, (n, n))
    if not np.all(np.isfinite(K)):
        raise EvaluationError("kernel produced non-finite Gram entries")
    K = 0.5 * (K + K.T)
    lam = float(np.linalg.eigvalsh(K)[0])
    guaranteed = getattr(kernel, "psd_checked", True)
    return SpdReport(lam, lam >= -tol * n, n, tol, guaranteed)


# ---------------------------------------------------------------------------
# projector grammar
# ---------------------------------------------------------------------------


def _parse_subset(obj) -> int:
    if not isinstance(obj, list) or not all(isinstance(c, int) and not isinstance(c, bool) for c in obj):
        raise InvalidArgumentError(f"expected a list of 1-based coordinates, got {obj!r}")
    return ss.from_labels(obj)


def parse_projector(text: str) -> ProjectorSpec:
    """Parse the projector grammar used on the command line.

    ``simple:[1,3]`` (or ``simple:{1,3}``), ``full:[[],[1],[2]]``,
    ``star:[[1],[2,3]]``, ``full:all``, ``star:all``, ``star:card<=2``,
    ``weighted:[[[],1.0],[[1],0.5]]``, ``custom:[[[1],[2],0.5],[[2],[1],0.5]]``,
    ``family:k_inter``.
    """
    mode, sep, body = text.partition(":")
    mode, body = mode.strip().lower(), body.strip()
    if not sep:
        raise InvalidArgumentError(f"projector must look like 'mode:argument', got {text!r}")
    if mode == "family":
        return ProjectorSpec.named(body)
    if mode in ("full", "star") and body == "all":
        return ProjectorSpec.full() if mode == "full" else ProjectorSpec.star()
    if mode == "star" and body.replace(" ", "").startswith("card<="):
        return ProjectorSpec.star(max_card=int(body.replace(" ", "")[len("card<="):]))
    if body.startswith("{"):
        body = "[" + body[1:-1] + "]" if body.endswith("}") else body
    body = body.replace("∅", "[]")
    try:
        obj = json.loads(body)
    except json.JSONDecodeError as exc:
        raise InvalidArgumentError(f"cannot parse projector argument {body!r}: {exc.msg}") from None
    if mode == "simple":
        return ProjectorSpec.simple(_parse_subset(obj))
    if mode in ("full", "star"):
        if not isinstance(obj, list):
            raise InvalidArgumentError(f"{mode} projector needs a list of subsets")
        U = [_parse_subset(s) for s in obj]
        return ProjectorSpec.full(U) if mode == "full" else ProjectorSpec.star(U)
    if mode == "weighted":
        return ProjectorSpec.weighted({_parse_subset(s): float(a) for s, a in obj})
    if mode == "custom":
        return ProjectorSpec.custom({(_parse_subset(u), _parse_subset(v)): float(w) for u, v, w in obj})
    raise InvalidArgumentError(f"unknown projector mode {mode!r}")
