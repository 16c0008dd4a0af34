"""Probability measures on compact intervals and Gauss-Legendre quadrature.

Every integral in the package is taken against a product of uniform
probability measures, one per coordinate.  Rules are normalized so that the
weights sum to one, i.e. ``integrate_1d`` returns an *expectation* rather than
a Lebesgue integral.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError, ResourceLimitError
from .subsets import members

DEFAULT_ORDER = 64
DEFAULT_NODE_BUDGET = 10**6


@dataclass(frozen=True)
class Interval:
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidArgumentError(f"interval bounds must be finite, got [{lo}, {hi}]")
        if not lo < hi:
            raise InvalidArgumentError(f"interval requires lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def length(self) -> float:
        return self.upper - self.lower

    def contains(self, x, atol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower - atol) & (x <= self.upper + atol)))


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and probability weights of a one-dimensional rule."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise InvalidArgumentError("nodes and weights must be 1-D arrays of equal length")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.nodes.size


@functools.lru_cache(maxsize=None)
def _leggauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@functools.lru_cache(maxsize=256)
def _gauss_legendre_cached(order: int, lower: float, upper: float) -> QuadratureRule:
    x, w = _leggauss(order)
    half = 0.5 * (upper - lower)
    nodes = lower + half * (x + 1.0)
    # Probability normalization: the reference weights sum to 2.
    weights = w / w.sum()
    return QuadratureRule(nodes, weights)


def gauss_legendre(order: int, interval: Interval | None = None) -> QuadratureRule:
    """Gauss-Legendre rule for the uniform probability measure on ``interval``.

    Exact for polynomials up to degree ``2 * order - 1``.  Rules are cached
    per ``(order, interval)`` and returned as read-only arrays.
    """
    if isinstance(order, bool) or int(order) != order or order < 1:
        raise InvalidArgumentError(f"quadrature order must be a positive integer, got {order!r}")
    interval = interval or Interval()
    return _gauss_legendre_cached(int(order), interval.lower, interval.upper)


def split_rule(order: int, interval: Interval, point: float) -> QuadratureRule:
    """Composite Gauss-Legendre rule with a breakpoint at ``point``.

    Used for integrands with a kink at a known location (``min(s, t)``,
    ``exp(-|s - t|)``).  The total weight is still one.
    """
    lo, hi = interval.lower, interval.upper
    c = min(max(float(point), lo), hi)
    x, w = _leggauss(order)
    w = w / w.sum()
    nodes, weights = [], []
    for a, b in ((lo, c), (c, hi)):
        if b - a <= 0.0:
            continue
        nodes.append(a + 0.5 * (b - a) * (x + 1.0))
        weights.append(w * (b - a) / (hi - lo))
    return QuadratureRule(np.concatenate(nodes), np.concatenate(weights))


@dataclass(frozen=True)
class Measure1D:
    """Uniform probability measure on ``support`` with an attached rule."""

    support: Interval = field(default_factory=Interval)
    kind: str = "uniform"
    quadrature_order: int = DEFAULT_ORDER

    def __post_init__(self):
        if self.kind != "uniform":
            raise InvalidArgumentError(f"unsupported measure kind {self.kind!r}")
        if int(self.quadrature_order) != self.quadrature_order or self.quadrature_order < 1:
            raise InvalidArgumentError("quadrature_order must be >= 1")

    @property
    def rule(self) -> QuadratureRule:
        return gauss_legendre(self.quadrature_order, self.support)

    @property
    def density(self) -> float:
        return 1.0 / self.support.length

    def with_order(self, order: int) -> "Measure1D":
        return Measure1D(self.support, self.kind, order)


@dataclass(frozen=True)
class ProductMeasure:
    coordinates: tuple[Measure1D, ...]

    def __post_init__(self):
        coords = tuple(self.coordinates)
        if len(coords) < 1:
            raise InvalidArgumentError("a product measure needs at least one coordinate")
        object.__setattr__(self, "coordinates", coords)

    @classmethod
    def uniform(cls, d: int, order: int = DEFAULT_ORDER, interval: Interval | None = None):
        interval = interval or Interval()
        return cls(tuple(Measure1D(interval, quadrature_order=order) for _ in range(d)))

    @property
    def d(self) -> int:
        return len(self.coordinates)

    @property
    def lower(self) -> np.ndarray:
        return np.array([m.support.lower for m in self.coordinates])

    @property
    def upper(self) -> np.ndarray:
        return np.array([m.support.upper for m in self.coordinates])

    def rules(self) -> list[QuadratureRule]:
        return [m.rule for m in self.coordinates]

    def with_order(self, order: int | Sequence[int]) -> "ProductMeasure":
        if np.isscalar(order):
            order = [int(order)] * self.d
        return ProductMeasure(tuple(m.with_order(o) for m, o in zip(self.coordinates, order)))

    def contains(self, points, atol: float = 1e-12) -> bool:
        pts = np.asarray(points, dtype=float)
        return bool(np.all((pts >= self.lower - atol) & (pts <= self.upper + atol)))


def integrate_1d(f: Callable, rule: QuadratureRule) -> float:
    """Return ``sum_j w_j f(node_j)``.

    ``f`` is called once on the node array; scalar-only callables are
    evaluated node by node.
    """
    try:
        values = np.asarray(f(rule.nodes), dtype=float)
        if values.shape != rule.nodes.shape:
            raise ValueError
    except (TypeError, ValueError):
        values = np.array([f(float(x)) for x in rule.nodes], dtype=float)
    return float(np.dot(rule.weights, values))


@dataclass(frozen=True)
class TensorGrid:
    """Tensor-product rule over a subset of the coordinates.

    ``nodes[:, k]`` holds values of coordinate ``coords[k]`` (0-based).
    """

    coords: tuple[int, ...]
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return self.weights.size


def tensor_rule(measures: ProductMeasure, subset: int, budget: int = DEFAULT_NODE_BUDGET) -> TensorGrid:
    """Tensor-product rule spanning the coordinates in ``subset`` (a bitmask)."""
    coords = members(subset)
    if any(c >= measures.d for c in coords):
        raise InvalidArgumentError(f"subset {coords} exceeds dimension {measures.d}")
    rules = [measures.coordinates[c].rule for c in coords]
    size = math.prod(len(r) for r in rules)
    if size > budget:
        raise ResourceLimitError(
            f"tensor grid over a subset of size {len(coords)} needs {size} nodes "
            f"(budget {budget})"
        )
    if not coords:
        return TensorGrid((), np.zeros((1, 0)), np.ones(1))
    nodes = np.array(list(itertools.product(*(r.nodes for r in rules))), dtype=float)
    weights = np.prod(np.array(list(itertools.product(*(r.weights for r in rules)))), axis=1)
    return TensorGrid(coords, nodes.reshape(size, len(coords)), weights)
