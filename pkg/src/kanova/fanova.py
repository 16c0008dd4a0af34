"""FANOVA effects, Sobol' indices, and the Sobol' index distribution of GRF paths.

Effects of explicit functions are computed from partial integrals (Möbius
sum over sub-subsets).  For fields known only on a tensor grid, the
projectors ``T_u`` act axis by axis: ``P_j`` averages axis ``j`` against its
quadrature weights, ``I - P_j`` removes that average.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from . import subsets as ss
from .errors import DegenerateError, InvalidArgumentError, NumericalConsistencyWarning
from .grf import cholesky_jitter, gram, sample_from_factor
from .quadrature import DEFAULT_NODE_BUDGET, ProductMeasure, tensor_rule

MAX_ENUMERATION_DIM = 4
DEFAULT_TRUNCATION = 100


# ---------------------------------------------------------------------------
# grid projectors
# ---------------------------------------------------------------------------


def project_grid(values: np.ndarray, weights: Sequence[np.ndarray], u: int) -> np.ndarray:
    """Apply ``T_u`` to function values on a tensor grid.

    ``values`` has shape ``(..., n_1, ..., n_d)``; ``weights[j]`` are the
    probability weights along coordinate ``j``.
    """
    d = len(weights)
    out = np.asarray(values, dtype=float)
    full_shape = out.shape
    for j, w in enumerate(weights):
        axis = out.ndim - d + j
        shape = [1] * out.ndim
        shape[axis] = w.size
        mean = np.sum(out * w.reshape(shape), axis=axis, keepdims=True)
        out = out - mean if (u >> j) & 1 else mean
    return np.broadcast_to(out, full_shape)


def grid_inner(a: np.ndarray, b: np.ndarray, weights: Sequence[np.ndarray]) -> np.ndarray:
    """``⟨a, b⟩_ν`` over the trailing grid axes."""
    W = _outer_weights(weights)
    d = len(weights)
    axes = tuple(range(a.ndim - d, a.ndim))
    return np.sum(a * b * W, axis=axes)


def _outer_weights(weights: Sequence[np.ndarray]) -> np.ndarray:
    W = np.ones(())
    for w in weights:
        W = np.multiply.outer(W, w)
    return W


# ---------------------------------------------------------------------------
# explicit functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridFunction:
    """A function ``f(points) -> values`` on a box, vectorized over rows of ``(N, d)``."""

    evaluator: Callable
    measures: ProductMeasure
    effect_quadrature_order: int | Sequence[int] | None = None

    @property
    def d(self) -> int:
        return self.measures.d

    @property
    def integration_measures(self) -> ProductMeasure:
        if self.effect_quadrature_order is None:
            return self.measures
        return self.measures.with_order(self.effect_quadrature_order)

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.asarray(self.evaluator(pts), dtype=float).reshape(pts.shape[0])


def _partial_integrals(f: GridFunction, u1: int, points: np.ndarray, budget=DEFAULT_NODE_BUDGET) -> np.ndarray:
    """``∫ f ν_{-u1}`` at each row of ``points`` (only coordinates in ``u1`` are used)."""
    d = f.d
    comp = ss.full(d) & ~u1
    grid = tensor_rule(f.integration_measures, comp, budget)
    N, M = points.shape[0], len(grid)
    out = np.empty(N)
    fixed = list(ss.members(u1))
    free = list(grid.coords)
    chunk = max(1, budget // max(M, 1))
    for start in range(0, N, chunk):
        rows = points[start : start + chunk]
        pts = np.empty((rows.shape[0], M, d))
        if fixed:
            pts[:, :, fixed] = rows[:, None, fixed]
        if free:
            pts[:, :, free] = grid.nodes[None, :, :]
        vals = f(pts.reshape(-1, d)).reshape(rows.shape[0], M)
        out[start : start + chunk] = vals @ grid.weights
    return out


@dataclass(frozen=True)
class EffectFunction:
    """FANOVA effect ``f_u``; depends only on the coordinates in ``subset``."""

    subset: int
    source: GridFunction

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cu = ss.card(self.subset)
        total = np.zeros(pts.shape[0])
        for u1 in ss.subsets_of(self.subset):
            sign = -1.0 if (cu - ss.card(u1)) % 2 else 1.0
            total += sign * _partial_integrals(self.source, u1, pts)
        return total

    def as_grid_function(self) -> GridFunction:
        return GridFunction(self, self.source.measures, self.source.effect_quadrature_order)


def fanova_effect(f: GridFunction, u: int) -> EffectFunction:
    ss.check(u, f.d)
    return EffectFunction(u, f)


def _probe_points(measures: ProductMeasure, n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(measures.lower, measures.upper, size=(n, measures.d))


def reconstruct_check(f: GridFunction, probes=None, n_probes: int = 32, seed: int = 0) -> float:
    """Largest ``|Σ_u f_u(x) - f(x)|`` over the probe points."""
    if f.d > MAX_ENUMERATION_DIM:
        raise InvalidArgumentError(f"reconstruction enumerates 2^d effects; d={f.d} > {MAX_ENUMERATION_DIM}")
    pts = _probe_points(f.measures, n_probes, seed) if probes is None else np.atleast_2d(probes)
    partial = {u1: _partial_integrals(f, u1, pts) for u1 in ss.all_subsets(f.d)}
    total = np.zeros(pts.shape[0])
    for u in ss.all_subsets(f.d):
        cu = ss.card(u)
        for u1 in ss.subsets_of(u):
            total += (-1.0 if (cu - ss.card(u1)) % 2 else 1.0) * partial[u1]
    return float(np.max(np.abs(total - f(pts))))


@dataclass(frozen=True)
class SobolIndices:
    values: dict[int, float]
    total_variance: float
    variances: dict[int, float] = field(default_factory=dict)

    def to_records(self) -> list[dict]:
        return [{"subset": ss.to_labels(u), "value": v} for u, v in sorted(self.values.items())]


def _grid_values(f: GridFunction, budget: int) -> tuple[np.ndarray, list[np.ndarray]]:
    meas = f.integration_measures
    grid = tensor_rule(meas, ss.full(f.d), budget)
    rules = meas.rules()
    shape = tuple(len(r) for r in rules)
    return f(grid.nodes).reshape(shape), [r.weights for r in rules]


def sobol_indices(f: GridFunction, max_order: int | None = None, budget: int = DEFAULT_NODE_BUDGET) -> SobolIndices:
    """Sobol' indices ``S_u = ‖f_u‖² / ‖f - f_∅‖²`` by tensor-grid quadrature.

    With ``max_order`` only subsets of at most that size are reported; full
    enumeration is limited to ``d <= 4``.
    """
    if max_order is None and f.d > MAX_ENUMERATION_DIM:
        raise InvalidArgumentError(f"full enumeration limited to d <= {MAX_ENUMERATION_DIM}; pass max_order")
    vals, weights = _grid_values(f, budget)
    centred = vals - project_grid(vals, weights, ss.EMPTY)
    total = float(grid_inner(centred, centred, weights))
    if total <= 1e-14:
        raise DegenerateError("function has zero variance; Sobol' indices are undefined")
    variances = {}
    for u in ss.all_subsets(f.d):
        if u == 0 or (max_order is not None and ss.card(u) > max_order):
            continue
        fu = project_grid(vals, weights, u)
        variances[u] = float(grid_inner(fu, fu, weights))
    return SobolIndices({u: v / total for u, v in variances.items()}, total, variances)


# ---------------------------------------------------------------------------
# Karhunen-Loève / Nyström
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Spectrum:
    """Discrete Mercer decomposition on a tensor quadrature grid.

    ``eigenfunctions[:, i]`` holds ``φ_i`` at ``nodes``; they are orthonormal
    in the quadrature inner product.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    axis_weights: tuple[np.ndarray, ...]
    trace: float
    centred: bool = False
    total_eigenvalue_sum: float = float("nan")

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return tuple(w.size for w in self.axis_weights)

    @property
    def K(self) -> int:
        return self.eigenvalues.size

    @property
    def trace_coverage(self) -> float:
        if not self.total_eigenvalue_sum > 0:
            return float("nan")
        return float(np.sum(self.eigenvalues) / self.total_eigenvalue_sum)

    def truncate(self, K: int | None = None, coverage: float | None = None) -> "Spectrum":
        """Keep the leading ``K`` pairs, or fewer if ``coverage`` of the trace is reached first."""
        keep = self.K if K is None else min(K, self.K)
        if coverage is not None and self.total_eigenvalue_sum > 0:
            cum = np.cumsum(self.eigenvalues) / self.total_eigenvalue_sum
            keep = min(keep, int(np.searchsorted(cum, coverage) + 1))
        return Spectrum(
            self.eigenvalues[:keep],
            self.eigenfunctions[:, :keep],
            self.nodes,
            self.weights,
            self.axis_weights,
            self.trace,
            self.centred,
            self.total_eigenvalue_sum,
        )


def nystrom_spectrum(
    kernel: Callable,
    measures: ProductMeasure,
    K: int | None = None,
    centred: bool = False,
    budget: int = 4096,
) -> Spectrum:
    """Eigenpairs of the integral operator of ``kernel`` on the quadrature grid.

    With ``centred=True`` the kernel is first replaced by that of
    ``Z - T_∅ Z`` (constant effect removed in both arguments).
    """
    grid = tensor_rule(measures, ss.full(measures.d), budget)
    N = len(grid)
    if K is not None and K > N:
        raise InvalidArgumentError(f"truncation K={K} exceeds the grid size {N}")
    X, w = grid.nodes, grid.weights
    G = np.asarray(kernel(X[:, None, :], X[None, :, :]), dtype=float)
    G = 0.5 * (G + G.T)
    if centred:
        Gw = G @ w
        G = G - Gw[:, None] - Gw[None, :] + float(w @ Gw)
    sw = np.sqrt(w)
    lam, vec = np.linalg.eigh(sw[:, None] * G * sw[None, :])
    lam, vec = lam[::-1], vec[:, ::-1]
    if lam[-1] < -1e-8 * max(lam[0], 1.0):
        warnings.warn(f"Nyström eigenvalue {lam[-1]:.3e} clamped to 0", NumericalConsistencyWarning, stacklevel=2)
    lam = np.maximum(lam, 0.0)
    phi = vec / sw[:, None]
    spec = Spectrum(
        lam,
        phi,
        X,
        w,
        tuple(r.weights for r in measures.rules()),
        float(np.dot(w, np.diag(G))),
        centred,
        float(np.sum(lam)),
    )
    return spec if K is None else spec.truncate(K)


@dataclass(frozen=True)
class QuadFormCoeffs:
    g: np.ndarray
    subset: int
    eigenvalues: np.ndarray


def quadform_coeffs(spec: Spectrum, u: int) -> QuadFormCoeffs:
    """``g_ij = sqrt(λ_i λ_j) ⟨T_u φ_i, T_u φ_j⟩`` for the centred field.

    ``‖Z^{(u)}‖² = Σ_ij g_ij ε_i ε_j`` for the truncated expansion.
    """
    if u == 0:
        raise InvalidArgumentError("Sobol' quadratic forms are defined for non-empty subsets only")
    if not spec.centred:
        raise InvalidArgumentError("quadratic forms need the spectrum of the centred field (centred=True)")
    d = len(spec.axis_weights)
    ss.check(u, d)
    phi = spec.eigenfunctions.T.reshape((spec.K,) + spec.grid_shape)
    P = project_grid(phi, spec.axis_weights, u).reshape(spec.K, -1)
    inner = (P * spec.weights) @ P.T
    root = np.sqrt(spec.eigenvalues)
    g = root[:, None] * inner * root[None, :]
    return QuadFormCoeffs(0.5 * (g + g.T), u, spec.eigenvalues)


@dataclass(frozen=True)
class SobolMoments:
    mean: float
    second_moment: float

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean**2


def sobol_moment(coeffs: QuadFormCoeffs, eigenvalues=None, rtol: float = 1e-8) -> SobolMoments:
    """First two moments of ``S_u = εᵀgε / Σ λ_i ε_i²`` for standard normal ``ε``.

    Uses the integral representation of moments of ratios of quadratic
    forms; with ``R(t) = diag(1 / (1 + 2λt))`` and ``h(t) = |I + 2tΛ|^{-1/2}``::

        E S   = ∫ h(t) tr(gR) dt
        E S²  = ∫ t h(t) [tr(gR)² + 2 tr(gRgR)] dt
    """
    lam = np.asarray(coeffs.eigenvalues if eigenvalues is None else eigenvalues, dtype=float)
    g = coeffs.g
    if lam.size != g.shape[0]:
        raise InvalidArgumentError("eigenvalue count does not match the coefficient matrix")
    scale = float(np.sum(lam))
    if not scale > 0:
        raise DegenerateError("all eigenvalues vanish; Sobol' moments are undefined")
    gd = np.diag(g)
    g2 = g * g
    c = 1.0 / (2.0 * scale)

    def parts(s):
        t = c * s / (1.0 - s)
        jac = c / (1.0 - s) ** 2
        R = 1.0 / (1.0 + 2.0 * lam * t)
        h = math.exp(-0.5 * float(np.sum(np.log1p(2.0 * lam * t))))
        return t, jac, R, h

    def first(s):
        if s >= 1.0:
            return 0.0
        t, jac, R, h = parts(s)
        return h * float(gd @ R) * jac

    def second(s):
        if s >= 1.0:
            return 0.0
        t, jac, R, h = parts(s)
        tr = float(gd @ R)
        return t * h * (tr * tr + 2.0 * float(R @ g2 @ R)) * jac

    opts = dict(epsabs=0.0, epsrel=rtol, limit=500)
    m1 = integrate.quad(first, 0.0, 1.0, **opts)[0]
    m2 = integrate.quad(second, 0.0, 1.0, **opts)[0]
    return SobolMoments(m1, m2)


@dataclass(frozen=True)
class PathSobolSamples:
    values: dict[int, np.ndarray]
    n_paths: int
    skipped: int

    def mean(self, u: int) -> float:
        return float(np.mean(self.values[u]))

    def standard_error(self, u: int) -> float:
        x = self.values[u]
        return float(np.std(x, ddof=1) / math.sqrt(x.size))


def sobol_path_samples(
    kernel: Callable,
    measures: ProductMeasure,
    subsets: Iterable[int] | None,
    n_paths: int,
    seed: int,
    budget: int = 4096,
) -> PathSobolSamples:
    """Sobol' indices of simulated paths, each path sampled on the quadrature grid.

    Paths whose centred variance is indistinguishable from the factorization
    jitter are skipped and counted.  Draws equal ``simulate_paths`` on the
    grid nodes with the same seed.
    """
    d = measures.d
    if d > MAX_ENUMERATION_DIM:
        raise InvalidArgumentError(f"path effects limited to d <= {MAX_ENUMERATION_DIM}")
    grid = tensor_rule(measures, ss.full(d), budget)
    wts = [r.weights for r in measures.rules()]
    shape = tuple(w.size for w in wts)
    factor = cholesky_jitter(gram(kernel, grid.nodes))
    Z = sample_from_factor(factor, n_paths, np.random.default_rng(seed)).reshape((n_paths,) + shape)
    centred = Z - project_grid(Z, wts, ss.EMPTY)
    denom = grid_inner(centred, centred, wts)
    # jitter adds white noise of that variance; anything at that level is not signal
    ok = denom > max(1e-14, 10.0 * factor.jitter_used)
    wanted = [u for u in ss.all_subsets(d) if u] if subsets is None else list(subsets)
    out = {}
    for u in wanted:
        if u == 0:
            raise InvalidArgumentError("Sobol' indices are defined for non-empty subsets only")
        Zu = project_grid(Z[ok], wts, u)
        out[u] = grid_inner(Zu, Zu, wts) / denom[ok]
    return PathSobolSamples(out, n_paths, int(np.sum(~ok)))
