"""Gaussian random fields on finite designs: simulation and kriging.

Projected kernels are positive semi-definite but rarely strictly positive
definite, so every factorization goes through :func:`cholesky_jitter`, which
walks a fixed jitter ladder and reports what it used.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import subsets as ss
from .decomposition import DecomposedKernel, ProductKernel, ProjectorSpec
from .errors import (
    DegenerateError,
    EvaluationError,
    InvalidArgumentError,
    NotPositiveDefiniteError,
    NumericalConsistencyWarning,
)
from .kernels import CentredKernel1D
from .quadrature import ProductMeasure

JITTER_LADDER = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
TAU2_FLOOR = 1e-8


@dataclass(frozen=True)
class DesignMatrix:
    points: np.ndarray
    domain: ProductMeasure | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise InvalidArgumentError("a design needs at least one point")
        if self.domain is not None:
            if pts.shape[1] != self.domain.d:
                raise InvalidArgumentError("design dimension does not match its domain")
            if not self.domain.contains(pts):
                raise InvalidArgumentError("design points must lie inside the domain box")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _points(X) -> np.ndarray:
    if isinstance(X, DesignMatrix):
        return X.points
    return np.atleast_2d(np.asarray(X, dtype=float))


def gram(kernel: Callable, X, Y=None) -> np.ndarray:
    """Matrix of ``kernel(x_i, y_j)``; symmetrized when ``Y`` is omitted."""
    Xp = _points(X)
    Yp = Xp if Y is None else _points(Y)
    K = np.asarray(kernel(Xp[:, None, :], Yp[None, :, :]), dtype=float)
    K = np.broadcast_to(K, (Xp.shape[0], Yp.shape[0])).copy()
    if not np.all(np.isfinite(K)):
        raise EvaluationError("kernel produced non-finite Gram entries")
    if Y is None:
        K = 0.5 * (K + K.T)
    return K


@dataclass(frozen=True)
class GramFactor:
    lower_triangular: np.ndarray
    jitter_used: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve((self.lower_triangular, True), b, check_finite=False)


def cholesky_jitter(K: np.ndarray, ladder=JITTER_LADDER) -> GramFactor:
    """Cholesky factor of ``K + jitter * I``; jitter is a multiple of the mean diagonal.

    The first rung of ``ladder`` that factorizes wins.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidArgumentError("expected a square matrix")
    if not np.allclose(K, K.T, rtol=1e-10, atol=1e-12):
        raise InvalidArgumentError("expected a symmetric matrix")
    scale = float(np.mean(np.diag(K)))
    n = K.shape[0]
    if scale > 0:
        for rung in ladder:
            jitter = rung * scale
            try:
                L = np.linalg.cholesky(K + jitter * np.eye(n))
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(L)):
                return GramFactor(L, jitter)
    lam = float(np.linalg.eigvalsh(0.5 * (K + K.T))[0])
    raise NotPositiveDefiniteError(
        f"matrix is not positive definite even with jitter {ladder[-1]:g} x mean diagonal "
        f"(min eigenvalue {lam:.3e})",
        min_eigenvalue=lam,
    )


def sample_from_factor(factor: GramFactor, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    eps = rng.standard_normal((n_paths, factor.lower_triangular.shape[0]))
    return eps @ factor.lower_triangular.T


def simulate_paths(kernel: Callable, X, n_paths: int, seed: int) -> np.ndarray:
    """``n_paths`` independent draws of the centred field on the design, one per row.

    Deterministic given ``seed`` (numpy PCG64 generator, standard normals).
    """
    if n_paths < 1:
        raise InvalidArgumentError("n_paths must be >= 1")
    factor = cholesky_jitter(gram(kernel, X))
    return sample_from_factor(factor, n_paths, np.random.default_rng(seed))


@dataclass(frozen=True)
class PredictionResult:
    mean: np.ndarray
    variance: np.ndarray
    min_raw_variance: float = 0.0
    warnings: tuple[str, ...] = ()


@dataclass
class GrfModel:
    """Kriging model: prior kernel, training design, observations and noise ``τ²``."""

    kernel: Callable
    design: np.ndarray
    observations: np.ndarray
    noise_tau2: float = 0.0
    factor: GramFactor = field(init=False, repr=False)
    alpha: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.design = _points(self.design)
        self.observations = np.asarray(self.observations, dtype=float).ravel()
        if self.observations.size != self.design.shape[0]:
            raise InvalidArgumentError(
                f"{self.observations.size} observations for {self.design.shape[0]} design points"
            )
        if not self.noise_tau2 >= 0:
            raise InvalidArgumentError("noise_tau2 must be >= 0")
        K = gram(self.kernel, self.design)
        K[np.diag_indices_from(K)] += self.noise_tau2
        self.factor = cholesky_jitter(K)
        self.alpha = self.factor.solve(self.observations)

    @property
    def jitter_used(self) -> float:
        return self.factor.jitter_used

    def predict(self, Xnew, return_variance: bool = True) -> PredictionResult:
        Xn = _points(Xnew)
        Kx = gram(self.kernel, Xn, self.design)
        mean = Kx @ self.alpha
        if not return_variance:
            return PredictionResult(mean, np.full(mean.shape, np.nan))
        prior = np.asarray(self.kernel(Xn, Xn), dtype=float)
        V = solve_triangular(self.factor.lower_triangular, Kx.T, lower=True, check_finite=False)
        raw = prior - np.sum(V * V, axis=0)
        notes = ()
        low = float(np.min(raw)) if raw.size else 0.0
        if low < -1e-6:
            msg = f"kriging variance reached {low:.3e} before clamping"
            warnings.warn(msg, NumericalConsistencyWarning, stacklevel=2)
            notes = (msg,)
        return PredictionResult(mean, np.maximum(raw, 0.0), low, notes)


def krige_predict(model: GrfModel, Xnew) -> PredictionResult:
    return model.predict(Xnew)


def conditional_effect_cov(sigma2: float, k0: CentredKernel1D, r: float, s: float, t: float) -> float:
    """Covariance of the constant effect and the main effect at ``t`` given ``Z_r``.

    The field is ``Z = U + Y`` with ``U ~ N(0, σ²)`` independent of a centred
    process ``Y`` with argumentwise-centred kernel ``k0``.  Unconditionally the
    two effects are uncorrelated; after observing ``Z_r`` they are not.  The
    result does not depend on ``s``.
    """
    if not sigma2 > 0:
        raise InvalidArgumentError("sigma2 must be positive")
    for name, val in (("r", r), ("s", s), ("t", t)):
        if not k0.domain.contains(val):
            raise InvalidArgumentError(f"{name}={val} outside the kernel domain")
    denom = sigma2 + float(k0(r, r))
    if denom <= 1e-14:
        raise DegenerateError("conditioning on a point with zero prior variance")
    return -sigma2 * float(k0(t, r)) / denom


def _as_decomposed(kernel) -> DecomposedKernel:
    if isinstance(kernel, DecomposedKernel):
        return kernel
    if isinstance(kernel, ProductKernel):
        return DecomposedKernel(kernel, ProjectorSpec.full())
    raise InvalidArgumentError("expected a ProductKernel or DecomposedKernel")


def _card_sums(V: np.ndarray, calE: np.ndarray) -> np.ndarray:
    """``e[m] = Σ_{|u|=m} ∏_{i∈u} V_i ∏_{i∉u} ℰ_i`` for m = 0..d."""
    d = V.size
    e = np.zeros(d + 1)
    e[0] = 1.0
    for i in range(d):
        e[1:] = e[1:] * calE[i] + e[:-1] * V[i]
        e[0] *= calE[i]
    return e


def _diag_weight(u: int, V: np.ndarray, calE: np.ndarray) -> float:
    return float(np.prod(np.where([(u >> i) & 1 for i in range(V.size)], V, calE)))


def tau2_for_mismatch(k_sim, k_pred, measures: ProductMeasure | None = None, floor: float = TAU2_FLOOR) -> float:
    """Variance of the simulation kernel that the prediction kernel cannot represent.

    Returns ``∫ [k_sim(x, x) - k_common(x, x)] ν(dx)`` where ``k_common`` keeps
    the KANOVA terms present in both kernels, floored at ``floor``.  Only
    diagonal terms ``(u, u)`` contribute: for ``u ≠ v`` the integral of
    ``k_{u,v}(x, x)`` vanishes because a centred factor ``E_i - ℰ_i`` survives.
    """
    sim, pred = _as_decomposed(k_sim), _as_decomposed(k_pred)
    if sim.base != pred.base:
        raise InvalidArgumentError("both kernels must project the same base kernel")
    base = sim.base
    if measures is not None and measures != base.measures:
        raise InvalidArgumentError("measures differ from the kernels' own measures")
    calE = base.double_integrals
    V = np.array([f.diagonal_mean() for f in base.factors]) - calE
    s_sup, p_sup = sim.diagonal_support(), pred.diagonal_support()
    e = _card_sums(V, calE)
    total = 0.0
    for m in s_sup.cards - p_sup.cards:
        total += e[m]
    # subsets of a sim cardinality class that pred keeps individually
    for u, w in p_sup.explicit.items():
        if ss.card(u) in s_sup.cards:
            total -= _diag_weight(u, V, calE)
    for u, c in s_sup.explicit.items():
        if not p_sup.contains(u):
            total += c * _diag_weight(u, V, calE)
    return float(max(total, floor))


# -- CSV I/O ------------------------------------------------------------------


def read_design_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Read ``x1,...,xd[,y]``; returns ``(points, y or None)``."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgumentError(f"{path}: empty CSV file")
    header = [h.strip() for h in rows[0]]
    xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    xcols.sort(key=lambda i: int(header[i][1:]))
    if not xcols or [int(header[i][1:]) for i in xcols] != list(range(1, len(xcols) + 1)):
        raise InvalidArgumentError(f"{path}: header must start with x1,...,xd")
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if body.size == 0:
        raise InvalidArgumentError(f"{path}: no data rows")
    X = body[:, xcols]
    y = body[:, header.index("y")] if "y" in header else None
    return X, y


def write_design_csv(path, X: np.ndarray, y: np.ndarray | None = None, extra: dict | None = None):
    X = _points(X)
    header = [f"x{i + 1}" for i in range(X.shape[1])]
    cols = [X[:, i] for i in range(X.shape[1])]
    if y is not None:
        header.append("y")
        cols.append(np.asarray(y, dtype=float))
    for name, values in (extra or {}).items():
        header.append(name)
        cols.append(np.asarray(values, dtype=float))
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([f"{v:.17g}" for v in row])
