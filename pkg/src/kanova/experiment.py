"""High-dimensional prediction experiment: sparse test fields against sparse kriging models.

For every replication, fresh LHS-maximin train and test designs are drawn;
each simulation kernel yields one joint path on train ∪ test, and every
prediction kernel is fitted to the train values of that same path.  The
score is criterion ``C``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import platform
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from .decomposition import FAMILY_NAMES, ProductKernel, family_kernel
from .design import lhs_maximin
from .errors import DegenerateError, InvalidArgumentError, KanovaError
from .grf import GrfModel, cholesky_jitter, gram, sample_from_factor, tau2_for_mismatch
from .kernels import Kernel1D

log = logging.getLogger(__name__)

DEFAULT_THETA = 1.0 / math.sqrt(2.0)
FULL_SCALE = dict(d=30, n_train=500, n_test=200, n_reps=200)


def criterion_c(y, yhat) -> float:
    """``C = 1 - Σ(y - ŷ)² / Σ y²``; 1 for a perfect fit, 0 for the null predictor."""
    y = np.asarray(y, dtype=float).ravel()
    yhat = np.asarray(yhat, dtype=float).ravel()
    if y.size < 1 or y.shape != yhat.shape:
        raise InvalidArgumentError("criterion C needs two vectors of equal, non-zero length")
    ss = float(np.sum(y * y))
    if ss <= 1e-14:
        raise DegenerateError("criterion C is undefined for an all-zero target")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss


@dataclass
class ExperimentConfig:
    d: int = 8
    theta: float = DEFAULT_THETA
    sim_kernels: list[str] = field(default_factory=lambda: list(FAMILY_NAMES))
    pred_kernels: list[str] = field(default_factory=lambda: list(FAMILY_NAMES))
    n_train: int = 150
    n_test: int = 100
    n_reps: int = 20
    base_seed: int = 0
    tau2_policy: str | dict = "auto"
    quadrature_order: int = 64
    maximin_iters: int = 1000

    def __post_init__(self):
        if self.d < 1:
            raise InvalidArgumentError("d must be >= 1")
        if not self.theta > 0:
            raise InvalidArgumentError("theta must be positive")
        if self.n_train < 2 or self.n_test < 2:
            raise InvalidArgumentError("n_train and n_test must be >= 2")
        if self.n_reps < 1:
            raise InvalidArgumentError("n_reps must be >= 1")
        if self.quadrature_order < 1 or self.maximin_iters < 0:
            raise InvalidArgumentError("quadrature_order must be >= 1 and maximin_iters >= 0")
        for name in list(self.sim_kernels) + list(self.pred_kernels):
            if name not in FAMILY_NAMES:
                raise InvalidArgumentError(f"unknown kernel {name!r}; expected one of {', '.join(FAMILY_NAMES)}")
        if self.d < 5 and "k_sparse" in set(self.sim_kernels) | set(self.pred_kernels):
            raise InvalidArgumentError("k_sparse needs d >= 5")
        self.fixed_tau2  # validates the policy

    @property
    def fixed_tau2(self) -> float | None:
        p = self.tau2_policy
        if p == "auto":
            return None
        if isinstance(p, dict) and set(p) == {"fixed"}:
            v = float(p["fixed"])
            if not v >= 0:
                raise InvalidArgumentError("fixed tau2 must be >= 0")
            return v
        raise InvalidArgumentError(f'tau2_policy must be "auto" or {{"fixed": value}}, got {p!r}')

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def at_full_scale(self) -> "ExperimentConfig":
        data = self.to_dict()
        data.update(FULL_SCALE)
        return ExperimentConfig.from_dict(data)


@dataclass
class ResultTable:
    sim_kernels: list[str]
    pred_kernels: list[str]
    per_rep_C: np.ndarray  # (n_sim, n_pred, n_reps); NaN where the cell failed
    metadata: dict

    @property
    def mean_C(self) -> np.ndarray:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(self.per_rep_C, axis=2)

    def cell(self, sim: str, pred: str) -> float:
        return float(self.mean_C[self.sim_kernels.index(sim), self.pred_kernels.index(pred)])

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        mean = self.mean_C
        with open(out / "results.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sim"] + self.pred_kernels)
            for i, s in enumerate(self.sim_kernels):
                w.writerow([row_label(s)] + [_fmt4(v) for v in mean[i]])
        with open(out / "per_rep.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sim", "pred", "rep", "C"])
            for i, s in enumerate(self.sim_kernels):
                for j, p in enumerate(self.pred_kernels):
                    for r in range(self.per_rep_C.shape[2]):
                        w.writerow([s, p, r, f"{self.per_rep_C[i, j, r]:.17g}"])
        with open(out / "metadata.json", "w", encoding="utf-8") as fh:
            json.dump(self.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return out


def row_label(name: str) -> str:
    return "Z_" + name[2:] if name.startswith("k_") else name


def _fmt4(v: float) -> str:
    return "nan" if not np.isfinite(v) else f"{v:.4f}"


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    base = ProductKernel.isotropic(Kernel1D.gaussian(cfg.theta), cfg.d, cfg.quadrature_order)
    names = list(dict.fromkeys(list(cfg.sim_kernels) + list(cfg.pred_kernels)))
    kernels = {n: family_kernel(base, n) for n in names}
    fixed = cfg.fixed_tau2
    tau2 = {
        s: {p: fixed if fixed is not None else tau2_for_mismatch(kernels[s], kernels[p]) for p in cfg.pred_kernels}
        for s in cfg.sim_kernels
    }
    n_sim, n_pred = len(cfg.sim_kernels), len(cfg.pred_kernels)
    C = np.full((n_sim, n_pred, cfg.n_reps), np.nan)
    sim_jitter = np.full((n_sim, cfg.n_reps), np.nan)
    pred_jitter = np.full((n_sim, n_pred, cfg.n_reps), np.nan)
    failures = []
    seeds = []
    for rep in range(cfg.n_reps):
        seed = cfg.base_seed + rep
        seeds.append(seed)
        ss = np.random.SeedSequence(seed)
        train_seed, test_seed, path_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(3))
        Xtr = lhs_maximin(cfg.n_train, cfg.d, train_seed, cfg.maximin_iters)
        Xte = lhs_maximin(cfg.n_test, cfg.d, test_seed, cfg.maximin_iters)
        Xall = np.vstack([Xtr, Xte])
        for i, s in enumerate(cfg.sim_kernels):
            try:
                factor = cholesky_jitter(gram(kernels[s], Xall))
            except KanovaError as exc:
                failures.append({"rep": rep, "sim": s, "pred": None, "error": str(exc)})
                continue
            sim_jitter[i, rep] = factor.jitter_used
            rng = np.random.default_rng([path_seed, i])
            z = sample_from_factor(factor, 1, rng)[0]
            ytr, yte = z[: cfg.n_train], z[cfg.n_train :]
            for j, p in enumerate(cfg.pred_kernels):
                try:
                    model = GrfModel(kernels[p], Xtr, ytr, tau2[s][p])
                    pred_jitter[i, j, rep] = model.jitter_used
                    C[i, j, rep] = criterion_c(yte, model.predict(Xte, return_variance=False).mean)
                except KanovaError as exc:
                    failures.append({"rep": rep, "sim": s, "pred": p, "error": str(exc)})
        log.info("replication %d/%d done", rep + 1, cfg.n_reps)
    metadata = {
        "config": cfg.to_dict(),
        "theta": cfg.theta,
        "base_kernel": base.factors[0].describe(),
        "rep_seeds": seeds,
        "tau2": tau2,
        "sim_jitter": _nested(sim_jitter, cfg.sim_kernels),
        "pred_jitter_max": {
            s: {p: _num(np.nanmax(pred_jitter[i, j])) if np.any(np.isfinite(pred_jitter[i, j])) else None
                for j, p in enumerate(cfg.pred_kernels)}
            for i, s in enumerate(cfg.sim_kernels)
        },
        "failures": failures,
        "rng": "numpy PCG64 via default_rng; designs and paths from SeedSequence(base_seed + rep)",
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "kanova": _package_version(),
        },
    }
    return ResultTable(list(cfg.sim_kernels), list(cfg.pred_kernels), C, metadata)


def _num(v) -> float | None:
    v = float(v)
    return v if math.isfinite(v) else None


def _nested(arr: np.ndarray, names: list[str]) -> dict:
    return {n: [_num(v) for v in arr[i]] for i, n in enumerate(names)}


def _package_version() -> str:
    from . import __version__

    return __version__
