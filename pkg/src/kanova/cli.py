"""Command-line interface.

Every subcommand builds a tensor-product kernel from a 1-D factor
specification repeated over ``--dim`` coordinates, optionally projected with
``--projector``.  Exit status is 0 on success, 2 on usage errors and 1 on
runtime errors (message on standard error).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from . import subsets as ss
from .decomposition import (
    MAX_EXPLICIT_TERMS,
    DecomposedKernel,
    ProductKernel,
    check_spd,
    family_kernel,
    kanova_term_product,
    parse_projector,
)
from .errors import InvalidArgumentError, KanovaError
from .experiment import ExperimentConfig, FULL_SCALE, row_label, run_experiment
from .fanova import DEFAULT_TRUNCATION, nystrom_spectrum, quadform_coeffs, sobol_moment, sobol_path_samples
from .grf import GrfModel, read_design_csv, simulate_paths, write_design_csv
from .kernels import parse_kernel
from .quadrature import DEFAULT_ORDER, ProductMeasure

log = logging.getLogger("kanova")

SOBOL_GRID_ORDER = {1: 128, 2: 24, 3: 10, 4: 6}


class UsageError(Exception):
    """Bad command-line input; reported with exit status 2."""


# -- shared helpers -----------------------------------------------------------


def _base_kernel(args) -> ProductKernel:
    factor = parse_kernel(args.kernel)
    return ProductKernel.isotropic(factor, args.dim, args.quad_order or DEFAULT_ORDER)


def _kernel(args):
    base = _base_kernel(args)
    if not getattr(args, "projector", None):
        return base
    spec = parse_projector(args.projector)
    if spec.mode == "family":
        return family_kernel(base, spec.family)
    return DecomposedKernel(base, spec)


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", newline="", encoding="utf-8") as fh:
            yield fh


def _read_rows(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise InvalidArgumentError(f"{path}: expected a header and at least one data row")
    header = [h.strip() for h in rows[0]]
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError:
        raise InvalidArgumentError(f"{path}: non-numeric value") from None
    return header, body


def _point_pairs(path, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Evaluation pairs from CSV.

    A header ``x1..xd,y1..yd`` lists pairs row by row; a header ``x1..xd``
    is a design and yields every ordered pair of its rows.
    Returns ``(i, j, X, Y)``.
    """
    header, body = _read_rows(path)
    xs = [f"x{i + 1}" for i in range(d)]
    ys = [f"y{i + 1}" for i in range(d)]
    if not set(xs) <= set(header):
        raise InvalidArgumentError(f"{path}: header must contain {','.join(xs)}")
    X = body[:, [header.index(c) for c in xs]]
    if set(ys) <= set(header):
        Y = body[:, [header.index(c) for c in ys]]
        idx = np.arange(X.shape[0])
        return idx, idx, X, Y
    n = X.shape[0]
    i, j = np.divmod(np.arange(n * n), n)
    return i, j, X[i], X[j]


def _parse_terms(text: str, d: int) -> list[tuple[int, int]]:
    if text == "all":
        if 4**d > MAX_EXPLICIT_TERMS:
            raise InvalidArgumentError(f"--terms all enumerates 4^d terms; d={d} is too large")
        return [(u, v) for u in ss.all_subsets(d) for v in ss.all_subsets(d)]
    if text == "diagonal":
        if 2**d > MAX_EXPLICIT_TERMS:
            raise InvalidArgumentError(f"--terms diagonal enumerates 2^d terms; d={d} is too large")
        return [(u, u) for u in ss.all_subsets(d)]
    try:
        obj = json.loads(text)
        pairs = [(ss.from_labels(u), ss.from_labels(v)) for u, v in obj]
    except (json.JSONDecodeError, TypeError, ValueError):
        raise InvalidArgumentError(f"--terms must be all, diagonal or a JSON list of [u, v] pairs; got {text!r}") from None
    for u, v in pairs:
        ss.check(u, d)
        ss.check(v, d)
    return pairs


def _labels(u: int) -> str:
    return json.dumps(ss.to_labels(u), separators=(",", ":"))


def _parse_subsets(text: str | None, d: int) -> list[int] | None:
    if text is None:
        return None
    try:
        out = [ss.from_labels(s) for s in json.loads(text)]
    except (json.JSONDecodeError, TypeError):
        raise InvalidArgumentError(f"--subsets must be a JSON list of subsets, got {text!r}") from None
    for u in out:
        ss.check(u, d)
    return out


# -- subcommands --------------------------------------------------------------


def cmd_decompose(args) -> int:
    pk = _base_kernel(args)
    terms = _parse_terms(args.terms, args.dim)
    i, j, X, Y = _point_pairs(args.at, args.dim)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "u", "v", "value"])
        for u, v in terms:
            vals = kanova_term_product(pk, u, v, X, Y)
            for a, b, val in zip(i, j, np.broadcast_to(vals, i.shape)):
                w.writerow([int(a), int(b), _labels(u), _labels(v), f"{val:.17g}"])
    return 0


def cmd_project(args) -> int:
    k = _kernel(args)
    i, j, X, Y = _point_pairs(args.at, args.dim)
    vals = np.broadcast_to(k(X, Y), i.shape)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "value"])
        for a, b, val in zip(i, j, vals):
            w.writerow([int(a), int(b), f"{val:.17g}"])
    return 0


def cmd_simulate(args) -> int:
    k = _kernel(args)
    X, _ = read_design_csv(args.design)
    _check_dim(X, args.dim, args.design)
    Z = simulate_paths(k, X, args.n_paths, args.seed)
    extra = {f"z{p + 1}": Z[p] for p in range(Z.shape[0])}
    _write_csv(args.out, X, None, extra)
    return 0


def cmd_predict(args) -> int:
    k = _kernel(args)
    Xtr, ytr = read_design_csv(args.train)
    if ytr is None:
        raise InvalidArgumentError(f"{args.train}: training data needs a y column")
    Xte, _ = read_design_csv(args.test)
    _check_dim(Xtr, args.dim, args.train)
    _check_dim(Xte, args.dim, args.test)
    model = GrfModel(k, Xtr, ytr, args.tau2)
    res = model.predict(Xte)
    print(f"jitter_used={model.jitter_used:g}", file=sys.stderr)
    _write_csv(args.out, Xte, None, {"mean": res.mean, "variance": res.variance})
    return 0


def _check_dim(X, d, path):
    if X.shape[1] != d:
        raise InvalidArgumentError(f"{path}: {X.shape[1]} coordinates but --dim {d}")


def _write_csv(path, X, y, extra):
    if path in (None, "-"):
        header = [f"x{i + 1}" for i in range(X.shape[1])] + list(extra)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        cols = [X[:, i] for i in range(X.shape[1])] + [np.asarray(v) for v in extra.values()]
        for row in zip(*cols):
            w.writerow([f"{v:.17g}" for v in row])
    else:
        write_design_csv(path, X, y, extra)


def cmd_sobol(args) -> int:
    d = args.dim
    k = _kernel(args)
    order = args.quad_order or SOBOL_GRID_ORDER.get(d)
    if order is None:
        raise InvalidArgumentError(f"Sobol' computations on tensor grids support d <= 4, got d={d}")
    order = max(order, math.ceil(args.K ** (1.0 / d) - 1e-9)) if args.mode != "paths" else order
    dom = parse_kernel(args.kernel).domain
    meas = ProductMeasure.uniform(d, order, dom)
    subsets = _parse_subsets(args.subsets, d) or [u for u in ss.all_subsets(d) if u]
    budget = max(order**d, 1)
    records = {u: {"subset": ss.to_labels(u)} for u in subsets}
    if args.mode in ("moments", "both"):
        spec = nystrom_spectrum(k, meas, centred=True, budget=budget).truncate(args.K, args.coverage)
        for u in subsets:
            mom = sobol_moment(quadform_coeffs(spec, u))
            records[u].update(
                value=mom.mean,
                mean=mom.mean,
                second_moment=mom.second_moment,
                truncation_K=spec.K,
                trace_coverage=spec.trace_coverage,
            )
    if args.mode in ("paths", "both"):
        samples = sobol_path_samples(k, meas, subsets, args.n_paths, args.seed, budget=budget)
        for u in subsets:
            rec = records[u]
            rec.setdefault("value", samples.mean(u))
            rec.update(
                path_mean=samples.mean(u),
                path_standard_error=samples.standard_error(u) if samples.values[u].size > 1 else None,
                n_paths=args.n_paths,
                skipped_paths=samples.skipped,
            )
    with _output(args.out) as fh:
        json.dump([records[u] for u in subsets], fh, indent=2)
        fh.write("\n")
    return 0


def cmd_spd_check(args) -> int:
    k = _kernel(args)
    lo, hi = _base_kernel(args).measures.lower, _base_kernel(args).measures.upper
    rep = check_spd(k, args.n, args.dim, args.seed or 0, args.tol, lo, hi)
    with _output(args.out) as fh:
        json.dump(rep.as_dict(), fh, indent=2)
        fh.write("\n")
    return 0 if rep.passed else 1


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    data = cfg.to_dict()
    if args.seed is not None:
        data["base_seed"] = args.seed
    if args.quad_order is not None:
        data["quadrature_order"] = args.quad_order
    if args.paper_scale:
        data.update(FULL_SCALE)
        warnings.warn(
            "full-size run: d=30, 500/200 points, 200 replications; expect hours of runtime",
            RuntimeWarning,
            stacklevel=1,
        )
    cfg = ExperimentConfig.from_dict(data)
    table = run_experiment(cfg)
    out = table.write(args.out or "results")
    mean = table.mean_C
    width = max(len(row_label(s)) for s in table.sim_kernels)
    print(" " * width + "".join(f"{p:>10}" for p in table.pred_kernels))
    for i, s in enumerate(table.sim_kernels):
        print(f"{row_label(s):<{width}}" + "".join(f"{v:>10.4f}" for v in mean[i]))
    print(f"wrote {out / 'results.csv'}, {out / 'per_rep.csv'}, {out / 'metadata.json'}", file=sys.stderr)
    return 0


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--quad-order", type=int, default=None, help="Gauss-Legendre order per coordinate")
    common.add_argument("--out", default=None, help="output file or directory (default: stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    kern = argparse.ArgumentParser(add_help=False)
    kern.add_argument("--kernel", required=True, help="1-D factor, e.g. gaussian{theta=0.7071}")
    kern.add_argument("--dim", type=int, default=1, help="number of coordinates")
    kern.add_argument("--projector", default=None, help="e.g. family:k_inter, star:[[1],[2]], simple:{1,3}")

    p = _Parser(prog="kanova", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kanova {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("decompose", parents=[common, kern], help="KANOVA terms k_{u,v}(x, y)")
    s.add_argument("--terms", default="all", help="all, diagonal, or JSON list of [u, v] label pairs")
    s.add_argument("--at", required=True, help="CSV of x1..xd,y1..yd pairs or an x1..xd design")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("project", parents=[common, kern], help="evaluate a projected kernel")
    s.add_argument("--at", required=True, help="CSV of x1..xd,y1..yd pairs or an x1..xd design")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("simulate", parents=[common, kern], help="sample GRF paths on a design")
    s.add_argument("--design", required=True, help="CSV with header x1..xd")
    s.add_argument("--n-paths", type=int, default=1)
    s.set_defaults(func=cmd_simulate, seed_required=True)

    s = sub.add_parser("predict", parents=[common, kern], help="kriging mean and variance")
    s.add_argument("--train", required=True, help="CSV with header x1..xd,y")
    s.add_argument("--test", required=True, help="CSV with header x1..xd")
    s.add_argument("--tau2", type=float, default=0.0, help="observation noise variance")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("sobol", parents=[common, kern], help="Sobol' index distribution of GRF paths")
    s.add_argument("--mode", choices=("moments", "paths", "both"), default="moments")
    s.add_argument("--K", type=int, default=DEFAULT_TRUNCATION, help="Karhunen-Loeve truncation")
    s.add_argument("--coverage", type=float, default=None, help="optional trace-coverage stop, e.g. 0.99")
    s.add_argument("--n-paths", type=int, default=1000)
    s.add_argument("--subsets", default=None, help="JSON list of subsets, default all non-empty")
    s.set_defaults(func=cmd_sobol, seed_required=True)

    s = sub.add_parser("experiment", parents=[common], help="run the sparse-kernel prediction experiment")
    s.add_argument("--config", default=None, help="JSON config (snake_case keys)")
    s.add_argument("--paper-scale", action="store_true", help="d=30, 500/200 points, 200 replications")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("spd-check", parents=[common, kern], help="smallest Gram eigenvalue at random points")
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--tol", type=float, default=1e-8)
    s.set_defaults(func=cmd_spd_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "seed_required", False) and args.seed is None:
        args.seed = 0
    if getattr(args, "dim", 1) < 1:
        print("kanova: error: --dim must be >= 1", file=sys.stderr)
        return 2
    try:
        rc = args.func(args)
        sys.stdout.flush()
        return rc
    except KanovaError as exc:
        print(f"kanova {args.command}: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # downstream closed early (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    except OSError as exc:
        print(f"kanova {args.command}: {exc}", file=sys.stderr)
        return 1
