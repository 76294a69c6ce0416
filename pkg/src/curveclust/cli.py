"""Command line interface: ``curveclust <generate|fit|eval|bench> [flags]``.

Every command accepts ``--config FILE`` holding ``key=value`` lines (keys
spelled like the long flags, with or without the leading dashes); flags given
on the command line take precedence. Machine-readable results go to stdout,
log messages to stderr.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .basis import DesignSpec, parse_float_list
from .dataset import Dataset, DatasetError, read_csv, write_csv
from .em import EmConfig, FitError, e_step, fit_em
from .metrics import evaluate, match_labels
from .mixture import RegressionMixture, build_designs, map_partition
from .robust import RobustConfig, fit_robust
from .simulators import SCENARIOS, generate, truth

log = logging.getLogger("curveclust")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 3

BASIS_ALIASES = {"poly": "polynomial", "polynomial": "polynomial", "spline": "spline", "bspline": "bspline"}


class CliError(Exception):
    pass


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected key=value")
            key, val = (t.strip() for t in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = val
    return out


def write_kv(path, d: dict) -> None:
    with open(path, "w") as fh:
        for k, v in d.items():
            fh.write(f"{k}={v}\n")


# ---------------------------------------------------------------------------
# argument groups


def _add_spec_flags(p):
    g = p.add_argument_group("basis")
    g.add_argument("--basis", choices=sorted(BASIS_ALIASES), default="poly")
    g.add_argument("--degree", type=int, default=4, help="polynomial degree (poly basis)")
    g.add_argument("--order", type=int, default=4, help="spline order M = degree + 1")
    g.add_argument("--knots", type=int, default=None,
                   help="number of equispaced interior knots (default 3 for waveform, else 4)")
    g.add_argument("--knot-positions", default=None, help="explicit interior knots, ';'-separated")
    g.add_argument("--boundary", default=None, help="boundary knots 'lo;hi' (default: data range)")


def _add_fit_flags(p):
    g = p.add_argument_group("fit")
    g.add_argument("--algorithm", choices=("em", "robust"), default="robust")
    g.add_argument("--K", type=int, default=None, help="number of components (em only)")
    g.add_argument("--restarts", type=int, default=10, help="em restarts")
    g.add_argument("--init", choices=("random_partition", "kmeans_partition"), default="random_partition")
    g.add_argument("--tol", type=float, default=None, help="stopping threshold (em 1e-6 on loglik, robust 1e-6 on beta)")
    g.add_argument("--max-iter", type=int, default=None)
    g.add_argument("--lambda-init", type=float, default=1.0)
    g.add_argument("--lambda-denominator", choices=("max-pi", "entropy"), default="max-pi",
                   help="adaptive penalty denominator: entropy scaled by max pi, or entropy alone")
    g.add_argument("--no-settle", action="store_true", help="keep the penalty on until the end")


def build_spec(args, dataset: Dataset, scenario: str | None = None) -> DesignSpec:
    family = BASIS_ALIASES[args.basis]
    if family == "polynomial":
        return DesignSpec.polynomial(args.degree)
    lo, hi = parse_float_list(args.boundary) if args.boundary else dataset.x_range
    if args.knot_positions is not None:
        return DesignSpec(family, args.order - 1, parse_float_list(args.knot_positions), (lo, hi))
    knots = args.knots
    if knots is None:
        knots = 3 if scenario == "waveform" else 4
    return DesignSpec.equispaced(family, args.order, knots, lo, hi)


def run_fit(dataset: Dataset, spec: DesignSpec, args, seed: int):
    if args.algorithm == "em":
        if args.K is None:
            raise CliError("--K is required for --algorithm em")
        cfg = EmConfig(
            K=args.K,
            max_iter=args.max_iter or 1000,
            tol=args.tol or 1e-6,
            n_restarts=args.restarts,
            init=args.init,
            seed=seed,
        )
        return fit_em(dataset, spec, cfg)
    cfg = RobustConfig(
        tol=args.tol or 1e-6,
        max_iter=args.max_iter or 500,
        seed=seed,
        lambda_init=args.lambda_init,
        scale_by_max_pi=args.lambda_denominator == "max-pi",
        settle=not args.no_settle,
    )
    return fit_robust(dataset, spec, cfg)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    if args.seed is None:
        raise CliError("--seed is required")
    ds = generate(args.scenario, args.n, args.seed, fixed_counts=args.fixed_counts)
    write_csv(ds, args.out, args.layout)
    counts = np.bincount(ds.labels, minlength=4)[1:]
    log.info("wrote %s: n=%d m=%d class counts %s", args.out, ds.n, ds.curves[0].m, counts.tolist())
    print(f"n={ds.n}")
    print(f"m={ds.curves[0].m}")
    print("class_counts=" + ";".join(str(c) for c in counts))
    return EXIT_OK


def _write_matrix(path, M: np.ndarray, prefix: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{prefix}{k + 1}" for k in range(M.shape[1])])
        for row in M:
            w.writerow([f"{v:.17g}" for v in row])


def write_labels(path, z) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"])
        for v in z:
            w.writerow([int(v)])


def read_labels(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["label"]:
        raise CliError(f"{path}: expected a single 'label' column")
    return np.array([int(r[0]) for r in rows[1:] if r])


def cmd_fit(args) -> int:
    ds = read_csv(args.data, args.layout)
    spec = build_spec(args, ds)
    model, tau, trace = run_fit(ds, spec, args, args.seed if args.seed is not None else 0)
    z = map_partition(tau)
    prefix = args.out
    Path(prefix).parent.mkdir(parents=True, exist_ok=True)
    model.save(f"{prefix}.model.txt")
    write_kv(f"{prefix}.spec.txt", spec.to_dict())
    trace.to_csv(f"{prefix}.trace.csv")
    _write_matrix(f"{prefix}.tau.csv", tau, "k")
    write_labels(f"{prefix}.labels.csv", z)
    for it, msg in trace.events:
        log.info("iteration %d: %s", it, msg)
    print(f"K={model.K}")
    print(f"iterations={trace.n_iter}")
    print(f"converged={trace.converged}")
    print(f"loglik={trace.records[-1].loglik:.12g}")
    if not trace.converged:
        log.error("fit did not converge within the iteration limit")
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _spec_path(model_path: str) -> Path:
    p = Path(model_path)
    name = p.name
    stem = name[: -len(".model.txt")] if name.endswith(".model.txt") else p.stem
    return p.with_name(stem + ".spec.txt")


def cmd_eval(args) -> int:
    ds = read_csv(args.data, args.layout)
    if ds.labels is None:
        raise CliError(f"{args.data} carries no ground-truth labels")
    est_means = true_means = None
    if args.model:
        spec_file = Path(args.spec_file) if args.spec_file else _spec_path(args.model)
        spec = DesignSpec.from_dict(read_config(spec_file))
        model = RegressionMixture.load(args.model)
        designs = build_designs(ds, spec)
        z = map_partition(e_step(model, designs))
        if args.scenario and ds.shared_grid:
            x = ds.curves[0].x
            est_means = model.mean_curves(designs.X[0, : x.size])
            true_means = truth(args.scenario, x)["means"]
    elif args.labels:
        z = read_labels(args.labels)
        if z.size != ds.n:
            raise CliError(f"{args.labels}: {z.size} labels for {ds.n} curves")
    else:
        raise CliError("give --model or --labels")
    rep = evaluate(z, ds.labels, est_means, true_means)
    text = rep.to_text()
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


BENCH_COLUMNS = ["replication", "seed", "K", "misclassification", "rand_index", "approx_error",
                 "converged", "iterations"]


def _bench_one(job):
    r, seed, args = job
    row = {"replication": r, "seed": seed}
    try:
        ds = generate(args.scenario, args.n, seed, fixed_counts=args.fixed_counts)
        spec = build_spec(args, ds, args.scenario)
        model, tau, trace = run_fit(ds, spec, args, seed)
    except (FitError, ValueError, np.linalg.LinAlgError) as exc:
        row["error"] = str(exc)
        return row
    tr = truth(args.scenario, ds.curves[0].x)
    z = map_partition(tau)
    X = build_designs(Dataset(ds.curves[:1]), spec).X[0]
    rep = evaluate(z, ds.labels, model.mean_curves(X), tr["means"])
    row.update(K=model.K, misclassification=rep.misclassification_rate, rand_index=rep.rand_index,
               approx_error=rep.approx_error, converged=int(trace.converged), iterations=trace.n_iter)
    mapping = match_labels(z, ds.labels)
    sigma = np.sqrt(model.sigma2)
    n_true = tr["pi"].size
    for c in range(1, n_true + 1):
        comp = [h for h, t in mapping.items() if t == c]
        if comp:
            k = comp[0] - 1
            row[f"sigma{c}_abs_err"] = abs(sigma[k] - tr["sigma"])
            row[f"pi{c}_abs_err"] = abs(model.pi[k] - tr["pi"][c - 1])
        else:
            row[f"sigma{c}_abs_err"] = float("nan")
            row[f"pi{c}_abs_err"] = float("nan")
    return row


def bench_columns(n_classes: int) -> list:
    cols = list(BENCH_COLUMNS)
    cols += [f"sigma{c}_abs_err" for c in range(1, n_classes + 1)]
    cols += [f"pi{c}_abs_err" for c in range(1, n_classes + 1)]
    return cols + ["error"]


def summarize(rows: list, columns: list) -> list:
    """Mean and standard deviation rows over successful replications."""
    ok = [r for r in rows if not r.get("error")]
    mean = {"replication": "mean", "seed": ""}
    std = {"replication": "std", "seed": ""}
    for col in columns:
        if col in ("replication", "seed", "error"):
            continue
        vals = np.array([float(r.get(col, np.nan)) for r in ok], dtype=float)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            mean[col] = std[col] = float("nan")
            continue
        mean[col] = float(vals.mean())
        std[col] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    mean["error"] = std["error"] = f"failed={len(rows) - len(ok)}" if len(ok) < len(rows) else ""
    return [mean, std]


def run_bench(args) -> list:
    if args.seed is None and not args.seeds:
        raise CliError("--seed is required")
    if args.replications < 1:
        raise CliError("--replications must be >= 1")
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
        if len(seeds) != args.replications:
            raise CliError("--seeds must list one seed per replication")
    else:
        seeds = [args.seed + r for r in range(args.replications)]
    jobs = [(r + 1, s, args) for r, s in enumerate(seeds)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            rows = list(ex.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]
    for row in rows:
        if row.get("error"):
            log.warning("replication %s failed: %s", row["replication"], row["error"])
    return rows


def _fmt_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return "" if v is None else str(v)


def cmd_bench(args) -> int:
    rows = run_bench(args)
    columns = bench_columns(truth(args.scenario)["pi"].size)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(columns)
        for row in rows + summarize(rows, columns):
            w.writerow([_fmt_cell(row.get(c, "")) for c in columns])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curveclust", description="Cluster curves with mixtures of polynomial or spline regressions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate a benchmark dataset")
    p.add_argument("--config")
    p.add_argument("--scenario", choices=SCENARIOS, default="three_class")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="curves.csv")
    p.add_argument("--layout", choices=("wide", "long"), default="wide")
    p.add_argument("--fixed-counts", action="store_true", help="realize class proportions exactly")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit a regression mixture")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--layout", choices=("wide", "long"), default="wide")
    p.add_argument("--out", default="fit", help="output prefix")
    p.add_argument("--seed", type=int, default=None)
    _add_spec_flags(p)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="score a partition against ground-truth labels")
    p.add_argument("--config")
    p.add_argument("--data", required=True)
    p.add_argument("--layout", choices=("wide", "long"), default="wide")
    p.add_argument("--model")
    p.add_argument("--spec-file", help="basis description (default: <prefix>.spec.txt next to the model)")
    p.add_argument("--labels", help="CSV with a 'label' column")
    p.add_argument("--scenario", choices=SCENARIOS, help="adds the mean-curve error against the true means")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="replicated generate/fit/eval runs")
    p.add_argument("--config")
    p.add_argument("--scenario", choices=SCENARIOS, default="waveform")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--seed", type=int, default=None, help="replication r uses seed + r - 1")
    p.add_argument("--seeds", help="comma-separated explicit seeds, one per replication")
    p.add_argument("--fixed-counts", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    _add_spec_flags(p)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        # re-parse with config values as defaults so explicit flags still win
        conf = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(conf) - known)
        if unknown:
            raise CliError(f"{args.config}: unknown keys {unknown}")
        for a in sub._actions:
            if a.dest in conf and isinstance(a, (argparse._StoreTrueAction,)):
                conf[a.dest] = conf[a.dest].lower() in ("1", "true", "yes", "on")
        sub.set_defaults(**conf)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"curveclust: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (CliError, DatasetError, FitError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
