"""Command-line front end: ``ocpdl {factorize,bench,diagnose,patches}``.

Every option can also be given in a ``--config`` file of ``key=value`` lines
(keys are the long option names; command-line values win).
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics
from .baselines import SweepSettings, als_sweep, cp_objective, mu_sweep, refit_last_mode
from .online import RunConfig, init, random_loadings, step
from .sparse_coding import CodingSettings
from .streams import (
    SyntheticCPSpec, cp_markov_spec, markov_tensor_stream, patch_stream, ppm_read,
    read_markov_spec, subsample_stream, synthetic_full,
)
from .svgplot import line_chart
from .tensor_core import FormatError, frob_norm, read_dtf, write_dtf

EXIT_FAIL = 1
EXIT_USAGE = 2

TRACE_COLUMNS = ["iter", "wall_seconds", "abs_error", "rel_error", "objective",
                 "weight", "surrogate", "batch_loss", "displacement", "code_norm"]
BENCH_COLUMNS = ["method", "trial", "iter", "wall_seconds", "abs_error", "rel_error"]

DEFAULTS = {
    "factorize": dict(method="ocpdl", rank=5, lam=0.0, beta=1.0, weights="power", T=100,
                      sweeps=None, batch_size=1, subsample=None, seed=0, data_seed=0,
                      clock="monotonic", coding_iters=200, refit_iters=2000, out="out"),
    "bench": dict(methods="ocpdl,als,mu", trials=10, rank=5, lam=0.0, beta=1.0,
                  weights="power", T=100, batch_size=1, subsample=None, seed=0, data_seed=0,
                  clock="monotonic", coding_iters=200, refit_iters=2000, out="bench_out"),
    "diagnose": dict(shape="8,8,8", rank=4, lam=0.5, beta=1.0, weights="balanced", T=200,
                     batch_size=2, states=10, seed=0, data_seed=0, coding_iters=200),
    "patches": dict(patch=20, count=1000, batch_size=10, seed=0, out="patches"),
}
KEY_ALIASES = {"lambda": "lam", "iters": "T"}


class UsageError(Exception):
    pass


# -- config handling ----------------------------------------------------------


def read_config(path) -> dict:
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        cfg[KEY_ALIASES.get(key, key)] = value
    return cfg


def _coerce(value, default):
    if isinstance(value, str) and default is not None and not isinstance(default, str):
        if isinstance(default, bool):
            return value.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    return value


def resolve(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS[args.command])
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            opts[k] = _coerce(v, DEFAULTS[args.command].get(k))
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config", "func"):
            opts[k] = v
    for k in ("rank", "T", "batch_size", "seed", "data_seed", "trials", "states",
              "coding_iters", "refit_iters", "patch", "count"):
        if opts.get(k) is not None:
            opts[k] = int(opts[k])
    for k in ("lam", "beta"):
        if opts.get(k) is not None:
            opts[k] = float(opts[k])
    for k in ("sweeps", "subsample"):
        if opts.get(k) is not None:
            opts[k] = int(opts[k])
    return opts


def _dims(text) -> tuple:
    try:
        dims = tuple(int(x) for x in str(text).split(","))
    except ValueError as exc:
        raise UsageError(f"bad dimension list {text!r}") from exc
    if not dims or any(d <= 0 for d in dims):
        raise UsageError(f"bad dimension list {text!r}")
    return dims


# -- data sources -------------------------------------------------------------


def load_full_tensor(opts):
    """The full data tensor for tensor-file or synthetic sources, else None."""
    if opts.get("tensor"):
        path = Path(opts["tensor"])
        if not path.is_file():
            raise UsageError(f"tensor file not found: {path}")
        try:
            return read_dtf(path)
        except FormatError as exc:
            raise UsageError(str(exc)) from exc
    if opts.get("synthetic"):
        dims = _dims(opts["synthetic"])
        spec = SyntheticCPSpec.random(dims, opts["rank"], subsample=1, seed=opts["data_seed"])
        return synthetic_full(spec)
    return None


def _check_sources(opts):
    given = [k for k in ("tensor", "synthetic", "markov", "stream_dir") if opts.get(k)]
    if len(given) != 1:
        raise UsageError("give exactly one of --tensor, --synthetic, --markov, --stream-dir")
    if opts.get("markov") and not Path(opts["markov"]).is_file():
        raise UsageError(f"Markov spec not found: {opts['markov']}")
    if opts.get("stream_dir"):
        d = Path(opts["stream_dir"])
        if not d.is_dir() or not sorted(d.glob("*.dtf1")):
            raise UsageError(f"no DTF1 batches in {d}")


def _run_config(opts, diagnostic=False, batch_size=None):
    return RunConfig(
        rank=opts["rank"], batch_size=batch_size or opts["batch_size"], lam=opts["lam"],
        beta=opts["beta"], balanced=opts["weights"] == "balanced", T=opts["T"],
        seed=opts["seed"], coding_max_iters=opts["coding_iters"], diagnostic=diagnostic,
        skip_aggregation=bool(opts.get("skip_aggregation")),
    )


class _Clock:
    def __init__(self, kind):
        self.kind = kind
        self.total = 0.0

    def timed(self, fn, *a, **kw):
        t0 = time.perf_counter()
        out = fn(*a, **kw)
        self.total += time.perf_counter() - t0
        return out

    @property
    def value(self):
        return self.total if self.kind == "monotonic" else 0.0


def run_method(method, X, opts, seed):
    """Run one method on a full tensor; returns a list of per-iteration rows."""
    clock = _Clock(opts["clock"])
    init_seq, stream_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(init_seq)
    xnorm = max(frob_norm(X), 1e-12)
    rows = []
    iters = opts["T"] if method == "ocpdl" else (opts.get("sweeps") or opts["T"])
    if method in ("als", "mu"):
        factors = random_loadings(X.shape, opts["rank"], rng)
        sweep = als_sweep if method == "als" else mu_sweep
        settings = SweepSettings()
        for it in range(1, iters + 1):
            factors = clock.timed(sweep, X, factors, settings)
            obj = cp_objective(X, factors)
            rows.append(dict(iter=it, wall_seconds=clock.value, abs_error=math.sqrt(obj),
                             rel_error=math.sqrt(obj) / xnorm, objective=obj))
        return rows, factors
    if method != "ocpdl":
        raise UsageError(f"unknown method {method!r}")
    N = X.shape[-1]
    m = opts.get("subsample") or N
    if m > N:
        raise UsageError(f"subsample {m} exceeds last-mode length {N}")
    cfg = RunConfig(rank=opts["rank"], batch_size=m, lam=opts["lam"], beta=opts["beta"],
                    balanced=opts["weights"] == "balanced", T=iters, seed=seed,
                    coding_max_iters=opts["coding_iters"])
    state = init(cfg, X.shape[:-1], rng=rng)
    refit = CodingSettings(lam=opts["lam"], max_iters=opts["refit_iters"])
    factors = None
    for it, batch in enumerate(subsample_stream(X, m, iters, seed=np.random.default_rng(stream_seq)), start=1):
        state, rec = clock.timed(step, state, batch, cfg)
        factors = refit_last_mode(X, state.loadings, settings=refit)
        obj = cp_objective(X, factors)
        rows.append(dict(iter=it, wall_seconds=clock.value, abs_error=math.sqrt(obj),
                         rel_error=math.sqrt(obj) / xnorm, objective=obj, weight=rec.weight,
                         surrogate=rec.surrogate, batch_loss=rec.batch_loss,
                         displacement=rec.displacement, code_norm=rec.code_norm))
    return rows, factors


def run_stream(opts):
    """Online run over a Markov or DTF1-directory stream (no full tensor)."""
    clock = _Clock(opts["clock"])
    if opts.get("markov"):
        spec = read_markov_spec(opts["markov"])
        batches = markov_tensor_stream(spec, opts["T"], opts["batch_size"], seed=opts["data_seed"])
    else:
        files = sorted(Path(opts["stream_dir"]).glob("*.dtf1"))
        batches = (read_dtf(f) for f in files)
    cfg = _run_config(opts)
    rows, state = [], None
    for it, batch in enumerate(batches, start=1):
        if it > cfg.T:
            break
        if state is None:
            state = init(cfg, batch.shape[:-1])
        state, rec = clock.timed(step, state, batch, cfg)
        res = math.sqrt(max(rec.batch_residual, 0.0))
        rows.append(dict(iter=it, wall_seconds=clock.value, abs_error=res,
                         rel_error=res / max(rec.batch_norm, 1e-12), objective=res ** 2,
                         weight=rec.weight, surrogate=rec.surrogate, batch_loss=rec.batch_loss,
                         displacement=rec.displacement, code_norm=rec.code_norm))
    return rows, state.loadings


# -- output -------------------------------------------------------------------


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _x_axis(rows, clock):
    if clock == "monotonic":
        return [r["wall_seconds"] for r in rows], "elapsed seconds"
    return [float(r["iter"]) for r in rows], "iteration"


# -- subcommands --------------------------------------------------------------


def cmd_factorize(opts) -> int:
    _check_sources(opts)
    method = opts["method"]
    X = load_full_tensor(opts)
    if X is None and method != "ocpdl":
        raise UsageError(f"method {method} needs a full tensor (--tensor or --synthetic)")
    if X is not None:
        rows, factors = run_method(method, X, opts, opts["seed"])
    else:
        rows, factors = run_stream(opts)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(csv_text(rows, TRACE_COLUMNS))
    for j, U in enumerate(factors):
        write_dtf(out / f"U{j + 1}.dtf1", U)
    x, xlabel = _x_axis(rows, opts["clock"])
    line_chart([dict(label=method, x=x, y=[r["rel_error"] for r in rows])], out / "error_curve.svg",
               title=f"{method} relative reconstruction error", xlabel=xlabel, ylabel="relative error")
    print(f"{method}: {len(rows)} iterations, final rel_error {rows[-1]['rel_error']:.6g}")
    return 0


def trial_seeds(seed: int, trials: int) -> list:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]


def cmd_bench(opts) -> int:
    _check_sources(opts)
    X = load_full_tensor(opts)
    if X is None:
        raise UsageError("bench needs a full tensor (--tensor or --synthetic)")
    methods = [m.strip() for m in str(opts["methods"]).split(",") if m.strip()]
    for m in methods:
        if m not in ("ocpdl", "als", "mu"):
            raise UsageError(f"unknown method {m!r}")
    seeds = trial_seeds(opts["seed"], opts["trials"])
    jobs = [(m, k) for m in methods for k in range(opts["trials"])]
    opts = dict(opts, sweeps=None)
    workers = max(1, int(os.environ.get("OCPDL_THREADS", "1") or 1))

    def work(job):
        m, k = job
        rows, _ = run_method(m, X, opts, seeds[k])
        return [dict(method=m, trial=k, **{c: r[c] for c in BENCH_COLUMNS[2:]}) for r in rows]

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    rows = [r for block in results for r in block]
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(csv_text(rows, BENCH_COLUMNS))
    series = []
    for m in methods:
        curves = np.array([[r["rel_error"] for r in block] for (mm, _), block in zip(jobs, results) if mm == m])
        times = np.array([[r["wall_seconds"] for r in block] for (mm, _), block in zip(jobs, results) if mm == m])
        mean, sd = curves.mean(axis=0), curves.std(axis=0)
        x = times.mean(axis=0) if opts["clock"] == "monotonic" else np.arange(1, curves.shape[1] + 1, dtype=float)
        series.append(dict(label=m, x=list(x), y=list(mean), lo=list(np.maximum(mean - sd, 1e-16)),
                           hi=list(mean + sd)))
        print(f"{m}: final mean rel_error {mean[-1]:.6g} (sd {sd[-1]:.3g}) over {curves.shape[0]} trials")
    line_chart(series, out / "bench.svg", title="mean relative error (+/- 1 sd)",
               xlabel="elapsed seconds" if opts["clock"] == "monotonic" else "iteration",
               ylabel="relative error")
    return 0


def cmd_diagnose(opts) -> int:
    if opts.get("markov"):
        if not Path(opts["markov"]).is_file():
            raise UsageError(f"Markov spec not found: {opts['markov']}")
        spec = read_markov_spec(opts["markov"])
    else:
        spec = cp_markov_spec(_dims(opts["shape"]), opts["rank"], opts["states"], seed=opts["data_seed"])
    cfg = _run_config(dict(opts, clock="none"), diagnostic=True)
    state = None
    trace = []
    for batch in markov_tensor_stream(spec, cfg.T, cfg.batch_size, seed=opts["seed"] + 1):
        if state is None:
            state = init(cfg, batch.shape[:-1])
        state, rec = step(state, batch, cfg)
        trace.append(rec)
    results = diagnostics.run_all(trace, cfg.lam)
    print(f"diagnostic run: T={cfg.T} b={cfg.batch_size} R={cfg.rank} lambda={cfg.lam} "
          f"weights={'1/t' if cfg.balanced else f't^-{cfg.beta}'}")
    for r in results:
        print(r.line())
    ok = all(r.ok for r in results)
    print("ALL PASS" if ok else "FAILURES PRESENT")
    return 0 if ok else EXIT_FAIL


def cmd_patches(opts) -> int:
    path = Path(opts["image"]) if opts.get("image") else None
    if path is None or not path.is_file():
        raise UsageError(f"image not found: {path}")
    try:
        img = ppm_read(path)
    except FormatError as exc:
        raise UsageError(str(exc)) from exc
    p = opts["patch"]
    if p > min(img.shape[:2]):
        raise UsageError(f"patch size {p} larger than image {img.shape[0]}x{img.shape[1]}")
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    n = 0
    for n, batch in enumerate(patch_stream(img, p, opts["count"], opts["batch_size"], seed=opts["seed"]), 1):
        write_dtf(out / f"batch_{n:05d}.dtf1", batch)
    print(f"wrote {n} batches to {out}")
    return 0


# -- parser -------------------------------------------------------------------


def _common(p, online=True):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--rank", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--weights", choices=["power", "balanced"],
                   help="power: w_t = t^-beta; balanced: w_t = 1/t")
    p.add_argument("--balanced", dest="weights", action="store_const", const="balanced")
    p.add_argument("--T", "--iters", dest="T", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--data-seed", type=int)
    p.add_argument("--coding-iters", type=int)


def _sources(p):
    p.add_argument("--tensor", help="DTF1 tensor file")
    p.add_argument("--synthetic", help="comma-separated dims of a random CP ground truth")
    p.add_argument("--markov", help="Markov spec file")
    p.add_argument("--stream-dir", help="directory of DTF1 minibatch files")
    p.add_argument("--subsample", type=int, help="last-mode coordinates per online batch")
    p.add_argument("--refit-iters", type=int)
    p.add_argument("--clock", choices=["monotonic", "none"])
    p.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ocpdl", description="Online nonnegative CP-dictionary learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factorize", help="run one method and write trace, loadings and chart")
    p.add_argument("--method", choices=["ocpdl", "als", "mu"])
    p.add_argument("--sweeps", type=int, help="sweeps for als/mu (default: --T)")
    _common(p)
    _sources(p)

    p = sub.add_parser("bench", help="methods x trials error-vs-time benchmark")
    p.add_argument("--methods")
    p.add_argument("--trials", type=int)
    _common(p)
    _sources(p)

    p = sub.add_parser("diagnose", help="check the online algorithm's invariants")
    _common(p)
    p.add_argument("--shape", help="observation shape, e.g. 8,8,8")
    p.add_argument("--states", type=int, help="Markov chain states")
    p.add_argument("--markov", help="Markov spec file instead of the generated chain")
    p.add_argument("--skip-aggregation", action="store_true", default=None,
                   help="negative control: drop the other factors from A_bar")

    p = sub.add_parser("patches", help="extract image patches into DTF1 minibatches")
    p.add_argument("--config")
    p.add_argument("--image", help="binary PPM (P6) file")
    p.add_argument("--patch", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    return parser


COMMANDS = {"factorize": cmd_factorize, "bench": cmd_bench, "diagnose": cmd_diagnose,
            "patches": cmd_patches}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"ocpdl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, FormatError) as exc:
        print(f"ocpdl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
