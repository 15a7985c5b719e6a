"""Command-line front end.

Subcommands
-----------
run            Run the online clusterer over a CSV stream or a generated one.
replicate      Repeat the drifting-groups benchmark and score cluster-count
               accuracy (plus a regret summary against the anytime bound).
trace          Export one step's sampler trace (k, acceptance ratio, ...).
bounds         Evaluate the closed-form regret-bound remainders.
generate       Emit a synthetic stream as CSV.
oracle-check   Compare the sampler's k-marginal against the grid oracle on
               a toy instance (total-variation gate at 0.05).

Exit codes: 0 success, 1 usage error, 2 runtime failure (including a
failing oracle check).  All commands are deterministic given their
arguments and seeds, and refuse to overwrite outputs unless --overwrite is
passed.
"""

from __future__ import annotations

import argparse
import csv
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from .core import KMeansConfig, StreamConfig, load_config, seeded_rng
from .datagen import SyntheticSpec, generate, stream_csv_rows
from .metrics import (
    correct_k_count,
    regret_bound_anytime,
    regret_bound_fixed,
    regret_bound_horizon,
    regret_bound_student,
    regret_report,
    updated_k_sequence,
)
from .online import TemperatureSchedule, lambda_at, run_stream, run_synthetic_repetitions
from .posterior import GridTooLargeError, TargetDensity, grid_oracle
from .priors import PriorSpec
from .proposals import StepProposals, proposal_scale
from .scoring import ScoreContext
from .chain import initial_state, run_chain

_USAGE_EXIT = 1
_RUNTIME_EXIT = 2

_OCL_CAVEAT = (
    "note: ocl column is a k-means upper approximation of the oracle loss, "
    "so the regret column is a conservative lower estimate"
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


class CliError(RuntimeError):
    pass


def _prepare_outputs(out_dir: str, names, overwrite: bool):
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    targets = [path / n for n in names]
    if not overwrite:
        existing = [str(t) for t in targets if t.exists()]
        if existing:
            raise CliError(f"refusing to overwrite {existing}; pass --overwrite")
    return targets


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _load_stream(args):
    """Stream observations (and truth, when present) from --data or --synthetic."""
    if args.data is not None:
        with open(args.data, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            cols = {name: i for i, name in enumerate(header)}
            xcols = sorted(
                (name for name in cols if name.startswith("x")), key=lambda s: int(s[1:])
            )
            if not xcols:
                raise CliError(f"no coordinate columns (x1, x2, ...) in {args.data}")
            xs, ks = [], []
            for row in reader:
                xs.append([float(row[cols[c]]) for c in xcols])
                if "k_true" in cols:
                    ks.append(int(row[cols["k_true"]]))
            return np.asarray(xs), (np.asarray(ks, dtype=int) if ks else None)
    spec = SyntheticSpec(kind=args.synthetic, horizon=args.horizon)
    stream = generate(spec, seeded_rng(args.data_seed, (4, 0)))
    return stream.xs, stream.k_true


def _add_stream_args(p: _Parser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="input stream CSV (columns x1..xd, optional k_true)")
    src.add_argument("--synthetic", choices=["sine_drift"], help="generate the stream instead")
    p.add_argument("--horizon", type=int, default=200, help="steps for --synthetic")
    p.add_argument("--data-seed", type=int, default=0, help="seed for --synthetic data")


# --- run --------------------------------------------------------------------

def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = StreamConfig(**{**_cfg_kwargs(cfg), "seed": args.seed})
    xs, k_true = _load_stream(args)
    if args.radius_auto:
        from dataclasses import replace as _replace

        kwargs = _cfg_kwargs(cfg)
        kwargs["radius"] = float(np.linalg.norm(xs, axis=1).max())
        if cfg.schedule.kind in ("horizon", "anytime"):
            # re-resolve radius-dependent schedules against the new radius
            kwargs["schedule"] = _replace(cfg.schedule, radius=None)
        cfg = StreamConfig(**kwargs)
    rec_path, sum_path = _prepare_outputs(
        args.out, ["records.jsonl", "summary.csv"], args.overwrite
    )
    trace_steps = set(args.trace_step) if args.trace_step else None
    record = run_stream(xs, cfg, rep=args.rep, trace_steps=trace_steps)
    with open(rec_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(record.to_json_lines()) + "\n")
    header = ["t", "k", "loss", "cum_loss"] + (["k_true"] if k_true is not None else [])
    rows = []
    for i, s in enumerate(record.steps):
        row = [s.t, s.k, repr(s.loss), repr(s.cum_loss)]
        if k_true is not None:
            row.append(int(k_true[i]))
        rows.append(row)
    _write_csv(sum_path, header, rows)
    print(f"wrote {rec_path} ({record.horizon} steps) and {sum_path}")
    return 0


def _cfg_kwargs(cfg: StreamConfig) -> dict:
    return {
        "dim": cfg.dim,
        "max_clusters": cfg.max_clusters,
        "radius": cfg.radius,
        "decay": cfg.decay,
        "prior_kind": cfg.prior_kind,
        "prior_scale": cfg.prior_scale,
        "schedule": cfg.schedule,
        "chain_length": cfg.chain_length,
        "burn_in": cfg.burn_in,
        "seed": cfg.seed,
        "kmeans": cfg.kmeans,
        "label_correction": cfg.label_correction,
    }


# --- replicate ----------------------------------------------------------------

def _benchmark_config(seed: int, chain_length: int) -> StreamConfig:
    return StreamConfig(
        dim=2,
        max_clusters=20,
        radius=15.0,
        decay=0.0,
        prior_kind="uniform",
        schedule=TemperatureSchedule.default(2),
        chain_length=chain_length,
        burn_in=100,
        seed=seed,
        label_correction=True,
    )


def _cmd_replicate(args) -> int:
    reps = 100 if args.full else args.reps
    if reps < 1:
        raise CliError("--reps must be >= 1")
    cfg = _benchmark_config(args.seed, args.chain_length)
    spec = SyntheticSpec(kind="sine_drift", horizon=args.horizon)
    counts_path, stats_path, regret_path = _prepare_outputs(
        args.out, ["correct_k.csv", "replicate_stats.json", "regret.csv"], args.overwrite
    )

    results = run_synthetic_repetitions(cfg, spec, reps, workers=args.workers)
    counts = [correct_k_count(rec, stream.k_true) for stream, rec in results]
    post_counts = [
        int((updated_k_sequence(rec) == stream.k_true).sum()) for stream, rec in results
    ]
    _write_csv(
        counts_path,
        ["rep", "seed", "correct_k", "correct_k_updated"],
        [[r, cfg.seed, c, p] for r, (c, p) in enumerate(zip(counts, post_counts))],
    )
    mean = statistics.fmean(counts)
    std = statistics.stdev(counts) if reps > 1 else None
    with open(stats_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "reps": reps,
                "mean": mean,
                "std": std,
                "counts": counts,
                "mean_updated": statistics.fmean(post_counts),
                "counts_updated": post_counts,
            },
            fh,
            sort_keys=True,
        )
        fh.write("\n")

    steps = sorted(set(range(args.regret_every, args.horizon + 1, args.regret_every)) | {args.horizon})
    report = regret_report(
        results,
        radius=cfg.radius,
        eta=cfg.decay,
        max_clusters=cfg.max_clusters,
        dim=cfg.dim,
        ocl_restarts=args.ocl_restarts,
        steps=steps,
        seed=cfg.seed,
    )
    _write_csv(regret_path, report.CSV_HEADER, report.csv_rows())

    print(_OCL_CAVEAT)
    std_text = f"{std:.2f}" if std is not None else "n/a"
    print(f"correct-k over {reps} repetitions: mean={mean:.2f} std={std_text}")
    print(f"wrote {counts_path}, {stats_path}, {regret_path}")
    return 0


# --- trace --------------------------------------------------------------------

def _cmd_trace(args) -> int:
    cfg = load_config(args.config)
    xs, _ = _load_stream(args)
    if not 1 <= args.step <= xs.shape[0]:
        raise CliError(f"--step {args.step} outside the stream (length {xs.shape[0]})")
    (out_path,) = _prepare_outputs(args.out, [f"trace_t{args.step}.csv"], args.overwrite)
    record = run_stream(xs[: args.step], cfg, rep=args.rep, trace_steps={args.step})
    trace = record.steps[-1].trace
    rows = [
        [args.step, n + 1, int(trace.k_current[n]), int(trace.k_proposed[n]),
         repr(float(trace.alpha[n])), int(trace.accepted[n])]
        for n in range(len(trace))
    ]
    _write_csv(out_path, ["t", "n", "k_current", "k_proposed", "alpha", "accepted"], rows)
    print(f"wrote {out_path} ({len(trace)} iterations, acceptance rate {trace.acceptance_rate():.3f})")
    return 0


# --- bounds ---------------------------------------------------------------------

def _cmd_bounds(args) -> int:
    norms = (
        [float(v) for v in args.center_norms.split(",")]
        if args.center_norms
        else [args.radius] * args.k
    )
    requests = {
        "fixed": lambda: regret_bound_fixed(
            args.k, args.horizon, args.dim, args.radius, args.lam, args.eta, args.max_clusters
        )
        if args.lam is not None
        else _missing("--lam"),
        "horizon": lambda: regret_bound_horizon(
            args.k, args.horizon, args.dim, args.radius, args.eta, args.max_clusters
        ),
        "anytime": lambda: regret_bound_anytime(
            args.k, args.horizon, args.dim, args.radius, args.eta, args.max_clusters
        ),
        "student": lambda: regret_bound_student(
            args.k, args.horizon, args.dim, args.radius, args.prior_scale,
            args.eta, args.max_clusters, norms, adaptive=False,
        ),
        "student_adaptive": lambda: regret_bound_student(
            args.k, args.horizon, args.dim, args.radius, args.prior_scale,
            args.eta, args.max_clusters, norms, adaptive=True,
        ),
    }
    results = {}
    for name, fn in requests.items():
        try:
            results[name] = {"value": fn()}
        except ValueError as exc:
            results[name] = {"error": str(exc)}
    if args.json:
        print(json.dumps(results, sort_keys=True))
    else:
        for name, res in results.items():
            if "value" in res:
                print(f"{name:17s} {res['value']:.6f}")
            else:
                print(f"{name:17s} error: {res['error']}")
    return 0


def _missing(flag: str):
    raise ValueError(f"{flag} is required for this bound")


# --- generate -------------------------------------------------------------------

def _cmd_generate(args) -> int:
    spec = SyntheticSpec(kind=args.model, horizon=args.horizon)
    stream = generate(spec, seeded_rng(args.seed, (4, 0)))
    header = ["t"] + [f"x{i+1}" for i in range(stream.dim)]
    if stream.k_true is not None:
        header.append("k_true")
    rows = stream_csv_rows(stream)
    if args.out:
        (out_path,) = _prepare_outputs(
            str(Path(args.out).parent), [Path(args.out).name], args.overwrite
        )
        _write_csv(out_path, header, rows)
        print(f"wrote {out_path} ({stream.horizon} rows)")
    else:
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(rows)
    return 0


# --- oracle-check ----------------------------------------------------------------

def _toy_target(args) -> TargetDensity:
    prior = PriorSpec(
        kind="uniform",
        dim=args.dim,
        max_clusters=args.max_clusters,
        radius=args.radius,
        decay=args.eta,
    )
    if args.prior_only:
        return TargetDensity.prior_only(prior)
    sched = TemperatureSchedule.anytime(args.dim, args.radius)
    if args.dim == 1:
        xs = np.array([[-0.3], [0.05], [0.4]]) * args.radius
    else:
        xs = np.array([[-0.3, 0.1], [0.05, -0.15], [0.4, 0.2]]) * args.radius
    ctx = ScoreContext(
        observations=xs,
        ref_losses=np.array([0.1, 0.1, 0.1]) * args.radius**2,
        lam_prev=np.array([lambda_at(sched, 0), lambda_at(sched, 1), lambda_at(sched, 2)]),
    )
    lam = args.lam if args.lam is not None else lambda_at(sched, 3)
    return TargetDensity(lam, ctx, prior)


def _cmd_oracle_check(args) -> int:
    if args.max_clusters > 3 or args.dim > 2:
        print("oracle-check is limited to dim <= 2 and max-clusters <= 3", file=sys.stderr)
        return _USAGE_EXIT
    tgt = _toy_target(args)
    t_obs = tgt.ctx.t
    proposals = StepProposals(
        tgt.ctx.observations if t_obs else np.zeros((0, args.dim)),
        tau=proposal_scale(args.max_clusters, t_obs + 1 if t_obs else 0),
        max_clusters=args.max_clusters,
        kmeans_cfg=KMeansConfig(),
        rng_for_k=lambda k: seeded_rng(args.seed, (3, 0, k)),
        jitter_scale=args.radius,
    )
    state0 = initial_state(1, tgt, proposals)
    _, trace = run_chain(state0, args.iters, tgt, proposals, seeded_rng(args.seed, (2, 0)))
    ks = trace.k_current[args.burn_in :]
    empirical = np.bincount(ks, minlength=args.max_clusters + 1)[1:] / ks.shape[0]

    oracle = grid_oracle(tgt, resolution=args.resolution)
    tv = 0.5 * float(np.abs(empirical - oracle.k_marginal()).sum())
    print(f"empirical k-marginal: {np.array2string(empirical, precision=4)}")
    print(f"oracle    k-marginal: {np.array2string(oracle.k_marginal(), precision=4)}")
    verdict = "PASS" if tv <= args.tv_limit else "FAIL"
    print(f"total variation = {tv:.4f} (limit {args.tv_limit}): {verdict}")
    return 0 if verdict == "PASS" else _RUNTIME_EXIT


# --- parser ----------------------------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="jumpclust", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the online clusterer over a stream")
    run.add_argument("--config", required=True, help="JSON config file")
    _add_stream_args(run)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--rep", type=int, default=0, help="repetition index (stream id)")
    run.add_argument("--radius-auto", action="store_true",
                     help="set the radius to the max observed |x|_2 before running")
    run.add_argument("--trace-step", type=int, action="append",
                     help="record the sampler trace at this step (repeatable)")
    run.add_argument("--overwrite", action="store_true")
    run.set_defaults(fn=_cmd_run)

    rep = sub.add_parser("replicate", help="drifting-groups accuracy benchmark")
    rep.add_argument("--reps", type=int, default=20)
    rep.add_argument("--full", action="store_true", help="use 100 repetitions")
    rep.add_argument("--horizon", type=int, default=200)
    rep.add_argument("--chain-length", type=int, default=500)
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--workers", type=int, default=1)
    rep.add_argument("--regret-every", type=int, default=10,
                     help="step spacing of the regret summary rows")
    rep.add_argument("--ocl-restarts", type=int, default=50)
    rep.add_argument("--out", required=True)
    rep.add_argument("--overwrite", action="store_true")
    rep.set_defaults(fn=_cmd_replicate)

    tr = sub.add_parser("trace", help="export one step's sampler trace")
    tr.add_argument("--config", required=True)
    _add_stream_args(tr)
    tr.add_argument("--step", type=int, required=True, help="1-based observation index")
    tr.add_argument("--rep", type=int, default=0)
    tr.add_argument("--out", required=True)
    tr.add_argument("--overwrite", action="store_true")
    tr.set_defaults(fn=_cmd_trace)

    bo = sub.add_parser("bounds", help="evaluate regret-bound remainders")
    bo.add_argument("--k", type=int, required=True)
    bo.add_argument("--horizon", type=int, required=True)
    bo.add_argument("--dim", type=int, required=True)
    bo.add_argument("--radius", type=float, required=True)
    bo.add_argument("--eta", type=float, default=0.0)
    bo.add_argument("--max-clusters", type=int, required=True)
    bo.add_argument("--lam", type=float, default=None, help="temperature for the fixed bound")
    bo.add_argument("--prior-scale", type=float, default=1.0)
    bo.add_argument("--center-norms", default=None,
                    help="comma-separated |c_j| norms for the heavy-tailed bound "
                         "(default: radius for every center)")
    bo.add_argument("--json", action="store_true")
    bo.set_defaults(fn=_cmd_bounds)

    ge = sub.add_parser("generate", help="emit a synthetic stream as CSV")
    ge.add_argument("--model", choices=["sine_drift"], default="sine_drift")
    ge.add_argument("--horizon", type=int, default=200)
    ge.add_argument("--seed", type=int, default=0)
    ge.add_argument("--out", default=None, help="output CSV (default: stdout)")
    ge.add_argument("--overwrite", action="store_true")
    ge.set_defaults(fn=_cmd_generate)

    oc = sub.add_parser("oracle-check", help="sampler vs grid oracle on a toy instance")
    oc.add_argument("--dim", type=int, default=1)
    oc.add_argument("--max-clusters", type=int, default=3)
    oc.add_argument("--radius", type=float, default=1.0)
    oc.add_argument("--eta", type=float, default=0.3)
    oc.add_argument("--lam", type=float, default=None,
                    help="target temperature (default: anytime value at t=3)")
    oc.add_argument("--prior-only", action="store_true",
                    help="check against the prior itself (temperature 0)")
    oc.add_argument("--iters", type=int, default=100_000)
    oc.add_argument("--burn-in", type=int, default=2_000)
    oc.add_argument("--resolution", type=int, default=200)
    oc.add_argument("--tv-limit", type=float, default=0.05)
    oc.add_argument("--seed", type=int, default=0)
    oc.set_defaults(fn=_cmd_oracle_check)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"jumpclust: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT
    except (OSError, ValueError, GridTooLargeError) as exc:
        print(f"jumpclust: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
