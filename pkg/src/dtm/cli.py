"""Command-line front end.

Subcommands: ``morph`` (sample a schedule, group a token file, emit the
assignment as JSON and optionally a PPM group map), ``loss`` (multi-
schedule objective over an online/target pair), ``analyze`` (consistency
report for the raw and smoothed pipelines side by side), and ``bench``
(grouping micro-timings). All randomness is seeded; ``--seed`` /
``--morph-seed`` fall back to the ``DTM_SEED`` environment variable.

Exit codes: 0 success, 1 usage error, 2 input or format error, 3 numeric
error. Failures print one JSON object on stderr. All JSON output is
emitted with a fixed key order and a trailing newline so identical seeds
give byte-identical output.

Heavy imports happen inside handlers: ``bench`` pins BLAS thread pools
through environment variables, which only works before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit(obj) -> str:
    text = json.dumps(obj) + "\n"
    sys.stdout.write(text)
    return text


def _seed_value(value, name: str) -> int:
    if value is not None:
        return value
    env = os.environ.get("DTM_SEED")
    if env is None:
        raise _UsageError(f"{name} not given and DTM_SEED is unset")
    try:
        return int(env, 0)
    except ValueError:
        raise _UsageError(f"DTM_SEED={env!r} is not an integer")


def _parse_int(text: str) -> int:
    return int(text, 0)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dtm", description="Context-preserving token grouping toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    morph_p = sub.add_parser("morph", help="group a token file and emit the assignment")
    morph_p.add_argument("--targets", required=True, help="token tensor file (N x d)")
    morph_p.add_argument("--seed", type=_parse_int, default=None)
    morph_p.add_argument("--n-min", type=int, default=1)
    morph_p.add_argument("--k-max", type=int, default=14)
    morph_p.add_argument("--n-final", type=int, default=None, help="pin the group count")
    morph_p.add_argument("--split", choices=["random", "alternating"], default="random")
    morph_p.add_argument("--mode", choices=["sizeweighted", "paperliteral"], default="sizeweighted")
    morph_p.add_argument("--out-matrix", default=None, help="also write the JSON here")
    morph_p.add_argument("--out-map", default=None, help="write a PPM group map here")
    morph_p.add_argument("--grid-h", type=int, default=None)
    morph_p.add_argument("--grid-w", type=int, default=None)
    morph_p.set_defaults(func=_cmd_morph)

    loss_p = sub.add_parser("loss", help="multi-schedule alignment loss and gradient")
    loss_p.add_argument("--online", required=True)
    loss_p.add_argument("--targets", required=True)
    loss_p.add_argument("--seed", type=_parse_int, default=None)
    loss_p.add_argument("--L", type=int, default=2, dest="n_losses")
    loss_p.add_argument("--n-min", type=int, default=1)
    loss_p.add_argument("--k-max", type=int, default=14)
    loss_p.add_argument("--out-grad", default=None, help="write the gradient tensor here")
    loss_p.set_defaults(func=_cmd_loss)

    an_p = sub.add_parser("analyze", help="consistency report, raw vs smoothed")
    an_p.add_argument("--tokens", required=True)
    an_p.add_argument("--classes", required=True)
    an_p.add_argument("--morph-seed", type=_parse_int, default=None)
    an_p.add_argument("--truth", type=int, default=None)
    an_p.add_argument("--reference", default=None)
    an_p.add_argument("--n-min", type=int, default=1)
    an_p.add_argument("--k-max", type=int, default=14)
    an_p.add_argument("--n-final", type=int, default=None)
    an_p.set_defaults(func=_cmd_analyze)

    bench_p = sub.add_parser("bench", help="time one grouping variant")
    bench_p.add_argument("--n", type=int, default=196)
    bench_p.add_argument("--d", type=int, default=768)
    bench_p.add_argument("--variant", choices=["bipartite", "kmeans", "downsample"], required=True)
    bench_p.add_argument("--reps", type=int, default=50)
    bench_p.add_argument("--seed", type=_parse_int, default=None)
    bench_p.add_argument("--threads", type=int, default=1)
    bench_p.set_defaults(func=_cmd_bench)

    return parser


def _draw_schedule(rng, n_tokens: int, n_min: int, k_max: int, n_final):
    """Pin n_final when requested, otherwise draw it; then draw the steps."""
    from .errors import InvalidRangeError
    from .scheduler import constant_counts
    from .types import MorphSchedule

    if n_final is None:
        if n_min > n_tokens:
            raise InvalidRangeError(f"n_min={n_min} exceeds n_tokens={n_tokens}")
        final = rng.uniform_int(n_min, n_tokens)
    else:
        final = n_final
    steps = rng.uniform_int(1, k_max)
    counts = constant_counts(n_tokens, final, steps)
    return MorphSchedule(n_final=final, steps=steps, counts=tuple(counts))


def _schedule_json(schedule) -> dict:
    return {
        "n_final": schedule.n_final,
        "k": schedule.steps,
        "counts": list(schedule.counts),
    }


def _cmd_morph(args) -> int:
    from .matching import SplitRule
    from .morphing import IntermediateMean, MorphConfig, morph
    from .render import render_group_map
    from .rng import Rng
    from .tensorio import read_tensor
    from .types import validate_token_matrix

    seed = _seed_value(args.seed, "--seed")
    targets = validate_token_matrix(read_tensor(args.targets))
    rng = Rng(seed)
    schedule = _draw_schedule(rng, targets.shape[0], args.n_min, args.k_max, args.n_final)
    cfg = MorphConfig(intermediate_mean=IntermediateMean(args.mode))
    m = morph(targets, schedule, rng, SplitRule(args.split), cfg)

    text = _emit(
        {
            "n": m.n_tokens,
            "n_groups": m.n_groups,
            "assignment": [int(x) for x in m.assignment],
            "weights": [int(x) for x in m.weights],
            "schedule": _schedule_json(schedule),
        }
    )
    if args.out_matrix:
        with open(args.out_matrix, "w", encoding="ascii") as fh:
            fh.write(text)
    if args.out_map:
        grid_h, grid_w = args.grid_h, args.grid_w
        if grid_h is None and grid_w is None:
            import math

            side = math.isqrt(m.n_tokens)
            if side * side != m.n_tokens:
                from .errors import GridMismatchError

                raise GridMismatchError(
                    f"{m.n_tokens} tokens is not a square grid; pass --grid-h/--grid-w"
                )
            grid_h = grid_w = side
        elif grid_h is None or grid_w is None:
            raise _UsageError("--grid-h and --grid-w must be given together")
        render_group_map(m, grid_h, grid_w, args.out_map)
    return 0


def _cmd_loss(args) -> int:
    import numpy as np

    from .loss import objective
    from .rng import Rng
    from .scheduler import SchedulerConfig, sample_schedules
    from .tensorio import read_tensor, write_tensor
    from .types import validate_token_matrix

    seed = _seed_value(args.seed, "--seed")
    online = validate_token_matrix(read_tensor(args.online))
    targets = validate_token_matrix(read_tensor(args.targets))
    cfg = SchedulerConfig(n_min=args.n_min, k_max=args.k_max, n_losses=args.n_losses)
    # Replay the first draws to recover the schedules the objective uses.
    schedules = sample_schedules(Rng(seed), targets.shape[0], cfg)
    total, grad, reports = objective(online, targets, cfg, Rng(seed))

    per_schedule = [
        {
            "schedule_id": rep.schedule_id,
            "n_final": sch.n_final,
            "k": sch.steps,
            "counts": list(sch.counts),
            "total": rep.total,
        }
        for rep, sch in zip(reports, schedules)
    ]
    grad_norm = float(np.sqrt(np.einsum("ij,ij->", grad.astype(np.float64), grad.astype(np.float64))))
    _emit({"total": total, "per_schedule": per_schedule, "grad_norm": grad_norm})
    if args.out_grad:
        write_tensor(args.out_grad, grad.astype(np.float32))
    return 0


def _report_json(report) -> dict:
    return {
        "per_token_labels": list(report.per_token_labels),
        "ensemble_label": report.ensemble_label,
        "agreement": report.agreement,
        "mean_ref_cosine": report.mean_ref_cosine,
    }


def _cmd_analyze(args) -> int:
    from .matching import SplitRule
    from .metrics import consistency_report
    from .morphing import morph
    from .rng import Rng
    from .tensorio import read_tensor
    from .types import validate_token_matrix

    seed = _seed_value(args.morph_seed, "--morph-seed")
    tokens = validate_token_matrix(read_tensor(args.tokens))
    classes = read_tensor(args.classes)
    reference = read_tensor(args.reference) if args.reference else None

    rng = Rng(seed)
    schedule = _draw_schedule(rng, tokens.shape[0], args.n_min, args.k_max, args.n_final)
    m = morph(tokens, schedule, rng, SplitRule.RANDOM)

    raw = consistency_report(tokens, classes, None, args.truth, reference)
    smoothed = consistency_report(tokens, classes, m, args.truth, reference)
    _emit(
        {
            "raw": _report_json(raw),
            "aggregated": _report_json(smoothed),
            "schedule": _schedule_json(schedule),
        }
    )
    return 0


def _cmd_bench(args) -> int:
    if args.threads >= 1:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, str(args.threads))

    from .bench import GroupingVariant, bench_variant, default_schedule
    from .rng import Rng

    seed = _seed_value(args.seed, "--seed")
    summary = bench_variant(
        GroupingVariant(args.variant),
        args.n,
        args.d,
        default_schedule(args.n),
        args.reps,
        Rng(seed),
    )
    _emit({"median_us": summary.median_us, "p90_us": summary.p90_us, "reps": summary.reps})
    return 0


def main(argv=None) -> int:
    from .errors import InputError, NumericError

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        json.dump({"error": "usage", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    except (InputError, OSError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except NumericError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
