"""Command-line entry point: ``segtune {tune,metric,synth,sweep,xval,serve}``.

Results go to stdout (JSON by default); diagnostics go to stderr. Exit codes
are 0 on success, 1 on runtime failure and 2 on usage or configuration
errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import ConfigError, GridError, SegtuneError
from .maskdata import LabelMask, as_labeled, load_mask, save_mask
from .metrics import area_metrics, full_report, metric_fn
from .objective import ObjectiveConfig, parse_weights
from .optimizers import ALGORITHMS
from .paramspace import ParameterSpace, load_space
from .runner import CommandWorkflow, SyntheticWorkflow, WorkflowSpec, load_samples, run_tuning
from .studies import GeneratorParams, generate_dataset, grouped_dataset, grouped_xval, monte_carlo_xval, weight_sweep

log = logging.getLogger("segtune")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 128x128, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("size must be positive")
    return w, h


def _emit(payload: Any, fmt: str, table: str | None = None) -> None:
    if fmt == "table" and table is not None:
        print(table)
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))


def _workflow(args: argparse.Namespace) -> WorkflowSpec:
    if args.workflow_cmd:
        return CommandWorkflow(args.workflow_cmd, args.timeout)
    if args.workflow == "synthetic":
        return SyntheticWorkflow()
    raise UsageError("give --workflow synthetic or --workflow-cmd TEMPLATE")


def _dataset(args: argparse.Namespace):
    """Input files when given, otherwise a generated synthetic dataset."""
    if args.input:
        return load_samples(args.input, args.truth or [])
    if args.synthetic:
        return generate_dataset(args.synthetic, args.data_seed, args.size)
    raise UsageError("give --input/--truth files or --synthetic N")


def _default_point(space: ParameterSpace, pairs: Sequence[str] | None):
    if not pairs:
        return None
    mapping = space.as_mapping(space.default_point())
    for item in pairs:
        name, sep, value = item.partition("=")
        if not sep or name not in mapping:
            raise UsageError(f"--default expects NAME=VALUE with a known name, got {item!r}")
        current = mapping[name]
        mapping[name] = value if isinstance(current, str) else (int(value) if isinstance(current, int) else float(value))
    return space.point_from_mapping(mapping)


# -- subcommands ---------------------------------------------------------------

def cmd_tune(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    workflow = _workflow(args)
    if not args.input:
        raise UsageError("tune needs --input and --truth files")
    samples = load_samples(args.input, args.truth or [])
    objective = ObjectiveConfig(parse_weights(args.weights), args.time_cap, args.metric)
    outcome = run_tuning(space, workflow, samples, objective, args.algo, args.budget, args.seed,
                         args.workers, target=args.target, default_point=_default_point(space, args.default))
    log.info("tuning took %.2f s wall time", outcome.wall_time)
    payload = outcome.to_dict()
    payload.pop("wall_time")
    best = outcome.best
    rows = [f"{k:<14}{v}" for k, v in space.as_mapping(best.point).items()]
    table = "\n".join(["best point", *("  " + r for r in rows),
                       f"scalar        {best.scalar:.6f}", f"quality       {best.quality:.6f}",
                       f"time          {best.time_seconds:.6g} s", f"time score    {best.time_score:.6f}",
                       f"executed      {outcome.executed} / {outcome.budget}"])
    _emit(payload, args.format, table)
    return EXIT_OK


def cmd_metric(args: argparse.Namespace) -> int:
    computed = load_mask(args.computed)
    reference = load_mask(args.reference)
    if args.metric == "areas":
        overlap, non_overlap = area_metrics(computed, reference)
        payload: Any = {"overlap": overlap, "non_overlap": non_overlap}
        table = f"overlap       {overlap}\nnon_overlap   {non_overlap}"
    elif args.metric == "all":
        payload = full_report(as_labeled(computed), as_labeled(reference)).to_dict()
        table = "\n".join(f"{k:<18}{payload[k]}" for k in ("pixel_dice", "pixel_jaccard", "avg_object_dice",
                                                           "overlap_area", "non_overlap_area"))
    else:
        if args.metric == "object-dice":
            computed, reference = as_labeled(computed), as_labeled(reference)
        payload = metric_fn(args.metric)(computed, reference)
        table = repr(payload)
    _emit(payload, args.format, table)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    params = GeneratorParams(count=args.count, noise=args.noise, elongation=args.elongation)
    scenes = generate_dataset(args.n, args.seed, args.size, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    images, truths = [], []
    for i, scene in enumerate(scenes):
        ip, tp = out / f"image_{i:03d}.pgm", out / f"truth_{i:03d}.pgm"
        save_mask(LabelMask(scene.image, maxval=255), ip)
        save_mask(scene.truth, tp)
        images.append(str(ip))
        truths.append(str(tp))
    _emit({"images": images, "truths": truths, "params": params.to_dict(), "seed": args.seed},
          args.format, "\n".join(f"{a}  {b}" for a, b in zip(images, truths)))
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    weight_sets = [parse_weights(w) for w in args.weight_sets.split(";")] if args.weight_sets else None
    report = weight_sweep(space, _dataset(args), _workflow(args), args.algos.split(","), weight_sets,
                          args.budget, args.repeats, args.seed, args.workers,
                          _default_point(space, args.default), args.metric)
    _emit(report.to_dict(), args.format, report.to_table())
    return EXIT_OK


def cmd_xval(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    common = dict(repeats=args.repeats, seed=args.seed, workflow=_workflow(args), algorithm=args.algo,
                  weights=parse_weights(args.weights), budget=args.budget, workers=args.workers,
                  default_point=_default_point(space, args.default), quality_metric=args.metric)
    if args.groups:
        sizes = {}
        for item in args.groups.split(","):
            name, _, n = item.partition("=")
            try:
                sizes[name] = int(n)
            except ValueError:
                raise UsageError(f"--groups expects name=count pairs, got {item!r}") from None
        dataset = grouped_dataset(sizes, args.data_seed, args.size)
        report = grouped_xval(space, dataset, train_fraction=args.train_fraction, **common)
    else:
        report = monte_carlo_xval(space, _dataset(args), args.train_fraction, **common)
    _emit(report.to_dict(), args.format, report.to_table())
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import ServiceConfig, serve

    state_dir = args.state_dir or os.environ.get("SEGTUNE_STATE_DIR") or "segtune-state"
    config = ServiceConfig(state_dir, args.max_running, args.workers, args.admin_list)
    log.info("serving on %s:%d, state in %s", args.host, args.port, state_dir)
    serve(config, args.host, args.port)
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _add_tuning_args(p: argparse.ArgumentParser, space_required: bool) -> None:
    p.add_argument("--space", required=space_required, default=None if space_required else "synthetic",
                   help="space JSON file or shipped name (table1a, table1b, table1c, synthetic)")
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--workflow", choices=["synthetic"], default=None)
    p.add_argument("--workflow-cmd", metavar="TEMPLATE",
                   help="external command with {param}, {input} and {output} placeholders")
    p.add_argument("--timeout", type=float, default=600.0, help="per-image command timeout in seconds")
    p.add_argument("--input", nargs="+", metavar="PGM")
    p.add_argument("--truth", nargs="+", metavar="PGM")
    p.add_argument("--metric", default="object-dice", choices=["object-dice", "pixel-dice", "pixel-jaccard"],
                   help="quality metric")
    p.add_argument("--default", nargs="+", metavar="NAME=VALUE", help="override the default point")
    p.add_argument("--format", choices=["json", "table"], default="json")


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--synthetic", type=int, metavar="N", help="generate N synthetic scenes instead of --input")
    p.add_argument("--data-seed", type=int, default=7)
    p.add_argument("--size", type=_size, default=(128, 128), metavar="WxH")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segtune", description="Multi-objective parameter tuning for segmentation workflows.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune", help="tune a workflow on image/reference pairs")
    _add_tuning_args(p, space_required=True)
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default="ga")
    p.add_argument("--weights", default="1,0", help="quality,time weights summing to 1, e.g. 2/3,1/3")
    p.add_argument("--time-cap", type=float, default=None, metavar="SEC")
    p.add_argument("--target", type=float, default=None, help="stop once the best scalar reaches this")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("metric", help="compare a computed mask with a reference mask")
    p.add_argument("--computed", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--metric", default="object-dice",
                   choices=["pixel-dice", "pixel-jaccard", "object-dice", "areas", "all"])
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("synth", help="write a synthetic image/truth dataset as PGM files")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_size, default=(128, 128), metavar="WxH")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=8, help="objects per scene")
    p.add_argument("--noise", type=float, default=12.0)
    p.add_argument("--elongation", type=float, default=1.0)
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="weight sweep over algorithms")
    _add_tuning_args(p, space_required=False)
    _add_data_args(p)
    p.add_argument("--algos", default="ga,nm,pro,boa")
    p.add_argument("--weight-sets", help="semicolon-separated pairs, e.g. '1,0;1/2,1/2'")
    p.add_argument("--repeats", type=int, default=1)
    p.set_defaults(func=cmd_sweep, workflow="synthetic")

    p = sub.add_parser("xval", help="Monte Carlo cross-validation, optionally per group")
    _add_tuning_args(p, space_required=False)
    _add_data_args(p)
    p.add_argument("--algo", choices=sorted(ALGORITHMS), default="ga")
    p.add_argument("--weights", default="1,0")
    p.add_argument("--train-fraction", type=float, default=0.2)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--groups", help="generate grouped synthetic data, e.g. round=10,elongated=5")
    p.set_defaults(func=cmd_xval, workflow="synthetic")

    p = sub.add_parser("serve", help="run the REST tuning service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--state-dir", default=None, help="task store directory (env SEGTUNE_STATE_DIR)")
    p.add_argument("--max-running", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--admin-list", action="store_true", help="enable GET /tasks")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(stream=sys.stderr, level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, GridError) as exc:
        print(f"segtune {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SegtuneError, OSError, ValueError) as exc:
        print(f"segtune {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
