"""`moment-bench`: one executable wrapping the whole pipeline.

Subcommands: convert, resplit, stats, baseline {bias,predict-all}, score.
Exit codes: 0 success, 1 usage error, 2 data error. Every output file is
written atomically (temp file + rename) and reruns with identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, annotations, baselines, metrics, stats
from ._io import atomic_write_text, dumps_canonical, resolve_threads
from .errors import DataError, UsageError
from .resplit import SPLIT_NAMES, ResplitConfig, SplitAssignment
from .resplit import resplit as build_resplit

MODES = ("charades", "activitynet", "generic")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of calling sys.exit(2)."""

    def error(self, message):  # noqa: D102
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x != ""]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x != ""]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _bandwidth(text: str):
    if text == "scott":
        return "scott"
    values = _float_list(text)
    if len(values) != 2:
        raise UsageError("bandwidth must be 'scott' or 'H_S,H_E'")
    return (values[0], values[1])


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _load_table(path: str, source: str = "generic") -> annotations.DatasetTable:
    return annotations.read_canonical(_read_text(path), source=source)


def _load_split(path: str) -> SplitAssignment:
    return SplitAssignment.from_json(_read_text(path))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moment-bench", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--threads", type=int, default=None,
        help="cap for internal worker threads (env MB_THREADS)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="parse raw annotations into canonical records")
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--durations", help="tab-separated video_id<TAB>seconds sidecar "
                                       "(required in charades mode)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("resplit", help="build changing-distribution splits")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--ood-fraction", type=float, default=0.20)
    p.add_argument("--fractions", type=_float_list, default=[0.70, 0.05, 0.05],
                   metavar="TRAIN,VAL,IID")
    p.add_argument("--long-moment-threshold", type=float, default=None,
                   help="override the mode default (0.5 for activitynet)")
    p.add_argument("--bandwidth", type=_bandwidth, default="scott",
                   metavar="scott|H_S,H_E")

    p = sub.add_parser("stats", help="dataset-bias diagnostics and figures")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split", help="split file; restricts to --subset")
    p.add_argument("--subset", default="train",
                   help="split name when --split is given (default train)")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--thresholds", type=_float_list, default=[0.3, 0.5, 0.7])
    p.add_argument("--top-k", type=int, default=30)
    p.add_argument("--verb", action="append", default=[],
                   help="also emit an action-conditioned grid (repeatable)")
    p.add_argument("--bandwidth", type=_bandwidth, default="scott",
                   metavar="scott|H_S,H_E")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering, write numeric files only")

    p = sub.add_parser("baseline", help="generate a bias-probing prediction file")
    baseline_sub = p.add_subparsers(dest="baseline", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--pairs", required=True, help="canonical pair file")
    common.add_argument("--split", help="split file")
    common.add_argument("--subset", default="test-ood",
                        help="split to predict on when --split is given")
    common.add_argument("--out", required=True)

    baseline_sub.add_parser("predict-all", parents=[common],
                            help="predict the whole video for every query")
    pb = baseline_sub.add_parser("bias", parents=[common],
                                 help="sample candidates from the training KDE")
    pb.add_argument("--train-subset", default="train",
                    help="split fitted on when --split is given")
    pb.add_argument("--train-pairs",
                    help="separate canonical file to fit on (instead of --split)")
    pb.add_argument("--n", type=int, default=5)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--bandwidth", type=_bandwidth, default="scott",
                    metavar="scott|H_S,H_E")

    p = sub.add_parser("score", help="score a prediction file")
    p.add_argument("--gt", required=True, help="canonical pair file")
    p.add_argument("--pred", required=True, help="prediction file")
    p.add_argument("--split", help="split file: report metrics per split")
    p.add_argument("--n", type=_int_list, default=[1, 5], metavar="1,5")
    p.add_argument("--m", type=_float_list, default=[0.1, 0.3, 0.5, 0.7],
                   metavar="0.1,0.3,...")
    p.add_argument("--out", required=True)
    p.add_argument("--figures-dir", help="also render a comparison chart here")

    return parser


def _cmd_convert(args) -> int:
    if args.mode == "charades":
        if not args.durations:
            raise UsageError("convert --mode charades requires --durations")
        durations = annotations.read_durations_sidecar(
            _read_text(args.durations).splitlines()
        )
        table = annotations.parse_charades_sta(
            _read_text(args.input).splitlines(), durations
        )
    elif args.mode == "activitynet":
        try:
            document = json.loads(_read_text(args.input))
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.input}: invalid JSON: {exc}") from None
        table = annotations.parse_activitynet_captions(document)
    else:
        table = _load_table(args.input)
    atomic_write_text(args.out, annotations.write_canonical(table))
    print(
        f"wrote {len(table)} pairs ({table.n_dropped} dropped by sanitization) "
        f"to {args.out}",
        file=sys.stderr,
    )
    return 0


def _mode_threshold(mode: str, override: float | None) -> float | None:
    if override is not None:
        return override
    return 0.5 if mode == "activitynet" else None


def _cmd_resplit(args, threads: int) -> int:
    table = _load_table(args.input, source=args.mode)
    if len(args.fractions) != 3:
        raise UsageError("--fractions needs exactly three values: TRAIN,VAL,IID")
    config = ResplitConfig(
        ood_fraction=args.ood_fraction,
        remainder_fractions=tuple(args.fractions),
        long_moment_threshold=_mode_threshold(args.mode, args.long_moment_threshold),
        seed=args.seed,
        bandwidth_rule=args.bandwidth,
    )
    assignment = build_resplit(table, config, threads=threads)
    atomic_write_text(args.out, assignment.to_json())
    counts = assignment.meta["counts"]
    summary = ", ".join(
        f"{name}: {counts[name]['pairs']}p/{counts[name]['videos']}v"
        for name in SPLIT_NAMES
    )
    print(f"wrote {args.out} ({summary})", file=sys.stderr)
    for warning in assignment.meta.get("warnings", []):
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cmd_stats(args, threads: int) -> int:
    table = _load_table(args.input)
    label = "all"
    if args.split:
        assignment = _load_split(args.split)
        ids = [
            pid for pid, name in assignment.assignment.items() if name == args.subset
        ]
        if not ids:
            raise DataError(f"split {args.subset!r} is empty or unknown")
        table = table.subset(ids)
        label = args.subset
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    counts, edges = stats.duration_histogram(table, args.bins)
    atomic_write_text(
        out_dir / "duration_histogram.json",
        dumps_canonical(
            {
                "kind": "duration-histogram",
                "split": label,
                "bin_edges": edges.tolist(),
                "counts": counts.tolist(),
            }
        )
        + "\n",
    )
    shares = stats.duration_share_over(table, args.thresholds)
    atomic_write_text(
        out_dir / "duration_shares.json",
        dumps_canonical(
            {
                "kind": "duration-shares",
                "split": label,
                "thresholds": args.thresholds,
                "shares": shares,
            }
        )
        + "\n",
    )
    grid = stats.joint_density_grid(
        table, resolution=args.resolution, bandwidth_rule=args.bandwidth,
        threads=threads,
    )
    doc = grid.to_document()
    doc["split"] = label
    atomic_write_text(out_dir / "density_grid.json", dumps_canonical(doc) + "\n")

    verbs = stats.verb_frequencies(table, top_k=args.top_k)
    vdoc = verbs.to_document()
    vdoc["split"] = label
    atomic_write_text(out_dir / "verb_table.json", dumps_canonical(vdoc) + "\n")

    action_grids = {}
    for verb in args.verb:
        agrid = stats.action_conditioned_grid(
            table, verb, resolution=args.resolution,
            bandwidth_rule=args.bandwidth, threads=threads,
        )
        adoc = agrid.to_document()
        adoc["split"] = label
        adoc["verb"] = verb
        atomic_write_text(
            out_dir / f"action_grid_{verb}.json", dumps_canonical(adoc) + "\n"
        )
        action_grids[verb] = agrid

    if not args.no_figures:
        from . import figures

        figures.render_density_grid(
            grid, out_dir / "density_grid.png",
            title=f"moment annotation density ({label})",
        )
        figures.render_duration_histogram(
            counts, edges, out_dir / "duration_histogram.png",
            title=f"normalized moment durations ({label})",
        )
        figures.render_verb_table(
            verbs, out_dir / "verb_table.png", title=f"top action verbs ({label})"
        )
        for verb, agrid in action_grids.items():
            figures.render_density_grid(
                agrid, out_dir / f"action_grid_{verb}.png",
                title=f"density for '{verb}' ({label})",
            )
    print(f"wrote stats for {len(table)} pairs to {out_dir}", file=sys.stderr)
    return 0


def _split_tables(args, table):
    """(fit_table, predict_table) for the baseline subcommands."""
    if args.split:
        assignment = _load_split(args.split)
        test_ids = [
            pid for pid, name in assignment.assignment.items() if name == args.subset
        ]
        if not test_ids:
            raise DataError(f"split {args.subset!r} is empty or unknown")
        return assignment, table.subset(test_ids)
    return None, table


def _cmd_baseline(args, threads: int) -> int:
    del threads
    table = _load_table(args.pairs)
    assignment, test_table = _split_tables(args, table)

    if args.baseline == "predict-all":
        preds = baselines.predict_all(test_table)
    else:
        if args.n < 1:
            raise UsageError("--n must be >= 1")
        if args.train_pairs:
            train_table = _load_table(args.train_pairs)
        elif assignment is not None:
            train_ids = [
                pid
                for pid, name in assignment.assignment.items()
                if name == args.train_subset
            ]
            if not train_ids:
                raise DataError(f"split {args.train_subset!r} is empty or unknown")
            train_table = table.subset(train_ids)
        else:
            train_table = table
        preds = baselines.bias_based(
            train_table, test_table, args.n, args.seed, args.bandwidth
        )
    atomic_write_text(args.out, metrics.write_predictions(preds))
    print(f"wrote {len(preds)} prediction records to {args.out}", file=sys.stderr)
    return 0


def _cmd_score(args) -> int:
    if not args.n or not args.m:
        raise UsageError("--n and --m must be non-empty")
    if any(n < 1 for n in args.n):
        raise UsageError("--n values must be >= 1")
    table = _load_table(args.gt)
    preds = metrics.read_predictions(_read_text(args.pred), table=table)
    split_map = None
    if args.split:
        split_map = _load_split(args.split).assignment
    report = metrics.evaluate(preds, table, args.n, args.m, split_map=split_map)
    atomic_write_text(args.out, report.to_json())

    for split in report.splits():
        print(f"split {split} (N_q={report.n_q[split]}, "
              f"missing={report.missing_predictions.get(split, 0)})")
        for n in sorted(set(args.n)):
            cells = []
            for m in sorted(set(args.m)):
                cells.append(
                    f"IoU@{m:g} R={report.value('R', n, m, split):6.2f} "
                    f"dR={report.value('dR', n, m, split):6.2f}"
                )
            print(f"  n={n}: " + "  ".join(cells))
    for pid in report.unknown_pair_ids[:5]:
        print(f"warning: prediction for unknown pair_id {pid!r} ignored",
              file=sys.stderr)
    if len(report.unknown_pair_ids) > 5:
        print(
            f"warning: {len(report.unknown_pair_ids) - 5} more unknown pair_ids",
            file=sys.stderr,
        )

    if args.figures_dir:
        from . import figures

        fig_dir = Path(args.figures_dir)
        fig_dir.mkdir(parents=True, exist_ok=True)
        figures.render_score_report(report, fig_dir / "scores.png")
    return 0


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        threads = resolve_threads(args.threads)
        if args.command == "convert":
            return _cmd_convert(args)
        if args.command == "resplit":
            return _cmd_resplit(args, threads)
        if args.command == "stats":
            return _cmd_stats(args, threads)
        if args.command == "baseline":
            return _cmd_baseline(args, threads)
        if args.command == "score":
            return _cmd_score(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
