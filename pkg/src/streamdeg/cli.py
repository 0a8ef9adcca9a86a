"""Command-line front end: trace -> pipeline -> reports.

Subcommands: synth, analyze, identify, validate, sweep, compare.  Exit codes:
0 success, 1 usage error, 2 data error.  Every run with a fixed seed writes
byte-identical outputs; sweep.csv's runtime column is the one documented
exception (wall-clock is not reproducible).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import intervals as iv
from .config import ENV_PREFIX, RunConfig, load_config
from .linkstream import LinkStream, build_stream, normalize_degrees
from .pipeline import (
    IdentifiedSet,
    PipelineParams,
    classify_classes,
    detect_events,
    event_statuses,
    write_events_csv,
    write_removal_log,
)
from .reporting import (
    build_report,
    class_count_summary,
    label_overlap,
    run_pipeline_once,
    smallest_identifiable_degree,
    sweep,
    validate_removal,
    write_report,
    write_series_csv,
)
from .robust_stats import InsufficientSupportError, power_law_test
from .slicing import (
    TimeSliceGrid,
    build_class_scheme,
    build_normalized_scheme,
    fraction_matrix,
    ks_similarity_report,
    slice_value_measures,
)
from .trace_io import (
    TraceFormatError,
    generate_synthetic,
    parse_trace,
    read_ground_truth,
    scenario_from_dict,
    write_ground_truth,
    write_trace,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--output-dir", default=".", help="directory for output files")
    p.add_argument("--delta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--r", dest="class_ratio", type=float, help="degree class ratio")
    p.add_argument("--sigma-mult", dest="sigma_mult", type=float)
    p.add_argument("--grubbs-alpha", dest="grubbs_alpha", type=float)
    p.add_argument("--ks-alpha", dest="ks_alpha", type=float)
    p.add_argument("--two-sample-alpha", dest="two_sample_alpha", type=float)
    p.add_argument("--zero-majority", dest="zero_majority", type=float)
    p.add_argument("--normalized", action="store_const", const=True, default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--ks-size-mode", dest="ks_size_mode", choices=["support-extent", "observation-count"])
    p.add_argument("--rollback-fit", dest="rollback_fit", choices=["refit", "frozen"])
    p.add_argument("--threads", type=int)


_CONFIG_KEYS = [
    "delta", "tau", "class_ratio", "sigma_mult", "grubbs_alpha", "ks_alpha",
    "two_sample_alpha", "zero_majority", "normalized", "seed", "ks_size_mode",
    "rollback_fit", "threads",
]


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    try:
        return load_config(getattr(args, "config", None), overrides)
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {exc.filename}") from exc
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc


def _load_stream(path: str, cfg: RunConfig) -> LinkStream:
    p = Path(path)
    if not p.exists():
        raise DataError(f"trace file not found: {path}")
    with open(p, "rb") as fh:
        head = fh.read(4)
    if head == LinkStream.MAGIC:
        with open(p, "rb") as fh:
            return LinkStream.load(fh)
    try:
        with open(p, "rb") as fh:
            triplets, meta = parse_trace(fh)
    except TraceFormatError as exc:
        raise DataError(f"malformed trace {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"trace {path} is not UTF-8 text: {exc}") from exc
    return build_stream(triplets, meta.node_names, cfg.delta)


def _grid_for(stream: LinkStream, cfg: RunConfig) -> TimeSliceGrid:
    grid = TimeSliceGrid.covering(stream.t_begin, stream.t_end, cfg.tau)
    span = stream.t_end - grid.origin
    if span - grid.count * cfg.tau > 1e-12:
        print(
            f"warning: dropping trailing partial slice "
            f"({span - grid.count * cfg.tau:.6g} s of {span:.6g} s)",
            file=sys.stderr,
        )
    return grid


def _scheme_for(stream: LinkStream, cfg: RunConfig, normalized_view=None):
    if normalized_view is not None:
        return build_normalized_scheme(max(normalized_view.max_value(), 1e-9), cfg.class_ratio)
    k_max = max(stream.max_degree(), 1)
    return build_class_scheme(k_max, cfg.class_ratio)


def _pipeline_params(cfg: RunConfig) -> PipelineParams:
    return PipelineParams(
        grubbs_alpha=cfg.grubbs_alpha,
        ks_alpha=cfg.ks_alpha,
        zero_majority=cfg.zero_majority,
        sigma_mult=cfg.sigma_mult,
        rollback_fit=cfg.rollback_fit,
        normalized=cfg.normalized,
    )


def _outdir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_identified_csv(identified: IdentifiedSet, node_names, out) -> None:
    out.write("node,start,end\n")
    for node, (s, e) in identified.victims():
        out.write(f"{node_names[node]},{s!r},{e!r}\n")


def read_identified_csv(path: Path) -> tuple[IdentifiedSet, list[str]]:
    names: list[str] = []
    index: dict[str, int] = {}
    entries: dict[int, list] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("node,"):
                continue
            try:
                name, s, e = line.split(",")
                start, end = float(s), float(e)
            except ValueError:
                raise DataError(f"malformed identified set {path} at line {line_no}")
            if name not in index:
                index[name] = len(names)
                names.append(name)
            entries.setdefault(index[name], []).append((start, end))
    return IdentifiedSet({n: iv.merge(ivs) for n, ivs in entries.items()}), names


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = _config_from_args(args)
    path = Path(args.scenario)
    if not path.exists():
        raise DataError(f"scenario file not found: {args.scenario}")
    try:
        spec = scenario_from_dict(json.loads(path.read_text()))
        spec.validate()
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"bad scenario {args.scenario}: {exc}") from exc
    triplets, meta, truth = generate_synthetic(spec, cfg.seed)
    out = _outdir(args)
    with open(out / "trace.txt", "w", encoding="utf-8") as fh:
        write_trace(triplets, meta.node_names, fh)
    with open(out / "truth.csv", "w", encoding="utf-8", newline="") as fh:
        write_ground_truth(truth, fh)
    report = build_report(
        cfg.to_dict(),
        {
            "synth": {
                "triplet_count": meta.triplet_count,
                "node_count": meta.node_count,
                "t_min": meta.t_min,
                "t_max": meta.t_max,
                "truth_entries": len(truth.entries),
            }
        },
    )
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        write_report(report, fh)
    print(f"wrote {meta.triplet_count} triplets, {meta.node_count} nodes -> {out / 'trace.txt'}")
    return EXIT_OK


def _analysis_blocks(stream, grid, scheme, labels, events):
    label_counts = {"AN": 0, "A": 0, "R": 0}
    for lab in labels:
        label_counts[lab.verdict] += 1
    return {
        "stream": {
            "nodes": stream.num_nodes,
            "pairs": len(stream.links),
            "link_seconds": stream.total_link_seconds(),
            "t_begin": stream.t_begin,
            "t_end": stream.t_end,
        },
        "grid": {"origin": grid.origin, "tau": grid.tau, "slices": grid.count},
        "scheme": {"ratio": scheme.ratio, "classes": len(scheme)},
        "labels": label_counts,
        "events": {"detected": len(events)},
    }


def cmd_analyze(args) -> int:
    cfg = _config_from_args(args)
    stream = _load_stream(args.trace, cfg)
    grid = _grid_for(stream, cfg)
    normalized_view = None
    if cfg.normalized:
        normalized_view = normalize_degrees(stream, stream.mean_degree_per_second())
    scheme = _scheme_for(stream, cfg, normalized_view)
    matrix = fraction_matrix(stream, grid, scheme, normalized_view)
    labels = classify_classes(matrix, cfg.grubbs_alpha, cfg.ks_alpha, cfg.zero_majority)
    events = detect_events(matrix, labels, cfg.sigma_mult)

    out = _outdir(args)
    with open(out / "matrix.csv", "w", encoding="utf-8", newline="") as fh:
        matrix.write_csv(fh)
    with open(out / "matrix_meta.json", "w", encoding="utf-8") as fh:
        matrix.write_sidecar(fh)
    with open(out / "labels.csv", "w", encoding="utf-8") as fh:
        fh.write("class,verdict,zero_share,mu,sigma\n")
        for lab in labels:
            mu = repr(lab.fit.mu) if lab.fit else ""
            sigma = repr(lab.fit.sigma) if lab.fit else ""
            fh.write(f"{lab.class_index},{lab.verdict},{lab.zero_share!r},{mu},{sigma}\n")
    with open(out / "events.csv", "w", encoding="utf-8") as fh:
        write_events_csv(events, {}, fh)

    blocks = _analysis_blocks(stream, grid, scheme, labels, events)
    if args.ks_report:
        measures = slice_value_measures(stream, grid, normalized_view)
        sim = ks_similarity_report(measures, cfg.two_sample_alpha, cfg.ks_size_mode, cfg.delta)
        with open(out / "ks_ratios.csv", "w", encoding="utf-8") as fh:
            fh.write("slice_a,slice_b,ratio\n")
            for (a, b), ratio in zip(sim.pairs, sim.ratios):
                fh.write(f"{a},{b},{ratio!r}\n")
        blocks["ks_similarity"] = {
            "fraction_above_one": sim.fraction_above_one,
            "pairs": len(sim.pairs),
            "skipped_slices": sim.skipped_slices,
        }
    if args.power_law:
        measures = slice_value_measures(stream, grid, None)
        counts: dict[int, float] = {}
        for acc in measures:
            for k, m in acc.items():
                counts[int(k)] = counts.get(int(k), 0.0) + m
        samples = []
        for k in sorted(counts):
            # couple-time measure converted to counts, one observation per delta
            samples.extend([k] * max(1, round(counts[k] / cfg.delta)))
        try:
            verdict = power_law_test(
                samples, bootstrap_count=args.bootstrap_count,
                significance=cfg.ks_alpha, seed=cfg.seed,
            )
            blocks["power_law"] = {
                "alpha_hat": verdict.alpha_hat,
                "k_min": verdict.k_min,
                "p_value": verdict.p_value,
                "rejected": verdict.rejected,
            }
        except InsufficientSupportError as exc:
            blocks["power_law"] = {"error": str(exc)}
    report = build_report(cfg.to_dict(), blocks)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        write_report(report, fh)
    print(f"{grid.count} slices, {len(scheme)} classes, {len(events)} events detected")
    return EXIT_OK


def _run_identify(args, cfg):
    stream = _load_stream(args.trace, cfg)
    grid = _grid_for(stream, cfg)
    result = run_pipeline_once(stream, cfg.tau, cfg.class_ratio, _pipeline_params(cfg))
    return stream, grid, result


def cmd_identify(args) -> int:
    cfg = _config_from_args(args)
    stream, grid, result = _run_identify(args, cfg)
    out = _outdir(args)
    names = stream.node_names
    with open(out / "removal_log.jsonl", "w", encoding="utf-8") as fh:
        write_removal_log(result.log, names, fh)
    with open(out / "identified.csv", "w", encoding="utf-8") as fh:
        write_identified_csv(result.identified_set, names, fh)
    with open(out / "events.csv", "w", encoding="utf-8") as fh:
        write_events_csv(result.detected_events, event_statuses(result), fh)
    with open(out / "cleaned_stream.bin", "wb") as fh:
        result.final_stream.save(fh)
    blocks = {
        "identification": {
            "detected": len(result.detected_events),
            "identified": len(result.identified_events),
            "residual": len(result.residual_events),
            "rolled_back": len(result.rolled_back_events),
            "applied_removals": result.applied_count,
            "removed_share": result.removed_share,
            "identified_measure": result.identified_set.measure,
            "identified_nodes": sorted(names[n] for n in result.identified_set.nodes()),
            "k_id": smallest_identifiable_degree(result),
            "class_counts": class_count_summary(result),
            "residual_under_initial_labels": result.residual_under_initial_labels,
        }
    }
    report = build_report(cfg.to_dict(), blocks)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        write_report(report, fh)
    print(
        f"detected {len(result.detected_events)}, identified {len(result.identified_events)}, "
        f"removed {result.removed_share:.2%} of traffic"
    )
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _config_from_args(args)
    stream, grid, result = _run_identify(args, cfg)
    report_block = validate_removal(stream, result.final_stream, result, cfg.grubbs_alpha, cfg.ks_alpha)
    out = _outdir(args)
    with open(out / "series_before.csv", "w", encoding="utf-8", newline="") as fh:
        write_series_csv(report_block.before.series, fh)
    with open(out / "series_after.csv", "w", encoding="utf-8", newline="") as fh:
        write_series_csv(report_block.after.series, fh)
    blocks = {"validation": report_block.to_dict()}
    report = build_report(cfg.to_dict(), blocks)
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        write_report(report, fh)
    print(
        f"outlying seconds {report_block.before.outlying_seconds} -> "
        f"{report_block.after.outlying_seconds}, mean change "
        f"{report_block.relative_mean_change:.2%}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    stream = _load_stream(args.trace, cfg)
    try:
        values = [float(v) for v in args.values.split(",") if v]
    except ValueError:
        raise UsageError(f"cannot parse sweep values {args.values!r}")
    if args.reference is None or args.reference not in values:
        raise UsageError("--reference must be one of --values")
    report = sweep(
        stream, args.axis, values, args.reference, cfg.tau, cfg.class_ratio,
        _pipeline_params(cfg), threads=cfg.threads,
    )
    out = _outdir(args)
    with open(out / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        report.write_csv(fh)
    full = build_report(cfg.to_dict(), {"sweep": report.to_dict(include_runtime=False)})
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        write_report(full, fh)
    print(f"swept {args.axis} over {len(values)} values")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config_from_args(args)
    ident_path = Path(args.identified)
    truth_path = Path(args.truth)
    if not ident_path.exists():
        raise DataError(f"identified set not found: {args.identified}")
    if not truth_path.exists():
        raise DataError(f"truth file not found: {args.truth}")
    identified, names = read_identified_csv(ident_path)
    with open(truth_path, "r", encoding="utf-8") as fh:
        truth = read_ground_truth(fh)
    slack = args.slack if args.slack is not None else cfg.delta
    overlap = label_overlap(identified, names, truth, slack)
    out = _outdir(args)
    report = build_report(cfg.to_dict(), {"label_overlap": overlap.to_dict(), "slack": slack})
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        write_report(report, fh)
    print(f"precision {overlap.precision:.3f}, recall {overlap.recall:.3f}")
    return EXIT_OK


def make_parser() -> _Parser:
    parser = _Parser(
        prog="streamdeg",
        description="Degree-based anomaly detection in link streams",
        epilog=f"Environment overrides: {ENV_PREFIX}<FIELD> (e.g. {ENV_PREFIX}TAU=1.0)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labelled synthetic trace")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze", help="fraction matrix, class labels, events")
    p.add_argument("--trace", required=True)
    p.add_argument("--ks-report", action="store_true", help="all-pairs slice similarity")
    p.add_argument("--power-law", action="store_true", help="test the global degree distribution")
    p.add_argument("--bootstrap-count", type=int, default=250)
    _add_config_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("identify", help="iterative removal identification")
    p.add_argument("--trace", required=True, help="text trace or binary stream cache")
    _add_config_flags(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("validate", help="identification plus before/after validation")
    p.add_argument("--trace", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="parameter sweep with Jaccard stability")
    p.add_argument("--trace", required=True)
    p.add_argument("--axis", required=True, choices=["tau", "r"])
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--reference", type=float, required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="score an identified set against ground truth")
    p.add_argument("--identified", required=True, help="identified.csv from identify")
    p.add_argument("--truth", required=True, help="ground truth CSV")
    p.add_argument("--slack", type=float, help="temporal slack in seconds (default: delta)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
