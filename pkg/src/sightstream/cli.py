"""Command line entry points.

Subcommands: ``simulate`` (write a synthetic stream plus its planted
head), ``run`` (one chronological adaptation pass with report, optional
trace, optional figures), ``perm-test`` (macro-F1 under chronological /
block32 / shuffle orders), ``bench`` (step latency and state-size fit),
``validate-geometry`` (are segment boundaries geometrically visible).

Exit codes: 0 success, 2 usage or configuration error, 3 data-contract
violation, 4 internal invariant violation. Randomized subcommands demand
an explicit seed; there is no hidden global seed. The only environment
override is ``SIGHTSTREAM_WORKERS`` (thread count for sweep fan-out).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import statistics
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .adapter import SightConfig
from .bench import fit_state_size, measure_step_latency
from .errors import ConfigError, SightStreamError, ValidationError
from .runner import METHODS, evaluate, run_stream, stream_labels
from .simulator import (
    SimConfig,
    boundary_routing_accuracy,
    permute_stream,
    simulate,
    transition_similarities,
    validate_transition_geometry,
)
from .stream_io import (
    FORMAT_VERSION,
    RunManifest,
    file_entry,
    read_classifier_weights,
    read_stream,
    write_classifier_weights,
    write_manifest,
    write_stream,
    write_trace,
)

PERMUTATION_MODES = ("chronological", "block32", "shuffle")


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _worker_count() -> int:
    raw = os.environ.get("SIGHTSTREAM_WORKERS", "")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ConfigError(f"SIGHTSTREAM_WORKERS={raw!r} is not an integer") from None
        if n < 1:
            raise ConfigError(f"SIGHTSTREAM_WORKERS must be >= 1, got {n}")
        return n
    return min(8, os.cpu_count() or 1)


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return obj


def _sight_config(path: str | None) -> SightConfig:
    if path is None:
        return SightConfig()
    return SightConfig.from_dict(_load_json(path))


def _write_report(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _manifest(command: str, config: dict, inputs: dict, outputs: dict) -> RunManifest:
    return RunManifest(
        command=command,
        created_utc=_utc_now(),
        config=config,
        inputs=inputs,
        outputs=outputs,
    )


def _plots_dir(path: str | None) -> str | None:
    if path is not None:
        os.makedirs(path, exist_ok=True)
    return path


# simulate ---------------------------------------------------------------


def cmd_simulate(args: argparse.Namespace) -> int:
    base = _load_json(args.config) if args.config else {}
    base["seed"] = args.seed
    cfg = SimConfig.from_dict(base)
    sim = simulate(cfg, args.length)
    n = write_stream(args.out, sim.records, kind="logits")
    write_classifier_weights(args.weights_out, sim.weights, sim.bias)

    result = run_stream(sim.records, "source-only")
    report = evaluate(result, sim.records)
    marginal = np.bincount(sim.labels, minlength=cfg.num_classes) / n
    n_segments = int(sim.segment_ids[-1]) + 1
    print(f"wrote {n} records to {args.out}; planted head in {args.weights_out}")
    print(f"label marginal: {np.array2string(marginal, precision=3)}")
    print(f"segments: {n_segments} (mean length {n / n_segments:.1f})")
    print(f"source-only macro-F1: {report.macro_f1:.4f}")

    manifest = _manifest(
        "simulate",
        {"length": args.length, "sim_config": cfg.to_dict()},
        {},
        {"stream": file_entry(args.out), "weights": file_entry(args.weights_out)},
    )
    write_manifest(args.out + ".manifest.json", manifest)
    return 0


# run ---------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    records = list(read_stream(args.stream))
    weights = bias = None
    if args.weights:
        weights, bias = read_classifier_weights(args.weights)
    if args.method == "sight" and weights is None:
        raise ConfigError("method 'sight' needs --weights")
    cfg = _sight_config(args.config)

    result = run_stream(
        records,
        args.method,
        weights=weights,
        config=cfg,
        persistence_alpha=args.alpha,
        markov_smoothing=args.smoothing,
        collect_traces=args.trace is not None,
    )
    report = evaluate(result, records)
    if report.macro_f1 is None:
        print(
            "warning: stream carries no (complete) labels; scores omitted, "
            "diagnostics only",
            file=sys.stderr,
        )

    params: dict = {"method": args.method}
    if args.method == "sight":
        params["sight"] = cfg.to_dict()
    elif args.method == "persistence":
        params["alpha"] = args.alpha
    elif args.method == "markov":
        params["smoothing"] = args.smoothing
    _write_report(
        args.report,
        {"format_version": FORMAT_VERSION, "params": params, "report": report.to_dict()},
    )

    outputs = {"report": file_entry(args.report)}
    if args.trace is not None:
        write_trace(args.trace, result.traces)
        outputs["trace"] = file_entry(args.trace)

    plots = _plots_dir(args.plots)
    if plots is not None:
        from . import plots as figs

        labels = stream_labels(records)
        rows = []
        for t in range(result.predictions.size):
            rows.append(
                (
                    t,
                    int(result.predictions[t]),
                    int(labels[t]) if labels is not None else "",
                    f"{result.lambdas[t]!r}" if result.lambdas is not None else "",
                )
            )
        figs.write_rows(
            os.path.join(plots, "predictions.csv"),
            ("t", "prediction", "label", "gate"),
            rows,
        )
        outputs["predictions_csv"] = file_entry(os.path.join(plots, "predictions.csv"))
        if result.lambdas is not None:
            boundary = None
            if labels is not None:
                boundary = labels[1:] != labels[:-1]
            figs.gate_figure(os.path.join(plots, "gate.png"), result.lambdas, boundary)
            outputs["gate_png"] = file_entry(os.path.join(plots, "gate.png"))
        if report.per_class_f1 is not None:
            figs.f1_figure(os.path.join(plots, "per_class_f1.png"), report.per_class_f1)
            figs.confusion_figure(os.path.join(plots, "confusion.png"), report.confusion)
            outputs["per_class_f1_png"] = file_entry(
                os.path.join(plots, "per_class_f1.png")
            )
            outputs["confusion_png"] = file_entry(os.path.join(plots, "confusion.png"))

    inputs = {"stream": file_entry(args.stream)}
    if args.weights:
        inputs["weights"] = file_entry(args.weights)
    write_manifest(args.report + ".manifest.json", _manifest("run", params, inputs, outputs))

    if report.macro_f1 is not None:
        print(f"{args.method}: macro-F1 {report.macro_f1:.4f} over {report.n_steps} steps")
    else:
        print(f"{args.method}: {report.n_steps} steps (unscored)")
    return 0


# perm-test ----------------------------------------------------------------


def cmd_perm_test(args: argparse.Namespace) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not methods or not seeds:
        raise ConfigError("need at least one method and one seed")

    records = list(read_stream(args.stream))
    if stream_labels(records) is None:
        raise ValidationError("perm-test needs a fully labeled stream")
    weights = None
    if args.weights:
        weights, _ = read_classifier_weights(args.weights)
    if "sight" in methods and weights is None:
        raise ConfigError("method 'sight' needs --weights")
    cfg = _sight_config(args.config)

    jobs = [
        (method, mode, seed)
        for method in methods
        for mode in PERMUTATION_MODES
        for seed in seeds
    ]

    def work(job: tuple[str, str, int]) -> float:
        method, mode, seed = job
        ordered = permute_stream(records, mode, seed)
        result = run_stream(ordered, method, weights=weights, config=cfg)
        return evaluate(result, ordered).macro_f1

    scores: dict[tuple[str, str, int], float] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        for job, score in zip(jobs, pool.map(work, jobs)):
            scores[job] = score

    summary: dict[str, dict[str, dict[str, float]]] = {}
    for method in methods:
        summary[method] = {}
        for mode in PERMUTATION_MODES:
            vals = [scores[(method, mode, s)] for s in seeds]
            summary[method][mode] = {
                "mean": statistics.fmean(vals),
                "sd": statistics.stdev(vals) if len(vals) > 1 else 0.0,
            }

    width = max(len(m) for m in methods + ["method"])
    print(f"{'method':<{width}}  " + "  ".join(f"{m:>20}" for m in PERMUTATION_MODES))
    for method in methods:
        cells = [
            f"{summary[method][mode]['mean']:.4f} +/- {summary[method][mode]['sd']:.4f}"
            for mode in PERMUTATION_MODES
        ]
        print(f"{method:<{width}}  " + "  ".join(f"{c:>20}" for c in cells))

    results = [
        {"method": m, "mode": mode, "seed": s, "macro_f1": scores[(m, mode, s)]}
        for m, mode, s in sorted(scores)
    ]
    _write_report(
        args.report,
        {
            "format_version": FORMAT_VERSION,
            "methods": methods,
            "modes": list(PERMUTATION_MODES),
            "seeds": seeds,
            "results": results,
            "summary": summary,
        },
    )
    outputs = {"report": file_entry(args.report)}

    plots = _plots_dir(args.plots)
    if plots is not None:
        from . import plots as figs

        csv_path = os.path.join(plots, "perm_results.csv")
        figs.write_rows(
            csv_path,
            ("method", "mode", "seed", "macro_f1"),
            [(r["method"], r["mode"], r["seed"], repr(r["macro_f1"])) for r in results],
        )
        png_path = os.path.join(plots, "perm_test.png")
        figs.permutation_figure(png_path, summary, PERMUTATION_MODES)
        outputs["perm_csv"] = file_entry(csv_path)
        outputs["perm_png"] = file_entry(png_path)

    inputs = {"stream": file_entry(args.stream)}
    if args.weights:
        inputs["weights"] = file_entry(args.weights)
    write_manifest(
        args.report + ".manifest.json",
        _manifest(
            "perm-test",
            {"methods": methods, "seeds": seeds, "sight": cfg.to_dict()},
            inputs,
            outputs,
        ),
    )
    return 0


# bench ---------------------------------------------------------------------


def cmd_bench(args: argparse.Namespace) -> int:
    latency = measure_step_latency(
        num_classes=args.num_classes, feature_dim=args.feature_dim, steps=args.steps
    )
    fit = fit_state_size()
    print(
        f"step latency (K={latency.num_classes}, d={latency.feature_dim}, "
        f"{latency.steps} steps): p50 {latency.p50_ms:.4f} ms, "
        f"p95 {latency.p95_ms:.4f} ms"
    )
    print(
        f"state bytes ~= {fit.c_kd:.2f}*K*d + {fit.c_k:.2f}*K + {fit.c_const:.2f} "
        f"(max residual {fit.max_rel_residual:.2e})"
    )
    _write_report(
        args.report,
        {
            "format_version": FORMAT_VERSION,
            "latency": latency.to_dict(),
            "state_size": fit.to_dict(),
        },
    )
    write_manifest(
        args.report + ".manifest.json",
        _manifest(
            "bench",
            {
                "num_classes": args.num_classes,
                "feature_dim": args.feature_dim,
                "steps": args.steps,
            },
            {},
            {"report": file_entry(args.report)},
        ),
    )
    return 0


# validate-geometry ----------------------------------------------------------


def cmd_validate_geometry(args: argparse.Namespace) -> int:
    records = list(read_stream(args.stream))
    weights, _ = read_classifier_weights(args.weights)
    geometry = validate_transition_geometry(records, weights)
    directional = boundary_routing_accuracy(records, weights)
    print(
        f"within-segment cosine {geometry.within_mean:.4f} +/- {geometry.within_std:.4f} "
        f"({geometry.n_within} steps)"
    )
    print(
        f"boundary cosine       {geometry.boundary_mean:.4f} +/- {geometry.boundary_std:.4f} "
        f"({geometry.n_boundary} steps)"
    )
    print(f"separability: {geometry.separability:.2f} pooled standard deviations")
    print(
        f"boundary top-1 directional accuracy: {directional.accuracy:.4f} "
        f"(random {directional.random_baseline:.4f}, {directional.n_boundaries} boundaries)"
    )
    _write_report(
        args.report,
        {
            "format_version": FORMAT_VERSION,
            "geometry": {
                "n_within": geometry.n_within,
                "n_boundary": geometry.n_boundary,
                "within_mean": geometry.within_mean,
                "within_std": geometry.within_std,
                "boundary_mean": geometry.boundary_mean,
                "boundary_std": geometry.boundary_std,
                "separability": geometry.separability,
            },
            "directional": {
                "n_boundaries": directional.n_boundaries,
                "accuracy": directional.accuracy,
                "random_baseline": directional.random_baseline,
            },
        },
    )
    outputs = {"report": file_entry(args.report)}

    plots = _plots_dir(args.plots)
    if plots is not None:
        from . import plots as figs

        sims, boundary = transition_similarities(records, weights)
        csv_path = os.path.join(plots, "geometry_similarities.csv")
        figs.write_rows(
            csv_path,
            ("t", "cosine", "kind"),
            [
                (t + 1, repr(float(sims[t])), "boundary" if boundary[t] else "within")
                for t in range(sims.size)
            ],
        )
        png_path = os.path.join(plots, "geometry.png")
        figs.geometry_figure(png_path, sims, boundary)
        outputs["geometry_csv"] = file_entry(csv_path)
        outputs["geometry_png"] = file_entry(png_path)

    write_manifest(
        args.report + ".manifest.json",
        _manifest(
            "validate-geometry",
            {},
            {"stream": file_entry(args.stream), "weights": file_entry(args.weights)},
            outputs,
        ),
    )
    return 0


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sightstream",
        description="Streaming test-time adaptation over activity feature streams.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic stream and planted head")
    p.add_argument("--length", type=int, default=5000, help="number of records")
    p.add_argument("--seed", type=int, required=True, help="stream seed (explicit, no default)")
    p.add_argument("--config", help="simulator config JSON")
    p.add_argument("--out", required=True, help="output stream (JSON Lines)")
    p.add_argument("--weights-out", required=True, help="output planted head (JSON)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="one chronological pass over a stream")
    p.add_argument("--stream", required=True)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--weights", help="classifier head JSON/CSV (required for sight)")
    p.add_argument("--config", help="adapter config JSON")
    p.add_argument("--alpha", type=float, default=0.9, help="persistence smoothing")
    p.add_argument("--smoothing", type=float, default=1.0, help="markov pseudo-count")
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--trace", help="optional per-step trace JSON Lines")
    p.add_argument("--plots", help="directory for CSV plot data and rendered figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("perm-test", help="macro-F1 under permuted stream orders")
    p.add_argument("--stream", required=True)
    p.add_argument("--weights")
    p.add_argument("--config", help="adapter config JSON")
    p.add_argument(
        "--methods",
        default=",".join(METHODS),
        help="comma-separated subset of " + ",".join(METHODS),
    )
    p.add_argument("--seeds", required=True, help="comma-separated permutation seeds")
    p.add_argument("--report", required=True)
    p.add_argument("--plots")
    p.set_defaults(func=cmd_perm_test)

    p = sub.add_parser("bench", help="step latency and state-size fit")
    p.add_argument("--report", required=True)
    p.add_argument("--num-classes", type=int, default=12)
    p.add_argument("--feature-dim", type=int, default=128)
    p.add_argument("--steps", type=int, default=2000)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser(
        "validate-geometry", help="check that segment boundaries are geometrically visible"
    )
    p.add_argument("--stream", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--plots")
    p.set_defaults(func=cmd_validate_geometry)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SightStreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # invariant violation: abort loudly
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
