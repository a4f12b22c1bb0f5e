"""Command-line pipeline: synth, ingest, impute, stats, serve.

Stages communicate only through the documented file formats, so each is
independently runnable and testable. Exit codes: 0 success, 2 usage or
input error, 1 internal error. With --json-errors, failures are emitted
to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
import traceback
from pathlib import Path

from . import __version__, dataset_io
from .fhir_ingest import ingest
from .hierarchy import build_hierarchy, read_edge_file
from .imputation import impute_and_categorize
from .model import CohortDataset, CohortscopeError, attribute_summary
from .query import TemporalQuery, run_query
from .stats import AlignedStats, BudgetTooSmallError
from .synth import SynthConfig, generate, read_allowlist, write_synth


def _gather_input_files(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            files.extend(sorted(p.glob("*.json")))
        elif p.exists():
            files.append(p)
        else:
            raise CohortscopeError(f"input path does not exist: {p}")
    return files


def _write_report(report_dict: dict, path: str | None) -> None:
    text = json.dumps(report_dict, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_ingest(args: argparse.Namespace) -> int:
    allowlist_path = Path(args.loinc_allowlist)
    if not allowlist_path.is_file():
        raise CohortscopeError(f"allowlist file not found: {allowlist_path}")
    allowlist = read_allowlist(allowlist_path)
    files = _gather_input_files(args.input)
    if not files:
        raise CohortscopeError("no resources found")
    dataset, observations, report = ingest(files, allowlist)
    if report.resources_read == 0:
        raise CohortscopeError("no resources found")
    out = Path(args.out)
    dataset_io.save_dataset(out, dataset, observations=observations)
    _write_report(report.to_json_dict(), args.report)
    return 0


def cmd_impute(args: argparse.Namespace) -> int:
    dataset_dir = Path(args.dataset)
    dataset = dataset_io.load_dataset(dataset_dir)
    observations = dataset_io.load_observations(dataset_dir)
    labs, report = impute_and_categorize(observations)
    merged = CohortDataset(
        dataset.patients.values(),
        list(dataset.events) + [lab.to_event_record() for lab in labs],
    )
    dataset_io.save_dataset(Path(args.out), merged)
    _write_report(report.to_json_dict(), args.report)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    dataset = dataset_io.load_dataset(Path(args.dataset))
    hierarchy = build_hierarchy(
        read_edge_file(Path(args.vocab)),
        read_edge_file(Path(args.manual)),
        dataset.observed_types(),
    )
    query_path = Path(args.query)
    if not query_path.is_file():
        raise CohortscopeError(f"query file not found: {query_path}")
    try:
        query_doc = json.loads(query_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CohortscopeError(f"malformed query file {query_path}: {exc}") from exc
    query = TemporalQuery.from_json_dict(query_doc)
    aligned = run_query(dataset, query)
    stats = AlignedStats(hierarchy, aligned, dataset.labels())
    cut = stats.select_cut(args.budget)
    body = {
        "engine_version": __version__,
        "cohort": attribute_summary(dataset),
        "query": query.to_json_dict(),
        "matched": len(aligned.matched_patient_ids),
        "unmatched": len(aligned.unmatched_patient_ids),
        "budget": args.budget,
        "points": [p.to_json_dict() for p in stats.points_for(cut)],
    }
    text = json.dumps(body, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    if args.config:
        config_path = Path(args.config)
        if not config_path.is_file():
            raise CohortscopeError(f"config file not found: {config_path}")
        try:
            doc = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CohortscopeError(f"malformed config file {config_path}: {exc}") from exc
        config = SynthConfig.from_json_dict(doc)
    else:
        config = SynthConfig()
    result = generate(config)
    write_synth(Path(args.out), result)
    print(
        f"synthesized {result.manifest['n_patients']} patients "
        f"({result.manifest['n_positive']} positive, "
        f"{result.manifest['n_female']} female) into {args.out}",
        file=sys.stderr,
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import load_app_from_files

    app = load_app_from_files(
        Path(args.dataset),
        Path(args.vocab),
        Path(args.manual),
        default_budget=args.budget,
        session_timeout_minutes=args.session_timeout_minutes,
    )
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        raise CohortscopeError(f"port {args.port} unavailable: {exc}") from exc
    finally:
        probe.close()
    print(
        f"ready: serving on {args.host}:{args.port} (engine {__version__})",
        file=sys.stderr,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohortscope",
        description="Event-sequence cohort analytics over coded clinical records",
    )
    parser.add_argument("--json-errors", action="store_true",
                        help="emit failures to stderr as JSON")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse FHIR files into a dataset")
    p.add_argument("--input", nargs="+", required=True,
                   help="FHIR JSON files or directories of them")
    p.add_argument("--loinc-allowlist", required=True,
                   help="file with one allowed LOINC code per line")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--report", help="write the ingest report here instead of stdout")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("impute", help="categorize pending lab observations")
    p.add_argument("--dataset", required=True, help="dataset directory from ingest")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--report", help="write the imputation report here instead of stdout")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("stats", help="run a temporal query and emit scatter points")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vocab", required=True, help="vocabulary edge file")
    p.add_argument("--manual", required=True, help="manual supplement edge file")
    p.add_argument("--query", required=True, help="temporal query JSON file")
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--out", help="write the result JSON here instead of stdout")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--config", help="synth config JSON (defaults reproduce the "
                                    "998-patient demo cohort)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="serve the explorer API")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--manual", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--budget", type=int, default=50)
    p.add_argument("--session-timeout-minutes", type=float, default=60.0)
    p.set_defaults(func=cmd_serve)
    return parser


def _emit_error(args, message: str, code: int) -> None:
    if getattr(args, "json_errors", False):
        print(json.dumps({"error": message, "exit_code": code}), file=sys.stderr)
    else:
        print(f"cohortscope: error: {message}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetTooSmallError as exc:
        _emit_error(args, f"{exc} (use --budget {exc.minimum_feasible} or more)", 2)
        return 2
    except (CohortscopeError, OSError, ValueError) as exc:
        _emit_error(args, str(exc), 2)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        traceback.print_exc()
        _emit_error(args, f"internal error: {exc}", 1)
        return 1


if __name__ == "__main__":
    sys.exit(main())
