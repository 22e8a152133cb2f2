"""Command-line harness: run strategies over manifests, analyze runs, sweep budgets, make corpora."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

from .analysis import (
    DEFAULT_THRESHOLDS,
    RecordOutcome,
    build_report,
    check_thresholds,
    confidence_means,
    interval_pairs,
    outcome_pairs,
    read_traces,
    threshold_curve,
)
from .backend import Backend, HttpBackend, StubBackend, eval_reply
from .domain import Query, SearchConfig, VideoSource
from .errors import ConfigError
from .frames import FrameStore
from .oracle import CorpusSpec, OracleBackend, SyntheticWorld, generate_corpus
from .prompts import PromptSet
from .search import STRATEGIES, run_strategy

logger = logging.getLogger("temporal_search")

DURATION_GROUPS = ("short", "medium", "long")


@dataclass(frozen=True)
class ManifestRecord:
    id: str
    video_id: str
    total_frames: int
    fps: float
    question: str
    options: tuple[str, ...]
    answer: Optional[str]
    duration_group: Optional[str] = None
    frames_root: Optional[str] = None
    world: Optional[SyntheticWorld] = None

    @property
    def video(self) -> VideoSource:
        return VideoSource(self.video_id, self.total_frames, self.fps)

    @property
    def query(self) -> Query:
        return Query(self.question, self.options, self.answer)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ManifestRecord":
        if not isinstance(data, dict):
            raise ValueError("expected a JSON object")
        missing = [k for k in ("video_id", "total_frames", "fps", "question") if k not in data]
        if missing:
            raise ValueError(f"missing fields: {', '.join(missing)}")
        group = data.get("duration_group")
        if group is not None and group not in DURATION_GROUPS:
            raise ValueError(f"duration_group must be one of {DURATION_GROUPS}")
        world = SyntheticWorld.from_dict(data["world"]) if data.get("world") else None
        record = cls(
            id=str(data.get("id", data["video_id"])),
            video_id=str(data["video_id"]),
            total_frames=int(data["total_frames"]),
            fps=float(data["fps"]),
            question=str(data["question"]),
            options=tuple(data.get("options") or ()),
            answer=data.get("answer"),
            duration_group=group,
            frames_root=data.get("frames_root"),
            world=world,
        )
        _ = (record.video, record.query)  # validates ranges and the answer label
        return record


def load_manifest(path: str | Path) -> list[ManifestRecord]:
    """Parse a JSONL manifest, failing on the first bad line with its number."""
    records = []
    seen = set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                record = ManifestRecord.from_dict(json.loads(line))
            except (ValueError, TypeError, KeyError) as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            if record.id in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate record id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    if not records:
        raise ConfigError(f"{path}: no records")
    return records


def make_backend_factory(args: argparse.Namespace, records: Sequence[ManifestRecord]) -> Callable[[ManifestRecord], Backend]:
    if args.backend == "oracle":
        missing = [r.id for r in records if r.world is None]
        if missing:
            raise ConfigError(f"oracle backend needs a synthetic world on every record; missing on {missing[0]}")
        backend = OracleBackend({r.video_id: r.world for r in records})
        return lambda record: backend

    prompts = PromptSet.load(args.prompt_dir)
    if args.backend == "stub":
        backend = StubBackend(answer="A", evaluate=eval_reply(0.5), prompts=prompts)
        return lambda record: backend

    if not args.base_url or not args.model:
        raise ConfigError("the http backend needs --base-url and --model")
    if args.frame_command:
        backend = HttpBackend(args.base_url, args.model, prompts=prompts, frame_store=FrameStore.external(args.frame_command))
        return lambda record: backend

    backends: dict[str, HttpBackend] = {}
    for record in records:
        root = args.frames_root or record.frames_root
        if root is None:
            raise ConfigError(f"record {record.id}: no frames_root and no --frames-root/--frame-command given")
        if root not in backends:
            backends[root] = HttpBackend(args.base_url, args.model, prompts=prompts, frame_store=FrameStore.directory(root))
        backends[root].frame_store.validate(record.video)
    return lambda record: backends[args.frames_root or record.frames_root]


def run_record(
    record: ManifestRecord, strategy: str, backend: Backend, config: SearchConfig
) -> tuple[RecordOutcome, Optional[dict[str, Any]]]:
    """Run one record; failures are captured in the outcome, never raised."""
    started = time.perf_counter()
    try:
        result = run_strategy(strategy, record.video, record.query, backend, config)
    except Exception as exc:  # per-record isolation
        logger.error("record %s aborted: %s", record.id, exc)
        outcome = RecordOutcome(
            record_id=record.id,
            video_id=record.video_id,
            duration_group=record.duration_group,
            strategy=strategy,
            ground_truth=record.answer,
            choice=None,
            correct=False,
            confidence=None,
            value=None,
            calls_used=0,
            wall_time=round(time.perf_counter() - started, 4),
            stop_reason=None,
            error=f"{type(exc).__name__}: {exc}",
        )
        return outcome, None
    outcome = RecordOutcome(
        record_id=record.id,
        video_id=record.video_id,
        duration_group=record.duration_group,
        strategy=strategy,
        ground_truth=record.answer,
        choice=result.choice,
        correct=record.answer is not None and result.choice == record.answer,
        confidence=result.answer.confidence,
        value=result.value,
        calls_used=result.calls_used,
        wall_time=round(time.perf_counter() - started, 4),
        stop_reason=result.stop_reason.value,
        chosen_interval=result.chosen_interval.as_list(),
        error=result.error,
    )
    return outcome, result.trace.to_dict()


def run_records(
    records: Sequence[ManifestRecord],
    strategy: str,
    backend_for: Callable[[ManifestRecord], Backend],
    config: SearchConfig,
    workers: int = 1,
) -> list[tuple[RecordOutcome, Optional[dict[str, Any]]]]:
    """Run every record, in manifest order, with up to ``workers`` at once."""
    job = lambda record: run_record(record, strategy, backend_for(record), config)  # noqa: E731
    if workers <= 1:
        return [job(r) for r in records]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, records))


def write_run(
    out_dir: Path,
    strategy: str,
    config: SearchConfig,
    results: Sequence[tuple[RecordOutcome, Optional[dict[str, Any]]]],
    figures: bool = True,
) -> dict[str, Any]:
    from .plotting import plot_group_accuracy, plot_threshold_curves

    out_dir.mkdir(parents=True, exist_ok=True)
    outcomes = [o for o, _ in results]
    incomplete = any(o.error is not None for o in outcomes)
    header = {"strategy": strategy, "config": config.to_dict(), "incomplete": incomplete}
    with open(out_dir / "traces.jsonl", "w") as fh:
        for outcome, trace in results:
            fh.write(json.dumps({"run": header, "outcome": outcome.to_dict(), "trace": trace}) + "\n")

    report = build_report(outcomes, strategy, config.to_dict(), incomplete)
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    with open(out_dir / "records.csv", "w", newline="") as fh:
        fields = list(report["records"][0])
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in report["records"]:
            row = dict(row)
            row["chosen_interval"] = json.dumps(row["chosen_interval"])
            writer.writerow(row)

    if figures:
        pairs = outcome_pairs(outcomes)
        plot_threshold_curves({strategy: threshold_curve(pairs)}, out_dir / "threshold_curve.png")
        plot_group_accuracy(report["accuracy_by_group"], out_dir / "accuracy_by_group.png", title=strategy)
    return report


def load_config(args: argparse.Namespace) -> SearchConfig:
    data: dict[str, Any] = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text()))
    for item in args.set or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            data[key] = json.loads(raw)
        except json.JSONDecodeError:
            data[key] = raw
    if args.seed is not None:
        data["seed"] = args.seed
    return SearchConfig.from_dict(data)


def cmd_run(args: argparse.Namespace) -> int:
    records = load_manifest(args.manifest)
    config = load_config(args)
    backend_for = make_backend_factory(args, records)
    results = run_records(records, args.strategy, backend_for, config, args.workers)
    report = write_run(Path(args.out), args.strategy, config, results, figures=not args.no_figures)
    acc = report["accuracy"]
    print(
        f"{args.strategy}: accuracy {acc:.4f} over {report['num_records']} records, "
        f"mean calls {report['passes']['mean_calls_used']:.2f}"
        + (" (incomplete)" if report["incomplete"] else "")
    )
    return 1 if report["num_aborted"] else 0


def _parse_grid(text: str) -> list[int]:
    try:
        grid = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc
    if not grid or any(g < 1 for g in grid):
        raise ConfigError("grid must list positive integers")
    return grid


def scaling_config(strategy: str, config: SearchConfig, setting: int) -> SearchConfig:
    """The config a scaling sweep uses for one grid setting."""
    if strategy in ("ts", "ts-bfs"):
        return config.replace(k=setting)
    if strategy == "utv":
        return config.replace(utv_intervals=setting)
    return config.replace(n_f=setting)


def cmd_scaling(args: argparse.Namespace) -> int:
    from .plotting import plot_scaling

    records = load_manifest(args.manifest)
    config = load_config(args)
    grid = _parse_grid(args.grid)
    backend_for = make_backend_factory(args, records)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    series: dict[str, list[tuple[float, float]]] = {}
    aborted = 0
    with open(out_dir / "scaling.jsonl", "w") as fh:
        for strategy in args.strategy:
            for setting in grid:
                results = run_records(records, strategy, backend_for, scaling_config(strategy, config, setting), args.workers)
                outcomes = [o for o, _ in results]
                aborted += sum(o.aborted for o in outcomes)
                point = {
                    "strategy": strategy,
                    "setting": setting,
                    "mean_calls_used": sum(o.calls_used for o in outcomes) / len(outcomes),
                    "accuracy": sum(o.correct for o in outcomes) / len(outcomes),
                }
                fh.write(json.dumps(point) + "\n")
                series.setdefault(strategy, []).append((point["mean_calls_used"], point["accuracy"]))
                print(f"{strategy} setting={setting}: calls {point['mean_calls_used']:.2f} accuracy {point['accuracy']:.4f}")
    if not args.no_figures:
        plot_scaling(series, out_dir / "scaling.png")
    return 1 if aborted else 0


def cmd_analyze(args: argparse.Namespace) -> int:
    from .plotting import plot_threshold_curves

    thresholds = check_thresholds(float(t) for t in args.thresholds.split(",")) if args.thresholds else DEFAULT_THRESHOLDS
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict[str, Any] = {}
    curves = {}
    for run_dir in args.runs:
        rows = read_traces(Path(run_dir) / "traces.jsonl")
        if not rows:
            raise ConfigError(f"{run_dir}: no records")
        strategy = rows[0]["run"]["strategy"]
        label = f"{Path(run_dir).name}"
        levels = {"video": outcome_pairs(RecordOutcome.from_dict(r["outcome"]) for r in rows)}
        if strategy == "utv":
            levels["interval"] = [
                pair for r in rows if r["trace"] for pair in interval_pairs(r["trace"], r["outcome"]["ground_truth"])
            ]
        summary[label] = {"strategy": strategy}
        for level, pairs in levels.items():
            right, wrong = confidence_means(pairs)
            curve = threshold_curve(pairs, thresholds)
            curves[f"{label} ({level})"] = curve
            summary[label][level] = {
                "correct_mean": right,
                "incorrect_mean": wrong,
                "curve": [p.__dict__ for p in curve],
            }
            fmt = lambda x: "-" if x is None else f"{x:.3f}"  # noqa: E731
            print(f"{label:24s} {level:8s} correct {fmt(right)}  incorrect {fmt(wrong)}  n={len(pairs)}")

    (out_dir / "analysis.json").write_text(json.dumps(summary, indent=2) + "\n")
    with open(out_dir / "threshold_curves.jsonl", "w") as fh:
        for name, curve in curves.items():
            for p in curve:
                fh.write(json.dumps({"series": name, **p.__dict__}) + "\n")
    if not args.no_figures:
        plot_threshold_curves(curves, out_dir / "threshold_curves.png")
    return 0


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.spec).read_text()) if args.spec else {}
    if args.seed is not None:
        data["seed"] = args.seed
    spec = CorpusSpec.from_dict(data)
    items = generate_corpus(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as fh:
        for item in items:
            fh.write(json.dumps(item.record) + "\n")
    print(f"wrote {len(items)} records to {out}")
    return 0


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="JSONL manifest, one record per line")
    p.add_argument("--backend", choices=("oracle", "http", "stub"), default="oracle")
    p.add_argument("--base-url", help="OpenAI-compatible endpoint, e.g. http://localhost:8000/v1")
    p.add_argument("--model", help="model name sent to the endpoint")
    p.add_argument("--frames-root", help="directory of pre-extracted frames (overrides per-record roots)")
    p.add_argument("--frame-command", help="decoder command template with {video} and {index}")
    p.add_argument("--prompt-dir", help="directory with replacement prompt templates")
    p.add_argument("--config", help="JSON file with search config fields")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config field")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1, help="records processed concurrently")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="temporal-search", description=__doc__)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one strategy over a manifest")
    _add_run_options(p)
    p.add_argument("--strategy", choices=tuple(STRATEGIES), default="ts-bfs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scaling", help="accuracy against inference budget")
    _add_run_options(p)
    p.add_argument("--strategy", choices=tuple(STRATEGIES), nargs="+", default=["ts-bfs"])
    p.add_argument("--grid", default="1,5,10", help="comma-separated budgets (k, slices or frames)")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("analyze", help="confidence against accuracy for finished runs")
    p.add_argument("runs", nargs="+", help="run output directories")
    p.add_argument("--thresholds", help="comma-separated thresholds in [0, 1]")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen-corpus", help="write a synthetic manifest")
    p.add_argument("--spec", help="JSON corpus spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="manifest path to write")
    p.set_defaults(func=cmd_gen_corpus)
    return parser


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
