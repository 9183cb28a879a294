"""Command-line pipeline: ingest -> punctuate -> pairs -> split -> generate -> eval.

Every stage is independently runnable on the previous stage's files, and the
``pipeline`` subcommand chains them into one reproducible run directory with
a manifest. Failure classes map to distinct exit codes so shell harnesses can
branch: 2 parse, 3 split, 4 adapter, 5 io, 64 usage.

Artifacts are written to a temporary name in the target directory and
renamed into place, so a crashed run never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import glob as globlib
import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .captions import (
    CAPTION_FORMATS,
    EmptyTranscript,
    FetchTimeout,
    HttpError,
    MalformedInput,
    Transcript,
    parse_captions,
    transcript_from_json,
    transcript_to_json,
)
from .dataset import (
    Corpus,
    DegenerateSplit,
    SchemaError,
    SplitSpec,
    corpus_manifest_json,
    corpus_stats,
    make_pairs,
    read_jsonl,
    split_by_video,
    write_jsonl,
)
from .generation import (
    AdapterConfig,
    AdapterError,
    EmptyTrainingSet,
    build_index,
    retrieve_generate,
    run_external,
)
from .metrics import (
    EmptyEvaluation,
    LengthMismatch,
    evaluate,
    report_to_json,
)
from .punctuation import (
    CommentarySentence,
    Strategy,
    parse_strategy_spec,
    punctuate,
    render_with_markers,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SPLIT = 3
EXIT_ADAPTER = 4
EXIT_IO = 5
EXIT_USAGE = 64

REPORT_METRICS = ("bleu", "rouge1", "rouge2", "rougeL", "meteor")

log = logging.getLogger("caster_punct.cli")


class _Parser(argparse.ArgumentParser):
    """argparse that exits with the usage code instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class StageFailure(Exception):
    """Wraps a stage error with its exit code and stage name."""

    def __init__(self, stage: str, code: int, cause: BaseException):
        super().__init__(f"stage {stage}: {cause}")
        self.code = code


def _classify(exc: BaseException) -> int:
    if isinstance(exc, (MalformedInput, EmptyTranscript)):
        return EXIT_PARSE
    if isinstance(exc, DegenerateSplit):
        return EXIT_SPLIT
    if isinstance(exc, (AdapterError, EmptyTrainingSet)):
        return EXIT_ADAPTER
    if isinstance(exc, (SchemaError, HttpError, FetchTimeout, LengthMismatch,
                        EmptyEvaluation, OSError)):
        return EXIT_IO
    return EXIT_USAGE


def _atomic_write(path: Path, data: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    tmp.write_text(data, encoding="utf-8", newline="\n")
    os.replace(tmp, path)


def _atomic_write_corpus(path: Path, corpus: Corpus):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    write_jsonl(corpus, tmp)
    os.replace(tmp, path)
    _atomic_write(path.with_suffix(".manifest.json"), corpus_manifest_json(corpus))


# ---------------------------------------------------------------------------
# Sentence JSONL (the punctuate stage's output file format)
# ---------------------------------------------------------------------------

def sentences_to_jsonl(sentences: list[CommentarySentence], strategy: Strategy) -> str:
    lines = []
    for s in sentences:
        record = {
            "video_id": s.video_id,
            "seq_index": s.seq_index,
            "text": s.text,
            "first_cue": s.cue_span[0],
            "last_cue": s.cue_span[1],
            "complete": s.complete,
            "strategy": strategy.name,
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def sentences_from_jsonl(text: str) -> list[CommentarySentence]:
    sentences = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(line_no, f"invalid JSON: {exc.msg}") from exc
        try:
            sentences.append(
                CommentarySentence(
                    video_id=record["video_id"],
                    seq_index=record["seq_index"],
                    text=record["text"],
                    cue_span=(record["first_cue"], record["last_cue"]),
                    complete=record["complete"],
                )
            )
        except KeyError as exc:
            raise SchemaError(line_no, f"missing field {exc.args[0]!r}") from exc
    return sentences


# ---------------------------------------------------------------------------
# Stage implementations shared by subcommands and the pipeline
# ---------------------------------------------------------------------------

def _expand_inputs(patterns: list[str]) -> list[Path]:
    paths: list[Path] = []
    for pattern in patterns:
        matches = sorted(globlib.glob(pattern))
        if not matches:
            if Path(pattern).exists():
                matches = [pattern]
            else:
                raise FileNotFoundError(f"input not found: {pattern}")
        paths.extend(Path(m) for m in matches)
    missing = [str(p) for p in paths if not p.is_file()]
    if missing:
        raise FileNotFoundError(f"input not found: {', '.join(missing)}")
    return paths


def _ingest_files(paths: list[Path], format: str, dedup: bool) -> list[Transcript]:
    transcripts = []
    for path in paths:
        transcripts.append(
            parse_captions(path.read_bytes(), format=format,
                           video_id=path.stem, dedup_consecutive=dedup)
        )
    transcripts.sort(key=lambda t: t.video_id)
    return transcripts


def _generate_outputs(train: Corpus, test: Corpus, generator: str,
                      adapter: AdapterConfig | None) -> list[dict]:
    contexts = [
        render_with_markers_text(pair.context) for pair in test.pairs
    ]
    if generator == "retrieval":
        index = build_index(train.pairs)
        candidates = [retrieve_generate(index, context) for context in contexts]
    else:
        candidates = run_external(adapter, contexts)
    records = []
    for pair, candidate in zip(test.pairs, candidates):
        records.append(
            {
                "pair_index": pair.pair_index,
                "video_id": pair.video_id,
                "strategy": pair.strategy_name,
                "context": pair.context,
                "reference": pair.target,
                "candidate": candidate,
            }
        )
    return records


def render_with_markers_text(text: str) -> str:
    """Marker-render a bare context string (model input format)."""
    sentence = CommentarySentence(video_id="", seq_index=0, text=text, cue_span=(0, 0))
    return render_with_markers(sentence)


def _outputs_to_jsonl(records: list[dict]) -> str:
    return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records)


def _outputs_from_jsonl(text: str) -> list[dict]:
    records = []
    required = ("pair_index", "video_id", "strategy", "context", "reference", "candidate")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(line_no, f"invalid JSON: {exc.msg}") from exc
        missing = [k for k in required if k not in record]
        if missing:
            raise SchemaError(line_no, f"missing fields: {', '.join(missing)}")
        records.append(record)
    return records


def _evaluate_outputs(records: list[dict]) -> str:
    report = evaluate([(r["candidate"], r["reference"]) for r in records])
    strategies = {r["strategy"] for r in records}
    if len(strategies) == 1:
        report.config["strategy"] = strategies.pop()
    return report_to_json(report)


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    paths = _expand_inputs(args.inputs)
    out_dir = Path(args.out)
    for transcript in _ingest_files(paths, args.format, args.dedup):
        _atomic_write(out_dir / f"{transcript.video_id}.json",
                      transcript_to_json(transcript) + "\n")
    print(f"ingested {len(paths)} file(s) into {out_dir}")
    return EXIT_OK


def cmd_punctuate(args) -> int:
    strategy = parse_strategy_spec(args.strategy, args.remainder)
    paths = _expand_inputs(args.inputs)
    sentences: list[CommentarySentence] = []
    for path in sorted(paths):
        transcript = transcript_from_json(path.read_text(encoding="utf-8"))
        sentences.extend(punctuate(transcript, strategy))
    _atomic_write(Path(args.out), sentences_to_jsonl(sentences, strategy))
    print(f"wrote {len(sentences)} sentence(s) to {args.out}")
    return EXIT_OK


def cmd_pairs(args) -> int:
    sentences = sentences_from_jsonl(Path(args.input).read_text(encoding="utf-8"))
    sentences.sort(key=lambda s: (s.video_id, s.seq_index))
    pairs = make_pairs(sentences)
    strategy_name = pairs[0].strategy_name if pairs else ""
    corpus = Corpus.from_pairs(pairs, strategy_name)
    _atomic_write_corpus(Path(args.out), corpus)
    print(f"wrote {len(pairs)} pair(s) to {args.out}")
    return EXIT_OK


def cmd_split(args) -> int:
    corpus = read_jsonl(args.input)
    spec = SplitSpec(train_fraction=args.train_fraction, seed=args.seed)
    train, test = split_by_video(corpus, spec)
    out_dir = Path(args.out)
    _atomic_write_corpus(out_dir / "pairs-train.jsonl", train)
    _atomic_write_corpus(out_dir / "pairs-test.jsonl", test)
    print(
        f"split {len(corpus.manifest)} video(s): "
        f"{len(train.manifest)} train / {len(test.manifest)} test"
    )
    return EXIT_OK


def _adapter_from_args(args) -> AdapterConfig | None:
    if args.generator == "retrieval":
        return None
    if bool(args.adapter_cmd) == bool(args.adapter_url):
        raise ValueError("external generator needs exactly one of --adapter-cmd/--adapter-url")
    return AdapterConfig(
        command=args.adapter_cmd or None,
        url=args.adapter_url or None,
        timeout_ms=args.timeout_ms,
        max_retries=args.max_retries,
    )


def cmd_generate(args) -> int:
    train = read_jsonl(args.train)
    test = read_jsonl(args.input)
    records = _generate_outputs(train, test, args.generator, _adapter_from_args(args))
    _atomic_write(Path(args.out), _outputs_to_jsonl(records))
    print(f"generated {len(records)} candidate(s) to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    records = _outputs_from_jsonl(Path(args.input).read_text(encoding="utf-8"))
    _atomic_write(Path(args.out), _evaluate_outputs(records))
    print(f"wrote report to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "inputs": None, "format": "webvtt", "dedup": False, "strategy": "duo",
    "remainder": "drop", "train_fraction": 0.9, "seed": 0,
    "generator": "retrieval", "adapter_cmd": None, "adapter_url": None,
    "adapter_metadata": {}, "timeout_ms": 10000, "max_retries": 0, "out": None,
}


def _load_run_config(args) -> dict:
    config = dict(_CONFIG_KEYS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(exc.lineno, f"config is not valid JSON: {exc.msg}") from exc
        unknown = [k for k in loaded if k not in _CONFIG_KEYS]
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        config.update(loaded)
    for key in ("format", "strategy", "remainder", "train_fraction", "seed",
                "generator", "adapter_cmd", "adapter_url", "timeout_ms",
                "max_retries", "out", "dedup"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    if args.inputs:
        config["inputs"] = list(args.inputs)
    if not config["inputs"]:
        raise ValueError("no inputs given (config 'inputs' or positional arguments)")
    if not config["out"]:
        raise ValueError("no output directory given (config 'out' or --out)")
    return config


def _config_hash(config: dict) -> str:
    hashable = {k: v for k, v in sorted(config.items()) if k != "out"}
    return hashlib.sha256(json.dumps(hashable, sort_keys=True).encode("utf-8")).hexdigest()


def cmd_pipeline(args) -> int:
    config = _load_run_config(args)
    strategy = parse_strategy_spec(config["strategy"], config["remainder"])
    spec = SplitSpec(train_fraction=float(config["train_fraction"]), seed=int(config["seed"]))
    out_dir = Path(config["out"])

    def stage(name, thunk):
        try:
            return thunk()
        except Exception as exc:
            raise StageFailure(name, _classify(exc), exc) from exc

    # Validate inputs before running any stage.
    paths = stage("validate", lambda: _expand_inputs(config["inputs"]))
    adapter = None
    if config["generator"] != "retrieval":
        if bool(config["adapter_cmd"]) == bool(config["adapter_url"]):
            raise StageFailure(
                "validate", EXIT_USAGE,
                ValueError("external generator needs exactly one of adapter_cmd/adapter_url"),
            )
        adapter = AdapterConfig(
            command=config["adapter_cmd"] or None,
            url=config["adapter_url"] or None,
            timeout_ms=int(config["timeout_ms"]),
            max_retries=int(config["max_retries"]),
            metadata=dict(config["adapter_metadata"]),
        )

    transcripts = stage(
        "ingest", lambda: _ingest_files(paths, config["format"], bool(config["dedup"]))
    )
    for transcript in transcripts:
        _atomic_write(out_dir / "transcripts" / f"{transcript.video_id}.json",
                      transcript_to_json(transcript) + "\n")

    sentences = stage("punctuate", lambda: [
        sentence for transcript in transcripts
        for sentence in punctuate(transcript, strategy)
    ])
    pairs = stage("pairs", lambda: make_pairs(sentences))
    corpus = Corpus.from_pairs(pairs, strategy.name)

    train, test = stage("split", lambda: split_by_video(corpus, spec))
    _atomic_write_corpus(out_dir / "pairs-train.jsonl", train)
    _atomic_write_corpus(out_dir / "pairs-test.jsonl", test)

    records = stage(
        "generate",
        lambda: _generate_outputs(train, test, config["generator"], adapter),
    )
    _atomic_write(out_dir / "outputs.jsonl", _outputs_to_jsonl(records))

    report_json = stage("eval", lambda: _evaluate_outputs(records))
    _atomic_write(out_dir / "report.json", report_json)

    manifest = {
        "tool": "caster-punct",
        "version": __version__,
        "config_hash": _config_hash(config),
        "seed": int(config["seed"]),
        "strategy": strategy.name,
        "remainder": config["remainder"],
        "train_fraction": float(config["train_fraction"]),
        "generator": config["generator"],
        "adapter": (
            {"command": config["adapter_cmd"], "url": config["adapter_url"],
             "timeout_ms": int(config["timeout_ms"]),
             "max_retries": int(config["max_retries"]),
             "metadata": config["adapter_metadata"]}
            if adapter is not None else None
        ),
        "videos": {
            "train": sorted(train.manifest),
            "test": sorted(test.manifest),
        },
        "pair_counts": {"train": len(train.pairs), "test": len(test.pairs)},
        "stats": {
            "train": corpus_stats(train),
            "test": corpus_stats(test),
        },
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    _atomic_write(out_dir / "manifest.json",
                  json.dumps(manifest, ensure_ascii=False, indent=2) + "\n")
    print(f"pipeline complete: {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _load_report(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.lineno, f"{path}: not valid JSON") from exc
    config = doc.get("config")
    corpus = doc.get("corpus")
    if not isinstance(config, dict) or not isinstance(corpus, dict):
        raise SchemaError(0, f"{path}: missing config/corpus sections")
    if config.get("report_version") != 1:
        raise SchemaError(0, f"{path}: unsupported report_version {config.get('report_version')!r}")
    missing = [m for m in REPORT_METRICS if m not in corpus]
    if missing:
        raise SchemaError(0, f"{path}: corpus missing metrics {', '.join(missing)}")
    return doc


def compare_rows(report_paths: list[str]) -> list[dict]:
    """One row per report; best value per metric marked within each strategy group."""
    rows = []
    for path in report_paths:
        doc = _load_report(path)
        rows.append(
            {
                "run": Path(path).stem if Path(path).stem != "report" else Path(path).parent.name,
                "strategy": doc["config"].get("strategy", ""),
                **{metric: float(doc["corpus"][metric]) for metric in REPORT_METRICS},
            }
        )
    for metric in REPORT_METRICS:
        by_group: dict[str, float] = {}
        for row in rows:
            group = row["strategy"]
            if group not in by_group or row[metric] > by_group[group]:
                by_group[group] = row[metric]
        for row in rows:
            row[f"best_{metric}"] = row[metric] == by_group[row["strategy"]]
    return rows


def render_compare_table(rows: list[dict], csv: bool = False) -> str:
    headers = ["run", "strategy", *REPORT_METRICS]
    if csv:
        lines = [",".join(headers + [f"best_{m}" for m in REPORT_METRICS])]
        for row in rows:
            cells = [str(row["run"]), str(row["strategy"])]
            cells += [f"{row[m]:.4f}" for m in REPORT_METRICS]
            cells += [str(row[f"best_{m}"]).lower() for m in REPORT_METRICS]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"
    table = [headers]
    for row in rows:
        cells = [str(row["run"]), str(row["strategy"])]
        for metric in REPORT_METRICS:
            mark = "*" if row[f"best_{metric}"] else ""
            cells.append(f"{row[metric]:.2f}{mark}")
        table.append(cells)
    widths = [max(len(line[i]) for line in table) for i in range(len(headers))]
    rendered = []
    for line in table:
        rendered.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())
    return "\n".join(rendered) + "\n"


def cmd_compare(args) -> int:
    rows = compare_rows(args.reports)
    sys.stdout.write(render_compare_table(rows, csv=args.csv))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="caster-punct",
                     description="Caption punctuation strategies and commentary evaluation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse caption files into transcript JSON")
    p.add_argument("inputs", nargs="+", help="caption files or globs")
    p.add_argument("--format", choices=CAPTION_FORMATS, required=True)
    p.add_argument("--dedup", action="store_true",
                   help="drop consecutive cues with identical text")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("punctuate", help="merge cues into commentary sentences")
    p.add_argument("inputs", nargs="+", help="transcript JSON files or globs")
    p.add_argument("--strategy", default="duo", help="solo | duo | tri | k=<N>")
    p.add_argument("--remainder", choices=("drop", "keep"), default="drop")
    p.add_argument("--out", required=True, help="output sentences JSONL")
    p.set_defaults(func=cmd_punctuate)

    p = sub.add_parser("pairs", help="build (context -> target) pairs")
    p.add_argument("input", help="sentences JSONL")
    p.add_argument("--out", required=True, help="output pairs JSONL")
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("split", help="split pairs into train/test by video")
    p.add_argument("input", help="pairs JSONL")
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("generate", help="produce candidate commentary for test pairs")
    p.add_argument("input", help="test pairs JSONL")
    p.add_argument("--train", required=True, help="train pairs JSONL")
    p.add_argument("--generator", choices=("retrieval", "external"), default="retrieval")
    p.add_argument("--adapter-cmd", default=None)
    p.add_argument("--adapter-url", default=None)
    p.add_argument("--timeout-ms", type=int, default=10000)
    p.add_argument("--max-retries", type=int, default=0)
    p.add_argument("--out", required=True, help="output outputs.jsonl")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="score generated commentary")
    p.add_argument("input", help="outputs JSONL")
    p.add_argument("--out", required=True, help="output report.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="run every stage into one directory")
    p.add_argument("inputs", nargs="*", help="caption files or globs (overrides config)")
    p.add_argument("--config", default=None, help="JSON run config")
    p.add_argument("--format", choices=CAPTION_FORMATS, default=None)
    p.add_argument("--dedup", action="store_const", const=True, default=None)
    p.add_argument("--strategy", default=None)
    p.add_argument("--remainder", choices=("drop", "keep"), default=None)
    p.add_argument("--train-fraction", type=float, default=None, dest="train_fraction")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--generator", choices=("retrieval", "external"), default=None)
    p.add_argument("--adapter-cmd", default=None, dest="adapter_cmd")
    p.add_argument("--adapter-url", default=None, dest="adapter_url")
    p.add_argument("--timeout-ms", type=int, default=None, dest="timeout_ms")
    p.add_argument("--max-retries", type=int, default=None, dest="max_retries")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("compare", help="tabulate corpus metrics across reports")
    p.add_argument("reports", nargs="+", help="report.json paths")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("CASTER_PUNCT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except StageFailure as failure:
        print(f"error: {failure}", file=sys.stderr)
        return failure.code
    except Exception as exc:  # classified per failure class
        print(f"error: {exc}", file=sys.stderr)
        return _classify(exc)


if __name__ == "__main__":
    sys.exit(main())
