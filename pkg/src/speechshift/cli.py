"""Command-line entry point: extract, balance, generate, compare, report, pipeline."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

from . import analysis, corpus, generation, registry
from .config import CONFIG_FILE, RunConfig, load_config
from .errors import SpeechShiftError
from .lexicon import Lexicon, default_lexicon, load_lexicon, merge_lexicons
from .registry import FeatureVector
from .text_model import align_parses, ingest_conllu, segment

log = logging.getLogger("speechshift")

EXIT_OK, EXIT_ERROR, EXIT_PARTIAL = 0, 1, 2
STAGE_FILE = "stages.json"


class StageError(SpeechShiftError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")


# --------------------------------------------------------------------------
# shared helpers


@lru_cache(maxsize=None)
def build_lexicon(paths: tuple[str, ...]) -> Lexicon:
    if not paths:
        return default_lexicon()
    return merge_lexicons([default_lexicon()] + [load_lexicon(Path(p)) for p in paths])


@dataclass(frozen=True)
class _Job:
    doc_id: str
    variant: str | None
    text: str
    conllu: str | None
    conllu_name: str | None


def _parser_name(trees, fallback: str | None) -> str | None:
    for tree in trees:
        for line in tree.comments:
            key, _, value = line.lstrip("# ").partition("=")
            if key.strip().lower() in {"parser", "generator"} and value.strip():
                return value.strip()
    return fallback


def _extract_job(job: _Job, lexicon_paths: tuple[str, ...], cfg: registry.ExtractionConfig) -> FeatureVector:
    doc = segment(job.text, job.doc_id)
    if job.conllu is not None:
        trees = ingest_conllu(job.conllu)
        doc = align_parses(doc, trees, _parser_name(trees, job.conllu_name))
    fv = registry.extract_all(doc, build_lexicon(lexicon_paths), cfg, job.variant)
    if doc.parser:
        fv.notes["parser"] = doc.parser
    return fv


def _conllu_for(directory: Path | None, doc_id: str, variant: str | None) -> tuple[str | None, str | None]:
    if directory is None:
        return None, None
    names = ([f"{doc_id}.{variant}.conllu"] if variant else []) + [f"{doc_id}.conllu"]
    for name in names:
        path = directory / name
        if path.exists():
            return path.read_text(encoding="utf-8"), "conllu"
    return None, None


def read_documents(path: Path) -> list[corpus.CorpusSample]:
    """A JSON-Lines corpus, a single ``.txt`` transcript, or a directory of them."""
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file or directory")
    if path.is_dir():
        files = sorted(path.glob("*.txt"))
        if not files:
            raise corpus.EmptyCorpus(f"{path}: no .txt transcripts")
        return [corpus.CorpusSample(f.stem, "initial", f.read_text(encoding="utf-8")) for f in files]
    if path.suffix == ".txt":
        return [corpus.CorpusSample(path.stem, "initial", path.read_text(encoding="utf-8"))]
    return corpus.load_corpus(path)


def extract_samples(samples: Sequence[corpus.CorpusSample], cfg: RunConfig,
                    conllu_dir: Path | None = None, jobs: int = 1) -> list[FeatureVector]:
    work = []
    for s in samples:
        text, name = _conllu_for(conllu_dir, s.id, s.variant)
        work.append(_Job(s.id, s.variant, s.text, text, name))
    paths = tuple(cfg.lexicon_paths)
    ecfg = cfg.extraction
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_extract_job, work, [paths] * len(work), [ecfg] * len(work)))
    return [_extract_job(j, paths, ecfg) for j in work]


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_features(vectors: Iterable[FeatureVector], path: Path) -> None:
    import io

    buf = io.StringIO()
    if path.suffix == ".jsonl":
        registry.write_jsonl(vectors, buf)
    else:
        registry.write_csv(vectors, buf)
    _write_text(path, buf.getvalue())


def read_features(path: Path) -> list[FeatureVector]:
    text = path.read_text(encoding="utf-8")
    return registry.read_jsonl(text) if path.suffix == ".jsonl" else registry.read_csv(text)


def _report_null_warnings(vectors: Sequence[FeatureVector]) -> bool:
    nulls = sorted({n for fv in vectors for n in fv.nulls})
    if nulls:
        docs = sum(1 for fv in vectors if fv.nulls)
        log.warning("%d document(s) have null features: %s", docs, ", ".join(nulls))
    return bool(nulls)


def write_run_config(cfg: RunConfig, out: Path) -> None:
    _write_text(out / CONFIG_FILE, cfg.dumps())


def report_metadata(cfg: RunConfig, version: str, parsers: Iterable[str] = ()) -> dict:
    lex = build_lexicon(tuple(cfg.lexicon_paths))
    parsers = sorted(set(parsers))
    return {
        "seed": cfg.seed,
        "lexicons": {lex.name: lex.version},
        "feature_set_version": version,
        "parser": ", ".join(parsers) if parsers else "none",
        "flesch_variant": cfg.flesch_variant,
        "mtld_threshold": cfg.mtld_threshold,
        "wl": f"{cfg.wl_label}, {cfg.wl_iterations} iterations, {cfg.wl_aggregate}",
    }


def write_analysis(report: analysis.ShiftReport, out: Path, report_path: Path | None = None) -> Path:
    md = report_path or out / "report.md"
    _write_text(md, analysis.render_report(report, "markdown"))
    _write_text(md.with_suffix(".csv"), analysis.render_report(report, "csv"))
    _write_text(md.with_name("shifts.json"), report.dumps())
    return md


def _group_by_variant(vectors: Iterable[FeatureVector]) -> dict[str, dict[str, FeatureVector]]:
    out: dict[str, dict[str, FeatureVector]] = {}
    for fv in vectors:
        out.setdefault(fv.variant or "initial", {})[fv.document_id] = fv
    return out


# --------------------------------------------------------------------------
# subcommands


def cmd_extract(args, cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    samples = read_documents(Path(args.corpus))
    if args.variant:
        samples = [s for s in samples if s.variant == args.variant]
    conllu_dir = Path(args.conllu_dir) if args.conllu_dir else None
    vectors = extract_samples(samples, cfg, conllu_dir, args.jobs)
    target = Path(args.output) if args.output else out / "features.csv"
    write_features(vectors, target)
    write_run_config(cfg, target.parent)
    log.info("wrote %d feature rows to %s", len(vectors), target)
    return EXIT_PARTIAL if _report_null_warnings(vectors) else EXIT_OK


def cmd_balance(args, cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    samples = corpus.load_corpus(Path(args.corpus))
    selected, subset = corpus.select_balanced(samples, cfg.seed, cfg.granularity)
    _write_text(out / "balance.json", json.dumps(subset.to_json(), indent=2, sort_keys=True) + "\n")
    buf = _corpus_text(selected)
    _write_text(out / "selected.jsonl", buf)
    write_run_config(cfg, out)
    log.info("selected %d of %d initial samples (mean_count %d)",
             len(selected), sum(1 for s in samples if s.variant == "initial"), subset.mean_count)
    return EXIT_OK


def _corpus_text(samples: Iterable[corpus.CorpusSample]) -> str:
    import io

    buf = io.StringIO()
    corpus.write_corpus(samples, buf)
    return buf.getvalue()


def _backend(cfg: RunConfig):
    b = cfg.backend
    return generation.make_backend(
        b.name, endpoint=b.endpoint, model=b.model, temperature=b.temperature, api_key_env=b.api_key_env
    )


def run_generation(samples: Sequence[corpus.CorpusSample], cfg: RunConfig, out: Path) -> list[corpus.CorpusSample]:
    b = cfg.backend
    templates = generation.load_templates(b.templates_dir)
    results = generation.run_batch(
        samples, cfg.directions, _backend(cfg), concurrency_limit=b.concurrency, retries=b.retries,
        ledger_path=out / "generation_ledger.jsonl", template_id=b.template_id, templates=templates,
        backoff=b.backoff,
    )
    bad = [r for r in results if not r.valid]
    for r in bad:
        log.warning("rewrite %s/%s rejected: %s", r.sample_id, r.direction, ", ".join(r.validation_failures))
    rewrites = generation.results_to_samples(results, {s.id: s for s in samples})
    _write_text(out / "rewrites.jsonl", _corpus_text(rewrites))
    return rewrites


def cmd_generate(args, cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    samples = [s for s in corpus.load_corpus(Path(args.corpus)) if s.variant == "initial"]
    rewrites = run_generation(samples, cfg, out)
    write_run_config(cfg, out)
    expected = len(samples) * len(cfg.directions)
    log.info("%d of %d rewrites valid", len(rewrites), expected)
    return EXIT_OK if len(rewrites) == expected else EXIT_PARTIAL


def cmd_compare(args, cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    by_variant = {}
    for variant, path in (("initial", args.initial), ("upgraded", args.upgraded), ("downgraded", args.downgraded)):
        vectors = read_features(Path(path))
        by_variant[variant] = registry.as_mapping(vectors)
    version = registry.check_versions(fv for m in by_variant.values() for fv in m.values())
    parsers = [fv.notes["parser"] for m in by_variant.values() for fv in m.values() if "parser" in fv.notes]
    report = analysis.analyse(by_variant, cfg.alpha, cfg.test_method, cfg.holm,
                              report_metadata(cfg, version, parsers))
    target = Path(args.report_path) if args.report_path else None
    md = write_analysis(report, out, target)
    write_run_config(cfg, md.parent)
    for s in report.skipped:
        log.warning("skipped %s (%s): %s", s.feature_name, s.comparison, s.reason)
    log.info("report written to %s", md)
    return EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    report = analysis.ShiftReport.from_json(json.loads(Path(args.shifts).read_text(encoding="utf-8")))
    text = analysis.render_report(report, args.format)
    if args.output:
        _write_text(Path(args.output), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _sha(*texts: str) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(t.encode("utf-8") + b"\0")
    return h.hexdigest()


# config fields each stage depends on; compare hashes the whole config since
# most of it ends up in the report metadata
BALANCE_KEYS = ("seed", "granularity")
GENERATE_KEYS = ("backend", "directions")
EXTRACT_KEYS = ("lexicon_paths", "flesch_variant", "mtld_threshold", "wl_iterations", "wl_label", "wl_aggregate")


class Pipeline:
    """Linear stages with artifacts in the output directory, cached by input hash."""

    def __init__(self, cfg: RunConfig, out: Path, force: bool = False):
        self.cfg = cfg
        self.out = out
        self.force = force
        self.stage_file = out / STAGE_FILE
        try:
            self.done = json.loads(self.stage_file.read_text(encoding="utf-8"))
        except (FileNotFoundError, json.JSONDecodeError):
            self.done = {}
        self.ran: list[str] = []

    def _artifacts_exist(self, artifacts: Sequence[str]) -> bool:
        return all((self.out / a).exists() for a in artifacts)

    def stage(self, name: str, key: str, artifacts: Sequence[str], fn,
              keys: Sequence[str] | None = None) -> None:
        digest = self.cfg.digest(name, key, keys=keys)
        entry = self.done.get(name)
        if not self.force and entry and entry.get("key") == digest and self._artifacts_exist(artifacts):
            log.info("stage %s: cached", name)
            return
        log.info("stage %s: running", name)
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - reported with the stage name
            self._save()
            raise StageError(name, exc) from exc
        self.done[name] = {"key": digest, "artifacts": list(artifacts)}
        self.ran.append(name)
        self._save()

    def _save(self) -> None:
        _write_text(self.stage_file, json.dumps(self.done, indent=2, sort_keys=True) + "\n")

    def file_hash(self, *names: str) -> str:
        return _sha(*((self.out / n).read_text(encoding="utf-8") for n in names))


def run_pipeline(corpus_path: Path, cfg: RunConfig, force: bool = False, generate: str = "auto",
                 conllu_dir: Path | None = None, jobs: int = 1) -> Pipeline:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_run_config(cfg, out)
    pipe = Pipeline(cfg, out, force)
    raw = corpus_path.read_text(encoding="utf-8")
    samples = corpus.read_corpus(raw.splitlines(keepends=True), str(corpus_path))
    variants = corpus.by_variant(samples)
    conllu_key = ""
    if conllu_dir is not None:
        conllu_key = _sha(*(p.name + p.read_text(encoding="utf-8") for p in sorted(conllu_dir.glob("*.conllu"))))

    lexicon_key = _sha(*(Path(p).read_text(encoding="utf-8") for p in cfg.lexicon_paths))

    def balance() -> None:
        selected, subset = corpus.select_balanced(samples, cfg.seed, cfg.granularity)
        _write_text(out / "balance.json", json.dumps(subset.to_json(), indent=2, sort_keys=True) + "\n")
        _write_text(out / "selected.jsonl", _corpus_text(selected))

    pipe.stage("balance", _sha(raw), ["balance.json", "selected.jsonl"], balance, BALANCE_KEYS)
    selected = corpus.load_corpus(out / "selected.jsonl")
    ids = [s.id for s in selected]
    have_rewrites = all(i in variants["upgraded"] and i in variants["downgraded"] for i in ids)
    do_generate = generate == "always" or (generate == "auto" and not have_rewrites)

    if do_generate:
        gen_key = pipe.file_hash("selected.jsonl")
        pipe.stage("generate", gen_key, ["generation_ledger.jsonl", "rewrites.jsonl"],
                   lambda: run_generation(selected, cfg, out), GENERATE_KEYS)
        rewrites = corpus.by_variant(corpus.load_corpus(out / "rewrites.jsonl"))
    else:
        rewrites = variants
    by_name = {
        "initial": selected,
        "upgraded": [rewrites["upgraded"][i] for i in ids if i in rewrites["upgraded"]],
        "downgraded": [rewrites["downgraded"][i] for i in ids if i in rewrites["downgraded"]],
    }
    for variant, docs in by_name.items():
        target = f"features_{variant}.csv"
        key = _sha(_corpus_text(docs), conllu_key, lexicon_key)

        def extract(docs=docs, target=target) -> None:
            vectors = extract_samples(docs, cfg, conllu_dir, jobs)
            _report_null_warnings(vectors)
            write_features(vectors, out / target)

        pipe.stage(f"extract_{variant}", key, [target], extract, EXTRACT_KEYS)

    feature_files = [f"features_{v}.csv" for v in by_name]

    def compare() -> None:
        vectors = {v: registry.as_mapping(read_features(out / f"features_{v}.csv")) for v in by_name}
        version = registry.check_versions(fv for m in vectors.values() for fv in m.values())
        parsers = [fv.notes["parser"] for m in vectors.values() for fv in m.values() if "parser" in fv.notes]
        report = analysis.analyse(vectors, cfg.alpha, cfg.test_method, cfg.holm,
                                  report_metadata(cfg, version, parsers))
        write_analysis(report, out)

    pipe.stage("compare", pipe.file_hash(*feature_files),
               ["report.md", "report.csv", "shifts.json"], compare)
    return pipe


def cmd_pipeline(args, cfg: RunConfig) -> int:
    conllu_dir = Path(args.conllu_dir) if args.conllu_dir else None
    pipe = run_pipeline(Path(args.corpus), cfg, args.force, args.generate, conllu_dir, args.jobs)
    if not pipe.ran:
        print("all stages cached")
    else:
        print(f"ran stages: {', '.join(pipe.ran)}")
    print(f"report: {Path(cfg.out_dir) / 'report.md'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="speechshift", description=__doc__)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--seed", type=int, help="random seed for balancing")
    p.add_argument("--out", dest="out_dir", help="output directory (default: out)")
    p.add_argument("--lexicon", action="append", dest="lexicons", metavar="PATH",
                   help="extra JSON lexicon; repeatable, later files override categories")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", help="compute the 48 features for each transcript")
    e.add_argument("corpus", help="JSON-Lines corpus, .txt transcript or directory of .txt files")
    e.add_argument("--conllu-dir", help="directory with <id>.<variant>.conllu or <id>.conllu parses")
    e.add_argument("--variant", choices=corpus.VARIANTS, help="only this variant")
    e.add_argument("-o", "--output", help="features file (.csv or .jsonl)")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--flesch-variant", dest="flesch_variant")
    e.set_defaults(func=cmd_extract)

    b = sub.add_parser("balance", help="eligibility filter and stratified sampling")
    b.add_argument("corpus")
    b.add_argument("--granularity", type=float)
    b.set_defaults(func=cmd_balance)

    g = sub.add_parser("generate", help="rewrite initial transcripts")
    g.add_argument("corpus")
    g.add_argument("--direction", choices=("upgrade", "downgrade", "both"), default="both")
    g.add_argument("--backend", help="mock or chat (OpenAI-compatible endpoint)")
    g.add_argument("--retries", type=int)
    g.add_argument("--concurrency", type=int)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("compare", help="shift statistics and report from three feature files")
    c.add_argument("--initial", required=True)
    c.add_argument("--upgraded", required=True)
    c.add_argument("--downgraded", required=True)
    c.add_argument("--out", dest="report_path", help="Markdown report path (CSV and JSON written beside it)")
    c.add_argument("--alpha", type=float)
    c.add_argument("--holm", action="store_true", default=None, help="Holm-adjust p-values per comparison")
    c.add_argument("--wilcoxon", action="store_true", help="paired signed-rank test instead of Mann-Whitney")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("report", help="re-render a saved shifts.json")
    r.add_argument("shifts")
    r.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_report)

    pl = sub.add_parser("pipeline", help="balance, generate, extract and compare in one go")
    pl.add_argument("corpus")
    pl.add_argument("--force", action="store_true", help="rerun cached stages")
    pl.add_argument("--generate", choices=("auto", "always", "never"), default="auto",
                    help="auto: generate only when the corpus lacks rewrites")
    pl.add_argument("--conllu-dir")
    pl.add_argument("--backend")
    pl.add_argument("--jobs", type=int, default=1)
    pl.set_defaults(func=cmd_pipeline)
    return p


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    backend = {}
    if getattr(args, "backend", None):
        backend["name"] = args.backend
    for key in ("retries", "concurrency"):
        if getattr(args, key, None) is not None:
            backend[key] = getattr(args, key)
    directions = None
    if getattr(args, "direction", None):
        directions = generation.DIRECTIONS if args.direction == "both" else (args.direction,)
    return cfg.updated(
        seed=args.seed,
        out_dir=args.out_dir,
        lexicon_paths=tuple(cfg.lexicon_paths) + tuple(args.lexicons) if args.lexicons else None,
        granularity=getattr(args, "granularity", None),
        flesch_variant=getattr(args, "flesch_variant", None),
        alpha=getattr(args, "alpha", None),
        holm=getattr(args, "holm", None),
        test_method="wilcoxon" if getattr(args, "wilcoxon", False) else None,
        directions=directions,
        backend=backend,
    )


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = resolve_config(args)
        return args.func(args, cfg)
    except (SpeechShiftError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
