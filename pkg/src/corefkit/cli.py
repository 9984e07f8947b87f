"""Command-line interface for batch evaluation pipelines.

Subcommands: score, convert, clean, stats, analyze, sample.  Exit codes
are pinned for pipeline use: 0 ok, 2 parse failure, 3 token mismatch
(run `clean` first), 4 configuration error.  Commands read and write
only the paths named in their configuration, and identical inputs and
configuration yield byte-identical outputs.

Datasets are listed in a flat manifest file: one ``key = value`` stanza
per dataset, stanzas separated by blank lines::

    name = demo_en
    gold = data/demo_en.gold.conllu
    pred = data/demo_en.pred.conllu
    exempt = false
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import analysis, formats, metrics
from .conllu import ConlluError, parse_conllu, serialize_conllu
from .formats import CleanRefusedError, PlaintextError
from .matching import MatchRegime, TokenMismatchError, ZeroWeight
from .model import Corpus

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_MISMATCH = 3
EXIT_CONFIG = 4


class ConfigError(ValueError):
    pass


@dataclass
class DatasetSpec:
    name: str
    gold: Path | None
    pred: Path | None
    exempt: bool = False


@dataclass
class RunConfig:
    regime: MatchRegime
    singleton_mode: str
    weights: ZeroWeight
    datasets: list[DatasetSpec]
    seed: int
    out_dir: Path
    jobs: int


def parse_manifest(path: Path) -> list[DatasetSpec]:
    specs: list[DatasetSpec] = []
    stanza: dict[str, str] = {}

    def flush() -> None:
        if not stanza:
            return
        if "name" not in stanza:
            raise ConfigError(f"manifest {path}: stanza without a 'name' key")
        exempt = stanza.get("exempt", "false").lower()
        if exempt not in ("true", "false"):
            raise ConfigError(f"manifest {path}: exempt must be true or false")
        specs.append(DatasetSpec(
            name=stanza["name"],
            gold=Path(stanza["gold"]) if "gold" in stanza else None,
            pred=Path(stanza["pred"]) if "pred" in stanza else None,
            exempt=exempt == "true",
        ))
        stanza.clear()

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from exc
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            flush()
            continue
        if line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"manifest {path}: expected 'key = value', got '{line}'")
        stanza[key.strip()] = value.strip()
    flush()
    if not specs:
        raise ConfigError(f"manifest {path} lists no datasets")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"manifest {path}: dataset names are not unique")
    return specs


def _load_corpus(path: Path) -> Corpus:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_conllu(data)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _prepare_out_dir(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"output directory {out_dir} is not writable")


# ---------------------------------------------------------------------------
# score

_VARIANTS = (
    ("head_excl", MatchRegime.HEAD, metrics.SINGLETONS_EXCLUDED),
    ("partial_excl", MatchRegime.PARTIAL, metrics.SINGLETONS_EXCLUDED),
    ("exact_excl", MatchRegime.EXACT, metrics.SINGLETONS_EXCLUDED),
    ("head_incl", MatchRegime.HEAD, metrics.SINGLETONS_INCLUDED),
)


def _score_dataset(args: tuple) -> tuple[str, dict, dict]:
    name, gold_path, pred_path, regime, singleton_mode, w_parent, w_label = args
    weights = ZeroWeight(w_parent, w_label)
    gold = _load_corpus(Path(gold_path))
    pred = _load_corpus(Path(pred_path))
    primary = metrics.evaluate_corpus(gold, pred, regime=regime,
                                      singleton_mode=singleton_mode, weights=weights)
    variants = {}
    for key, variant_regime, variant_mode in _VARIANTS:
        scores = metrics.evaluate_corpus(gold, pred, regime=variant_regime,
                                         singleton_mode=variant_mode, weights=weights)
        variants[key] = scores[metrics.MetricId.CONLL]
    return name, primary, variants


def cmd_score(config: RunConfig) -> int:
    _prepare_out_dir(config.out_dir)
    for spec in config.datasets:
        _require(spec.gold is not None and spec.pred is not None,
                 f"dataset '{spec.name}' needs both gold and pred paths")
        _require(spec.gold.is_file(), f"gold path {spec.gold} is not a readable file")
        _require(spec.pred.is_file(), f"pred path {spec.pred} is not a readable file")

    tasks = [
        (spec.name, str(spec.gold), str(spec.pred), config.regime,
         config.singleton_mode, config.weights.w_parent, config.weights.w_label_bonus)
        for spec in config.datasets
    ]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_score_dataset, tasks))
    else:
        results = [_score_dataset(task) for task in tasks]
    by_name = {name: (primary, variants) for name, primary, variants in results}

    per_dataset = {spec.name: by_name[spec.name][0] for spec in config.datasets}
    report = metrics.aggregate(per_dataset, config.singleton_mode, config.regime)
    _write(config.out_dir / "scores.tsv", metrics.render_score_table(report))
    _write(config.out_dir / "scores.jsonl", metrics.render_records(report))

    variant_keys = [key for key, _, _ in _VARIANTS]
    lines = ["\t".join(["dataset"] + [f"conll_{k}" for k in variant_keys])]
    sums = {key: [0.0, 0.0, 0.0] for key in variant_keys}
    for spec in config.datasets:
        variants = by_name[spec.name][1]
        cells = []
        for key in variant_keys:
            prf = variants[key]
            cells.append(f"{100 * prf.recall:.2f} / {100 * prf.precision:.2f} / {100 * prf.f1:.2f}")
            sums[key][0] += prf.recall
            sums[key][1] += prf.precision
            sums[key][2] += prf.f1
        lines.append("\t".join([spec.name] + cells))
    n = len(config.datasets)
    macro_cells = [
        f"{100 * sums[k][0] / n:.2f} / {100 * sums[k][1] / n:.2f} / {100 * sums[k][2] / n:.2f}"
        for k in variant_keys
    ]
    lines.append("\t".join(["macro"] + macro_cells))
    _write(config.out_dir / "conll_variants.tsv", "\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# convert / clean

def cmd_convert(direction: str, in_path: Path, out_path: Path,
                skeleton_path: Path | None) -> int:
    _require(in_path.is_file(), f"input path {in_path} is not a readable file")
    if direction == "to-text":
        corpus = _load_corpus(in_path)
        _write(out_path, formats.corpus_to_plaintext(corpus))
        return EXIT_OK
    if direction == "to-json":
        corpus = _load_corpus(in_path)
        _write(out_path, json.dumps(formats.corpus_to_json(corpus),
                                    ensure_ascii=False, indent=1) + "\n")
        return EXIT_OK

    _require(skeleton_path is not None,
             f"convert {direction} needs --skeleton with the input CoNLL-U file")
    _require(skeleton_path.is_file(), f"skeleton path {skeleton_path} is not a readable file")
    skeleton = _load_corpus(skeleton_path)
    if direction == "from-text":
        lines = [l for l in in_path.read_text(encoding="utf-8").splitlines() if l.strip()]
        if len(lines) != len(skeleton.documents):
            raise TokenMismatchError(
                f"{in_path} has {len(lines)} documents but the skeleton has "
                f"{len(skeleton.documents)}"
            )
        docs, ents = [], []
        for line, document in zip(lines, skeleton.documents):
            plain = formats.from_plaintext(line)
            rebuilt, doc_entities = formats.reconstruct_conllu(document, plain)
            docs.append(rebuilt)
            ents.append(doc_entities)
        _write(out_path, serialize_conllu(Corpus(docs, ents)))
        return EXIT_OK
    if direction == "from-json":
        values = json.loads(in_path.read_text(encoding="utf-8"))
        _require(isinstance(values, list), "JSON input must be a list of documents")
        by_id = {d.doc_id: d for d in skeleton.documents}
        docs, ents = [], []
        for value in values:
            jdoc = formats.json_doc_from_value(value)
            if jdoc.doc_id not in by_id:
                raise TokenMismatchError(f"skeleton has no document '{jdoc.doc_id}'")
            rebuilt, doc_entities = formats.reconstruct_from_json(jdoc, by_id[jdoc.doc_id])
            docs.append(rebuilt)
            ents.append(doc_entities)
        _write(out_path, serialize_conllu(Corpus(docs, ents)))
        return EXIT_OK
    raise ConfigError(f"unknown conversion direction '{direction}'")


def cmd_clean(reference_path: Path, in_path: Path, out_path: Path,
              max_cost_ratio: float) -> int:
    _require(reference_path.is_file(), f"reference path {reference_path} is not a readable file")
    _require(in_path.is_file(), f"input path {in_path} is not a readable file")
    reference = _load_corpus(reference_path)
    lines = [l for l in in_path.read_text(encoding="utf-8").splitlines() if l.strip()]
    if len(lines) != len(reference.documents):
        raise TokenMismatchError(
            f"{in_path} has {len(lines)} documents but the reference has "
            f"{len(reference.documents)}"
        )
    cleaned = [
        formats.clean_output(document, line, max_cost_ratio=max_cost_ratio).render()
        for document, line in zip(reference.documents, lines)
    ]
    _write(out_path, "\n".join(cleaned) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# stats / analyze / sample

def cmd_stats(paths: list[tuple[str, Path]], mode: str, out_dir: Path) -> int:
    _prepare_out_dir(out_dir)
    rows = {}
    for name, path in paths:
        _require(path.is_file(), f"stats input {path} is not a readable file")
        rows[name] = analysis.corpus_stats(_load_corpus(path))
    if mode == "corpus":
        _write(out_dir / "stats_corpus.tsv", analysis.render_corpus_stats_table(rows))
    else:
        _write(out_dir / "stats_entities.tsv", analysis.render_entity_stats_table(rows))
        _write(out_dir / "stats_mentions.tsv", analysis.render_mention_stats_table(rows))
        _write(out_dir / "stats_singletons.tsv", analysis.render_singleton_stats_table(rows))
        _write(out_dir / "stats_details.tsv", analysis.render_mention_details_table(rows))
    return EXIT_OK


def cmd_analyze(kind: str, gold_path: Path, pred_path: Path, out_dir: Path,
                config: RunConfig, window_tokens: int, min_p95: int,
                sort_key: str, tag: str | None, level: str) -> int:
    _prepare_out_dir(out_dir)
    _require(gold_path.is_file(), f"gold path {gold_path} is not a readable file")
    _require(pred_path.is_file(), f"pred path {pred_path} is not a readable file")
    gold = _load_corpus(gold_path)
    pred = _load_corpus(pred_path)
    if kind == "long-range":
        points = analysis.long_range_curve(
            gold, pred, window_tokens=window_tokens, min_p95=min_p95,
            sort_key=sort_key, regime=config.regime, weights=config.weights,
        )
        _write(out_dir / "long_range_curve.tsv", analysis.render_curve_table(points))
        return EXIT_OK
    if kind == "upos":
        _require(tag is not None, "analyze upos needs --tag")
        prf = analysis.upos_factorized_score(gold, pred, tag, level=level,
                                             regime=config.regime,
                                             weights=config.weights)
        _write(
            out_dir / f"upos_{level}_{tag}.tsv",
            "tag\tlevel\trecall\tprecision\tf1\n"
            f"{tag}\t{level}\t{100 * prf.recall:.2f}\t{100 * prf.precision:.2f}\t"
            f"{100 * prf.f1:.2f}\n",
        )
        return EXIT_OK
    raise ConfigError(f"unknown analysis kind '{kind}'")


def cmd_sample(datasets: list[DatasetSpec], cap_words: int, seed: int,
               out_dir: Path) -> int:
    _prepare_out_dir(out_dir)
    for spec in datasets:
        _require(spec.gold is not None, f"dataset '{spec.name}' needs a gold path to sample")
        _require(spec.gold.is_file(), f"path {spec.gold} is not a readable file")
        corpus = _load_corpus(spec.gold)
        sampled = analysis.sample_split(corpus, cap_words=cap_words,
                                        exempt=spec.exempt, seed=seed)
        _write(out_dir / f"{spec.name}.conllu", serialize_conllu(sampled))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 4, not argparse's 2
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="corefkit", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--regime", choices=[r.value for r in MatchRegime],
                       default="head")
        p.add_argument("--singletons", choices=["include", "exclude"], default="exclude")
        p.add_argument("--zero-parent-weight", type=float, default=1.0)
        p.add_argument("--zero-label-weight", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--out", type=Path, default=Path("."), metavar="DIR")

    p_score = sub.add_parser("score", help="score predictions against gold data")
    p_score.add_argument("--manifest", type=Path, required=True)
    common(p_score)

    p_convert = sub.add_parser("convert", help="convert between CoNLL-U, plaintext and JSON")
    p_convert.add_argument("direction", choices=["to-text", "from-text", "to-json", "from-json"])
    p_convert.add_argument("--in", dest="in_path", type=Path, required=True)
    p_convert.add_argument("--out-file", type=Path, required=True)
    p_convert.add_argument("--skeleton", type=Path, default=None,
                           help="input CoNLL-U file for from-text / from-json")

    p_clean = sub.add_parser("clean", help="repair noisy plaintext output")
    p_clean.add_argument("--reference", type=Path, required=True)
    p_clean.add_argument("--in", dest="in_path", type=Path, required=True)
    p_clean.add_argument("--out-file", type=Path, required=True)
    p_clean.add_argument("--max-cost-ratio", type=float, default=0.5)

    p_stats = sub.add_parser("stats", help="corpus or system statistics tables")
    p_stats.add_argument("paths", nargs="*", type=Path)
    p_stats.add_argument("--manifest", type=Path, default=None)
    p_stats.add_argument("--mode", choices=["corpus", "system"], default="corpus")
    p_stats.add_argument("--out", type=Path, default=Path("."), metavar="DIR")

    p_analyze = sub.add_parser("analyze", help="long-range curves and UPOS-factorized scores")
    p_analyze.add_argument("kind", choices=["long-range", "upos"])
    p_analyze.add_argument("--gold", type=Path, required=True)
    p_analyze.add_argument("--pred", type=Path, required=True)
    p_analyze.add_argument("--window-tokens", type=int, default=50_000, metavar="N")
    p_analyze.add_argument("--min-p95", type=int, default=100, metavar="N")
    p_analyze.add_argument("--sort-key", choices=["p95", "max_adjacent_gap"], default="p95")
    p_analyze.add_argument("--tag", default=None)
    p_analyze.add_argument("--level", choices=["entity", "mention"], default="entity")
    common(p_analyze)

    p_sample = sub.add_parser("sample", help="cap splits by sampling complete documents")
    p_sample.add_argument("paths", nargs="*", type=Path)
    p_sample.add_argument("--manifest", type=Path, default=None)
    p_sample.add_argument("--cap-words", type=int, default=25_000, metavar="N")
    p_sample.add_argument("--exempt", action="store_true",
                          help="pass splits through unchanged (positional paths only)")
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--out", type=Path, default=Path("."), metavar="DIR")

    return parser


def _specs_from_paths_or_manifest(paths: list[Path], manifest: Path | None,
                                  exempt: bool = False) -> list[DatasetSpec]:
    if manifest is not None:
        return parse_manifest(manifest)
    if not paths:
        raise ConfigError("give input paths or --manifest")
    return [DatasetSpec(name=p.stem, gold=p, pred=p, exempt=exempt) for p in paths]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "score":
            config = RunConfig(
                regime=MatchRegime(args.regime),
                singleton_mode=(metrics.SINGLETONS_INCLUDED if args.singletons == "include"
                                else metrics.SINGLETONS_EXCLUDED),
                weights=ZeroWeight(args.zero_parent_weight, args.zero_label_weight),
                datasets=parse_manifest(args.manifest),
                seed=args.seed,
                out_dir=args.out,
                jobs=args.jobs,
            )
            return cmd_score(config)
        if args.command == "convert":
            return cmd_convert(args.direction, args.in_path, args.out_file, args.skeleton)
        if args.command == "clean":
            return cmd_clean(args.reference, args.in_path, args.out_file,
                             args.max_cost_ratio)
        if args.command == "stats":
            specs = _specs_from_paths_or_manifest(args.paths, args.manifest)
            paths = [(s.name, s.pred if args.mode == "system" and s.pred else s.gold)
                     for s in specs]
            return cmd_stats(paths, args.mode, args.out)
        if args.command == "analyze":
            config = RunConfig(
                regime=MatchRegime(args.regime),
                singleton_mode=(metrics.SINGLETONS_INCLUDED if args.singletons == "include"
                                else metrics.SINGLETONS_EXCLUDED),
                weights=ZeroWeight(args.zero_parent_weight, args.zero_label_weight),
                datasets=[],
                seed=args.seed,
                out_dir=args.out,
                jobs=args.jobs,
            )
            return cmd_analyze(args.kind, args.gold, args.pred, args.out, config,
                               args.window_tokens, args.min_p95, args.sort_key,
                               args.tag, args.level)
        if args.command == "sample":
            specs = _specs_from_paths_or_manifest(args.paths, args.manifest,
                                                  exempt=args.exempt)
            return cmd_sample(specs, args.cap_words, args.seed, args.out)
        raise ConfigError(f"unknown command '{args.command}'")
    except ConlluError as exc:
        print(f"corefkit: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PlaintextError as exc:
        print(f"corefkit: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (TokenMismatchError, CleanRefusedError) as exc:
        print(f"corefkit: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except ValueError as exc:
        # reconstruct_conllu token mismatches advise running the cleaner
        if "run clean_output" in str(exc) or "run the output cleaner" in str(exc):
            print(f"corefkit: {exc}", file=sys.stderr)
            return EXIT_MISMATCH
        print(f"corefkit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"corefkit: i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
