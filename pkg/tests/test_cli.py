import json
import random
import warnings
from pathlib import Path

import pytest

from corefkit.cli import (
    EXIT_CONFIG,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_PARSE,
    main,
    parse_manifest,
)
from corefkit.conllu import parse_conllu, serialize_conllu
from corefkit.formats import corpus_to_plaintext
from corefkit.model import Corpus, Entity

from helpers import canonical_clusters, random_gold, recluster, zeroful_corpus

warnings.simplefilter("ignore")


def write_corpus(path: Path, corpus: Corpus) -> None:
    path.write_text(serialize_conllu(corpus), encoding="utf-8")


def make_pair(seed: int, n_docs: int = 2):
    gold = random_gold(random.Random(seed), n_docs=n_docs, empty_parent_mode="anchor")
    pred = recluster(random.Random(seed + 1), gold)
    return gold, pred


def renamed_copy(corpus: Corpus) -> Corpus:
    return Corpus(corpus.documents, [
        [Entity(f"r{k}", e.mentions) for k, e in enumerate(doc_entities)]
        for doc_entities in corpus.entities
    ])


@pytest.fixture
def workspace(tmp_path):
    gold = zeroful_corpus(7)
    gold_a = tmp_path / "a.gold.conllu"
    pred_a = tmp_path / "a.pred.conllu"
    gold_b = tmp_path / "b.gold.conllu"
    pred_b = tmp_path / "b.pred.conllu"
    write_corpus(gold_a, gold)
    write_corpus(pred_a, renamed_copy(gold))  # perfect prediction
    gold2, pred2 = make_pair(19)
    write_corpus(gold_b, gold2)
    write_corpus(pred_b, pred2)
    manifest = tmp_path / "manifest.txt"
    manifest.write_text(
        f"name = alpha\ngold = {gold_a}\npred = {pred_a}\n\n"
        f"name = beta\ngold = {gold_b}\npred = {pred_b}\nexempt = true\n",
        encoding="utf-8",
    )
    return tmp_path, manifest


def test_manifest_parsing(workspace):
    _, manifest = workspace
    specs = parse_manifest(manifest)
    assert [s.name for s in specs] == ["alpha", "beta"]
    assert specs[1].exempt is True


def test_manifest_duplicate_names_rejected(tmp_path):
    manifest = tmp_path / "m.txt"
    manifest.write_text("name = x\ngold = g\n\nname = x\ngold = g\n")
    with pytest.raises(ValueError, match="unique"):
        parse_manifest(manifest)


def test_score_perfect_prediction_reports_100(workspace):
    tmp_path, manifest = workspace
    out = tmp_path / "out"
    code = main(["score", "--manifest", str(manifest), "--out", str(out)])
    assert code == EXIT_OK
    table = (out / "scores.tsv").read_text()
    lines = table.strip().split("\n")
    alpha = next(l for l in lines if l.startswith("alpha\t"))
    for cell in alpha.split("\t")[1:]:
        assert cell == "100.00 / 100.00 / 100.00"

    records = (out / "scores.jsonl").read_text().strip().split("\n")
    payloads = [json.loads(r) for r in records]
    conll = [p for p in payloads if p["metric"] == "conll" and p["dataset"] == "alpha"]
    assert conll[0]["f1"] == 1.0

    # macro row is the mean of the two datasets
    beta_conll = next(p for p in payloads
                      if p["metric"] == "conll" and p["dataset"] == "beta")
    macro = next(p for p in payloads
                 if p["metric"] == "conll" and p["scope"] == "macro")
    assert macro["f1"] == pytest.approx((1.0 + beta_conll["f1"]) / 2)

    variants = (out / "conll_variants.tsv").read_text().strip().split("\n")
    assert variants[0] == "dataset\tconll_head_excl\tconll_partial_excl" \
                          "\tconll_exact_excl\tconll_head_incl"
    assert variants[-1].startswith("macro\t")


def test_score_outputs_are_deterministic(workspace):
    tmp_path, manifest = workspace
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    main(["score", "--manifest", str(manifest), "--out", str(out1)])
    main(["score", "--manifest", str(manifest), "--out", str(out2)])
    for name in ("scores.tsv", "scores.jsonl", "conll_variants.tsv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_score_parallel_jobs_match_sequential(workspace):
    tmp_path, manifest = workspace
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    main(["score", "--manifest", str(manifest), "--out", str(out1)])
    code = main(["score", "--manifest", str(manifest), "--out", str(out2),
                 "--jobs", "2"])
    assert code == EXIT_OK
    assert (out1 / "scores.tsv").read_bytes() == (out2 / "scores.tsv").read_bytes()


def test_score_token_mismatch_exits_3(tmp_path, capsys):
    gold, _ = make_pair(23, n_docs=1)
    mutated, _ = make_pair(23, n_docs=1)
    mutated.documents[0].sentences[0].nodes[0].form = "DIFFERENT"
    write_corpus(tmp_path / "g.conllu", gold)
    write_corpus(tmp_path / "p.conllu", mutated)
    manifest = tmp_path / "m.txt"
    manifest.write_text(
        f"name = x\ngold = {tmp_path / 'g.conllu'}\npred = {tmp_path / 'p.conllu'}\n")
    code = main(["score", "--manifest", str(manifest), "--out", str(tmp_path)])
    assert code == EXIT_MISMATCH
    assert "cleaner" in capsys.readouterr().err


def test_score_parse_failure_exits_2(tmp_path):
    bad = tmp_path / "bad.conllu"
    bad.write_text("# newdoc id = d\nnot a conllu line\n")
    manifest = tmp_path / "m.txt"
    manifest.write_text(f"name = x\ngold = {bad}\npred = {bad}\n")
    assert main(["score", "--manifest", str(manifest), "--out", str(tmp_path)]) \
        == EXIT_PARSE


def test_missing_path_exits_4(tmp_path):
    manifest = tmp_path / "m.txt"
    manifest.write_text("name = x\ngold = /nonexistent\npred = /nonexistent\n")
    assert main(["score", "--manifest", str(manifest), "--out", str(tmp_path)]) \
        == EXIT_CONFIG
    assert main(["score", "--manifest", str(tmp_path / "missing.txt"),
                 "--out", str(tmp_path)]) == EXIT_CONFIG


def test_convert_text_round_trip(tmp_path):
    gold, _ = make_pair(31, n_docs=2)
    src = tmp_path / "g.conllu"
    write_corpus(src, gold)
    text = tmp_path / "g.txt"
    back = tmp_path / "back.conllu"
    assert main(["convert", "to-text", "--in", str(src),
                 "--out-file", str(text)]) == EXIT_OK
    assert text.read_text() == corpus_to_plaintext(gold)
    assert main(["convert", "from-text", "--in", str(text), "--skeleton", str(src),
                 "--out-file", str(back)]) == EXIT_OK
    rebuilt = parse_conllu(back.read_bytes())
    for doc_index in range(2):
        assert canonical_clusters(rebuilt.entities[doc_index]) \
            == canonical_clusters(gold.entities[doc_index])


def test_convert_json_round_trip(tmp_path):
    gold, _ = make_pair(37, n_docs=2)
    src = tmp_path / "g.conllu"
    write_corpus(src, gold)
    jpath = tmp_path / "g.json"
    back = tmp_path / "back.conllu"
    assert main(["convert", "to-json", "--in", str(src),
                 "--out-file", str(jpath)]) == EXIT_OK
    values = json.loads(jpath.read_text())
    assert isinstance(values, list) and len(values) == 2
    assert set(values[0]) == {"doc_id", "tokens", "clusters_token_offsets",
                              "clusters_text_mentions"}
    assert main(["convert", "from-json", "--in", str(jpath), "--skeleton", str(src),
                 "--out-file", str(back)]) == EXIT_OK
    rebuilt = parse_conllu(back.read_bytes())
    for doc_index in range(2):
        assert canonical_clusters(rebuilt.entities[doc_index]) \
            == canonical_clusters(gold.entities[doc_index])


def test_clean_identity_via_cli(tmp_path):
    gold, _ = make_pair(41, n_docs=2)
    ref = tmp_path / "ref.conllu"
    write_corpus(ref, gold)
    noisy = tmp_path / "noisy.txt"
    noisy.write_text(corpus_to_plaintext(gold))
    out = tmp_path / "clean.txt"
    assert main(["clean", "--reference", str(ref), "--in", str(noisy),
                 "--out-file", str(out)]) == EXIT_OK
    assert out.read_text() == corpus_to_plaintext(gold)


def test_stats_corpus_mode(tmp_path):
    gold, _ = make_pair(43, n_docs=2)
    src = tmp_path / "g.conllu"
    write_corpus(src, gold)
    assert main(["stats", str(src), "--out", str(tmp_path)]) == EXIT_OK
    table = (tmp_path / "stats_corpus.tsv").read_text().strip().split("\n")
    assert table[0].startswith("dataset\tdocs\tsents\twords")
    assert table[1].split("\t")[0] == "g"
    assert int(table[1].split("\t")[1]) == 2


def test_stats_system_mode(tmp_path):
    gold, pred = make_pair(47, n_docs=1)
    src = tmp_path / "p.conllu"
    write_corpus(src, pred)
    assert main(["stats", str(src), "--mode", "system", "--out", str(tmp_path)]) \
        == EXIT_OK
    for name in ("stats_entities.tsv", "stats_mentions.tsv",
                 "stats_singletons.tsv", "stats_details.tsv"):
        assert (tmp_path / name).exists()
    details = (tmp_path / "stats_details.tsv").read_text().strip().split("\n")
    assert details[0].split("\t")[:4] == ["system", "w_empty_pct", "w_gap_pct",
                                          "non_tree_pct"]


def test_sample_exempt_leaves_dataset_untouched(tmp_path):
    gold, _ = make_pair(53, n_docs=3)
    src = tmp_path / "split.conllu"
    write_corpus(src, gold)
    out = tmp_path / "sampled"
    assert main(["sample", str(src), "--cap-words", "10", "--exempt",
                 "--out", str(out)]) == EXIT_OK
    assert (out / "split.conllu").read_text() == src.read_text()


def test_sample_is_deterministic(tmp_path):
    gold, _ = make_pair(59, n_docs=4)
    src = tmp_path / "split.conllu"
    write_corpus(src, gold)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    for out in (out1, out2):
        assert main(["sample", str(src), "--cap-words", "40", "--seed", "11",
                     "--out", str(out)]) == EXIT_OK
    assert (out1 / "split.conllu").read_bytes() == (out2 / "split.conllu").read_bytes()
    sampled = parse_conllu((out1 / "split.conllu").read_bytes())
    assert sampled.word_count() <= 40 or len(sampled.documents) == 1


def test_analyze_long_range_and_upos(tmp_path):
    gold, pred = make_pair(61, n_docs=3)
    gpath, ppath = tmp_path / "g.conllu", tmp_path / "p.conllu"
    write_corpus(gpath, gold)
    write_corpus(ppath, pred)
    assert main(["analyze", "long-range", "--gold", str(gpath), "--pred", str(ppath),
                 "--min-p95", "0", "--window-tokens", "100",
                 "--out", str(tmp_path)]) == EXIT_OK
    curve = (tmp_path / "long_range_curve.tsv").read_text().strip().split("\n")
    assert curve[0] == "window_p95_range\tmean_conll_f1\twindow_tokens"

    assert main(["analyze", "upos", "--gold", str(gpath), "--pred", str(ppath),
                 "--tag", "NOUN", "--level", "entity",
                 "--out", str(tmp_path)]) == EXIT_OK
    upos = (tmp_path / "upos_entity_NOUN.tsv").read_text().strip().split("\n")
    assert upos[0] == "tag\tlevel\trecall\tprecision\tf1"
    assert upos[1].startswith("NOUN\tentity\t")


def test_unknown_flag_exits_4(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["score", "--nonsense"])
    assert err.value.code == EXIT_CONFIG
