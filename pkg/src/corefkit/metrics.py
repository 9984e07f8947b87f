"""Coreference scores over a mention alignment and two entity partitions.

Matched predicted mentions are first remapped to their gold
counterparts; unmatched mentions stay distinct elements.  When
singletons are excluded, single-mention entities are removed from both
sides before scoring.  Scores accumulate numerators and denominators
over the documents of a dataset; the primary score is the unweighted
mean of the MUC, B-cubed and CEAF-e F1 values, macro-averaged over
datasets.

Degenerate 0/0 ratios are reported as 0 with a logged diagnostic, never
as an error.
"""

from __future__ import annotations

import enum
import json
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .matching import MatchRegime, MentionAlignment, ZeroWeight, build_alignment
from .model import Corpus, Document, Entity, Mention

logger = logging.getLogger(__name__)

SINGLETONS_INCLUDED = "included"
SINGLETONS_EXCLUDED = "excluded"


@dataclass(frozen=True)
class PRF:
    recall: float
    precision: float
    f1: float


def _prf(r_num: float, r_den: float, p_num: float, p_den: float, what: str = "") -> PRF:
    if r_den == 0 or p_den == 0:
        logger.debug("degenerate denominator in %s (r=%s/%s, p=%s/%s)",
                     what or "score", r_num, r_den, p_num, p_den)
    recall = r_num / r_den if r_den > 0 else 0.0
    precision = p_num / p_den if p_den > 0 else 0.0
    f1 = 2 * recall * precision / (recall + precision) if recall + precision > 0 else 0.0
    return PRF(recall, precision, f1)


class MetricId(str, enum.Enum):
    MUC = "muc"
    B3 = "b3"
    CEAF_E = "ceaf_e"
    BLANC = "blanc"
    LEA = "lea"
    CONLL = "conll"
    MOR = "mor"
    MD_H = "md_h"
    ZERO_SCORE = "zero_score"


METRIC_ORDER = [
    MetricId.MUC, MetricId.B3, MetricId.CEAF_E, MetricId.CONLL,
    MetricId.BLANC, MetricId.LEA, MetricId.MOR, MetricId.MD_H,
    MetricId.ZERO_SCORE,
]


@dataclass
class ScoreReport:
    """Per-dataset scores plus their unweighted macro average."""

    per_dataset: dict[str, dict[MetricId, PRF]]
    macro: dict[MetricId, PRF]
    singleton_mode: str
    regime: MatchRegime


def filter_singletons(entities: list[Entity], singleton_mode: str) -> list[Entity]:
    if singleton_mode == SINGLETONS_INCLUDED:
        return list(entities)
    if singleton_mode == SINGLETONS_EXCLUDED:
        return [e for e in entities if not e.is_singleton]
    raise ValueError(f"unknown singleton mode '{singleton_mode}'")


def _index_by_identity(mentions: list[Mention]) -> dict[int, int]:
    return {id(m): i for i, m in enumerate(mentions)}


def remap_partitions(gold_entities: list[Entity], pred_entities: list[Entity],
                     alignment: MentionAlignment, singleton_mode: str):
    """Project both sides onto a shared element space.

    Gold mention i becomes element ("g", i); a matched predicted mention
    becomes its counterpart's element; an unmatched one stays a distinct
    ("p", j) element.  Returns (gold clusters, pred clusters) as lists of
    frozensets.
    """
    gold_entities = filter_singletons(gold_entities, singleton_mode)
    pred_entities = filter_singletons(pred_entities, singleton_mode)
    gold_ix = _index_by_identity(alignment.gold)
    pred_ix = _index_by_identity(alignment.pred)
    pred_to_gold = alignment.pred_to_gold()

    def gold_element(m: Mention):
        i = gold_ix.get(id(m))
        if i is None:
            raise KeyError(f"gold mention {m} is not part of the alignment")
        return ("g", i)

    def pred_element(m: Mention):
        j = pred_ix.get(id(m))
        if j is None:
            raise KeyError(f"predicted mention {m} is not part of the alignment")
        g = pred_to_gold.get(j)
        return ("g", g) if g is not None else ("p", j)

    gold_clusters = [frozenset(gold_element(m) for m in e.mentions) for e in gold_entities]
    pred_clusters = [frozenset(pred_element(m) for m in e.mentions) for e in pred_entities]
    return gold_clusters, pred_clusters


# ---------------------------------------------------------------------------
# Per-document numerator/denominator counts for each metric.

def _muc_counts(gold_clusters, pred_clusters):
    def side(keys, responses):
        element_to_cluster = {}
        for ci, cluster in enumerate(responses):
            for element in cluster:
                element_to_cluster[element] = ci
        num = den = 0.0
        for key in keys:
            touched = {element_to_cluster[e] for e in key if e in element_to_cluster}
            missing = sum(1 for e in key if e not in element_to_cluster)
            num += len(key) - (len(touched) + missing)
            den += len(key) - 1
        return num, den

    rn, rd = side(gold_clusters, pred_clusters)
    pn, pd = side(pred_clusters, gold_clusters)
    return rn, rd, pn, pd


def _b3_counts(gold_clusters, pred_clusters):
    def side(keys, responses):
        num = 0.0
        den = 0
        for key in keys:
            den += len(key)
            for response in responses:
                overlap = len(key & response)
                if overlap:
                    num += overlap * overlap / len(key)
        return num, den

    rn, rd = side(gold_clusters, pred_clusters)
    pn, pd = side(pred_clusters, gold_clusters)
    return rn, rd, pn, pd


def _phi4(a, b) -> float:
    return 2 * len(a & b) / (len(a) + len(b))


def _ceafe_counts(gold_clusters, pred_clusters):
    if not gold_clusters or not pred_clusters:
        return 0.0, len(gold_clusters), 0.0, len(pred_clusters)
    scores = np.array([[_phi4(g, p) for p in pred_clusters] for g in gold_clusters])
    rows, cols = linear_sum_assignment(-scores)
    total = float(scores[rows, cols].sum())
    return total, len(gold_clusters), total, len(pred_clusters)


def _lea_counts(gold_clusters, pred_clusters, singleton_mode: str):
    def links(size: int) -> float:
        if size >= 2:
            return size * (size - 1) / 2
        # self-link convention, active only when singletons stay in play
        return 1.0 if singleton_mode == SINGLETONS_INCLUDED else 0.0

    def side(keys, responses):
        num = den = 0.0
        for key in keys:
            den += len(key)
            total_links = links(len(key))
            if total_links == 0:
                continue
            if len(key) == 1:
                resolved = 1.0 if any(key & r for r in responses) else 0.0
            else:
                resolved = sum(
                    len(key & r) * (len(key & r) - 1) / 2 for r in responses
                ) / total_links
            num += len(key) * resolved
        return num, den

    rn, rd = side(gold_clusters, pred_clusters)
    pn, pd = side(pred_clusters, gold_clusters)
    return rn, rd, pn, pd


def _pairs(n: int) -> float:
    return n * (n - 1) / 2


def _blanc_counts(gold_clusters, pred_clusters):
    """Coreference-link and non-coreference-link counts for one document.

    Uses cluster-intersection arithmetic instead of materializing the
    quadratic link sets.
    """
    gold_elements = frozenset(e for c in gold_clusters for e in c)
    pred_elements = frozenset(e for c in pred_clusters for e in c)
    common = gold_elements & pred_elements
    coref_gold = sum(_pairs(len(c)) for c in gold_clusters)
    coref_pred = sum(_pairs(len(c)) for c in pred_clusters)
    coref_both = sum(
        _pairs(len(g & p)) for g in gold_clusters for p in pred_clusters if g & p
    )
    noncoref_gold = _pairs(len(gold_elements)) - coref_gold
    noncoref_pred = _pairs(len(pred_elements)) - coref_pred
    gold_coref_common = sum(_pairs(len(c & common)) for c in gold_clusters)
    pred_coref_common = sum(_pairs(len(c & common)) for c in pred_clusters)
    noncoref_both = _pairs(len(common)) - gold_coref_common - pred_coref_common + coref_both
    return (coref_both, coref_gold, coref_pred,
            noncoref_both, noncoref_gold, noncoref_pred)


def _blanc_prf(counts) -> PRF:
    cb, cg, cp, nb, ng, np_ = counts
    coref_present = cg > 0 or cp > 0
    noncoref_present = ng > 0 or np_ > 0
    coref = _prf(cb, cg, cb, cp, "blanc coref links")
    noncoref = _prf(nb, ng, nb, np_, "blanc non-coref links")
    if coref_present and noncoref_present:
        return PRF((coref.recall + noncoref.recall) / 2,
                   (coref.precision + noncoref.precision) / 2,
                   (coref.f1 + noncoref.f1) / 2)
    if coref_present:
        return coref
    if noncoref_present:
        return noncoref
    logger.debug("degenerate BLANC: no links of either kind")
    return PRF(0.0, 0.0, 0.0)


def _span_jaccard(gold: Mention, pred: Mention) -> float:
    gspan = set(gold.span)
    pspan = set(pred.span)
    if gold.is_zero and pred.is_zero:
        # aligned zero heads denote the same referent slot
        pspan = (pspan - {pred.head}) | {gold.head}
    union = gspan | pspan
    if not union:
        return 0.0
    return len(gspan & pspan) / len(union)


def _mor_counts(gold_mentions, pred_mentions, alignment: MentionAlignment):
    gold_ix = _index_by_identity(alignment.gold)
    pred_ix = _index_by_identity(alignment.pred)
    live_gold = {gold_ix[id(m)] for m in gold_mentions if id(m) in gold_ix}
    live_pred = {pred_ix[id(m)] for m in pred_mentions if id(m) in pred_ix}
    total = 0.0
    for g, p in alignment.pairs:
        if g in live_gold and p in live_pred:
            total += _span_jaccard(alignment.gold[g], alignment.pred[p])
    return total, len(gold_mentions), total, len(pred_mentions)


def _mdh_counts(gold_mentions, pred_mentions):
    gold_heads = Counter(m.head for m in gold_mentions)
    pred_heads = Counter(m.head for m in pred_mentions)
    tp = sum((gold_heads & pred_heads).values())
    return tp, sum(gold_heads.values()), tp, sum(pred_heads.values())


def _zero_counts(gold_entities, pred_entities, alignment: MentionAlignment):
    """Anaphor-decomposable counts for zero mentions.

    A gold anaphoric zero is resolved iff it aligns to a predicted zero
    whose entity contains a predicted mention aligned to some gold
    mention that precedes the zero within the same gold entity.
    """
    gold_ix = _index_by_identity(alignment.gold)
    pred_ix = _index_by_identity(alignment.pred)
    gold_to_pred = {g: p for g, p in alignment.pairs}
    pred_to_gold = alignment.pred_to_gold()

    pred_entity_gold_indices: list[set[int]] = []
    pred_zero_total = 0
    for entity in pred_entities:
        aligned = set()
        for m in entity.mentions:
            j = pred_ix.get(id(m))
            if j is not None and j in pred_to_gold:
                aligned.add(pred_to_gold[j])
        pred_entity_gold_indices.append(aligned)
        if not entity.is_singleton:
            pred_zero_total += sum(1 for m in entity.mentions if m.is_zero)
    pred_index_to_entity = {}
    for ei, entity in enumerate(pred_entities):
        for m in entity.mentions:
            j = pred_ix.get(id(m))
            if j is not None:
                pred_index_to_entity[j] = ei

    correct = 0
    anaphoric = 0
    for entity in gold_entities:
        for k, mention in enumerate(entity.mentions):
            if not mention.is_zero or k == 0:
                continue
            anaphoric += 1
            g = gold_ix.get(id(mention))
            if g is None or g not in gold_to_pred:
                continue
            j = gold_to_pred[g]
            ei = pred_index_to_entity.get(j)
            if ei is None:
                continue
            antecedents = {gold_ix[id(x)] for x in entity.mentions[:k] if id(x) in gold_ix}
            if antecedents & (pred_entity_gold_indices[ei] - {g}):
                correct += 1
    return correct, anaphoric, correct, pred_zero_total


# ---------------------------------------------------------------------------
# Per-document PRF entry points.

def score_muc(gold_entities, pred_entities, alignment, singleton_mode=SINGLETONS_EXCLUDED) -> PRF:
    return _prf(*_muc_counts(*remap_partitions(gold_entities, pred_entities,
                                               alignment, singleton_mode)), what="muc")


def score_bcubed(gold_entities, pred_entities, alignment, singleton_mode=SINGLETONS_EXCLUDED) -> PRF:
    return _prf(*_b3_counts(*remap_partitions(gold_entities, pred_entities,
                                              alignment, singleton_mode)), what="b3")


def score_ceaf_e(gold_entities, pred_entities, alignment, singleton_mode=SINGLETONS_EXCLUDED) -> PRF:
    return _prf(*_ceafe_counts(*remap_partitions(gold_entities, pred_entities,
                                                 alignment, singleton_mode)), what="ceaf_e")


def score_blanc(gold_entities, pred_entities, alignment, singleton_mode=SINGLETONS_EXCLUDED) -> PRF:
    return _blanc_prf(_blanc_counts(*remap_partitions(gold_entities, pred_entities,
                                                      alignment, singleton_mode)))


def score_lea(gold_entities, pred_entities, alignment, singleton_mode=SINGLETONS_EXCLUDED) -> PRF:
    gold_clusters, pred_clusters = remap_partitions(gold_entities, pred_entities,
                                                    alignment, singleton_mode)
    return _prf(*_lea_counts(gold_clusters, pred_clusters, singleton_mode), what="lea")


def score_conll(muc: PRF, b3: PRF, ceafe: PRF) -> PRF:
    """Unweighted mean of the three constituent scores, component-wise."""
    return PRF(
        (muc.recall + b3.recall + ceafe.recall) / 3,
        (muc.precision + b3.precision + ceafe.precision) / 3,
        (muc.f1 + b3.f1 + ceafe.f1) / 3,
    )


def score_mor(gold_mentions, pred_mentions, alignment) -> PRF:
    """Graded mention-detection score; clustering is ignored."""
    return _prf(*_mor_counts(gold_mentions, pred_mentions, alignment), what="mor")


def score_md_h(gold_mentions, pred_mentions) -> PRF:
    """Binary mention-detection score over head node multisets."""
    return _prf(*_mdh_counts(gold_mentions, pred_mentions), what="md_h")


def score_zero_anaphora(gold_entities, pred_entities, alignment) -> PRF:
    return _prf(*_zero_counts(gold_entities, pred_entities, alignment), what="zero_score")


# ---------------------------------------------------------------------------
# Dataset-level evaluation.

@dataclass
class DocumentScoring:
    """One document pair prepared for scoring."""

    gold_entities: list[Entity]
    pred_entities: list[Entity]
    alignment: MentionAlignment


def prepare_document(gold_doc: Document, gold_entities: list[Entity],
                     pred_doc: Document, pred_entities: list[Entity],
                     regime: MatchRegime = MatchRegime.HEAD,
                     weights: ZeroWeight = ZeroWeight(),
                     singleton_mode: str = SINGLETONS_EXCLUDED) -> DocumentScoring:
    """Filter singletons, then align the remaining mentions."""
    gold_kept = filter_singletons(gold_entities, singleton_mode)
    pred_kept = filter_singletons(pred_entities, singleton_mode)
    alignment = build_alignment(gold_doc, gold_kept, pred_doc, pred_kept,
                                regime=regime, weights=weights)
    return DocumentScoring(gold_kept, pred_kept, alignment)


def evaluate_documents(documents: list[DocumentScoring],
                       singleton_mode: str = SINGLETONS_EXCLUDED) -> dict[MetricId, PRF]:
    """Accumulate all metrics over already-aligned document pairs.

    Entities passed in are scored as-is apart from singleton filtering,
    which is idempotent if prepare_document already applied it.
    """
    totals = {
        MetricId.MUC: [0.0, 0.0, 0.0, 0.0],
        MetricId.B3: [0.0, 0.0, 0.0, 0.0],
        MetricId.CEAF_E: [0.0, 0.0, 0.0, 0.0],
        MetricId.LEA: [0.0, 0.0, 0.0, 0.0],
        MetricId.MOR: [0.0, 0.0, 0.0, 0.0],
        MetricId.MD_H: [0.0, 0.0, 0.0, 0.0],
        MetricId.ZERO_SCORE: [0.0, 0.0, 0.0, 0.0],
    }
    blanc = [0.0] * 6

    def add(metric: MetricId, counts) -> None:
        for k in range(4):
            totals[metric][k] += counts[k]

    for doc in documents:
        gold_kept = filter_singletons(doc.gold_entities, singleton_mode)
        pred_kept = filter_singletons(doc.pred_entities, singleton_mode)
        gold_clusters, pred_clusters = remap_partitions(
            gold_kept, pred_kept, doc.alignment, singleton_mode
        )
        add(MetricId.MUC, _muc_counts(gold_clusters, pred_clusters))
        add(MetricId.B3, _b3_counts(gold_clusters, pred_clusters))
        add(MetricId.CEAF_E, _ceafe_counts(gold_clusters, pred_clusters))
        add(MetricId.LEA, _lea_counts(gold_clusters, pred_clusters, singleton_mode))
        gold_mentions = [m for e in gold_kept for m in e.mentions]
        pred_mentions = [m for e in pred_kept for m in e.mentions]
        add(MetricId.MOR, _mor_counts(gold_mentions, pred_mentions, doc.alignment))
        add(MetricId.MD_H, _mdh_counts(gold_mentions, pred_mentions))
        add(MetricId.ZERO_SCORE, _zero_counts(gold_kept, pred_kept, doc.alignment))
        for k, value in enumerate(_blanc_counts(gold_clusters, pred_clusters)):
            blanc[k] += value

    result = {metric: _prf(*counts, what=metric.value) for metric, counts in totals.items()}
    result[MetricId.BLANC] = _blanc_prf(blanc)
    result[MetricId.CONLL] = score_conll(result[MetricId.MUC], result[MetricId.B3],
                                         result[MetricId.CEAF_E])
    return {metric: result[metric] for metric in METRIC_ORDER}


def pair_documents(gold: Corpus, pred: Corpus):
    """Zip two corpora by document id, in gold order."""
    pred_by_id = {d.doc_id: i for i, d in enumerate(pred.documents)}
    missing = [d.doc_id for d in gold.documents if d.doc_id not in pred_by_id]
    extra = [d.doc_id for d in pred.documents if d.doc_id not in
             {g.doc_id for g in gold.documents}]
    if missing or extra:
        raise ValueError(
            f"document ids differ between gold and prediction "
            f"(missing: {missing[:3]}, unexpected: {extra[:3]})"
        )
    for doc_index, gold_doc in enumerate(gold.documents):
        j = pred_by_id[gold_doc.doc_id]
        yield (gold_doc, gold.entities[doc_index], pred.documents[j], pred.entities[j])


def evaluate_corpus(gold: Corpus, pred: Corpus,
                    regime: MatchRegime = MatchRegime.HEAD,
                    singleton_mode: str = SINGLETONS_EXCLUDED,
                    weights: ZeroWeight = ZeroWeight()) -> dict[MetricId, PRF]:
    """Score one dataset: all metrics for a gold/predicted corpus pair."""
    prepared = [
        prepare_document(gd, ge, pd, pe, regime=regime, weights=weights,
                         singleton_mode=singleton_mode)
        for gd, ge, pd, pe in pair_documents(gold, pred)
    ]
    return evaluate_documents(prepared, singleton_mode=singleton_mode)


def aggregate(per_dataset: dict[str, dict[MetricId, PRF]],
              singleton_mode: str = SINGLETONS_EXCLUDED,
              regime: MatchRegime = MatchRegime.HEAD) -> ScoreReport:
    """Unweighted macro average of every metric component across datasets."""
    if not per_dataset:
        raise ValueError("aggregate needs at least one dataset")
    metrics = list(next(iter(per_dataset.values())).keys())
    for name, scores in per_dataset.items():
        for metric in metrics:
            if metric not in scores:
                raise ValueError(f"dataset '{name}' is missing metric '{metric.value}'")
    n = len(per_dataset)
    macro = {
        metric: PRF(
            sum(s[metric].recall for s in per_dataset.values()) / n,
            sum(s[metric].precision for s in per_dataset.values()) / n,
            sum(s[metric].f1 for s in per_dataset.values()) / n,
        )
        for metric in metrics
    }
    return ScoreReport(dict(per_dataset), macro, singleton_mode, regime)


# ---------------------------------------------------------------------------
# Rendering.

def _cell(prf: PRF) -> str:
    return f"{100 * prf.recall:.2f} / {100 * prf.precision:.2f} / {100 * prf.f1:.2f}"


def render_score_table(report: ScoreReport) -> str:
    """Tab-separated dataset x metric table, three numbers per cell."""
    metrics = [m for m in METRIC_ORDER if all(m in s for s in report.per_dataset.values())]
    lines = ["\t".join(["dataset"] + [m.value for m in metrics])]
    for name, scores in report.per_dataset.items():
        lines.append("\t".join([name] + [_cell(scores[m]) for m in metrics]))
    lines.append("\t".join(["macro"] + [_cell(report.macro[m]) for m in metrics]))
    return "\n".join(lines) + "\n"


def render_records(report: ScoreReport) -> str:
    """Machine-readable JSON-lines stream, one record per score."""
    records = []
    for scope, name, scores in (
        [("dataset", n, s) for n, s in report.per_dataset.items()]
        + [("macro", "macro", report.macro)]
    ):
        for metric, prf in scores.items():
            records.append(json.dumps({
                "scope": scope,
                "dataset": name,
                "metric": metric.value,
                "regime": report.regime.value,
                "singletons": report.singleton_mode,
                "recall": prf.recall,
                "precision": prf.precision,
                "f1": prf.f1,
            }, ensure_ascii=False))
    return "\n".join(records) + "\n"
