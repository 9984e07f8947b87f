"""Plaintext and JSON interchange formats, output repair, reconstruction.

Plaintext stores each document as a single line of space-separated
tokens.  Coreference is attached to a token after ``|`` as a
comma-separated item list: ``[eN`` opens a mention, ``eN]`` closes it,
``[eN]`` is a single-token mention; unannotated tokens omit the ``|``.
Empty nodes are rendered with a ``##`` prefix and placed directly after
their syntactic parent (falling back to their anchor token when the
parent is not a surface token of the sentence).

The JSON format is a list of documents, each an object with exactly
four fields: doc_id, tokens, clusters_token_offsets (0-based inclusive
[start, end] pairs) and clusters_text_mentions.  Empty nodes appear in
``tokens`` with the same ``##`` prefix and placement.

Both formats are span-bracketed, so discontinuous mentions are reduced
to the contiguous segment containing the head, with a warning.

The cleaner repairs noisy generated output: it drops unmatched closing
brackets, closes unmatched openers at the end of the sentence in which
they opened, and re-anchors all annotations onto the reference token
sequence through a word-level minimum-edit-distance alignment (empty
nodes are excluded from the alignment and re-inserted afterwards).
"""

from __future__ import annotations

import re
import unicodedata
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import (
    Corpus,
    Document,
    Entity,
    Mention,
    Node,
    NodeId,
    Sentence,
    make_mention,
    sort_entity_mentions,
)

_NORMALIZED_EID = re.compile(r"e\d+")
_ITEM_OPEN = re.compile(r"\[(e\d+)$")
_ITEM_CLOSE = re.compile(r"(e\d+)\]$")
_ITEM_SINGLE = re.compile(r"\[(e\d+)\]$")

EMPTY_PREFIX = "##"


class PlaintextError(ValueError):
    """Malformed plaintext input, reported with a 0-based token index."""

    def __init__(self, message: str, token_index: int | None = None):
        self.token_index = token_index
        if token_index is not None:
            message = f"token {token_index}: {message}"
        super().__init__(message)


class CleanRefusedError(ValueError):
    """The noisy output is too far from the reference to repair safely."""


@dataclass(frozen=True)
class AnnotationItem:
    kind: str  # "open" | "close" | "open_close"
    entity_id: str

    def render(self) -> str:
        if self.kind == "open":
            return f"[{self.entity_id}"
        if self.kind == "close":
            return f"{self.entity_id}]"
        return f"[{self.entity_id}]"


@dataclass
class PlainToken:
    surface: str
    annotations: list[AnnotationItem] = field(default_factory=list)
    is_empty: bool = False

    def render(self) -> str:
        surface = EMPTY_PREFIX + self.surface if self.is_empty else self.surface
        if not self.annotations:
            return surface
        return surface + "|" + ",".join(item.render() for item in self.annotations)


@dataclass
class PlainDoc:
    tokens: list[PlainToken]

    def render(self) -> str:
        return " ".join(token.render() for token in self.tokens)


# ---------------------------------------------------------------------------
# Document layout: plaintext token order for a CoNLL-U document.

@dataclass
class _Layout:
    surfaces: list[str]
    is_empty: list[bool]
    node_ids: list[NodeId]
    sentence_index: list[int]
    position_of: dict[NodeId, int]


def _placement_anchor(node: Node) -> int:
    """Major id of the token the empty node is rendered after."""
    parent = node.parent
    if parent is not None and parent.minor == 0:
        return parent.major
    return node.id.major


def _build_layout(document: Document) -> _Layout:
    layout = _Layout([], [], [], [], {})
    for sent_index, sentence in enumerate(document.sentences):
        by_anchor: dict[int, list[Node]] = {}
        for node in sentence.nodes:
            if node.is_empty:
                by_anchor.setdefault(_placement_anchor(node), []).append(node)

        def emit(node: Node, empty: bool) -> None:
            layout.position_of[node.id] = len(layout.surfaces)
            layout.surfaces.append(node.form)
            layout.is_empty.append(empty)
            layout.node_ids.append(node.id)
            layout.sentence_index.append(sent_index)

        for node in sorted(by_anchor.get(0, []), key=lambda n: (n.id.major, n.id.minor)):
            emit(node, True)
        for token in sentence.nodes:
            if token.is_empty:
                continue
            emit(token, False)
            for node in sorted(by_anchor.get(token.id.major, []),
                               key=lambda n: (n.id.major, n.id.minor)):
                emit(node, True)
    return layout


def _normalized_ids(entities: list[Entity]) -> dict[str, str]:
    if all(_NORMALIZED_EID.fullmatch(e.id) for e in entities):
        return {e.id: e.id for e in entities}
    return {e.id: f"e{i + 1}" for i, e in enumerate(entities)}


def _mention_segment(mention: Mention, layout: _Layout) -> tuple[int, int]:
    """Plaintext [start, end] positions of a mention.

    Empty tokens relocated into the middle of a span are swallowed by the
    brackets (the format cannot skip them).  A span interrupted by a
    surface token it does not contain is discontinuous there and gets
    reduced to the run containing the head, with a warning.
    """
    positions = sorted(layout.position_of[nid] for nid in mention.span)
    runs: list[list[int]] = []
    for pos in positions:
        if runs and all(layout.is_empty[q] for q in range(runs[-1][-1] + 1, pos)):
            runs[-1].append(pos)
        else:
            runs.append([pos])
    if len(runs) == 1:
        return runs[0][0], runs[0][-1]
    head_pos = layout.position_of[mention.head]
    run = next(r for r in runs if r[0] <= head_pos <= r[-1])
    warnings.warn(
        f"mention of entity '{mention.entity_id}' is not contiguous in the "
        "token stream; reduced to the segment containing its head",
        stacklevel=4,
    )
    return run[0], run[-1]


def _assign_items(n_tokens: int, spans: list[tuple[str, int, int]]) -> list[list[AnnotationItem]]:
    """Canonical per-token item lists for (eid, start, end) spans.

    Closers come first (inner spans close before outer ones), then
    single-token items, then openers (longer spans open first), so
    same-id adjacency and nesting re-pair correctly on parsing.
    """
    opens: dict[int, list[tuple[int, str]]] = {}
    closes: dict[int, list[tuple[int, str]]] = {}
    singles: dict[int, list[str]] = {}
    for eid, start, end in spans:
        if start == end:
            singles.setdefault(start, []).append(eid)
        else:
            opens.setdefault(start, []).append((end, eid))
            closes.setdefault(end, []).append((start, eid))
    items: list[list[AnnotationItem]] = [[] for _ in range(n_tokens)]
    for pos in range(n_tokens):
        for start, eid in sorted(closes.get(pos, []), key=lambda t: (-t[0], t[1])):
            items[pos].append(AnnotationItem("close", eid))
        for eid in sorted(singles.get(pos, [])):
            items[pos].append(AnnotationItem("open_close", eid))
        for end, eid in sorted(opens.get(pos, []), key=lambda t: (-t[0], t[1])):
            items[pos].append(AnnotationItem("open", eid))
    return items


def _entity_spans(entities: list[Entity], layout: _Layout) -> list[tuple[str, int, int]]:
    ids = _normalized_ids(entities)
    spans = []
    for entity in entities:
        eid_spans = []
        for mention in entity.mentions:
            start, end = _mention_segment(mention, layout)
            spans.append((ids[entity.id], start, end))
            eid_spans.append((start, end))
        eid_spans.sort()
        for (s1, e1), (s2, e2) in zip(eid_spans, eid_spans[1:]):
            if s1 < s2 <= e1 < e2:
                raise ValueError(
                    f"mentions of entity '{entity.id}' cross; the bracket "
                    "format cannot represent them"
                )
    return spans


def to_plaintext(document: Document, entities: list[Entity]) -> PlainDoc:
    """Render one document (one output line) with bracket annotations."""
    layout = _build_layout(document)
    items = _assign_items(len(layout.surfaces), _entity_spans(entities, layout))
    tokens = [
        PlainToken(surface, items[pos], empty)
        for pos, (surface, empty) in enumerate(zip(layout.surfaces, layout.is_empty))
    ]
    return PlainDoc(tokens)


def corpus_to_plaintext(corpus: Corpus) -> str:
    """One line per document, terminated with a newline."""
    lines = [to_plaintext(doc, ents).render() for doc, ents in corpus.doc_pairs()]
    return "\n".join(lines) + "\n" if lines else ""


def _parse_item(text: str) -> AnnotationItem | None:
    if _ITEM_SINGLE.fullmatch(text):
        return AnnotationItem("open_close", text[1:-1])
    if _ITEM_OPEN.fullmatch(text):
        return AnnotationItem("open", text[1:])
    if _ITEM_CLOSE.fullmatch(text):
        return AnnotationItem("close", text[:-1])
    return None


def from_plaintext(line: str) -> PlainDoc:
    """Strictly parse one plaintext document line.

    Raises PlaintextError (with the token index) on unbalanced brackets,
    malformed entity ids, or empty tokens.
    """
    tokens: list[PlainToken] = []
    for index, raw in enumerate(line.rstrip("\n").split(" ")):
        if not raw:
            raise PlaintextError("empty token (double or trailing space)", index)
        surface, sep, suffix = raw.rpartition("|")
        if not sep:
            surface, suffix = raw, ""
        items: list[AnnotationItem] = []
        if sep:
            for piece in suffix.split(","):
                item = _parse_item(piece)
                if item is None:
                    raise PlaintextError(f"malformed annotation item '{piece}'", index)
                items.append(item)
        is_empty = surface.startswith(EMPTY_PREFIX)
        if is_empty:
            surface = surface[len(EMPTY_PREFIX):]
        if not surface:
            raise PlaintextError("empty token surface", index)
        tokens.append(PlainToken(surface, items, is_empty))

    stacks: dict[str, list[int]] = {}
    for index, token in enumerate(tokens):
        for item in token.annotations:
            if item.kind == "open":
                stacks.setdefault(item.entity_id, []).append(index)
            elif item.kind == "close":
                if not stacks.get(item.entity_id):
                    raise PlaintextError(
                        f"closing bracket for '{item.entity_id}' without an opener", index
                    )
                stacks[item.entity_id].pop()
    for eid, stack in stacks.items():
        if stack:
            raise PlaintextError(f"opening bracket for '{eid}' is never closed", stack[-1])
    return PlainDoc(tokens)


def plain_mentions(doc: PlainDoc) -> list[tuple[str, int, int]]:
    """(entity id, start, end) spans decoded from the bracket items."""
    spans: list[tuple[str, int, int]] = []
    stacks: dict[str, list[int]] = {}
    for index, token in enumerate(doc.tokens):
        for item in token.annotations:
            if item.kind == "open_close":
                spans.append((item.entity_id, index, index))
            elif item.kind == "open":
                stacks.setdefault(item.entity_id, []).append(index)
            else:
                start = stacks[item.entity_id].pop()
                spans.append((item.entity_id, start, index))
    return spans


# ---------------------------------------------------------------------------
# JSON format.

@dataclass
class JsonDoc:
    doc_id: str
    tokens: list[str]
    clusters_token_offsets: list[list[list[int]]]
    clusters_text_mentions: list[list[str]]

    def to_value(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "tokens": list(self.tokens),
            "clusters_token_offsets": [
                [list(pair) for pair in cluster] for cluster in self.clusters_token_offsets
            ],
            "clusters_text_mentions": [list(c) for c in self.clusters_text_mentions],
        }


def validate_json_doc(doc: JsonDoc) -> None:
    n = len(doc.tokens)
    if len(doc.clusters_token_offsets) != len(doc.clusters_text_mentions):
        raise ValueError(f"document '{doc.doc_id}': cluster lists differ in length")
    for ci, (offsets, texts) in enumerate(zip(doc.clusters_token_offsets,
                                              doc.clusters_text_mentions)):
        if len(offsets) != len(texts):
            raise ValueError(f"document '{doc.doc_id}': cluster {ci} offset/text lengths differ")
        for (pair, text) in zip(offsets, texts):
            start, end = pair
            if not (0 <= start <= end < n):
                raise ValueError(
                    f"document '{doc.doc_id}': offsets [{start}, {end}] out of bounds (n={n})"
                )
            expected = " ".join(doc.tokens[start:end + 1])
            if text != expected:
                raise ValueError(
                    f"document '{doc.doc_id}': mention text '{text}' does not match "
                    f"tokens '{expected}' at [{start}, {end}]"
                )


def to_json(document: Document, entities: list[Entity]) -> JsonDoc:
    layout = _build_layout(document)
    rendered = [
        EMPTY_PREFIX + surface if empty else surface
        for surface, empty in zip(layout.surfaces, layout.is_empty)
    ]
    offsets: list[list[list[int]]] = []
    texts: list[list[str]] = []
    for entity in entities:
        cluster_offsets = []
        cluster_texts = []
        for mention in entity.mentions:
            start, end = _mention_segment(mention, layout)
            cluster_offsets.append([start, end])
            cluster_texts.append(" ".join(rendered[start:end + 1]))
        offsets.append(cluster_offsets)
        texts.append(cluster_texts)
    return JsonDoc(document.doc_id, rendered, offsets, texts)


def corpus_to_json(corpus: Corpus) -> list[dict]:
    return [to_json(doc, ents).to_value() for doc, ents in corpus.doc_pairs()]


def json_doc_from_value(value: dict) -> JsonDoc:
    required = ("doc_id", "tokens", "clusters_token_offsets", "clusters_text_mentions")
    missing = [key for key in required if key not in value]
    if missing:
        raise ValueError(f"JSON document is missing fields: {missing}")
    doc = JsonDoc(
        value["doc_id"],
        list(value["tokens"]),
        [[list(pair) for pair in cluster] for cluster in value["clusters_token_offsets"]],
        [list(c) for c in value["clusters_text_mentions"]],
    )
    validate_json_doc(doc)
    return doc


def _json_to_plaindoc(doc: JsonDoc) -> PlainDoc:
    validate_json_doc(doc)
    tokens = []
    for raw in doc.tokens:
        is_empty = raw.startswith(EMPTY_PREFIX)
        tokens.append(PlainToken(raw[len(EMPTY_PREFIX):] if is_empty else raw,
                                 [], is_empty))
    spans = [
        (f"e{ci + 1}", pair[0], pair[1])
        for ci, cluster in enumerate(doc.clusters_token_offsets)
        for pair in cluster
    ]
    for token, items in zip(tokens, _assign_items(len(tokens), spans)):
        token.annotations = items
    return PlainDoc(tokens)


def reconstruct_from_json(doc: JsonDoc, skeleton: Document) -> tuple[Document, list[Entity]]:
    return reconstruct_conllu(skeleton, _json_to_plaindoc(doc))


def from_json(doc: JsonDoc, skeleton: Document) -> list[Entity]:
    """Decode JSON clusters into entity values over the skeleton document."""
    return reconstruct_from_json(doc, skeleton)[1]


# ---------------------------------------------------------------------------
# Word-level edit-distance alignment (banded, with doubling).

def _nfc(token: str) -> str:
    return unicodedata.normalize("NFC", token)


def _bag_lower_bound(src: list[int], ref: list[int]) -> int:
    from collections import Counter

    diff = Counter(src)
    diff.subtract(Counter(ref))
    l1 = sum(abs(v) for v in diff.values())
    return max(abs(len(src) - len(ref)), (l1 + 1) // 2)


_ROW_STORE_LIMIT = 4096  # widest band whose full DP table is kept in memory


def _banded_dp(src: np.ndarray, ref: np.ndarray, w: int, keep_rows: bool):
    """Levenshtein DP restricted to a band; the result is exact when < w.

    Returns (cost, rows, lo) where rows holds the whole table (or None
    when not kept) with column k storing cell (i, j = k + i + lo).
    """
    n, m = len(src), len(ref)
    lo = min(0, m - n) - w
    hi = max(0, m - n) + w
    width = hi - lo + 1
    big = np.int64(1 << 40)
    ks = np.arange(width)
    rows = np.empty((n + 1, width), dtype=np.int64) if keep_rows else None
    prev = np.full(width, big, dtype=np.int64)
    js0 = ks + lo
    valid0 = (js0 >= 0) & (js0 <= m)
    prev[valid0] = js0[valid0]
    if keep_rows:
        rows[0] = prev
    for i in range(1, n + 1):
        js = ks + i + lo
        valid = (js >= 0) & (js <= m)
        deletion = np.concatenate([prev[1:], [big]]) + 1
        ref_pos = np.clip(js - 1, 0, m - 1)
        mismatch = np.where((js >= 1) & (js <= m),
                            (ref[ref_pos] != src[i - 1]).astype(np.int64), big)
        diagonal = prev + mismatch
        best = np.minimum(deletion, diagonal)
        cur = np.minimum.accumulate(best - ks) + ks
        cur[~valid] = big
        if keep_rows:
            rows[i] = cur
        prev = cur
    k_final = m - n - lo
    cost = int(prev[k_final]) if 0 <= k_final < width else int(big)
    return cost, rows, lo


def _ops_from_rows(rows: np.ndarray, src: list[int], ref: list[int],
                   lo: int) -> list[tuple[int | None, int | None]]:
    """Walk the stored DP table back from (n, m).

    Ties prefer deletions over diagonal steps (walking backwards, that
    drops the rightmost token of an ambiguous run, so substitutions pair
    the leftmost candidates), then insertions.
    """
    n, m = len(src), len(ref)
    width = rows.shape[1]
    ops: list[tuple[int | None, int | None]] = []
    i, j = n, m
    while i > 0 or j > 0:
        k = j - i - lo
        cost = rows[i, k]
        if i > 0 and k + 1 < width and rows[i - 1, k + 1] + 1 == cost:
            ops.append((i - 1, None))
            i -= 1
        elif i > 0 and j > 0 and rows[i - 1, k] + (src[i - 1] != ref[j - 1]) == cost:
            ops.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        else:
            ops.append((None, j - 1))
            j -= 1
    ops.reverse()
    return ops


def _banded_backtrace(src: list[int], ref: list[int], w: int) -> list[tuple[int | None, int | None]]:
    """Alignment ops within a band known to contain the optimal path.

    Returns (src index, ref index) pairs; None marks a deletion or an
    insertion.  Same tie preference as _ops_from_rows.
    """
    n, m = len(src), len(ref)
    lo = min(0, m - n) - w
    hi = max(0, m - n) + w
    width = hi - lo + 1
    big = 1 << 40
    rows = []
    prev = [big] * width
    for k in range(width):
        j = k + lo
        if 0 <= j <= m:
            prev[k] = j
    rows.append(prev)
    for i in range(1, n + 1):
        cur = [big] * width
        for k in range(width):
            j = k + i + lo
            if j < 0 or j > m:
                continue
            best = big
            if k + 1 < width and rows[i - 1][k + 1] < big:
                best = rows[i - 1][k + 1] + 1  # deletion of src[i-1]
            if 1 <= j <= m and rows[i - 1][k] < big:
                cand = rows[i - 1][k] + (src[i - 1] != ref[j - 1])
                best = min(best, cand)
            if k - 1 >= 0 and cur[k - 1] < big:
                best = min(best, cur[k - 1] + 1)  # insertion of ref[j-1]
            cur[k] = best
        rows.append(cur)

    ops: list[tuple[int | None, int | None]] = []
    i, j = n, m
    while i > 0 or j > 0:
        k = j - i - lo
        cost = rows[i][k]
        if i > 0 and k + 1 < width and rows[i - 1][k + 1] + 1 == cost:
            ops.append((i - 1, None))
            i -= 1
        elif i > 0 and j > 0 and rows[i - 1][k] < big and \
                rows[i - 1][k] + (src[i - 1] != ref[j - 1]) == cost:
            ops.append((i - 1, j - 1))
            i, j = i - 1, j - 1
        else:
            ops.append((None, j - 1))
            j -= 1
    ops.reverse()
    return ops


def _core_alignment(src: list[int], ref: list[int],
                    max_cost: int) -> tuple[int, list[tuple[int | None, int | None]]]:
    if not src:
        return len(ref), [(None, j) for j in range(len(ref))]
    if not ref:
        return len(src), [(i, None) for i in range(len(src))]
    src_arr = np.asarray(src, dtype=np.int64)
    ref_arr = np.asarray(ref, dtype=np.int64)
    w = 16
    while True:
        keep_rows = 2 * w + abs(len(ref) - len(src)) + 1 <= _ROW_STORE_LIMIT
        cost, rows, lo = _banded_dp(src_arr, ref_arr, w, keep_rows)
        if cost < w:
            break
        if w > max_cost:
            raise CleanRefusedError(
                f"alignment cost exceeds {max_cost} for {len(ref)} reference tokens; "
                "this looks like the wrong document"
            )
        w *= 2
    if cost > max_cost:
        raise CleanRefusedError(
            f"alignment cost {cost} exceeds the limit {max_cost} for "
            f"{len(ref)} reference tokens; this looks like the wrong document"
        )
    if rows is not None:
        return cost, _ops_from_rows(rows, src, ref, lo)
    return cost, _banded_backtrace(src, ref, w)


def _word_alignment(src_tokens: list[str], ref_tokens: list[str],
                    max_cost: int) -> tuple[int, list[tuple[int | None, int | None]]]:
    """Minimum-edit-distance alignment, or CleanRefusedError past max_cost."""
    vocab: dict[str, int] = {}
    src = [vocab.setdefault(t, len(vocab)) for t in src_tokens]
    ref = [vocab.setdefault(t, len(vocab)) for t in ref_tokens]
    bound = _bag_lower_bound(src, ref)
    if bound > max_cost:
        raise CleanRefusedError(
            f"alignment cost is at least {bound} for {len(ref)} reference tokens "
            f"(limit {max_cost}); this looks like the wrong document"
        )
    # shared prefixes and suffixes align to themselves and never change
    # the optimal cost, so only the core goes through the DP
    prefix = 0
    while prefix < len(src) and prefix < len(ref) and src[prefix] == ref[prefix]:
        prefix += 1
    suffix = 0
    while suffix < len(src) - prefix and suffix < len(ref) - prefix \
            and src[-1 - suffix] == ref[-1 - suffix]:
        suffix += 1
    core_src = src[prefix:len(src) - suffix]
    core_ref = ref[prefix:len(ref) - suffix]
    cost, core_ops = _core_alignment(core_src, core_ref, max_cost)
    ops: list[tuple[int | None, int | None]] = [(k, k) for k in range(prefix)]
    for i, j in core_ops:
        ops.append((i + prefix if i is not None else None,
                    j + prefix if j is not None else None))
    for t in range(suffix):
        ops.append((len(src) - suffix + t, len(ref) - suffix + t))
    return cost, ops


# ---------------------------------------------------------------------------
# Output cleaner.

def _tolerant_tokens(noisy: str) -> list[PlainToken]:
    tokens: list[PlainToken] = []
    for raw in noisy.split():
        surface, sep, suffix = raw.rpartition("|")
        items: list[AnnotationItem] = []
        if sep:
            for piece in suffix.split(","):
                item = _parse_item(piece)
                if item is not None:
                    items.append(item)
            if not items and suffix:
                # the | was not an annotation separator after all
                surface = raw
        else:
            surface = raw
        is_empty = surface.startswith(EMPTY_PREFIX)
        if is_empty:
            surface = surface[len(EMPTY_PREFIX):]
        if not surface:
            if is_empty or items:
                if tokens:
                    tokens[-1].annotations.extend(items)
                continue
            continue
        tokens.append(PlainToken(surface, items, is_empty))
    return tokens


def clean_output(reference: Document, noisy: str, *,
                 max_cost_ratio: float = 0.5) -> PlainDoc:
    """Repair a noisy plaintext document against its reference.

    The result carries the reference surface tokens exactly, with the
    noisy annotations re-anchored and all brackets balanced; ``##``
    tokens from the noisy output are re-inserted after their preceding
    surface token.  Raises CleanRefusedError when the word-level
    alignment cost exceeds ``max_cost_ratio`` times the reference length.
    """
    ref_forms = [n.form for s in reference.sentences for n in s.nodes if not n.is_empty]
    ref_sentences = [
        si for si, s in enumerate(reference.sentences) for n in s.nodes if not n.is_empty
    ]
    noisy_tokens = _tolerant_tokens(noisy)
    surface_ids = [k for k, t in enumerate(noisy_tokens) if not t.is_empty]

    # trailing empty tokens, keyed by the noisy-surface ordinal before them
    empties_after: dict[int, list[int]] = {}
    ordinal = -1
    for k, token in enumerate(noisy_tokens):
        if token.is_empty:
            empties_after.setdefault(ordinal, []).append(k)
        else:
            ordinal += 1

    max_cost = max(1, int(max_cost_ratio * max(len(ref_forms), 1)))
    _, ops = _word_alignment(
        [_nfc(noisy_tokens[k].surface) for k in surface_ids],
        [_nfc(form) for form in ref_forms],
        max_cost,
    )

    # noisy surface ordinal -> aligned reference position (None if dropped),
    # and the nearest aligned reference position at or before each ordinal
    aligned: list[int | None] = [None] * len(surface_ids)
    for i, j in ops:
        if i is not None and j is not None:
            aligned[i] = j
    prev_aligned: list[int | None] = []
    last: int | None = None
    for i in range(len(surface_ids)):
        if aligned[i] is not None:
            last = aligned[i]
        prev_aligned.append(last)

    ref_items: list[list[AnnotationItem]] = [[] for _ in ref_forms]
    lead_items: list[AnnotationItem] = []
    for i, k in enumerate(surface_ids):
        items = noisy_tokens[k].annotations
        if not items:
            continue
        target = aligned[i] if aligned[i] is not None else prev_aligned[i]
        if target is None:
            lead_items.extend(items)  # document-initial deletion: merge forward
        else:
            ref_items[target].extend(items)
    if lead_items and ref_items:
        ref_items[0][:0] = lead_items

    # re-anchor noisy empties after the aligned position of the nearest
    # preceding surviving surface token (None = document start)
    empties_at: dict[int | None, list[int]] = {}
    for ordinal, empty_list in empties_after.items():
        anchor = None if ordinal < 0 else prev_aligned[ordinal]
        empties_at.setdefault(anchor, []).extend(empty_list)
    for empty_list in empties_at.values():
        empty_list.sort()

    out_tokens: list[PlainToken] = []
    out_sentence: list[int] = []

    def emit_empty(k: int, sent: int) -> None:
        out_tokens.append(PlainToken(_nfc(noisy_tokens[k].surface),
                                     list(noisy_tokens[k].annotations), True))
        out_sentence.append(sent)

    for k in empties_at.get(None, []):
        emit_empty(k, ref_sentences[0] if ref_sentences else 0)
    for j, form in enumerate(ref_forms):
        out_tokens.append(PlainToken(form, ref_items[j], False))
        out_sentence.append(ref_sentences[j])
        for k in empties_at.get(j, []):
            emit_empty(k, ref_sentences[j])

    spans = _repair_brackets(out_tokens, out_sentence)
    for token, items in zip(out_tokens, _assign_items(len(out_tokens), spans)):
        token.annotations = items
    return PlainDoc(out_tokens)


def _repair_brackets(tokens: list[PlainToken], sentence_index: list[int]) -> list[tuple[str, int, int]]:
    """Bracket repair: unmatched closers are dropped, unmatched openers
    close at the end of the sentence in which they opened."""
    spans: list[tuple[str, int, int]] = []
    stacks: dict[str, list[int]] = {}
    n = len(tokens)
    for pos, token in enumerate(tokens):
        for item in token.annotations:
            if item.kind == "open_close":
                spans.append((item.entity_id, pos, pos))
            elif item.kind == "open":
                stacks.setdefault(item.entity_id, []).append(pos)
            else:
                stack = stacks.get(item.entity_id)
                if stack:
                    spans.append((item.entity_id, stack.pop(), pos))
                # unmatched closer: dropped
        sentence_ends = pos + 1 == n or sentence_index[pos + 1] != sentence_index[pos]
        if sentence_ends:
            for eid, stack in stacks.items():
                while stack:
                    spans.append((eid, stack.pop(), pos))
    return spans


# ---------------------------------------------------------------------------
# Reconstruction back to CoNLL-U.

def reconstruct_conllu(input_doc: Document, cleaned: PlainDoc) -> tuple[Document, list[Entity]]:
    """Project cleaned plaintext annotations back onto a CoNLL-U document.

    The cleaned surface tokens (empty nodes excluded) must equal the
    input document's surface tokens.  ``##`` tokens map onto the input
    document's existing empty nodes where their placement agrees (same
    preceding token under the plaintext placement rule, in order); any
    others are inserted as children of the token they follow, with an
    unlabeled relation.  Heads are re-derived from the dependency tree.
    """
    surface_plain = [t for t in cleaned.tokens if not t.is_empty]
    expected = input_doc.surface_forms()
    if [t.surface for t in surface_plain] != expected:
        raise ValueError(
            f"document '{input_doc.doc_id}': cleaned tokens do not match the "
            "input document; run clean_output first"
        )

    # predicted empties, keyed by the surface ordinal of the token before them
    pred_empties: dict[int, list[int]] = {}
    ordinal = -1
    for pos, token in enumerate(cleaned.tokens):
        if token.is_empty:
            pred_empties.setdefault(ordinal, []).append(pos)
        else:
            ordinal += 1

    # surface ordinal -> (sentence index, node); plain position of each token
    surface_nodes: list[tuple[int, Node]] = []
    for sent_index, sentence in enumerate(input_doc.sentences):
        for node in sentence.nodes:
            if not node.is_empty:
                surface_nodes.append((sent_index, node))

    existing_by_anchor: list[dict[int, list[Node]]] = []
    next_minor: list[dict[int, int]] = []
    base_minor: list[dict[int, int]] = []
    for sentence in input_doc.sentences:
        groups: dict[int, list[Node]] = {}
        minors: dict[int, int] = {}
        for node in sentence.nodes:
            if node.is_empty:
                groups.setdefault(_placement_anchor(node), []).append(node)
                minors[node.id.major] = max(minors.get(node.id.major, 0), node.id.minor)
        for nodes in groups.values():
            nodes.sort(key=lambda n: (n.id.major, n.id.minor))
        existing_by_anchor.append(groups)
        next_minor.append(minors)
        base_minor.append(dict(minors))

    position_to_node: dict[int, NodeId] = {}
    # (sentence, major, minor) of the node after which new empties go;
    # all mints at one anchor share the key so their order survives
    inserts: dict[tuple[int, int, int], list[Node]] = {}

    surface_positions = [pos for pos, t in enumerate(cleaned.tokens) if not t.is_empty]
    for ordinal, pos in enumerate(surface_positions):
        position_to_node[pos] = surface_nodes[ordinal][1].id

    def mint(sent_index: int, anchor_major: int, pos: int) -> None:
        minors = next_minor[sent_index]
        minor = minors.get(anchor_major, 0) + 1
        minors[anchor_major] = minor
        nid = NodeId(sent_index, anchor_major, minor)
        parent = NodeId(sent_index, anchor_major) if anchor_major >= 1 else None
        node = Node(id=nid, form=cleaned.tokens[pos].surface, parent=parent, deprel="_")
        base = base_minor[sent_index].get(anchor_major, 0)
        inserts.setdefault((sent_index, anchor_major, base), []).append(node)
        position_to_node[pos] = nid

    for ordinal in range(-1, len(surface_nodes)):
        predicted = pred_empties.get(ordinal, [])
        if not predicted:
            continue
        # candidates: existing empties placed after this token, then the
        # next sentence's sentence-initial empties when at a boundary
        candidates: list[Node] = []
        if ordinal >= 0:
            sent_index, node = surface_nodes[ordinal]
            candidates += existing_by_anchor[sent_index].get(node.id.major, [])
            last_of_sentence = (ordinal + 1 == len(surface_nodes)
                                or surface_nodes[ordinal + 1][0] != sent_index)
            if last_of_sentence and ordinal + 1 < len(surface_nodes):
                candidates += existing_by_anchor[surface_nodes[ordinal + 1][0]].get(0, [])
            anchor_sent, anchor_major = sent_index, node.id.major
        else:
            anchor_sent = surface_nodes[0][0] if surface_nodes else 0
            anchor_major = 0
            if input_doc.sentences:
                candidates += existing_by_anchor[anchor_sent].get(0, [])
        for offset, pos in enumerate(predicted):
            if offset < len(candidates):
                position_to_node[pos] = candidates[offset].id
            else:
                mint(anchor_sent, anchor_major, pos)

    new_sentences: list[Sentence] = []
    for sent_index, sentence in enumerate(input_doc.sentences):
        new_nodes: list[Node] = list(inserts.get((sent_index, 0, 0), []))
        for node in sentence.nodes:
            new_nodes.append(node)
            key = (sent_index, node.id.major, node.id.minor)
            new_nodes.extend(inserts.get(key, []))
        new_sentences.append(Sentence(new_nodes, sentence.mwt_ranges, sentence.sent_id))

    document = Document(input_doc.doc_id, new_sentences)
    grouped: dict[str, list] = {}
    for eid, start, end in plain_mentions(cleaned):
        span = [position_to_node[p] for p in range(start, end + 1)]
        grouped.setdefault(eid, []).append(span)
    entities = [
        Entity(eid, sort_entity_mentions([make_mention(eid, span, document) for span in spans]))
        for eid, spans in grouped.items()
    ]
    return document, entities
