"""CoNLL-U parsing and serialization, including coreference decoding.

The ten columns ID/FORM/LEMMA/UPOS/XPOS/FEATS/HEAD/DEPREL/DEPS/MISC are
supported with empty-node ids ``D.N`` and multiword-token ranges ``A-B``.
Documents are delimited by ``# newdoc id = ...`` comments.

Coreference lives in MISC under the ``Entity`` key as a concatenation of
bracket items: ``(eid`` opens a mention, ``eid)`` closes it, ``(eid)`` is
a single-node mention.  Discontinuous mentions mark each segment with a
part suffix: ``(eid[k/n`` opens segment k of n and ``eid[k/n])`` closes
it (``(eid[k/n])`` for a single-node segment).  Items may carry extra
``-``-separated attributes after the id; these are ignored.

Serialization is canonical: tab-joined columns, ``_`` for absent values,
FEATS/MISC keys sorted lexicographically, enhanced DEPS kept only for
empty nodes (parent:deprel).  ``parse(serialize(c))`` reproduces ``c``
field for field.
"""

from __future__ import annotations

import io
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass

from .model import (
    Corpus,
    Document,
    Entity,
    Mention,
    Node,
    NodeId,
    Sentence,
    contiguous_segments,
    make_mention,
    sort_entity_mentions,
)


class ConlluError(ValueError):
    """Malformed CoNLL-U input, reported with a 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


_EID_RE = re.compile(r"[A-Za-z0-9_]+")
_EMPTY_ID_RE = re.compile(r"^(\d+)\.(\d+)$")
_MWT_ID_RE = re.compile(r"^(\d+)-(\d+)$")
_REGULAR_ID_RE = re.compile(r"^\d+$")

# MISC keys that carry anaphora annotations this toolkit does not score.
_SKIPPED_ANNOTATIONS = ("Bridge", "SplitAnte")


@dataclass
class _Item:
    kind: str  # "open" | "close" | "single"
    eid: str
    part: tuple[int, int] | None  # (k, n) for discontinuous segments


def _parse_entity_items(value: str, line: int) -> list[_Item]:
    items: list[_Item] = []
    pos = 0
    length = len(value)

    def read_eid() -> str:
        nonlocal pos
        match = _EID_RE.match(value, pos)
        if not match:
            raise ConlluError(f"malformed entity id in Entity item near '{value[pos:pos + 12]}'", line)
        pos = match.end()
        # Tolerate and drop -separated attribute fields after the id.
        attr = re.match(r"-[^()\[\]]*", value[pos:])
        if attr:
            pos += attr.end()
        return match.group()

    def read_part() -> tuple[int, int] | None:
        nonlocal pos
        match = re.match(r"\[(\d+)/(\d+)", value[pos:])
        if not match:
            return None
        pos += match.end()
        return int(match.group(1)), int(match.group(2))

    while pos < length:
        if value[pos] == "(":
            pos += 1
            eid = read_eid()
            part = read_part()
            if part is not None:
                if value.startswith("])", pos):
                    pos += 2
                    items.append(_Item("single", eid, part))
                else:
                    items.append(_Item("open", eid, part))
            elif value.startswith(")", pos):
                pos += 1
                items.append(_Item("single", eid, None))
            else:
                items.append(_Item("open", eid, None))
        else:
            eid = read_eid()
            part = read_part()
            if part is not None:
                if not value.startswith("])", pos):
                    raise ConlluError(f"malformed closing item for entity '{eid}'", line)
                pos += 2
            else:
                if not value.startswith(")", pos):
                    raise ConlluError(f"malformed Entity item near '{value[pos:pos + 12]}'", line)
                pos += 1
            items.append(_Item("close", eid, part))
    return items


class _EntityDecoder:
    """Tracks bracket state over one document, sentence by sentence."""

    def __init__(self):
        # eid -> stack of (position, part, line) for pending opens
        self.open: defaultdict[str, list] = defaultdict(list)
        # eid -> pending discontinuous mentions awaiting further parts
        self.pending: defaultdict[str, list] = defaultdict(list)
        # completed (eid, sentence_index, frozenset of positions, first position)
        self.mentions: list[tuple[str, int, frozenset[int]]] = []

    def feed(self, item: _Item, sent_index: int, position: int, line: int) -> None:
        if item.kind == "open":
            self.open[item.eid].append((position, item.part, line))
            return
        if item.kind == "single":
            self._segment(item.eid, sent_index, {position}, item.part, line)
            return
        stack = self.open[item.eid]
        if not stack:
            raise ConlluError(f"closing bracket for entity '{item.eid}' has no matching opener", line)
        start, part, _ = stack.pop()
        if part != item.part:
            raise ConlluError(
                f"entity '{item.eid}' closes part {item.part} but part {part} is open", line
            )
        self._segment(item.eid, sent_index, set(range(start, position + 1)), part, line)

    def _segment(self, eid: str, sent_index: int, positions: set[int],
                 part: tuple[int, int] | None, line: int) -> None:
        if part is None:
            self.mentions.append((eid, sent_index, frozenset(positions)))
            return
        k, n = part
        if k == 1:
            entry = {"total": n, "next": 2, "positions": set(positions)}
            if n == 1:
                self.mentions.append((eid, sent_index, frozenset(entry["positions"])))
            else:
                self.pending[eid].append(entry)
            return
        for entry in self.pending[eid]:
            if entry["next"] == k and entry["total"] == n:
                entry["positions"] |= positions
                if k == n:
                    self.pending[eid].remove(entry)
                    self.mentions.append((eid, sent_index, frozenset(entry["positions"])))
                else:
                    entry["next"] = k + 1
                return
        raise ConlluError(f"entity '{eid}' part {k}/{n} arrived without part {k - 1}/{n}", line)

    def end_sentence(self, line: int) -> None:
        for eid, stack in self.open.items():
            if stack:
                raise ConlluError(
                    f"entity '{eid}' opened at line {stack[-1][2]} has no closing "
                    "bracket before the end of the sentence", line
                )
        for eid, entries in self.pending.items():
            if entries:
                raise ConlluError(
                    f"discontinuous mention of entity '{eid}' is missing part "
                    f"{entries[0]['next']}/{entries[0]['total']} at the end of the sentence",
                    line,
                )


def _split_keyvals(column: str) -> dict[str, str]:
    if column == "_":
        return {}
    out: dict[str, str] = {}
    for piece in column.split("|"):
        key, sep, val = piece.partition("=")
        out[key] = val if sep else ""
    return out


def _split_misc(column: str) -> dict[str, str | None]:
    if column == "_":
        return {}
    out: dict[str, str | None] = {}
    for piece in column.split("|"):
        key, sep, val = piece.partition("=")
        out[key] = val if sep else None
    return out


class _DocBuilder:
    def __init__(self, doc_id: str, line: int):
        self.doc_id = doc_id
        self.start_line = line
        self.sentences: list[Sentence] = []
        self.sent_ids: set[str] = set()
        self.decoder = _EntityDecoder()
        self.skipped_annotations = 0

    def finish(self, documents: list[Document], entities: list[list[Entity]]) -> None:
        document = Document(self.doc_id, self.sentences)
        grouped: dict[str, list[Mention]] = {}
        for eid, sent_index, positions in self.decoder.mentions:
            sentence = self.sentences[sent_index]
            span = [sentence.nodes[p].id for p in sorted(positions)]
            grouped.setdefault(eid, []).append(make_mention(eid, span, document))
        documents.append(document)
        entities.append(
            [Entity(eid, sort_entity_mentions(ms)) for eid, ms in grouped.items()]
        )


class _SentenceBuilder:
    def __init__(self, sent_index: int):
        self.sent_index = sent_index
        self.sent_id = ""
        self.sent_id_line = 0
        self.nodes: list[Node] = []
        self.mwt_ranges: list[tuple[int, int, str]] = []
        self.entity_values: list[tuple[str, int, int]] = []  # (value, position, line)
        self.prev_major = 0
        self.prev_minor = 0
        self.pending_mwt_end = 0
        self.first_line = 0


def _parse_head_ref(text: str, sent_index: int, line: int) -> NodeId | None:
    if text in ("_", ""):
        return None
    if text == "0":
        return None
    match = _EMPTY_ID_RE.match(text)
    if match:
        return NodeId(sent_index, int(match.group(1)), int(match.group(2)))
    if _REGULAR_ID_RE.match(text):
        return NodeId(sent_index, int(text))
    raise ConlluError(f"malformed head reference '{text}'", line)


def parse_conllu(source) -> Corpus:
    """Parse CoNLL-U text (str, bytes, or a text file object) into a Corpus.

    Raises ConlluError with a line number on malformed ids, unbalanced
    entity brackets, references to nonexistent parents, or duplicate
    sent_ids within a document.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    text = text.lstrip("﻿")

    documents: list[Document] = []
    entities: list[list[Entity]] = []
    doc: _DocBuilder | None = None
    sent: _SentenceBuilder | None = None
    synthesized = 0
    skipped_annotations = 0
    seen_doc_ids: set[str] = set()

    def close_sentence(line: int) -> None:
        nonlocal sent
        if sent is None or not sent.nodes:
            sent = None
            return
        if sent.pending_mwt_end > sent.prev_major:
            raise ConlluError(
                f"multiword token range extends past the last token ({sent.pending_mwt_end})",
                line,
            )
        if sent.sent_id:
            if sent.sent_id in doc.sent_ids:
                raise ConlluError(
                    f"duplicate sent_id '{sent.sent_id}' within document '{doc.doc_id}'",
                    sent.sent_id_line,
                )
            doc.sent_ids.add(sent.sent_id)
        sentence = Sentence(sent.nodes, sent.mwt_ranges, sent.sent_id)
        ids = {(n.id.major, n.id.minor) for n in sentence.nodes}
        for node in sentence.nodes:
            if node.parent is not None and (node.parent.major, node.parent.minor) not in ids:
                raise ConlluError(
                    f"node {node.id.conllu_id()} references nonexistent parent "
                    f"{node.parent.conllu_id()}", sent.first_line,
                )
        doc.sentences.append(sentence)
        for value, position, line_no in sent.entity_values:
            for item in _parse_entity_items(value, line_no):
                doc.decoder.feed(item, sent.sent_index, position, line_no)
        doc.decoder.end_sentence(line)
        sent = None

    def ensure_doc(line: int) -> None:
        nonlocal doc, synthesized
        if doc is None:
            synthesized += 1
            warnings.warn(
                "content before any '# newdoc id =' comment; synthesizing a document id",
                stacklevel=3,
            )
            doc = _DocBuilder(f"doc_{synthesized}", line)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            close_sentence(line_no)
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("newdoc"):
                close_sentence(line_no)
                _, _, doc_id = body.partition("=")
                doc_id = doc_id.strip()
                if not body.startswith("newdoc id") or not doc_id:
                    raise ConlluError("newdoc comment must carry 'id = <value>'", line_no)
                if doc is not None:
                    doc.finish(documents, entities)
                    skipped_annotations += doc.skipped_annotations
                if doc_id in seen_doc_ids:
                    raise ConlluError(f"duplicate document id '{doc_id}'", line_no)
                seen_doc_ids.add(doc_id)
                doc = _DocBuilder(doc_id, line_no)
            elif body.startswith("sent_id"):
                ensure_doc(line_no)
                if sent is None:
                    sent = _SentenceBuilder(len(doc.sentences))
                _, _, value = body.partition("=")
                sent.sent_id = value.strip()
                sent.sent_id_line = line_no
            # other comments (e.g. '# text =') are dropped by canonicalization
            continue

        ensure_doc(line_no)
        if sent is None:
            sent = _SentenceBuilder(len(doc.sentences))
        if not sent.first_line:
            sent.first_line = line_no
        columns = line.split("\t")
        if len(columns) != 10:
            raise ConlluError(f"expected 10 tab-separated columns, got {len(columns)}", line_no)
        cid, form, lemma, upos, xpos, feats, head, deprel, deps, misc = columns

        mwt = _MWT_ID_RE.match(cid)
        if mwt:
            a, b = int(mwt.group(1)), int(mwt.group(2))
            if a != sent.prev_major + 1 or b < a:
                raise ConlluError(f"malformed multiword token range '{cid}'", line_no)
            if sent.pending_mwt_end >= a:
                raise ConlluError(f"overlapping multiword token range '{cid}'", line_no)
            sent.mwt_ranges.append((a, b, form))
            sent.pending_mwt_end = b
            if "Entity" in _split_misc(misc):
                warnings.warn(
                    f"line {line_no}: Entity annotation on a multiword-token "
                    "range is ignored",
                    stacklevel=2,
                )
            continue

        empty = _EMPTY_ID_RE.match(cid)
        if empty:
            major, minor = int(empty.group(1)), int(empty.group(2))
            if major != sent.prev_major:
                raise ConlluError(
                    f"empty node id '{cid}' is not anchored to the preceding token "
                    f"{sent.prev_major}", line_no,
                )
            expected = sent.prev_minor + 1 if sent.prev_minor else 1
            if minor != expected:
                raise ConlluError(f"empty node id '{cid}' breaks the {major}.{expected} sequence", line_no)
            sent.prev_minor = minor
            nid = NodeId(sent.sent_index, major, minor)
            first_dep = deps.split("|", 1)[0] if deps != "_" else "_"
            if first_dep == "_":
                parent, dep_label = None, "_"
            else:
                parent_text, sep, dep_label = first_dep.partition(":")
                if not sep:
                    raise ConlluError(f"malformed DEPS item '{first_dep}'", line_no)
                parent = _parse_head_ref(parent_text, sent.sent_index, line_no)
        elif _REGULAR_ID_RE.match(cid):
            major = int(cid)
            if major != sent.prev_major + 1:
                raise ConlluError(
                    f"token id '{cid}' does not continue the sequence after {sent.prev_major}",
                    line_no,
                )
            sent.prev_major = major
            sent.prev_minor = 0
            nid = NodeId(sent.sent_index, major)
            parent = _parse_head_ref(head, sent.sent_index, line_no)
            dep_label = deprel
        else:
            raise ConlluError(f"malformed ID field '{cid}'", line_no)

        misc_map = _split_misc(misc)
        entity_value = misc_map.pop("Entity", None)
        for key in _SKIPPED_ANNOTATIONS:
            if key in misc_map:
                doc.skipped_annotations += 1
        node = Node(
            id=nid,
            form=form,
            lemma=lemma,
            upos=upos,
            xpos=xpos,
            feats=_split_keyvals(feats),
            parent=parent,
            deprel=dep_label,
            misc=misc_map,
        )
        sent.nodes.append(node)
        if entity_value is not None and entity_value != "":
            sent.entity_values.append((entity_value, len(sent.nodes) - 1, line_no))

    close_sentence(line_no if text else 0)
    if doc is not None:
        doc.finish(documents, entities)
        skipped_annotations += doc.skipped_annotations
    if skipped_annotations:
        warnings.warn(
            f"skipped {skipped_annotations} non-identity anaphora annotations "
            f"({'/'.join(_SKIPPED_ANNOTATIONS)})",
            stacklevel=2,
        )
    return Corpus(documents, entities)


def _part_suffix_open(part: tuple[int, int] | None) -> str:
    return f"[{part[0]}/{part[1]}" if part else ""


def _check_no_crossing(eid: str, segments: list[tuple[int, int, int]]) -> None:
    """Same-id bracket pairs must be nested or disjoint; crossing spans
    cannot be re-paired by the per-id stack on parsing."""
    by_sentence: defaultdict[int, list[tuple[int, int]]] = defaultdict(list)
    for sent_index, start, end in segments:
        by_sentence[sent_index].append((start, end))
    for spans in by_sentence.values():
        spans.sort()
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            if s1 < s2 <= e1 < e2:
                raise ConlluError(
                    f"mentions of entity '{eid}' cross (spans [{s1},{e1}] and "
                    f"[{s2},{e2}]); the bracket encoding cannot represent them"
                )


def _entity_strings(document: Document, doc_entities: list[Entity]) -> dict[tuple[int, int], str]:
    """Per-node Entity attribute values for one document.

    Within a node the canonical order is: closers (inner first), then
    single-node items, then openers (longer first), so that same-id
    adjacent and nested mentions re-pair correctly on parsing.
    """
    opens: defaultdict[tuple[int, int], list] = defaultdict(list)
    closes: defaultdict[tuple[int, int], list] = defaultdict(list)
    singles: defaultdict[tuple[int, int], list] = defaultdict(list)
    for entity in doc_entities:
        segments_of_entity: list[tuple[int, int, int]] = []
        for mention in entity.mentions:
            sent_index = mention.start.sentence_index
            sentence = document.sentences[sent_index]
            segments = contiguous_segments(mention.span, sentence)
            total = len(segments)
            for k, segment in enumerate(segments, start=1):
                part = (k, total) if total > 1 else None
                start = sentence.position(segment[0])
                end = sentence.position(segment[-1])
                segments_of_entity.append((sent_index, start, end))
                if start == end:
                    singles[sent_index, start].append((entity.id, part))
                else:
                    opens[sent_index, start].append((end, entity.id, part))
                    closes[sent_index, end].append((start, entity.id, part))
        _check_no_crossing(entity.id, segments_of_entity)

    values: dict[tuple[int, int], str] = {}
    for key in set(opens) | set(closes) | set(singles):
        pieces: list[str] = []
        for start, eid, part in sorted(closes.get(key, []), key=lambda t: (-t[0], t[1], t[2] or (0, 0))):
            suffix = f"[{part[0]}/{part[1]}])" if part else ")"
            pieces.append(f"{eid}{suffix}")
        for eid, part in sorted(singles.get(key, []), key=lambda t: (t[0], t[1] or (0, 0))):
            if part:
                pieces.append(f"({eid}[{part[0]}/{part[1]}])")
            else:
                pieces.append(f"({eid})")
        for end, eid, part in sorted(opens.get(key, []), key=lambda t: (-t[0], t[1], t[2] or (0, 0))):
            pieces.append(f"({eid}{_part_suffix_open(part)}")
        values[key] = "".join(pieces)
    return values


def _render_keyvals(mapping: dict[str, str]) -> str:
    if not mapping:
        return "_"
    return "|".join(f"{k}={mapping[k]}" for k in sorted(mapping))


def _render_misc(mapping: dict[str, str | None]) -> str:
    if not mapping:
        return "_"
    pieces = []
    for key in sorted(mapping):
        value = mapping[key]
        pieces.append(key if value is None else f"{key}={value}")
    return "|".join(pieces)


def serialize_conllu(corpus: Corpus) -> str:
    """Render a Corpus back to canonical CoNLL-U text."""
    out = io.StringIO()
    for doc_index, (document, doc_entities) in enumerate(corpus.doc_pairs()):
        entity_values = _entity_strings(document, doc_entities)
        out.write(f"# newdoc id = {document.doc_id}\n")
        for sent_index, sentence in enumerate(document.sentences):
            if sentence.sent_id:
                out.write(f"# sent_id = {sentence.sent_id}\n")
            mwt_by_first = {a: (a, b, form) for a, b, form in sentence.mwt_ranges}
            for position, node in enumerate(sentence.nodes):
                if not node.is_empty and node.id.major in mwt_by_first:
                    a, b, form = mwt_by_first[node.id.major]
                    out.write(f"{a}-{b}\t{form}\t_\t_\t_\t_\t_\t_\t_\t_\n")
                misc = dict(node.misc)
                entity_value = entity_values.get((sent_index, position))
                if entity_value:
                    misc["Entity"] = entity_value
                if node.is_empty:
                    if node.parent is None:
                        deps = "_"
                    else:
                        deps = f"{node.parent.conllu_id()}:{node.deprel}"
                    head, deprel = "_", "_"
                else:
                    head = str(node.parent.major) if node.parent is not None else "0"
                    deprel = node.deprel
                    deps = "_"
                out.write(
                    "\t".join(
                        (
                            node.id.conllu_id(),
                            node.form,
                            node.lemma,
                            node.upos,
                            node.xpos,
                            _render_keyvals(node.feats),
                            head,
                            deprel,
                            deps,
                            _render_misc(misc),
                        )
                    )
                    + "\n"
                )
            out.write("\n")
    return out.getvalue()
