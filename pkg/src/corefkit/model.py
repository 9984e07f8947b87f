"""Object model for CoNLL-U corpora carrying coreference annotations.

Nodes, sentences and documents mirror the CoNLL-U structure, including
empty nodes (decimal ids such as ``3.1``, used for zero anaphora) and
multiword-token ranges.  Mentions and entities form the coreference
layer on top; mention heads are derived from the dependency tree.

All values are treated as immutable after construction, so corpora can
be shared freely across parallel workers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class NodeId:
    """Position of a node within a document.

    ``minor == 0`` marks a regular (surface) token; ``minor >= 1`` marks
    an empty node anchored after token ``major`` (rendered ``major.minor``).
    Within a sentence, ids are unique and ordered lexicographically.
    """

    sentence_index: int
    major: int
    minor: int = 0

    @property
    def is_empty(self) -> bool:
        return self.minor > 0

    def conllu_id(self) -> str:
        return f"{self.major}.{self.minor}" if self.minor else str(self.major)

    def __str__(self) -> str:
        return f"{self.sentence_index}:{self.conllu_id()}"


@dataclass
class Node:
    """One CoNLL-U node (surface token or empty node).

    ``parent`` is None for the root.  For empty nodes the parent/deprel
    pair comes from the first item of the DEPS column.
    """

    id: NodeId
    form: str
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: dict[str, str] = field(default_factory=dict)
    parent: NodeId | None = None
    deprel: str = "_"
    misc: dict[str, str | None] = field(default_factory=dict)

    @property
    def is_empty(self) -> bool:
        return self.id.minor > 0


@dataclass
class Sentence:
    """Ordered node list plus multiword-token ranges.

    ``mwt_ranges`` holds (first major, last major, surface form) triples;
    ranges never overlap and cover only regular tokens.
    """

    nodes: list[Node]
    mwt_ranges: list[tuple[int, int, str]] = field(default_factory=list)
    sent_id: str = ""

    def _index(self) -> dict[tuple[int, int], Node]:
        cached = self.__dict__.get("_node_index")
        if cached is None:
            cached = {(n.id.major, n.id.minor): n for n in self.nodes}
            self.__dict__["_node_index"] = cached
        return cached

    def _positions(self) -> dict[tuple[int, int], int]:
        cached = self.__dict__.get("_node_positions")
        if cached is None:
            cached = {(n.id.major, n.id.minor): i for i, n in enumerate(self.nodes)}
            self.__dict__["_node_positions"] = cached
        return cached

    def node(self, nid: NodeId) -> Node:
        return self._index()[(nid.major, nid.minor)]

    def has_node(self, nid: NodeId) -> bool:
        return (nid.major, nid.minor) in self._index()

    def position(self, nid: NodeId) -> int:
        """Index of the node in serialization order."""
        return self._positions()[(nid.major, nid.minor)]

    @property
    def tokens(self) -> list[Node]:
        """Regular (surface) tokens only."""
        return [n for n in self.nodes if not n.is_empty]

    @property
    def empty_nodes(self) -> list[Node]:
        return [n for n in self.nodes if n.is_empty]


@dataclass
class Document:
    doc_id: str
    sentences: list[Sentence]

    def node(self, nid: NodeId) -> Node:
        return self.sentences[nid.sentence_index].node(nid)

    def sentence_of(self, nid: NodeId) -> Sentence:
        return self.sentences[nid.sentence_index]

    def surface_forms(self) -> list[str]:
        """Forms of all regular tokens in document order."""
        return [n.form for s in self.sentences for n in s.nodes if not n.is_empty]

    def word_count(self) -> int:
        return sum(1 for s in self.sentences for n in s.nodes if not n.is_empty)


@dataclass(frozen=True)
class Mention:
    """A coreference mention: an ordered, possibly discontinuous span.

    The head is the span node whose parent lies outside the span; a
    mention is a zero mention iff its head is an empty node.
    """

    entity_id: str
    span: tuple[NodeId, ...]
    head: NodeId
    is_zero: bool

    def __post_init__(self) -> None:
        if not self.span:
            raise ValueError("mention span must be non-empty")
        if self.head not in self.span:
            raise ValueError(f"mention head {self.head} not in span")

    @property
    def start(self) -> NodeId:
        return self.span[0]

    @property
    def end(self) -> NodeId:
        return self.span[-1]

    def surface_length(self) -> int:
        """Number of regular tokens in the span (0 for pure-zero mentions)."""
        return sum(1 for n in self.span if not n.is_empty)

    def contains_empty(self) -> bool:
        return any(n.is_empty for n in self.span)


@dataclass
class Entity:
    """A cluster of mentions referring to one referent.

    Mentions are ordered by document position of their first span node.
    A singleton has exactly one mention.
    """

    id: str
    mentions: list[Mention]

    @property
    def is_singleton(self) -> bool:
        return len(self.mentions) == 1


@dataclass
class Corpus:
    """Documents plus one entity list per document (parallel lists)."""

    documents: list[Document]
    entities: list[list[Entity]]

    def __post_init__(self) -> None:
        if len(self.documents) != len(self.entities):
            raise ValueError("documents and entities lists must be parallel")

    def doc_pairs(self):
        return zip(self.documents, self.entities)

    def word_count(self) -> int:
        return sum(d.word_count() for d in self.documents)


def make_mention(entity_id: str, span, document: Document) -> Mention:
    """Build a mention with a derived head over nodes of one document."""
    span_t = tuple(sorted(set(span)))
    sentence = document.sentences[span_t[0].sentence_index]
    segment = [n for n in span_t if n.sentence_index == span_t[0].sentence_index]
    head = derive_head(segment, sentence)
    return Mention(entity_id, span_t, head, head.is_empty)


def sort_entity_mentions(mentions: list[Mention]) -> list[Mention]:
    return sorted(mentions, key=lambda m: (m.start, m.end))


def tree_depth(nid: NodeId, sentence: Sentence) -> int:
    """Steps from the node to the sentence root along parent links.

    Malformed inputs (cycles, dangling parents) get a depth past any
    real tree so they lose every tie-break.
    """
    depth = 0
    seen = {(nid.major, nid.minor)}
    current = sentence.node(nid)
    while current.parent is not None:
        key = (current.parent.major, current.parent.minor)
        if key in seen or not sentence.has_node(current.parent):
            return len(sentence.nodes) + 1
        seen.add(key)
        depth += 1
        current = sentence.node(current.parent)
    return depth


def derive_head(span, sentence: Sentence) -> NodeId:
    """Pick the span node whose parent lies outside the span.

    Among several candidates the one with the smallest tree depth wins;
    remaining ties break on the earliest (major, minor) position.  A span
    where every parent points inside (malformed input) falls back to the
    earliest node with a warning.
    """
    span_t = sorted(set(span))
    if not span_t:
        raise ValueError("cannot derive a head for an empty span")
    members = {(n.major, n.minor) for n in span_t}
    candidates = []
    for nid in span_t:
        parent = sentence.node(nid).parent
        if parent is None or (parent.major, parent.minor) not in members:
            candidates.append(nid)
    if not candidates:
        warnings.warn(
            "span has no node with an external parent; falling back to its "
            "earliest node",
            stacklevel=2,
        )
        return span_t[0]
    return min(candidates, key=lambda n: (tree_depth(n, sentence), n.major, n.minor))


def document_word_index(document: Document, start: int = 1) -> tuple[dict[NodeId, float], int]:
    """Ordinals for every node of one document.

    Regular tokens get consecutive integers beginning at ``start``; empty
    nodes get the preceding token's ordinal plus a fractional tiebreaker
    (order-preserving, never counted as words).  Returns the ordinal map
    and the number of regular tokens.
    """
    ordinals: dict[NodeId, float] = {}
    word = start - 1
    empty_run = 0
    for sentence in document.sentences:
        for node in sentence.nodes:
            if node.is_empty:
                empty_run += 1
                ordinals[node.id] = word + empty_run / (empty_run + 1)
            else:
                word += 1
                empty_run = 0
                ordinals[node.id] = float(word)
    return ordinals, word - (start - 1)


class WordIndex:
    """Corpus-wide surface-word ordinals.

    Regular tokens are numbered consecutively across documents in corpus
    order; empty nodes carry fractional ordinals anchored to the nearest
    preceding word.  ``len()`` equals the number of regular tokens.
    """

    def __init__(self, per_document: list[dict[NodeId, float]], word_count: int):
        self._per_document = per_document
        self.word_count = word_count

    def __len__(self) -> int:
        return self.word_count

    def view(self, doc_index: int) -> dict[NodeId, float]:
        return self._per_document[doc_index]

    def ordinal(self, doc_index: int, nid: NodeId) -> float:
        return self._per_document[doc_index][nid]

    def anchor(self, doc_index: int, nid: NodeId) -> int:
        """Ordinal of the nearest preceding regular token (identity for words)."""
        return int(math.floor(self.ordinal(doc_index, nid)))


def global_word_index(corpus: Corpus) -> WordIndex:
    """Index every node of the corpus; document n+1 continues document n's count."""
    per_document = []
    start = 1
    for document in corpus.documents:
        ordinals, words = document_word_index(document, start=start)
        per_document.append(ordinals)
        start += words
    return WordIndex(per_document, start - 1)


def contiguous_segments(span, sentence: Sentence) -> list[list[NodeId]]:
    """Split a span into runs that are contiguous in sentence node order."""
    ordered = sorted(set(span))
    segments: list[list[NodeId]] = []
    previous = None
    for nid in ordered:
        pos = sentence.position(nid)
        if previous is not None and pos == previous + 1:
            segments[-1].append(nid)
        else:
            segments.append([nid])
        previous = pos
    return segments


def mention_has_gap(mention: Mention, document: Document) -> bool:
    sentence = document.sentences[mention.start.sentence_index]
    return len(contiguous_segments(mention.span, sentence)) > 1


def mention_is_treelet(mention: Mention, document: Document) -> bool:
    """True iff the span forms a connected subgraph of the dependency tree.

    In a tree this holds exactly when one span node has its parent
    outside the span.
    """
    sentence = document.sentences[mention.start.sentence_index]
    members = {(n.major, n.minor) for n in mention.span}
    external = 0
    for nid in mention.span:
        parent = sentence.node(nid).parent
        if parent is None or (parent.major, parent.minor) not in members:
            external += 1
    return external == 1
