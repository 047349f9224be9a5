"""Deterministic hybrid retrieval: keyword scoring, graph traversal, vectors.

The prompt-based extraction stages are pluggable function slots with
deterministic defaults (a word tokenizer, exact-match entity finding, a
synonym dictionary, and pre-extracted triplet files), so every query result
is reproducible without any model in the loop.  Fusion is a provenance-tagged
set union ordered keyword / graph / vector.
"""

from __future__ import annotations

import math
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

_WORD = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


@dataclass(frozen=True)
class Document:
    doc_id: int
    text: str
    keywords: frozenset[str]  # derived from the heading structure at ingest
    heading_path: tuple[str, ...]


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    index_keywords: frozenset[str]  # union of all document keyword sets

    def __post_init__(self) -> None:
        ids = [d.doc_id for d in self.documents]
        if len(ids) != len(set(ids)):
            raise ValueError("document ids must be unique")


@dataclass(frozen=True)
class Triplet:
    subject: str
    predicate: str
    object: str

    def __post_init__(self) -> None:
        if not (self.subject and self.predicate and self.object):
            raise ValueError("triplet fields must be non-empty")

    def render(self) -> str:
        return f"{self.subject} {self.predicate} {self.object}"


@dataclass
class KnowledgeGraph:
    nodes: set[str] = field(default_factory=set)
    edges: set[Triplet] = field(default_factory=set)
    adjacency: dict[str, list[Triplet]] = field(default_factory=dict)

    def add(self, triplet: Triplet) -> None:
        if triplet in self.edges:
            return
        self.edges.add(triplet)
        for node in (triplet.subject, triplet.object):
            self.nodes.add(node)
            self.adjacency.setdefault(node, []).append(triplet)


@dataclass(frozen=True)
class Extractors:
    """Pluggable stand-ins for the prompt-based extraction functions."""

    keyword_fn: Callable[[str], set[str]]
    entity_fn: Callable[[str], set[str]]
    synonym_fn: Callable[[set[str]], set[str]]
    triplet_fn: Callable[[str], list[Triplet]]


def default_extractors(
    entities: Iterable[str] = (),
    synonyms: Mapping[str, Sequence[str]] | None = None,
) -> Extractors:
    """Deterministic defaults: tokenizer, exact matching, dictionary lookup."""
    entity_list = sorted({e.lower() for e in entities})
    synonym_map = {
        k.lower(): tuple(s.lower() for s in v) for k, v in (synonyms or {}).items()
    }

    def entity_fn(query: str) -> set[str]:
        text = " ".join(tokenize(query))
        return {e for e in entity_list if f" {e} " in f" {text} "}

    def synonym_fn(found: set[str]) -> set[str]:
        out: set[str] = set()
        for entity in found:
            out.update(synonym_map.get(entity.lower(), ()))
        return out

    return Extractors(
        keyword_fn=lambda q: set(tokenize(q)),
        entity_fn=entity_fn,
        synonym_fn=synonym_fn,
        triplet_fn=load_triplets,
    )


# --- keyword retrieval -----------------------------------------------------

def ingest_corpus(directory: str) -> Corpus:
    """Split heading-marked text files into indexed blocks.

    Markdown-style ``#`` headings delimit blocks; a block's keyword set is
    the token union of its heading path, which also serves as the index term
    list.  Files are read in sorted name order so ids are stable.
    """
    docs: list[Document] = []
    doc_id = 0
    for path in sorted(Path(directory).glob("*.txt")) + sorted(
        Path(directory).glob("*.md")
    ):
        heading_stack: list[tuple[int, str]] = []
        lines: list[str] = []

        def flush() -> None:
            nonlocal doc_id
            text = "\n".join(lines).strip()
            if not text:
                return
            path_titles = tuple(title for _, title in heading_stack)
            keywords = frozenset(t for title in path_titles for t in tokenize(title))
            docs.append(
                Document(
                    doc_id=doc_id,
                    text=text,
                    keywords=keywords,
                    heading_path=path_titles,
                )
            )
            doc_id += 1

        for line in path.read_text(encoding="utf-8").splitlines():
            match = re.match(r"^(#+)\s*(.*)$", line)
            if match:
                flush()
                lines = []
                level = len(match.group(1))
                while heading_stack and heading_stack[-1][0] >= level:
                    heading_stack.pop()
                heading_stack.append((level, match.group(2).strip()))
            else:
                lines.append(line)
        flush()
    index = frozenset(k for d in docs for k in d.keywords)
    return Corpus(documents=tuple(docs), index_keywords=index)


def filter_keywords(keywords: set[str], corpus: Corpus) -> set[str]:
    """Keep only keywords present in the corpus index."""
    return {k.lower() for k in keywords} & corpus.index_keywords


def score_documents(keywords: set[str], corpus: Corpus) -> dict[int, int]:
    """Membership-count weight per document (callers pre-filter keywords)."""
    return {
        d.doc_id: sum(1 for w in keywords if w in d.keywords)
        for d in corpus.documents
    }


def top_g(scores: Mapping[int, int], g_top: int) -> list[int]:
    """The g_top highest-weight document ids; ties break by ascending id."""
    if g_top < 0:
        raise ValueError("g_top must be >= 0")
    ranked = sorted(scores, key=lambda i: (-scores[i], i))
    return ranked[:g_top]


def keyword_retrieve(
    query: str, corpus: Corpus, extractors: Extractors, g_top: int
) -> list[Document]:
    valid = filter_keywords(extractors.keyword_fn(query), corpus)
    by_id = {d.doc_id: d for d in corpus.documents}
    return [by_id[i] for i in top_g(score_documents(valid, corpus), g_top)]


# --- graph retrieval -------------------------------------------------------

def load_triplets(path: str) -> list[Triplet]:
    """Read one tab-separated (subject, predicate, object) per line."""
    out: list[Triplet] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                raise ValueError(f"line {lineno}: expected 'subject<TAB>predicate<TAB>object'")
            out.append(
                Triplet(
                    subject=parts[0].strip().lower(),
                    predicate=parts[1].strip().lower(),
                    object=parts[2].strip().lower(),
                )
            )
    return out


def build_graph(triplets: Iterable[Triplet]) -> KnowledgeGraph:
    """Deduplicated directed graph with an adjacency index over both ends."""
    graph = KnowledgeGraph()
    for triplet in triplets:
        graph.add(triplet)
    return graph


def expand_entities(query: str, extractors: Extractors) -> set[str]:
    """Recognized entities united with their dictionary synonyms."""
    entities = {e.lower() for e in extractors.entity_fn(query)}
    return entities | {s.lower() for s in extractors.synonym_fn(entities)}


def traverse(graph: KnowledgeGraph, seeds: set[str], depth: int) -> list[str]:
    """Edges reachable within ``depth`` hops of any seed, as sorted strings.

    Reachability ignores edge direction (a hop may follow an edge either
    way); rendered strings keep the stored direction.  Seeds absent from the
    graph contribute nothing, and depth 0 reaches no edges.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    dist: dict[str, int] = {s: 0 for s in seeds if s in graph.nodes}
    frontier = deque(dist)
    found: set[str] = set()
    while frontier:
        node = frontier.popleft()
        d = dist[node]
        if d >= depth:
            continue
        for edge in graph.adjacency.get(node, ()):
            found.add(edge.render())
            other = edge.object if edge.subject == node else edge.subject
            if other not in dist:
                dist[other] = d + 1
                frontier.append(other)
    return sorted(found)


def graph_retrieve(
    query: str, graph: KnowledgeGraph, extractors: Extractors, depth: int
) -> list[str]:
    return traverse(graph, expand_entities(query, extractors), depth)


# --- vector retrieval ------------------------------------------------------

class TfidfEmbedder:
    """Deterministic bag-of-words embedding with smoothed idf.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 keeps corpus-wide terms nonzero,
    so a query equal to a document matches it with cosine exactly 1.
    """

    def __init__(self) -> None:
        self.vocabulary: dict[str, int] = {}
        self.idf: list[float] = []

    def fit(self, texts: Sequence[str]) -> "TfidfEmbedder":
        df: dict[str, int] = {}
        for text in texts:
            for term in set(tokenize(text)):
                df[term] = df.get(term, 0) + 1
        self.vocabulary = {t: i for i, t in enumerate(sorted(df))}
        n = len(texts)
        self.idf = [0.0] * len(self.vocabulary)
        for term, i in self.vocabulary.items():
            self.idf[i] = math.log((1.0 + n) / (1.0 + df[term])) + 1.0
        return self

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * len(self.vocabulary)
        for term in tokenize(text):
            i = self.vocabulary.get(term)
            if i is not None:
                vec[i] += self.idf[i]
        return vec


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return dot / (na * nb)


def vector_retrieve(
    query: str, corpus: Corpus, embedder, top_k: int
) -> list[Document]:
    """Cosine top-k over the embedder; zero-similarity documents are dropped.

    Ties break by ascending document id.  The embedder must already be
    fitted (``TfidfEmbedder().fit([d.text for d in corpus.documents])``).
    """
    if top_k < 0:
        raise ValueError("top_k must be >= 0")
    q = embedder.embed(query)
    scored = [
        (d, _cosine(q, embedder.embed(d.text))) for d in corpus.documents
    ]
    scored = [(d, s) for d, s in scored if s > 0.0]
    scored.sort(key=lambda pair: (-pair[1], pair[0].doc_id))
    return [d for d, _ in scored[:top_k]]


# --- fusion ----------------------------------------------------------------

@dataclass(frozen=True)
class FusedItem:
    key: str
    text: str
    sources: tuple[str, ...]


def fuse(
    c_keyword: Sequence[Document],
    c_graph: Sequence[str],
    c_vector: Sequence[Document],
) -> list[FusedItem]:
    """Provenance-tagged set union, ordered keyword / graph / vector blocks.

    Items appearing in several routes are emitted once (in the earliest
    block) with every contributing source listed.
    """
    sources: dict[str, list[str]] = {}
    texts: dict[str, str] = {}

    def note(key: str, text: str, source: str) -> None:
        texts[key] = text
        sources.setdefault(key, [])
        if source not in sources[key]:
            sources[key].append(source)

    for doc in c_keyword:
        note(f"doc:{doc.doc_id}", doc.text, "keyword")
    for line in c_graph:
        note(f"triplet:{line}", line, "graph")
    for doc in c_vector:
        note(f"doc:{doc.doc_id}", doc.text, "vector")

    out: list[FusedItem] = []
    emitted: set[str] = set()
    for block in ("keyword", "graph", "vector"):
        block_keys = sorted(
            k for k, s in sources.items() if s[0] == block and k not in emitted
        )
        for key in block_keys:
            out.append(FusedItem(key=key, text=texts[key], sources=tuple(sources[key])))
            emitted.add(key)
    return out
