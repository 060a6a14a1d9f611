"""Corpus ingestion: load documents, split into overlapping token chunks.

A chunk is one sliding window of ``chunk_tokens`` tokens with consecutive
windows overlapping by ``overlap_tokens``. The final window keeps whatever
tokens remain; tail content is never discarded.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    category: str
    body: str


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    token_start: int
    token_len: int


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_tokens: int
    overlap_tokens: int

    def __post_init__(self) -> None:
        if not (0 <= self.overlap_tokens < self.chunk_tokens):
            raise ValueError(
                f"invalid chunking config: need 0 <= overlap_tokens < chunk_tokens, "
                f"got ({self.chunk_tokens}, {self.overlap_tokens})"
            )

    @property
    def stride(self) -> int:
        return self.chunk_tokens - self.overlap_tokens


def tokenize(text: str) -> list[str]:
    """Split text into word and single-character punctuation tokens.

    Deterministic; whitespace is dropped, everything else survives as a token.
    """
    return _TOKEN_RE.findall(text)


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character (start, end) offsets of each token, in order."""
    return [(m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def make_chunk_id(doc_id: str, ordinal: int) -> str:
    return f"{doc_id}:{ordinal:05d}"


def chunk_ordinal(chunk_id: str) -> int:
    """Recover the chunk's position within its document from its id."""
    return int(chunk_id.rsplit(":", 1)[1])


def chunk_doc_id(chunk_id: str) -> str:
    return chunk_id.rsplit(":", 1)[0]


def chunk_count(total_tokens: int, cfg: ChunkingConfig) -> int:
    """Number of windows over a document of ``total_tokens`` tokens."""
    return math.ceil(max(total_tokens - cfg.overlap_tokens, 1) / cfg.stride)


def chunk_document(doc: Document, cfg: ChunkingConfig) -> list[Chunk]:
    """Split a document into overlapping token-window chunks.

    Every non-final chunk has exactly ``cfg.chunk_tokens`` tokens and overlaps
    its successor by exactly ``cfg.overlap_tokens``. Chunk text is the original
    character span from the first to the last token of the window, so no
    content is lost or reflowed.
    """
    spans = token_spans(doc.body)
    if not spans:
        raise ValueError(f"empty document: {doc.doc_id!r}")
    total = len(spans)
    chunks: list[Chunk] = []
    for i in range(chunk_count(total, cfg)):
        start = i * cfg.stride
        window = spans[start : start + cfg.chunk_tokens]
        text = doc.body[window[0][0] : window[-1][1]]
        chunks.append(
            Chunk(
                chunk_id=make_chunk_id(doc.doc_id, i),
                doc_id=doc.doc_id,
                text=text,
                token_start=start,
                token_len=len(window),
            )
        )
    return chunks


@dataclass(frozen=True)
class RecordError:
    """One rejected corpus record: the line it came from and why."""

    line_no: int
    reason: str


def load_corpus(path: str | Path) -> tuple[list[Document], list[RecordError]]:
    """Read a JSONL corpus file (one document object per line).

    Records missing ``doc_id`` or ``body`` (or duplicating an earlier
    ``doc_id``) are rejected with a per-record error, never silently dropped.
    """
    path = Path(path)
    docs: list[Document] = []
    errors: list[RecordError] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                errors.append(RecordError(line_no, f"malformed JSON: {exc}"))
                continue
            doc_id = rec.get("doc_id")
            body = rec.get("body")
            if not doc_id:
                errors.append(RecordError(line_no, "missing doc_id"))
                continue
            if not body:
                errors.append(RecordError(line_no, f"missing body (doc_id={doc_id!r})"))
                continue
            if doc_id in seen:
                errors.append(RecordError(line_no, f"duplicate doc_id {doc_id!r}"))
                continue
            seen.add(doc_id)
            docs.append(
                Document(
                    doc_id=str(doc_id),
                    title=str(rec.get("title", "")),
                    category=str(rec.get("category", "")),
                    body=str(body),
                )
            )
    return docs, errors


def save_chunks(path: str | Path, chunks: list[Chunk]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for c in chunks:
            fh.write(
                json.dumps(
                    {
                        "chunk_id": c.chunk_id,
                        "doc_id": c.doc_id,
                        "text": c.text,
                        "token_start": c.token_start,
                        "token_len": c.token_len,
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
                + "\n"
            )


def load_chunks(path: str | Path) -> list[Chunk]:
    chunks: list[Chunk] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            chunks.append(
                Chunk(
                    chunk_id=rec["chunk_id"],
                    doc_id=rec["doc_id"],
                    text=rec["text"],
                    token_start=rec["token_start"],
                    token_len=rec["token_len"],
                )
            )
    return chunks
