"""One retrieval-augmented agent: retrieve, rerank, generate Analysis/Answer.

An agent owns its chunk set and indexes; nothing but its generated response
(and, for bookkeeping, which chunks it used) ever leaves it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .corpus import Chunk, ChunkingConfig, chunk_ordinal, tokenize
from .llm import ParsedAgentReply, TokenUsage, parse_agent_reply
from .prompts import AGENT_ANSWER_MULTI_HOP, AGENT_ANSWER_SINGLE_HOP, render_prompt
from .retrieval import (
    BM25,
    DENSE,
    MIXTURE,
    Bm25Index,
    DenseIndex,
    RetrievalHit,
    bm25_search,
    dense_search,
    mixture_search,
    rerank,
)

SINGLE_HOP = "single_hop"
MULTI_HOP = "multi_hop"


class AgentError(RuntimeError):
    def __init__(self, agent_id: str, message: str):
        super().__init__(f"agent {agent_id}: {message}")
        self.agent_id = agent_id


@dataclass(frozen=True)
class AgentConfig:
    agent_id: str
    category: str = ""
    retrieval_method: str = MIXTURE
    retrieval_depth: int = 20
    min_keep: int = 5
    chunking: ChunkingConfig = field(default_factory=lambda: ChunkingConfig(1024, 40))
    rerank_threshold: float = 0.3

    def __post_init__(self) -> None:
        if self.retrieval_method not in (DENSE, BM25, MIXTURE):
            raise ValueError(f"unknown retrieval method {self.retrieval_method!r}")
        if not (self.retrieval_depth >= self.min_keep >= 1):
            raise ValueError("need retrieval_depth >= min_keep >= 1")


@dataclass(frozen=True)
class AgentAnswer:
    agent_id: str
    reply: ParsedAgentReply
    raw_text: str
    hits: tuple[RetrievalHit, ...]
    usage: TokenUsage


def _unknown_reply() -> ParsedAgentReply:
    return ParsedAgentReply(analysis="", answer="I don't know.", is_unknown=True)


class Agent:
    def __init__(
        self,
        config: AgentConfig,
        chunks: list[Chunk],
        dense_index: DenseIndex,
        bm25_index: Bm25Index,
        embedder,
        backend,
    ):
        self.config = config
        self.chunks_by_id = {c.chunk_id: c for c in chunks}
        self.dense_index = dense_index
        self.bm25_index = bm25_index
        self.embedder = embedder
        self.backend = backend

    @property
    def agent_id(self) -> str:
        return self.config.agent_id

    def retrieve(self, question: str, depth: int | None = None) -> list[RetrievalHit]:
        depth = depth or self.config.retrieval_depth
        method = self.config.retrieval_method
        if len(self.dense_index) == 0:
            return []
        query_vec = self.embedder.embed_batch([question])[0]
        if method == DENSE:
            return dense_search(self.dense_index, query_vec, depth)
        if method == BM25:
            return bm25_search(self.bm25_index, tokenize(question), depth)
        dense_hits = dense_search(self.dense_index, query_vec, depth)
        bm25_hits = bm25_search(self.bm25_index, tokenize(question), depth)
        return mixture_search(dense_hits, bm25_hits, depth)

    def _document_blocks(self, hits: Iterable[RetrievalHit]) -> list[str]:
        blocks = []
        for hit in hits:
            chunk = self.chunks_by_id[hit.chunk_id]
            header = f"[doc:{chunk.doc_id} chunk:{chunk_ordinal(chunk.chunk_id)}]"
            blocks.append(f"{header}\n{chunk.text}")
        return blocks

    def answer_question(
        self,
        question: str,
        mode: str = SINGLE_HOP,
        history: Iterable = (),
        min_keep: int | None = None,
    ) -> AgentAnswer:
        """Retrieve, rerank to at least min_keep chunks, and generate a reply.

        An agent with an empty index answers "I don't know." without touching
        the backend. Backend hard failures are re-raised tagged with the
        agent id.
        """
        if len(self.dense_index) == 0:
            return AgentAnswer(self.agent_id, _unknown_reply(), "", (), TokenUsage())
        query_vec = self.embedder.embed_batch([question])[0]
        hits = self.retrieve(question)
        kept = rerank(
            hits,
            query_vec,
            self.dense_index,
            min_keep=min_keep or self.config.min_keep,
            keep_threshold=self.config.rerank_threshold,
        )
        if mode == MULTI_HOP:
            messages = render_prompt(
                AGENT_ANSWER_MULTI_HOP,
                {
                    "question": question,
                    "documents": self._document_blocks(kept),
                    "history": list(history),
                },
            )
        else:
            messages = render_prompt(
                AGENT_ANSWER_SINGLE_HOP,
                {"question": question, "documents": self._document_blocks(kept)},
            )
        try:
            text, usage = self.backend.chat(messages)
        except Exception as exc:
            raise AgentError(self.agent_id, str(exc)) from exc
        return AgentAnswer(self.agent_id, parse_agent_reply(text), text, tuple(kept), usage)

    def doc_ids_for(self, hits: Iterable[RetrievalHit]) -> list[str]:
        return [self.chunks_by_id[h.chunk_id].doc_id for h in hits]


def build_agent(config: AgentConfig, chunks: list[Chunk], embedder, backend) -> Agent:
    """Embed chunks and build both indexes in one step (offline convenience)."""
    if chunks:
        matrix = embedder.embed_batch([c.text for c in chunks])
    else:
        matrix = np.zeros((0, embedder.dim), dtype=np.float32)
    dense = DenseIndex(matrix, [c.chunk_id for c in chunks])
    return Agent(config, chunks, dense, Bm25Index.build(chunks), embedder, backend)
