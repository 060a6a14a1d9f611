from __future__ import annotations

import pytest

import transcripts
from ragroute.agent import Agent, AgentConfig, build_agent
from ragroute.boundary import build_profile, export_centroids
from ragroute.corpus import ChunkingConfig, Document, chunk_document
from ragroute.embedding import MockEmbedder
from ragroute.router import RouterRegistry


def make_agents(
    corpus: list[dict],
    agent_ids: list[str],
    categories: list[str],
    backend,
    embedder,
    chunking: ChunkingConfig = ChunkingConfig(256, 20),
    retrieval_method: str = "mixture",
    retrieval_depth: int = 20,
    min_keep: int = 5,
) -> tuple[dict[str, Agent], RouterRegistry]:
    """Build in-memory agents plus a populated registry from corpus records."""
    docs_by_category: dict[str, list[Document]] = {}
    for rec in corpus:
        doc = Document(rec["doc_id"], rec.get("title", ""), rec["category"], rec["body"])
        docs_by_category.setdefault(doc.category, []).append(doc)
    agents: dict[str, Agent] = {}
    registry = RouterRegistry()
    for agent_id, category in zip(agent_ids, categories):
        chunks = []
        for doc in docs_by_category.get(category, []):
            chunks.extend(chunk_document(doc, chunking))
        config = AgentConfig(
            agent_id=agent_id,
            category=category,
            retrieval_method=retrieval_method,
            retrieval_depth=retrieval_depth,
            min_keep=min_keep,
            chunking=chunking,
        )
        agent = build_agent(config, chunks, embedder, backend)
        agents[agent_id] = agent
        if chunks:
            profile = build_profile(
                agent_id, agent.dense_index.chunk_ids, agent.dense_index.matrix
            )
            registry.register(export_centroids(profile))
    return agents, registry


@pytest.fixture
def mock_embedder() -> MockEmbedder:
    return MockEmbedder(transcripts.MOCK_DIM)


@pytest.fixture
def walking_dead_setup(mock_embedder):
    """Five topical agents plus the scripted single-hop transcript backend."""
    backend = transcripts.script_backend(transcripts.WD_SCRIPT)
    agents, registry = make_agents(
        transcripts.WD_CORPUS,
        transcripts.WD_AGENT_IDS,
        transcripts.WD_CATEGORIES,
        backend,
        mock_embedder,
    )
    return agents, registry, backend


@pytest.fixture
def news_reports_setup(mock_embedder):
    """One technology agent plus the scripted multi-hop transcript backend."""
    backend = transcripts.script_backend(transcripts.NR_SCRIPT)
    agents, registry = make_agents(
        transcripts.NR_CORPUS,
        ["tech"],
        ["technology"],
        backend,
        mock_embedder,
        retrieval_depth=50,
        min_keep=10,
    )
    return agents, registry, backend
