"""Operator CLI: ingest, build-index, register, ask, eval, inspect.

One JSON config document drives every command; secrets only ever come from
environment variables named in that config. Exit codes: 0 success, 1 partial
item failures, 2 config/IO errors. Index, profile, and registry files are
deterministic functions of their inputs, so re-running a command with
unchanged inputs rewrites byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .agent import Agent, AgentConfig
from .boundary import build_profile, export_centroids, load_profile, save_profile
from .corpus import ChunkingConfig, chunk_document, load_chunks, load_corpus, save_chunks
from .embedding import EmbeddingProviderConfig, load_vectors, make_embedder, save_vectors
from .evalharness import (
    AGENTS_ALL,
    AGENTS_RAW_KNOWLEDGE,
    AGENTS_SELECTED,
    EvalSystem,
    load_eval_items,
    run_eval,
)
from .llm import ChatBackendConfig, make_chat_backend
from .planner import PlanStrategy, run_plan
from .prompts import TEMPLATES
from .retrieval import Bm25Index, DenseIndex
from .router import RouterRegistry, route_and_answer

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2

_STRATEGY_BY_FLAG = {
    "oneshot": PlanStrategy.ONE_SHOT,
    "presplit": PlanStrategy.PRESPLIT,
    "greedy": PlanStrategy.GREEDY,
}


class ConfigError(RuntimeError):
    pass


@dataclass
class SystemConfig:
    corpus_path: Path
    index_dir: Path
    chunking: ChunkingConfig
    embedding: EmbeddingProviderConfig
    chat: ChatBackendConfig
    agents: list[AgentConfig]
    max_agents: int = 5
    parallelism: int = 1
    strategy: PlanStrategy = PlanStrategy.GREEDY
    max_rounds: int = 5

    @classmethod
    def from_file(cls, path: str | Path) -> "SystemConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        try:
            chunking = ChunkingConfig(**raw.get("chunking", {"chunk_tokens": 1024, "overlap_tokens": 40}))
            embedding = EmbeddingProviderConfig(**raw["embedding"])
            chat = ChatBackendConfig(**raw["chat"])
            agent_cfgs = []
            for rec in raw["agents"]:
                rec = dict(rec)
                per_agent_chunking = rec.pop("chunking", None)
                agent_cfgs.append(
                    AgentConfig(
                        chunking=ChunkingConfig(**per_agent_chunking) if per_agent_chunking else chunking,
                        **rec,
                    )
                )
            router_cfg = raw.get("router", {})
            planner_cfg = raw.get("planner", {})
            cfg = cls(
                corpus_path=Path(raw["corpus_path"]),
                index_dir=Path(raw["index_dir"]),
                chunking=chunking,
                embedding=embedding,
                chat=chat,
                agents=agent_cfgs,
                max_agents=int(router_cfg.get("max_agents", 5)),
                parallelism=int(router_cfg.get("parallelism", 1)),
                strategy=PlanStrategy(planner_cfg.get("strategy", "greedy")),
                max_rounds=int(planner_cfg.get("max_rounds", 5)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc
        ids = [a.agent_id for a in cfg.agents]
        if len(ids) != len(set(ids)):
            raise ConfigError("agent_ids must be unique")
        if cfg.max_agents < 1:
            raise ConfigError("router.max_agents must be >= 1")
        return cfg

    def agent_dir(self, agent_id: str) -> Path:
        return self.index_dir / "agents" / agent_id

    def registry_json(self) -> Path:
        return self.index_dir / "registry.json"

    def registry_vectors(self) -> Path:
        return self.index_dir / "registry_vectors"


def _fail(command: str, message: str, code: int = EXIT_CONFIG) -> int:
    print(json.dumps({"command": command, "error": message}, sort_keys=True), file=sys.stderr)
    return code


def _select_agent_cfgs(cfg: SystemConfig, agent_id: str | None) -> list[AgentConfig]:
    if agent_id is None:
        return cfg.agents
    matches = [a for a in cfg.agents if a.agent_id == agent_id]
    if not matches:
        raise ConfigError(f"unknown agent {agent_id!r}")
    return matches


def cmd_ingest(cfg: SystemConfig, agent_id: str | None = None) -> int:
    if not cfg.corpus_path.exists():
        return _fail("ingest", f"corpus path does not exist: {cfg.corpus_path}")
    docs, record_errors = load_corpus(cfg.corpus_path)
    by_category: dict[str, list] = {}
    for doc in docs:
        by_category.setdefault(doc.category, []).append(doc)
    known_categories = {a.category or a.agent_id for a in cfg.agents}
    unassigned = sorted(c for c in by_category if c not in known_categories)
    total_chunks = 0
    for agent_cfg in _select_agent_cfgs(cfg, agent_id):
        category = agent_cfg.category or agent_cfg.agent_id
        chunks = []
        for doc in by_category.get(category, []):
            chunks.extend(chunk_document(doc, agent_cfg.chunking))
        save_chunks(cfg.agent_dir(agent_cfg.agent_id) / "chunks.jsonl", chunks)
        total_chunks += len(chunks)
    summary = {
        "documents": len(docs),
        "chunks": total_chunks,
        "record_errors": [{"line": e.line_no, "reason": e.reason} for e in record_errors],
        "unassigned_categories": unassigned,
    }
    print(json.dumps(summary, sort_keys=True))
    return EXIT_PARTIAL if (record_errors or unassigned) else EXIT_OK


def cmd_build_index(cfg: SystemConfig, agent_id: str | None = None) -> int:
    embedder = make_embedder(cfg.embedding)
    for agent_cfg in _select_agent_cfgs(cfg, agent_id):
        adir = cfg.agent_dir(agent_cfg.agent_id)
        chunks_path = adir / "chunks.jsonl"
        if not chunks_path.exists():
            return _fail("build-index", f"no chunks for agent {agent_cfg.agent_id}: run ingest first")
        chunks = load_chunks(chunks_path)
        if chunks:
            matrix = embedder.embed_batch([c.text for c in chunks])
        else:
            matrix = np.zeros((0, cfg.embedding.dim), dtype=np.float32)
        save_vectors(adir / "vectors", matrix, [c.chunk_id for c in chunks])
        Bm25Index.build(chunks).save(adir / "bm25.json")
    return EXIT_OK


def cmd_register(cfg: SystemConfig, agent_id: str | None = None) -> int:
    registry = RouterRegistry()
    registry_path = cfg.registry_json()
    if registry_path.exists():
        registry = RouterRegistry.load(registry_path, cfg.registry_vectors())
    for agent_cfg in _select_agent_cfgs(cfg, agent_id):
        adir = cfg.agent_dir(agent_cfg.agent_id)
        if not (adir / "vectors.manifest.json").exists():
            return _fail("register", f"no index for agent {agent_cfg.agent_id}: run build-index first")
        matrix, chunk_ids = load_vectors(adir / "vectors")
        if not chunk_ids:
            continue
        profile = build_profile(agent_cfg.agent_id, chunk_ids, matrix)
        save_profile(profile, adir / "profile.json", adir / "centroids")
        registry.register(export_centroids(profile))
    registry.save(registry_path, cfg.registry_vectors())
    print(
        json.dumps(
            {"agents": registry.agent_count, "centroids": len(registry.entries)}, sort_keys=True
        )
    )
    return EXIT_OK


def _load_agents(cfg: SystemConfig, backend, embedder, retrieval: str | None = None) -> dict[str, Agent]:
    agents: dict[str, Agent] = {}
    for agent_cfg in cfg.agents:
        if retrieval:
            agent_cfg = AgentConfig(
                agent_id=agent_cfg.agent_id,
                category=agent_cfg.category,
                retrieval_method=retrieval,
                retrieval_depth=agent_cfg.retrieval_depth,
                min_keep=agent_cfg.min_keep,
                chunking=agent_cfg.chunking,
                rerank_threshold=agent_cfg.rerank_threshold,
            )
        adir = cfg.agent_dir(agent_cfg.agent_id)
        chunks = load_chunks(adir / "chunks.jsonl")
        dense = DenseIndex.load(adir / "vectors")
        bm25 = Bm25Index.load(adir / "bm25.json")
        agents[agent_cfg.agent_id] = Agent(agent_cfg, chunks, dense, bm25, embedder, backend)
    return agents


def _prompt_hashes(backend) -> list[str]:
    return [call.prompt_sha256 for call in getattr(backend, "calls", [])]


def cmd_ask(
    cfg: SystemConfig,
    question: str,
    max_agents: int | None = None,
    multihop: bool = False,
    strategy: str | None = None,
    max_rounds: int | None = None,
    trace_path: str | None = None,
) -> int:
    if not cfg.registry_json().exists():
        return _fail("ask", "no registry: run register first")
    backend = make_chat_backend(cfg.chat)
    embedder = make_embedder(cfg.embedding)
    registry = RouterRegistry.load(cfg.registry_json(), cfg.registry_vectors())
    agents = _load_agents(cfg, backend, embedder)
    max_agents = max_agents or cfg.max_agents
    trace: dict = {"question": question, "max_agents": max_agents}
    code = EXIT_OK
    try:
        if multihop:
            plan_strategy = _STRATEGY_BY_FLAG[strategy] if strategy else cfg.strategy
            result = run_plan(
                question,
                plan_strategy,
                registry,
                agents,
                backend,
                embedder,
                max_rounds=max_rounds or cfg.max_rounds,
                max_agents=max_agents,
                parallelism=cfg.parallelism,
            )
            print(result.final_answer)
            trace.update(
                {
                    "mode": "multi_hop",
                    "strategy": plan_strategy.value,
                    "status": result.status,
                    "final_answer": result.final_answer,
                    "records": [
                        {"question": r.question, "answer": r.answer, "round": r.round}
                        for r in result.records
                    ],
                    "rounds": [
                        {
                            "round": r.round,
                            "question": r.question,
                            "answer": r.answer,
                            "selected_agents": list(r.selected_agent_ids),
                            "verdicts": r.verdicts,
                        }
                        for r in result.rounds
                    ],
                    "usage": {
                        "prompt_tokens": result.usage.prompt_tokens,
                        "completion_tokens": result.usage.completion_tokens,
                    },
                }
            )
        else:
            routed = route_and_answer(
                question,
                registry,
                agents,
                backend,
                embedder,
                max_agents=max_agents,
                parallelism=cfg.parallelism,
            )
            print(routed.final_answer)
            trace.update(
                {
                    "mode": "single_hop",
                    "final_answer": routed.final_answer,
                    "selected_agents": list(routed.selected_agent_ids),
                    "verdicts": routed.verdicts,
                    "usage": {
                        "prompt_tokens": routed.usage.prompt_tokens,
                        "completion_tokens": routed.usage.completion_tokens,
                    },
                }
            )
    except Exception as exc:
        trace["error"] = str(exc)
        code = _fail("ask", str(exc), EXIT_PARTIAL)
    trace["prompt_sha256"] = _prompt_hashes(backend)
    if trace_path:
        Path(trace_path).parent.mkdir(parents=True, exist_ok=True)
        Path(trace_path).write_text(
            json.dumps(trace, sort_keys=True, ensure_ascii=False, indent=2), encoding="utf-8"
        )
    return code


def cmd_eval(
    cfg: SystemConfig,
    dataset: str,
    report_path: str,
    strategy: str | None = None,
    modes: list[str] | None = None,
    agent_mode: str = AGENTS_SELECTED,
    retrieval: str | None = None,
    max_agents: int | None = None,
    judge: bool = False,
) -> int:
    if not Path(dataset).exists():
        return _fail("eval", f"dataset does not exist: {dataset}")
    if not cfg.registry_json().exists():
        return _fail("eval", "no registry: run register first")
    backend = make_chat_backend(cfg.chat)
    embedder = make_embedder(cfg.embedding)
    registry = RouterRegistry.load(cfg.registry_json(), cfg.registry_vectors())
    agents = _load_agents(cfg, backend, embedder, retrieval=retrieval)
    system = EvalSystem(
        registry=registry,
        agents=agents,
        backend=backend,
        embedder=embedder,
        max_agents=max_agents or cfg.max_agents,
        strategy=_STRATEGY_BY_FLAG[strategy] if strategy else cfg.strategy,
        max_rounds=cfg.max_rounds,
        agent_mode=agent_mode,
        parallelism=cfg.parallelism,
    )
    items = load_eval_items(dataset)
    report = run_eval(
        items, system, modes=modes or ["with_rag"], judge_backend=backend if judge else None
    )
    out = Path(report_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.with_suffix(".json").write_text(
        json.dumps(report.to_json(), sort_keys=True, ensure_ascii=False, indent=2),
        encoding="utf-8",
    )
    out.with_suffix(".txt").write_text(report.table() + "\n", encoding="utf-8")
    print(report.table())
    hard_failures = sum(
        1 for outcomes in report.outcomes.values() for o in outcomes if o.error is not None
    )
    return EXIT_PARTIAL if hard_failures else EXIT_OK


def cmd_inspect(cfg: SystemConfig) -> int:
    summary: dict = {"agents": [], "templates": sorted(TEMPLATES)}
    if cfg.registry_json().exists():
        registry = RouterRegistry.load(cfg.registry_json(), cfg.registry_vectors())
        summary["registry"] = {
            "agents": registry.agent_count,
            "centroids": len(registry.entries),
        }
    for agent_cfg in cfg.agents:
        entry = {"agent_id": agent_cfg.agent_id, "category": agent_cfg.category}
        profile_path = cfg.agent_dir(agent_cfg.agent_id) / "profile.json"
        if profile_path.exists():
            profile = load_profile(profile_path, cfg.agent_dir(agent_cfg.agent_id) / "centroids")
            entry["chunks"] = profile.num_chunks
            entry["clusters"] = profile.num_clusters
        summary["agents"].append(entry)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ragroute", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="Path to the system config JSON")

    p = sub.add_parser("ingest", help="Chunk the corpus into per-agent chunk files")
    add_common(p)
    p.add_argument("--corpus", help="Override corpus path")
    p.add_argument("--chunk-tokens", type=int)
    p.add_argument("--overlap-tokens", type=int)
    p.add_argument("--agent")

    p = sub.add_parser("build-index", help="Embed chunks and build retrieval indexes")
    add_common(p)
    p.add_argument("--agent")

    p = sub.add_parser("register", help="Cluster chunks and push centroids to the registry")
    add_common(p)
    p.add_argument("--agent")

    p = sub.add_parser("ask", help="Answer one question")
    add_common(p)
    p.add_argument("--question", required=True)
    p.add_argument("--max-agents", type=int)
    p.add_argument("--multihop", action="store_true")
    p.add_argument("--strategy", choices=sorted(_STRATEGY_BY_FLAG))
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--trace", dest="trace_path")

    p = sub.add_parser("eval", help="Run an eval dataset and write a report")
    add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--strategy", choices=sorted(_STRATEGY_BY_FLAG))
    p.add_argument("--mode", action="append", choices=["raw_model", "with_rag"])
    p.add_argument(
        "--agent-mode",
        choices=[AGENTS_SELECTED, AGENTS_ALL, AGENTS_RAW_KNOWLEDGE],
        default=AGENTS_SELECTED,
    )
    p.add_argument("--retrieval", choices=["dense", "bm25", "mixture"])
    p.add_argument("--max-agents", type=int)
    p.add_argument("--judge", action="store_true")

    p = sub.add_parser("inspect", help="Print registry and profile summaries")
    add_common(p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = SystemConfig.from_file(args.config)
        if args.command == "ingest":
            if args.corpus:
                cfg.corpus_path = Path(args.corpus)
            if args.chunk_tokens or args.overlap_tokens:
                chunking = ChunkingConfig(
                    args.chunk_tokens or cfg.chunking.chunk_tokens,
                    args.overlap_tokens if args.overlap_tokens is not None else cfg.chunking.overlap_tokens,
                )
                cfg.chunking = chunking
                cfg.agents = [
                    AgentConfig(
                        agent_id=a.agent_id,
                        category=a.category,
                        retrieval_method=a.retrieval_method,
                        retrieval_depth=a.retrieval_depth,
                        min_keep=a.min_keep,
                        chunking=chunking,
                        rerank_threshold=a.rerank_threshold,
                    )
                    for a in cfg.agents
                ]
            return cmd_ingest(cfg, agent_id=args.agent)
        if args.command == "build-index":
            return cmd_build_index(cfg, agent_id=args.agent)
        if args.command == "register":
            return cmd_register(cfg, agent_id=args.agent)
        if args.command == "ask":
            return cmd_ask(
                cfg,
                question=args.question,
                max_agents=args.max_agents,
                multihop=args.multihop,
                strategy=args.strategy,
                max_rounds=args.max_rounds,
                trace_path=args.trace_path,
            )
        if args.command == "eval":
            return cmd_eval(
                cfg,
                dataset=args.dataset,
                report_path=args.report,
                strategy=args.strategy,
                modes=args.mode,
                agent_mode=args.agent_mode,
                retrieval=args.retrieval,
                max_agents=args.max_agents,
                judge=args.judge,
            )
        return cmd_inspect(cfg)
    except ConfigError as exc:
        return _fail(args.command, str(exc))
    except OSError as exc:
        return _fail(args.command, str(exc))


if __name__ == "__main__":
    sys.exit(main())
