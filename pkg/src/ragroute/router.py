"""Centroid registry, top-k agent selection, response evaluation, curation.

The router only ever sees cluster centroids, never chunk text. Selection
scans every registered centroid by cosine similarity to the query and keeps
the first ``max_agents`` distinct agents in score order.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .agent import MULTI_HOP, SINGLE_HOP, Agent, AgentAnswer, AgentError
from .boundary import CentroidEntry
from .embedding import load_vectors, save_vectors
from .llm import ParsedAgentReply, TokenUsage, parse_agent_reply
from .prompts import (
    AGENT_ANSWER_MULTI_HOP,
    AGENT_ANSWER_SINGLE_HOP,
    ROUTER_FINALIZE_MULTI_HOP,
    ROUTER_FINALIZE_SINGLE_HOP,
    render_prompt,
)
from .retrieval import rerank

GOOD_RELIABLE = "good_reliable"
CONJECTURE = "conjecture"
UNHELPFUL = "unhelpful"


class RouterError(RuntimeError):
    pass


class RouterRegistry:
    """Registry of exported centroids; re-registering an agent replaces all
    of its previous entries (cluster counts may shrink between builds)."""

    def __init__(self) -> None:
        self.entries: list[CentroidEntry] = []

    @property
    def agent_ids(self) -> list[str]:
        return sorted({e.agent_id for e in self.entries})

    @property
    def agent_count(self) -> int:
        return len({e.agent_id for e in self.entries})

    def register(self, entries: Iterable[CentroidEntry]) -> None:
        new = list(entries)
        if not new:
            return
        dims = {e.centroid.shape[0] for e in new} | {e.centroid.shape[0] for e in self.entries}
        if len(dims) > 1:
            raise RouterError(f"centroid dimension mismatch: {sorted(dims)}")
        incoming_agents = {e.agent_id for e in new}
        self.entries = [e for e in self.entries if e.agent_id not in incoming_agents]
        self.entries.extend(new)

    def save(self, json_path: str | Path, vectors_base: str | Path) -> None:
        order = sorted(self.entries, key=lambda e: (e.agent_id, e.cluster_id))
        matrix = np.stack([e.centroid for e in order]) if order else np.zeros((0, 0), np.float32)
        ids = [f"{e.agent_id}#{e.cluster_id}" for e in order]
        save_vectors(vectors_base, matrix, ids)
        payload = {
            "entries": [
                {"agent_id": e.agent_id, "cluster_id": e.cluster_id, "row": i}
                for i, e in enumerate(order)
            ]
        }
        Path(json_path).write_text(
            json.dumps(payload, sort_keys=True, ensure_ascii=False), encoding="utf-8"
        )

    @classmethod
    def load(cls, json_path: str | Path, vectors_base: str | Path) -> "RouterRegistry":
        payload = json.loads(Path(json_path).read_text(encoding="utf-8"))
        matrix, _ = load_vectors(vectors_base)
        registry = cls()
        registry.entries = [
            CentroidEntry(
                agent_id=rec["agent_id"],
                cluster_id=int(rec["cluster_id"]),
                centroid=matrix[int(rec["row"])],
            )
            for rec in payload["entries"]
        ]
        return registry


def select_agents(registry: RouterRegistry, query_vec: np.ndarray, max_agents: int) -> list[str]:
    """Distinct agents in descending best-centroid order, capped at max_agents.

    Centroids are scanned in descending cosine similarity (ties by agent_id
    then cluster_id); each agent is taken the first time one of its centroids
    appears.
    """
    if not registry.entries:
        raise RouterError("no agents registered")
    if max_agents < 1:
        raise ValueError("max_agents must be >= 1")
    q = np.asarray(query_vec, dtype=np.float64)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise ValueError("undefined similarity: zero query vector")
    unit_q = q / qn
    scored = []
    for entry in registry.entries:
        c = entry.centroid.astype(np.float64)
        sim = float(c @ unit_q / np.linalg.norm(c))
        scored.append((-sim, entry.agent_id, entry.cluster_id))
    scored.sort()
    selected: list[str] = []
    for _, agent_id, _ in scored:
        if agent_id not in selected:
            selected.append(agent_id)
            if len(selected) == max_agents:
                break
    return selected


@dataclass(frozen=True)
class RoutedAnswer:
    final_answer: str
    selected_agent_ids: tuple[str, ...]
    verdicts: dict[str, str]
    usage: TokenUsage
    agent_answers: tuple[AgentAnswer, ...] = ()
    evaluation_text: str = ""
    analysis_text: str = ""


_BULLET_INDEX_RE = re.compile(r"respon\w*\s+((?:\d+[\s,]*(?:and|&)?[\s,]*)+)", re.I)
_NEGATIVE_MARKERS = ("unreliable", "not reliable", "unhelpful", "incorrect", "invalid", "flawed")


def _verdicts_from_evaluation(evaluation: str, count: int) -> list[str]:
    """Map evaluation bullets onto one verdict per response position.

    Keyword rule: a negative marker wins, then "conjectur", then "reliable";
    positions never mentioned stay unhelpful.
    """
    verdicts = [UNHELPFUL] * count
    for line in evaluation.splitlines():
        m = _BULLET_INDEX_RE.search(line)
        if not m:
            continue
        indices = [int(tok) for tok in re.findall(r"\d+", m.group(1))]
        lowered = line.lower()
        if any(marker in lowered for marker in _NEGATIVE_MARKERS):
            verdict = UNHELPFUL
        elif "conjectur" in lowered:
            verdict = CONJECTURE
        elif "reliable" in lowered:
            verdict = GOOD_RELIABLE
        else:
            verdict = UNHELPFUL
        for idx in indices:
            if 1 <= idx <= count:
                verdicts[idx - 1] = verdict
    return verdicts


def _split_router_sections(text: str) -> tuple[str, str, str]:
    labels = {}
    for name in ("evaluation", "analysis", "answer"):
        matches = list(re.finditer(rf"(?im)^[ \t]*{name}[ \t]*:", text))
        labels[name] = matches
    if not labels["answer"]:
        raise RouterError("unparseable router output: no Answer section")
    answer_m = labels["answer"][-1]
    analysis_candidates = [m for m in labels["analysis"] if m.start() < answer_m.start()]
    analysis_m = analysis_candidates[-1] if analysis_candidates else None
    eval_end = analysis_m.start() if analysis_m else answer_m.start()
    eval_candidates = [m for m in labels["evaluation"] if m.start() < eval_end]
    eval_m = eval_candidates[0] if eval_candidates else None
    evaluation = text[eval_m.end() : eval_end].strip() if eval_m else ""
    analysis = text[analysis_m.end() : answer_m.start()].strip() if analysis_m else ""
    answer = text[answer_m.end() :].strip()
    return evaluation, analysis, answer


def evaluate_and_curate(
    question: str,
    answers: list[AgentAnswer],
    backend,
    mode: str = SINGLE_HOP,
    history: Iterable = (),
) -> RoutedAnswer:
    """Ask the curation prompt over all agent responses and parse verdicts."""
    if not answers:
        raise RouterError("no agent answers to curate")
    responses = [a.raw_text for a in answers]
    if mode == MULTI_HOP:
        messages = render_prompt(
            ROUTER_FINALIZE_MULTI_HOP,
            {"question": question, "responses": responses, "history": list(history)},
        )
    else:
        messages = render_prompt(
            ROUTER_FINALIZE_SINGLE_HOP, {"question": question, "responses": responses}
        )
    usage = TokenUsage()
    text = ""
    for attempt in range(2):
        text, call_usage = backend.chat(messages)
        usage = usage + call_usage
        try:
            evaluation, analysis, answer = _split_router_sections(text)
            break
        except RouterError:
            if attempt == 1:
                raise
    by_position = _verdicts_from_evaluation(evaluation, len(answers))
    verdicts = {a.agent_id: v for a, v in zip(answers, by_position)}
    return RoutedAnswer(
        final_answer=answer,
        selected_agent_ids=tuple(a.agent_id for a in answers),
        verdicts=verdicts,
        usage=usage,
        agent_answers=tuple(answers),
        evaluation_text=evaluation,
        analysis_text=analysis,
    )


def _fan_out(
    question: str,
    agents: list[Agent],
    mode: str,
    history: Iterable,
    min_keep: int | None,
    parallelism: int,
) -> list[AgentAnswer | AgentError]:
    def ask(agent: Agent):
        try:
            return agent.answer_question(question, mode=mode, history=history, min_keep=min_keep)
        except AgentError as exc:
            return exc

    if parallelism > 1 and len(agents) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(ask, agents))
    return [ask(agent) for agent in agents]


def route_and_answer(
    question: str,
    registry: RouterRegistry,
    agents: dict[str, Agent],
    backend,
    embedder,
    max_agents: int = 5,
    mode: str = SINGLE_HOP,
    history: Iterable = (),
    min_keep: int | None = None,
    parallelism: int = 1,
    selected_override: list[str] | None = None,
) -> RoutedAnswer:
    """Select agents, fan the question out, and curate one final answer.

    Agents that hard-fail are recorded as unhelpful with an error note; the
    query proceeds with the answers that did arrive. ``selected_override``
    bypasses centroid selection (used by the all-agents baseline).
    """
    if selected_override is not None:
        selected = list(selected_override)
    else:
        query_vec = embedder.embed_batch([question])[0]
        selected = select_agents(registry, query_vec, max_agents)
    history = list(history)
    results = _fan_out(
        question, [agents[a] for a in selected], mode, history, min_keep, parallelism
    )
    answers = [r for r in results if isinstance(r, AgentAnswer)]
    failed = {r.agent_id: str(r) for r in results if isinstance(r, AgentError)}
    if not answers:
        raise RouterError(f"all selected agents failed: {failed}")
    routed = evaluate_and_curate(question, answers, backend, mode=mode, history=history)
    verdicts = dict(routed.verdicts)
    for agent_id in failed:
        verdicts[agent_id] = UNHELPFUL
    usage = routed.usage
    for a in answers:
        usage = usage + a.usage
    return RoutedAnswer(
        final_answer=routed.final_answer,
        selected_agent_ids=tuple(selected),
        verdicts=verdicts,
        usage=usage,
        agent_answers=routed.agent_answers,
        evaluation_text=routed.evaluation_text,
        analysis_text=routed.analysis_text,
    )


def route_raw_knowledge(
    question: str,
    registry: RouterRegistry,
    agents: dict[str, Agent],
    backend,
    embedder,
    max_agents: int = 5,
    mode: str = SINGLE_HOP,
    min_keep: int | None = None,
) -> RoutedAnswer:
    """Baseline variant: selected agents only retrieve; their chunks are
    forwarded to one generation call instead of per-agent answers."""
    query_vec = embedder.embed_batch([question])[0]
    selected = select_agents(registry, query_vec, max_agents)
    blocks: list[str] = []
    answers: list[AgentAnswer] = []
    for agent_id in selected:
        agent = agents[agent_id]
        if len(agent.dense_index) == 0:
            answers.append(
                AgentAnswer(agent_id, ParsedAgentReply("", "I don't know.", True), "", (), TokenUsage())
            )
            continue
        hits = agent.retrieve(question)
        kept = rerank(
            hits,
            query_vec,
            agent.dense_index,
            min_keep=min_keep or agent.config.min_keep,
            keep_threshold=agent.config.rerank_threshold,
        )
        blocks.extend(agent._document_blocks(kept))
        answers.append(AgentAnswer(agent_id, ParsedAgentReply("", "", False), "", tuple(kept), TokenUsage()))
    template = AGENT_ANSWER_MULTI_HOP if mode == MULTI_HOP else AGENT_ANSWER_SINGLE_HOP
    slots: dict = {"question": question, "documents": blocks}
    if mode == MULTI_HOP:
        slots["history"] = []
    text, usage = backend.chat(render_prompt(template, slots))
    reply = parse_agent_reply(text)
    return RoutedAnswer(
        final_answer=reply.answer,
        selected_agent_ids=tuple(selected),
        verdicts={},
        usage=usage,
        agent_answers=tuple(answers),
    )
