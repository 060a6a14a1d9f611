"""Multi-hop planning: decompose, pick a fresh subquestion, route it, judge
progress, and defend a final answer.

Three strategies:

* ``greedy``: the full round loop. Split once up front, then per round pick
  one fresh subquestion, route it, append the (question, answer) record, and
  ask the judge whether the original query is now answerable; stop on "yes"
  or after ``max_rounds`` routed rounds, and always finish with the defender.
* ``presplit``: split once, answer every subquestion in order (each refined
  against prior answers), then defend.
* ``one_shot``: route the raw query once; the curated answer is final.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .agent import MULTI_HOP, Agent
from .llm import (
    ParsedJudgment,
    ReplyParseError,
    TokenUsage,
    extract_numbered_questions,
    parse_agent_reply,
    parse_judgment,
)
from .prompts import (
    DEFENDER,
    JUDGER_SPLITTER,
    POLISH_QUERY,
    SELECTOR_PAIRWISE,
    SPLITTER_FIRST_ROUND,
    render_prompt,
)
from .router import RouterRegistry, RoutedAnswer, route_and_answer


class PlanError(RuntimeError):
    pass


class PlanStrategy(str, Enum):
    ONE_SHOT = "one_shot"
    PRESPLIT = "presplit"
    GREEDY = "greedy"


RUNNING = "running"
ANSWERABLE = "answerable"
EXHAUSTED = "exhausted"

ONE_SHOT_MIN_KEEP = 20
ITERATIVE_MIN_KEEP = 10


@dataclass(frozen=True)
class QARecord:
    question: str
    answer: str
    round: int


@dataclass
class PlanState:
    query: str
    max_rounds: int
    records: list[QARecord] = field(default_factory=list)
    round: int = 0
    status: str = RUNNING


@dataclass(frozen=True)
class SelectedQuestion:
    text: str
    polished: bool = False
    warning: bool = False


@dataclass(frozen=True)
class RoundTrace:
    round: int
    question: str
    answer: str
    selected_agent_ids: tuple[str, ...]
    verdicts: dict[str, str]
    retrieved_doc_slots: dict[str, tuple[str, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class PlanResult:
    final_answer: str
    records: tuple[QARecord, ...]
    usage: TokenUsage
    status: str
    rounds: tuple[RoundTrace, ...] = ()


class UsageMeter:
    def __init__(self) -> None:
        self.total = TokenUsage()

    def chat(self, backend, messages) -> str:
        text, usage = backend.chat(messages)
        self.total = self.total + usage
        return text


def split_first_round(query: str, backend, meter: UsageMeter | None = None) -> list[str]:
    """First-round decomposition; re-asks once before giving up."""
    meter = meter or UsageMeter()
    messages = render_prompt(SPLITTER_FIRST_ROUND, {"question": query})
    for attempt in range(2):
        questions = extract_numbered_questions(meter.chat(backend, messages))
        if questions:
            return questions
    raise PlanError("splitter produced no numbered subquestions")


def judge_and_split(
    query: str, records: list[QARecord], backend, meter: UsageMeter | None = None
) -> ParsedJudgment:
    """Judge answerability from the records; on "no" the response carries the
    next round's candidate subquestions. Re-asks once on a bad parse."""
    meter = meter or UsageMeter()
    messages = render_prompt(JUDGER_SPLITTER, {"query": query, "records": records})
    for attempt in range(2):
        try:
            return parse_judgment(meter.chat(backend, messages))
        except ReplyParseError:
            if attempt == 1:
                raise
    raise AssertionError("unreachable")


def _pairwise_ok(candidate: str, asked: str, backend, meter: UsageMeter) -> bool:
    messages = render_prompt(
        SELECTOR_PAIRWISE, {"question_1": asked, "question_2": candidate}
    )
    text = meter.chat(backend, messages)
    for line in text.splitlines():
        if "meets both requirements" in line.lower():
            return "yes" in line.lower().split(":", 1)[-1]
    return False


def polish_query(
    query: str, records: list[QARecord], backend, meter: UsageMeter | None = None
) -> str | None:
    """Rewrite a query against the records; None when the reply is unusable."""
    meter = meter or UsageMeter()
    text = meter.chat(backend, render_prompt(POLISH_QUERY, {"query": query, "records": records}))
    for line in text.splitlines():
        if line.lower().lstrip().startswith("polished query"):
            polished = line.split(":", 1)[-1].strip()
            if polished:
                return polished
    return None


def select_subquestion(
    candidates: list[str],
    asked: list[str],
    records: list[QARecord],
    backend,
    meter: UsageMeter | None = None,
) -> SelectedQuestion:
    """Pick the first candidate that is fresh and unambiguous.

    Each candidate is checked pairwise against every previously asked
    question, short-circuiting on the first failure. If nothing passes, the
    first candidate is polished against the records; if even that parse
    fails, it is returned raw with a warning flag.
    """
    if not candidates:
        raise PlanError("no candidate subquestions")
    meter = meter or UsageMeter()
    for candidate in candidates:
        if all(_pairwise_ok(candidate, prior, backend, meter) for prior in asked):
            return SelectedQuestion(candidate)
    polished = polish_query(candidates[0], records, backend, meter)
    if polished is not None:
        return SelectedQuestion(polished, polished=True)
    return SelectedQuestion(candidates[0], warning=True)


def defend(
    query: str, records: list[QARecord], backend, meter: UsageMeter | None = None
) -> str:
    """Final answer from the records; re-asks once on an unlabeled reply."""
    meter = meter or UsageMeter()
    messages = render_prompt(DEFENDER, {"query": query, "records": records})
    for attempt in range(2):
        reply = parse_agent_reply(meter.chat(backend, messages))
        if not reply.degraded:
            return reply.answer
    raise PlanError("defender reply had no Answer section")


def run_plan(
    query: str,
    strategy: PlanStrategy | str,
    registry: RouterRegistry,
    agents: dict[str, Agent],
    backend,
    embedder,
    max_rounds: int = 5,
    max_agents: int = 5,
    parallelism: int = 1,
) -> PlanResult:
    strategy = PlanStrategy(strategy)
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    meter = UsageMeter()
    state = PlanState(query=query, max_rounds=max_rounds)
    rounds: list[RoundTrace] = []

    def route(question: str, min_keep: int) -> RoutedAnswer:
        routed = route_and_answer(
            question,
            registry,
            agents,
            backend,
            embedder,
            max_agents=max_agents,
            mode=MULTI_HOP,
            history=state.records,
            min_keep=min_keep,
            parallelism=parallelism,
        )
        meter.total = meter.total + routed.usage
        return routed

    def doc_slots(routed: RoutedAnswer) -> dict[str, tuple[str, ...]]:
        return {
            a.agent_id: tuple(agents[a.agent_id].doc_ids_for(a.hits))
            for a in routed.agent_answers
        }

    if strategy is PlanStrategy.ONE_SHOT:
        routed = route(query, ONE_SHOT_MIN_KEEP)
        state.status = ANSWERABLE
        rounds.append(
            RoundTrace(
                1, query, routed.final_answer, routed.selected_agent_ids, routed.verdicts,
                doc_slots(routed),
            )
        )
        return PlanResult(
            final_answer=routed.final_answer,
            records=(),
            usage=meter.total,
            status=state.status,
            rounds=tuple(rounds),
        )

    if strategy is PlanStrategy.PRESPLIT:
        subquestions = split_first_round(query, backend, meter)
        for ordinal, sub in enumerate(subquestions, 1):
            question = sub
            if state.records:
                polished = polish_query(sub, state.records, backend, meter)
                if polished is not None:
                    question = polished
            routed = route(question, ITERATIVE_MIN_KEEP)
            state.records.append(QARecord(question, routed.final_answer, ordinal))
            rounds.append(
                RoundTrace(
                    ordinal, question, routed.final_answer, routed.selected_agent_ids,
                    routed.verdicts, doc_slots(routed),
                )
            )
        state.status = EXHAUSTED
        final = defend(query, state.records, backend, meter)
        return PlanResult(final, tuple(state.records), meter.total, state.status, tuple(rounds))

    # greedy round loop
    candidates = split_first_round(query, backend, meter)
    asked: list[str] = []
    while state.round < state.max_rounds:
        state.round += 1
        selected = select_subquestion(candidates, asked, state.records, backend, meter)
        routed = route(selected.text, ITERATIVE_MIN_KEEP)
        state.records.append(QARecord(selected.text, routed.final_answer, state.round))
        asked.append(selected.text)
        rounds.append(
            RoundTrace(
                state.round,
                selected.text,
                routed.final_answer,
                routed.selected_agent_ids,
                routed.verdicts,
                doc_slots(routed),
            )
        )
        judgment = judge_and_split(query, state.records, backend, meter)
        if judgment.answerable:
            state.status = ANSWERABLE
            break
        candidates = extract_numbered_questions(judgment.response)
        if not candidates:
            # Judge said "not answerable" but raised nothing new to ask.
            state.status = EXHAUSTED
            break
    if state.status == RUNNING:
        state.status = EXHAUSTED
    final = defend(query, state.records, backend, meter)
    return PlanResult(final, tuple(state.records), meter.total, state.status, tuple(rounds))
