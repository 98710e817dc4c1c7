"""Sequential session loop: propose, score, ask, update, and guess.

One session advances strictly sequentially.  ``run_turn`` picks the next
question for the configured strategy, ``apply_answer`` folds the observed
answer into the history and belief, and ``run_game`` drives a full simulated
match against an answering backend until a correct guess or budget
exhaustion.  Interactive frontends call ``run_turn``/``apply_answer``
directly and supply answers from a human.

Game transcripts serialize to a versioned JSON schema, one document per game
(JSONL when batched), and round-trip losslessly for resumable benchmarks.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from infogain.acquisition import (
    EstimatorKind,
    RowCache,
    ScoredQuestion,
    data_estimation_score,
    estimate_eig,
    estimate_pred_entropy,
    select_question,
)
from infogain.backends.base import Backend, BackendError
from infogain.belief import FilterConfig, FilterReport, Rejection, initial_belief, update_belief
from infogain.core import (
    Answer,
    AnswerOption,
    BeliefState,
    GuessQuestion,
    History,
    Hypothesis,
    Question,
    QuestionKind,
    make_guess_question,
)
from infogain.datasets import TargetEntry, evaluate_guess

SCHEMA_VERSION = 1

# Direct "Is it X?" candidates join the scored pool only once the belief is
# small enough that a guess can plausibly win on information grounds.
GUESS_CANDIDATE_LIMIT = 4


class StrategyKind(Enum):
    """Question-selection strategies."""

    EIG = "eig"
    ENTROPY = "entropy"
    NAIVE = "naive"
    DATA_ESTIMATION = "data-estimation"


class QuestionMode(Enum):
    """How candidate questions are generated each turn."""

    CONDITIONAL = "conditional"
    UNCONSTRAINED = "unconstrained"
    CONDITIONAL_WITH_FALLBACK = "conditional-with-fallback"


class Outcome(Enum):
    SUCCESS = "success"
    BUDGET_EXHAUSTED = "budget-exhausted"
    ABORTED = "aborted"


@dataclass(frozen=True)
class SessionConfig:
    """Everything that determines a session's behaviour besides the backends.

    ``budget`` and ``candidate_count`` default by question kind when left as
    None: 20 questions / 15 candidates for binary sessions, 5 turns / 8
    candidates for multiple-choice ones.
    """

    strategy: StrategyKind = StrategyKind.EIG
    question_kind: QuestionKind = QuestionKind.BINARY
    budget: int | None = None
    candidate_count: int | None = None
    filter: FilterConfig = field(default_factory=FilterConfig)
    question_mode: QuestionMode = QuestionMode.CONDITIONAL_WITH_FALLBACK
    seed: int = 0
    posterior_samples: int = 8

    def __post_init__(self) -> None:
        binary = self.question_kind is QuestionKind.BINARY
        if self.budget is None:
            object.__setattr__(self, "budget", 20 if binary else 5)
        if self.candidate_count is None:
            object.__setattr__(self, "candidate_count", 15 if binary else 8)
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.posterior_samples < 2:
            raise ValueError("posterior_samples must be >= 2")

    @property
    def guessing_enabled(self) -> bool:
        """Direct guesses only make sense when the target is a nameable entity."""
        return self.question_kind is QuestionKind.BINARY


@dataclass(frozen=True)
class SessionState:
    """Immutable snapshot of a session between operations.

    ``turn`` counts answered questions (guesses included).  ``pending`` is the
    question awaiting an answer, if any; ``candidates`` holds the scores from
    the most recent selection pass.
    """

    config: SessionConfig
    history: History = History()
    belief: BeliefState = BeliefState(())
    turn: int = 0
    pending: Question | None = None
    candidates: tuple[ScoredQuestion, ...] = ()
    used_fallback: bool = False


def start_session(config: SessionConfig, backend: Backend) -> tuple[SessionState, FilterReport | None]:
    """Fresh state plus the initial sampling report (None for the naive strategy)."""
    if config.strategy is StrategyKind.NAIVE:
        return SessionState(config=config), None
    belief, report = initial_belief(backend, config.filter)
    return SessionState(config=config, belief=belief), report


def turn_seed(seed: int, turn: int) -> int:
    """Deterministic per-turn seed, well-mixed across (seed, turn) pairs."""
    return int(np.random.SeedSequence([seed, turn]).generate_state(1)[0])


def maybe_guess(belief: BeliefState, scored: list[ScoredQuestion]) -> Question | None:
    """The guess to ask now, if any.

    Triggers when the belief has collapsed to a single candidate, or when the
    top-scored candidate is itself a direct guess (detected structurally via
    the guess-question subtype, never by parsing text).
    """
    if len(belief) == 1:
        return make_guess_question(belief.hypotheses[0], qid=f"guess-t{belief.turn + 1}")
    if scored:
        top = scored[select_question(list(scored))].question
        if isinstance(top, GuessQuestion):
            return top
    return None


def _score(
    question: Question,
    state: SessionState,
    backend: Backend,
    cache: RowCache,
) -> ScoredQuestion:
    strategy = state.config.strategy
    if strategy is StrategyKind.EIG:
        return estimate_eig(question, state.belief, backend, cache)
    if strategy is StrategyKind.ENTROPY:
        return estimate_pred_entropy(question, state.belief, backend, cache)
    if strategy is StrategyKind.DATA_ESTIMATION:
        return data_estimation_score(
            question, state.history, backend, k=state.config.posterior_samples
        )
    raise ValueError(f"strategy {strategy} does not score questions")


def run_turn(state: SessionState, backend: Backend) -> tuple[Question, SessionState]:
    """Choose the next question and return it with the updated pending state.

    Scoring strategies draw M candidates (conditioned on the belief when the
    mode and belief size allow), append direct-guess candidates once the
    belief is small, score everything with the strategy's estimator, and take
    the best.  The naive strategy draws a single question with no scoring.
    An empty belief downgrades the turn to a naive draw, recorded as a
    fallback.  Question-generation failures propagate as backend errors for
    the caller to record.
    """
    config = state.config
    if state.pending is not None:
        raise ValueError("previous question still awaits an answer")
    if state.turn >= config.budget:
        raise ValueError("budget exhausted")

    if config.strategy is StrategyKind.NAIVE:
        chosen = backend.propose_question_naive(state.history)
        return chosen, replace(state, pending=chosen, candidates=(), used_fallback=False)

    if len(state.belief) == 0:
        chosen = backend.propose_question_naive(state.history)
        return chosen, replace(state, pending=chosen, candidates=(), used_fallback=True)

    if config.guessing_enabled and len(state.belief) == 1:
        guess = maybe_guess(state.belief, [])
        assert guess is not None
        return guess, replace(state, pending=guess, candidates=(), used_fallback=False)

    conditional = config.question_mode is QuestionMode.CONDITIONAL or (
        config.question_mode is QuestionMode.CONDITIONAL_WITH_FALLBACK
        and len(state.belief) >= 2
    )
    if conditional:
        questions = backend.propose_questions_conditional(
            state.history, state.belief.hypotheses, config.candidate_count
        )
    else:
        questions = backend.propose_questions_unconstrained(
            state.history, config.candidate_count
        )
    if config.guessing_enabled and len(state.belief) <= GUESS_CANDIDATE_LIMIT:
        questions = list(questions) + [
            make_guess_question(h, qid=f"guess-t{state.turn + 1}-{i + 1}")
            for i, h in enumerate(state.belief)
        ]

    cache = RowCache(backend)
    scored = [_score(q, state, backend, cache) for q in questions]
    guess = maybe_guess(state.belief, scored) if config.guessing_enabled else None
    chosen = guess if guess is not None else scored[select_question(scored)].question
    return chosen, replace(
        state, pending=chosen, candidates=tuple(scored), used_fallback=False
    )


def apply_answer(
    state: SessionState, answer: Answer, backend: Backend
) -> tuple[SessionState, FilterReport | None, bool]:
    """Fold an answer into the session; returns (state, filter report, solved).

    ``solved`` is True exactly when the pending question was a direct guess
    answered Yes.  The belief refresh is skipped in that case (the game is
    over) and always for the naive strategy (which keeps no belief).
    """
    pending = state.pending
    if pending is None:
        raise ValueError("no question awaits an answer")
    if answer.question_id != pending.id:
        raise ValueError(f"answer targets {answer.question_id!r}, pending is {pending.id!r}")
    if answer.option_index >= len(pending.options):
        raise ValueError(f"option index {answer.option_index} out of range for {pending.id!r}")

    history = state.history.append(pending, answer)
    solved = isinstance(pending, GuessQuestion) and answer.option_index == 0

    report: FilterReport | None = None
    belief = state.belief
    if solved:
        assert isinstance(pending, GuessQuestion)
        belief = BeliefState.of([pending.guess], turn=len(history))
    elif state.config.strategy is not StrategyKind.NAIVE:
        belief, report = update_belief(
            state.belief, history.pairs[-1], history, backend, state.config.filter
        )

    new_state = replace(
        state, history=history, belief=belief, turn=state.turn + 1, pending=None
    )
    return new_state, report, solved


def greedy_evaluation_guess(
    belief: BeliefState, history: History, backend: Backend
) -> tuple[Hypothesis, bool]:
    """Single best guess for metrics, never added to the history.

    Returns (guess, fallback); fallback is True when the belief was empty and
    the guess had to come from a free greedy generation over the history.
    """
    if len(belief) > 0:
        return backend.greedy_guess(history, candidates=belief.hypotheses), False
    return backend.greedy_guess(history, candidates=None), True


@dataclass(frozen=True)
class CandidateScore:
    """One scored candidate, as recorded in transcripts (rows omitted)."""

    question_id: str
    text: str
    score: float
    estimator: str
    is_guess: bool


@dataclass(frozen=True)
class GuessRecord:
    turn: int
    text: str
    correct: bool


@dataclass(frozen=True)
class TurnRecord:
    """Everything observable about one completed turn."""

    index: int
    chosen: Question
    is_guess: bool
    candidates: tuple[CandidateScore, ...]
    answer: Answer
    answer_text: str
    report: FilterReport | None
    used_fallback: bool
    eval_guess: str | None
    eval_guess_correct: bool | None
    eval_guess_fallback: bool
    elapsed: float

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("turn index is 1-based")
        if self.elapsed < 0:
            raise ValueError("elapsed time must be >= 0")


@dataclass(frozen=True)
class GameRecord:
    """Full transcript of one game, serializable and round-trippable."""

    config: SessionConfig
    target_name: str
    target_alternatives: tuple[str, ...]
    turns: tuple[TurnRecord, ...]
    outcome: Outcome
    success_turn: int | None
    guesses: tuple[GuessRecord, ...]
    initial_report: FilterReport | None
    error: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if len(self.turns) > self.config.budget:
            raise ValueError("more turns than budget")
        if self.outcome is Outcome.SUCCESS:
            if self.success_turn is None:
                raise ValueError("success requires success_turn")
            if not any(g.turn == self.success_turn and g.correct for g in self.guesses):
                raise ValueError("success requires the matching correct guess on record")
        elif self.success_turn is not None:
            raise ValueError("success_turn only valid on success")

    @property
    def target(self) -> TargetEntry:
        return TargetEntry(self.target_name, self.target_alternatives)


def run_game(
    config: SessionConfig,
    entry: TargetEntry,
    questioner: Backend,
    answerer: Backend,
) -> GameRecord:
    """Simulate one full game of sequential questioning against ``entry``.

    The questioner never sees the target; the answerer only ever sees
    (target, question) and holds no state between calls.  Direct guesses are
    resolved by name matching against the entry (alternatives included), not
    by the answerer.  Hard backend failures end the game with an aborted
    outcome and the error message on record.
    """
    if questioner is answerer:
        raise ValueError("questioner and answerer must be distinct instances")
    target = Hypothesis(entry.name)
    turns: list[TurnRecord] = []
    guesses: list[GuessRecord] = []
    outcome = Outcome.BUDGET_EXHAUSTED
    success_turn: int | None = None
    error: str | None = None
    initial_report: FilterReport | None = None
    try:
        state, initial_report = start_session(config, questioner)
        while state.turn < config.budget:
            started = time.perf_counter()
            chosen, state = run_turn(state, questioner)
            if isinstance(chosen, GuessQuestion):
                correct = evaluate_guess(chosen.guess.text, entry)
                answer = Answer(chosen.id, 0 if correct else 1)
            else:
                answer = answerer.simulate_answer(
                    target, chosen, seed=turn_seed(config.seed, state.turn + 1)
                )
            pending_candidates = state.candidates
            used_fallback = state.used_fallback
            state, report, solved = apply_answer(state, answer, questioner)
            if isinstance(chosen, GuessQuestion):
                guesses.append(GuessRecord(state.turn, chosen.guess.text, solved))
            eval_hyp, eval_fb = greedy_evaluation_guess(state.belief, state.history, questioner)
            turns.append(
                TurnRecord(
                    index=state.turn,
                    chosen=chosen,
                    is_guess=isinstance(chosen, GuessQuestion),
                    candidates=tuple(
                        CandidateScore(
                            question_id=s.question.id,
                            text=s.question.text,
                            score=s.score,
                            estimator=s.estimator_kind.value,
                            is_guess=isinstance(s.question, GuessQuestion),
                        )
                        for s in pending_candidates
                    ),
                    answer=answer,
                    answer_text=chosen.options[answer.option_index].text,
                    report=report,
                    used_fallback=used_fallback,
                    eval_guess=eval_hyp.text,
                    eval_guess_correct=evaluate_guess(eval_hyp.text, entry),
                    eval_guess_fallback=eval_fb,
                    elapsed=time.perf_counter() - started,
                )
            )
            if solved:
                outcome = Outcome.SUCCESS
                success_turn = state.turn
                break
    except BackendError as exc:
        outcome = Outcome.ABORTED
        error = str(exc)
    return GameRecord(
        config=config,
        target_name=entry.name,
        target_alternatives=entry.alternatives,
        turns=tuple(turns),
        outcome=outcome,
        success_turn=success_turn,
        guesses=tuple(guesses),
        initial_report=initial_report,
        error=error,
    )


# --- serialization ---------------------------------------------------------


def config_to_dict(config: SessionConfig) -> dict:
    return {
        "strategy": config.strategy.value,
        "question_kind": config.question_kind.value,
        "budget": config.budget,
        "candidate_count": config.candidate_count,
        "filter": {
            "likelihood_threshold": config.filter.likelihood_threshold,
            "target_count": config.filter.target_count,
            "max_cycles": config.filter.max_cycles,
        },
        "question_mode": config.question_mode.value,
        "seed": config.seed,
        "posterior_samples": config.posterior_samples,
    }


def config_from_dict(data: dict) -> SessionConfig:
    flt = data.get("filter", {})
    return SessionConfig(
        strategy=StrategyKind(data["strategy"]),
        question_kind=QuestionKind(data["question_kind"]),
        budget=data["budget"],
        candidate_count=data["candidate_count"],
        filter=FilterConfig(
            likelihood_threshold=flt.get("likelihood_threshold", 0.02),
            target_count=flt.get("target_count", 15),
            max_cycles=flt.get("max_cycles", 3),
        ),
        question_mode=QuestionMode(data["question_mode"]),
        seed=data["seed"],
        posterior_samples=data.get("posterior_samples", 8),
    )


def question_to_dict(question: Question) -> dict:
    data = {
        "id": question.id,
        "text": question.text,
        "kind": question.kind.value,
        "options": [{"label": o.label, "text": o.text} for o in question.options],
    }
    if isinstance(question, GuessQuestion):
        data["guess"] = question.guess.text
    return data


def question_from_dict(data: dict) -> Question:
    options = tuple(AnswerOption(o["label"], o["text"]) for o in data["options"])
    kind = QuestionKind(data["kind"])
    if "guess" in data:
        return GuessQuestion(
            id=data["id"], text=data["text"], options=options, kind=kind,
            guess=Hypothesis(data["guess"]),
        )
    return Question(id=data["id"], text=data["text"], options=options, kind=kind)


def report_to_dict(report: FilterReport) -> dict:
    return {
        "sampled": report.sampled_count,
        "retained": report.retained_count,
        "rejected": report.rejected_count,
        "cycles": report.cycles,
        "belief_turn": report.accepted.turn,
        "accepted": [h.text for h in report.accepted],
        "rejections": [
            {
                "hypothesis": r.hypothesis.text,
                "reason": r.reason,
                "question_id": r.question_id,
                "option_index": r.option_index,
                "likelihood": r.likelihood,
            }
            for r in report.rejections
        ],
    }


def report_from_dict(data: dict) -> FilterReport:
    return FilterReport(
        sampled_count=data["sampled"],
        retained_count=data["retained"],
        rejected_count=data["rejected"],
        accepted=BeliefState.of(
            (Hypothesis(t) for t in data["accepted"]), turn=data["belief_turn"]
        ),
        rejections=tuple(
            Rejection(
                hypothesis=Hypothesis(r["hypothesis"]),
                reason=r["reason"],
                question_id=r["question_id"],
                option_index=r["option_index"],
                likelihood=r["likelihood"],
            )
            for r in data["rejections"]
        ),
        cycles=data["cycles"],
    )


def turn_to_dict(turn: TurnRecord) -> dict:
    return {
        "index": turn.index,
        "chosen": question_to_dict(turn.chosen),
        "is_guess": turn.is_guess,
        "candidates": [
            {
                "question_id": c.question_id,
                "text": c.text,
                "score": c.score,
                "estimator": c.estimator,
                "is_guess": c.is_guess,
            }
            for c in turn.candidates
        ],
        "answer": {"question_id": turn.answer.question_id, "option_index": turn.answer.option_index},
        "answer_text": turn.answer_text,
        "report": None if turn.report is None else report_to_dict(turn.report),
        "used_fallback": turn.used_fallback,
        "eval_guess": turn.eval_guess,
        "eval_guess_correct": turn.eval_guess_correct,
        "eval_guess_fallback": turn.eval_guess_fallback,
        "elapsed": turn.elapsed,
    }


def turn_from_dict(data: dict) -> TurnRecord:
    return TurnRecord(
        index=data["index"],
        chosen=question_from_dict(data["chosen"]),
        is_guess=data["is_guess"],
        candidates=tuple(
            CandidateScore(
                question_id=c["question_id"],
                text=c["text"],
                score=c["score"],
                estimator=c["estimator"],
                is_guess=c["is_guess"],
            )
            for c in data["candidates"]
        ),
        answer=Answer(data["answer"]["question_id"], data["answer"]["option_index"]),
        answer_text=data["answer_text"],
        report=None if data["report"] is None else report_from_dict(data["report"]),
        used_fallback=data["used_fallback"],
        eval_guess=data["eval_guess"],
        eval_guess_correct=data["eval_guess_correct"],
        eval_guess_fallback=data["eval_guess_fallback"],
        elapsed=data["elapsed"],
    )


def game_record_to_dict(record: GameRecord) -> dict:
    return {
        "schema_version": record.schema_version,
        "config": config_to_dict(record.config),
        "target": {"name": record.target_name, "alternatives": list(record.target_alternatives)},
        "turns": [turn_to_dict(t) for t in record.turns],
        "outcome": record.outcome.value,
        "success_turn": record.success_turn,
        "guesses": [
            {"turn": g.turn, "text": g.text, "correct": g.correct} for g in record.guesses
        ],
        "initial_report": (
            None if record.initial_report is None else report_to_dict(record.initial_report)
        ),
        "error": record.error,
    }


def game_record_from_dict(data: dict) -> GameRecord:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported transcript schema version {version!r}")
    return GameRecord(
        config=config_from_dict(data["config"]),
        target_name=data["target"]["name"],
        target_alternatives=tuple(data["target"]["alternatives"]),
        turns=tuple(turn_from_dict(t) for t in data["turns"]),
        outcome=Outcome(data["outcome"]),
        success_turn=data["success_turn"],
        guesses=tuple(
            GuessRecord(g["turn"], g["text"], g["correct"]) for g in data["guesses"]
        ),
        initial_report=(
            None
            if data["initial_report"] is None
            else report_from_dict(data["initial_report"])
        ),
        error=data["error"],
    )


def write_game_records(records: Iterable[GameRecord], path: str | Path) -> None:
    """One JSON document per line, in iteration order."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(game_record_to_dict(record), ensure_ascii=False) + "\n")


def read_game_records(path: str | Path) -> Iterator[GameRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield game_record_from_dict(json.loads(line))
