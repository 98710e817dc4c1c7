"""Belief maintenance by sampling hypotheses and filtering them against answers.

The belief is a uniformly weighted, deduplicated set of candidate targets.
After every answer it is rebuilt in two moves:

1. retain: existing members are kept if they are consistent with the newest
   question-answer pair alone; they already survived the older pairs when they
   entered, so the single check preserves full-history soundness inductively;
2. refill: while the belief is below its target count and refill cycles
   remain, a fresh batch is drawn from the backend conditioned on the full
   history, with everything already proposed placed in context to steer
   generation away from repeats; each fresh candidate joins only if it is
   consistent with every recorded pair.

Consistency is a per-answer likelihood floor: a hypothesis survives a pair
when the probability it assigns to the observed answer is at least the
threshold (inclusive, so a likelihood exactly at the floor passes).  Full
checks walk pairs most recent first because late answers prune hardest, which
makes the short-circuit cheap where it matters.

The belief can legitimately end up smaller than the target count, or empty;
the turn controller owns the fallback behaviour in that case.
"""

from __future__ import annotations

from dataclasses import dataclass

from infogain.backends.base import Backend
from infogain.core import Answer, BeliefState, History, Hypothesis, Question

Pair = tuple[Question, Answer]


@dataclass(frozen=True)
class FilterConfig:
    """Likelihood floor, belief size target, and refill budget."""

    likelihood_threshold: float = 0.02
    target_count: int = 15
    max_cycles: int = 3

    def __post_init__(self) -> None:
        if not (0.0 < self.likelihood_threshold < 1.0):
            raise ValueError("likelihood_threshold must lie strictly between 0 and 1")
        if self.target_count < 1:
            raise ValueError("target_count must be >= 1")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be >= 1")


@dataclass(frozen=True)
class Rejection:
    """Why one sampled candidate did not enter the belief."""

    hypothesis: Hypothesis
    reason: str  # "inconsistent" or "duplicate"
    question_id: str | None = None
    option_index: int | None = None
    likelihood: float | None = None


@dataclass(frozen=True)
class FilterReport:
    """Accounting for one belief update; serialized into transcripts."""

    sampled_count: int
    retained_count: int
    rejected_count: int
    accepted: BeliefState
    rejections: tuple[Rejection, ...]
    cycles: int

    def __post_init__(self) -> None:
        accepted_from_sampling = len(self.accepted) - self.retained_count
        if self.sampled_count != accepted_from_sampling + self.rejected_count:
            raise ValueError(
                f"inconsistent report: {self.sampled_count} sampled != "
                f"{accepted_from_sampling} accepted + {self.rejected_count} rejected"
            )
        if self.rejected_count != len(self.rejections):
            raise ValueError("rejected_count must match the recorded rejections")


def is_consistent(hyp: Hypothesis, pair: Pair, backend: Backend, threshold: float) -> bool:
    """Whether ``hyp`` gives the observed answer at least ``threshold`` likelihood."""
    question, answer = pair
    return backend.answer_distribution(hyp, question)[answer.option_index] >= threshold


def _first_violation(
    hyp: Hypothesis, history: History, backend: Backend, threshold: float
) -> Rejection | None:
    """Most-recent-first scan; returns the first failing pair, or None if all pass."""
    for question, answer in reversed(history.pairs):
        likelihood = backend.answer_distribution(hyp, question)[answer.option_index]
        if likelihood < threshold:
            return Rejection(
                hypothesis=hyp,
                reason="inconsistent",
                question_id=question.id,
                option_index=answer.option_index,
                likelihood=likelihood,
            )
    return None


def filter_history(
    hyps: list[Hypothesis], history: History, backend: Backend, threshold: float
) -> list[Hypothesis]:
    """Hypotheses consistent with every recorded pair, order preserved."""
    return [h for h in hyps if _first_violation(h, history, backend, threshold) is None]


def update_belief(
    prev: BeliefState,
    new_pair: Pair,
    history: History,
    backend: Backend,
    config: FilterConfig = FilterConfig(),
) -> tuple[BeliefState, FilterReport]:
    """Rebuild the belief after observing ``new_pair``.

    ``history`` must already contain ``new_pair`` as its final element.  The
    result is deduplicated by normalized key with the first occurrence winning,
    so a retained member is never displaced by a fresh sample of the same
    candidate; a repeat within a batch counts as a rejected duplicate.
    """
    if not history.pairs or history.pairs[-1] != new_pair:
        raise ValueError("history must end with new_pair")
    kept: dict[str, Hypothesis] = {}
    for hyp in prev:
        if is_consistent(hyp, new_pair, backend, config.likelihood_threshold):
            kept[hyp.key] = hyp
    return _refill(kept, history, backend, config)


def initial_belief(
    backend: Backend, config: FilterConfig = FilterConfig()
) -> tuple[BeliefState, FilterReport]:
    """Belief before any question: pure sampling, every draw vacuously consistent."""
    return _refill({}, History(), backend, config)


def _refill(
    kept: dict[str, Hypothesis],
    history: History,
    backend: Backend,
    config: FilterConfig,
) -> tuple[BeliefState, FilterReport]:
    retained_count = len(kept)
    proposed: list[Hypothesis] = list(kept.values())
    rejections: list[Rejection] = []
    sampled_count = cycles = 0
    while len(kept) < config.target_count and cycles < config.max_cycles:
        cycles += 1
        batch = backend.sample_hypothesis_batch(
            history, config.target_count, prior_batches=proposed
        )
        proposed.extend(batch)
        for candidate in batch:
            sampled_count += 1
            if candidate.key in kept:
                rejections.append(Rejection(hypothesis=candidate, reason="duplicate"))
                continue
            violation = _first_violation(
                candidate, history, backend, config.likelihood_threshold
            )
            if violation is None:
                kept[candidate.key] = candidate
            else:
                rejections.append(violation)

    accepted = BeliefState(tuple(kept.values()), turn=len(history))
    report = FilterReport(
        sampled_count=sampled_count,
        retained_count=retained_count,
        rejected_count=len(rejections),
        accepted=accepted,
        rejections=tuple(rejections),
        cycles=cycles,
    )
    return accepted, report
