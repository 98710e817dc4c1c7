"""Question scoring: how much is an answer expected to tell us about the target?

The primary score is the mutual information between the target and the answer,
estimated over the current hypothesis set:

    gain = H[ mean_h p(y | h) ] - mean_h H[ p(y | h) ]

The mean over hypotheses is a Monte Carlo average over belief members, while
each ``p(y | h)`` is read off the backend exactly, so no sampling noise enters
through the answer variable.  Passing a sequence that repeats a hypothesis is
allowed and acts as integer weighting of the average.

Two alternative scores support ablations: the predictive answer entropy alone
(the first term, which overrates questions whose answers are noisy for every
candidate; the classic failure is a question with identical uniform rows,
where predictive entropy is maximal but the gain is exactly zero), and a
direct estimate that weights the posterior hypothesis entropy after each
possible answer by the history-conditioned predictive answer probability.

For tabular worlds the module also provides closed-form references: the exact
information gain under explicit posterior weights, and the exact expected
posterior entropy, related by ``gain = H[posterior] - expected posterior
entropy``, so maximizing one is minimizing the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from infogain.backends.base import Backend
from infogain.backends.tabular import TabularModel
from infogain.core import (
    PROB_ATOL,
    Answer,
    CategoricalDistribution,
    History,
    Hypothesis,
    Question,
    entropy,
    mix,
)


class EstimatorKind(Enum):
    EIG = "eig"
    PRED_ENTROPY = "pred-entropy"
    DATA_ESTIMATION = "data-estimation"


@dataclass(frozen=True)
class ScoredQuestion:
    """A question, its score in nats, and the likelihood rows behind it.

    Rows are kept so that a second estimator can rescore the same question
    without further backend calls; the data-estimation score uses no rows and
    carries an empty tuple.
    """

    question: Question
    score: float
    rows: tuple[CategoricalDistribution, ...]
    estimator_kind: EstimatorKind

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")


class RowCache:
    """Per-turn cache of likelihood rows keyed by (hypothesis key, question id).

    Concurrent inserts of the same key are harmless: both writers store equal
    values, so last-write-wins is safe.
    """

    def __init__(self, backend: Backend) -> None:
        self._backend = backend
        self._rows: dict[tuple[str, str], CategoricalDistribution] = {}

    def row(self, hyp: Hypothesis, question: Question) -> CategoricalDistribution:
        key = (hyp.key, question.id)
        cached = self._rows.get(key)
        if cached is None:
            cached = self._backend.answer_distribution(hyp, question)
            self._rows[key] = cached
        return cached


def _gather_rows(
    question: Question,
    belief: Sequence[Hypothesis] | Iterable[Hypothesis],
    backend: Backend,
    cache: RowCache | None,
) -> tuple[tuple[Hypothesis, ...], tuple[CategoricalDistribution, ...]]:
    members = tuple(belief)
    if not members:
        raise ValueError("need at least one hypothesis to score a question")
    if cache is None:
        rows = tuple(backend.answer_distribution(h, question) for h in members)
    else:
        rows = tuple(cache.row(h, question) for h in members)
    return members, rows


def estimate_eig(
    question: Question,
    belief: Sequence[Hypothesis] | Iterable[Hypothesis],
    backend: Backend,
    cache: RowCache | None = None,
) -> ScoredQuestion:
    """Monte Carlo estimate of the information the answer carries about the target.

    Uses one likelihood row per belief member and no other backend calls, so it
    costs exactly as much as the predictive-entropy baseline on the same input.
    """
    _, rows = _gather_rows(question, belief, backend, cache)
    conditional = math.fsum(entropy(r) for r in rows) / len(rows)
    score = entropy(mix(rows)) - conditional
    return ScoredQuestion(
        question=question, score=score, rows=rows, estimator_kind=EstimatorKind.EIG
    )


def estimate_pred_entropy(
    question: Question,
    belief: Sequence[Hypothesis] | Iterable[Hypothesis],
    backend: Backend,
    cache: RowCache | None = None,
) -> ScoredQuestion:
    """Entropy of the mixture answer distribution alone (ablation baseline)."""
    _, rows = _gather_rows(question, belief, backend, cache)
    return ScoredQuestion(
        question=question,
        score=entropy(mix(rows)),
        rows=rows,
        estimator_kind=EstimatorKind.PRED_ENTROPY,
    )


def data_estimation_score(
    question: Question, history: History, backend: Backend, k: int
) -> ScoredQuestion:
    """Negated expected posterior hypothesis entropy, everything model-estimated.

    The answer probabilities come from the backend's history-only predictive
    distribution, not from mixing likelihood rows, and each per-answer
    posterior entropy from the backend's posterior query (exact or k-sample,
    per backend).  Higher is better, so the expectation is negated to keep
    argmax selection uniform across scorers.  Zero-probability answers
    contribute nothing and are skipped.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    predictive = backend.predictive_answer_distribution(history, question)
    total = 0.0
    for idx, p in enumerate(predictive.probs):
        if p == 0.0:
            continue
        answer = Answer(question_id=question.id, option_index=idx)
        total += p * backend.posterior_hypothesis_entropy(history, question, answer, k)
    return ScoredQuestion(
        question=question,
        score=-total,
        rows=(),
        estimator_kind=EstimatorKind.DATA_ESTIMATION,
    )


def select_question(scored: Sequence[ScoredQuestion]) -> int:
    """Index of the highest score; ties keep the earliest candidate."""
    if not scored:
        raise ValueError("no scored questions to select from")
    best = 0
    for i in range(1, len(scored)):
        if scored[i].score > scored[best].score:
            best = i
    return best


# -- closed-form references for tabular worlds --------------------------------


def _checked_weights(model: TabularModel, posterior: Sequence[float]) -> list[float]:
    if len(posterior) != len(model.hypotheses):
        raise ValueError(
            f"{len(posterior)} weights for {len(model.hypotheses)} hypotheses"
        )
    if any(w < 0 for w in posterior):
        raise ValueError("posterior weights must be non-negative")
    if abs(math.fsum(posterior) - 1.0) > PROB_ATOL:
        raise ValueError("posterior weights must sum to 1")
    return [float(w) for w in posterior]


def exact_eig_tabular(
    model: TabularModel, posterior: Sequence[float], question: Question
) -> float:
    """Exact information gain by full enumeration under explicit posterior weights."""
    weights = _checked_weights(model, posterior)
    rows = [model.likelihood_row(h, question) for h in model.hypotheses]
    width = len(question.options)
    predictive = [
        math.fsum(weights[i] * rows[i][y] for i in range(len(rows))) for y in range(width)
    ]
    mixture_entropy = max(0.0, -math.fsum(p * math.log(p) for p in predictive if p > 0.0))
    conditional = math.fsum(
        weights[i] * entropy(rows[i]) for i in range(len(rows)) if weights[i] > 0.0
    )
    return mixture_entropy - conditional


def true_expected_posterior_entropy(
    model: TabularModel,
    question: Question,
    update_rule: str = "exact-bayes",
    posterior: Sequence[float] | None = None,
) -> float:
    """Expected entropy of the exactly updated hypothesis distribution.

    The expectation runs over the model's marginal answer distribution under
    ``posterior`` (the model prior when omitted); per answer, weights are
    multiplied by that answer's likelihood and renormalized.  Impossible
    answers carry no mass and are skipped.  Minimizing this oracle over
    questions is equivalent to maximizing the exact information gain.
    """
    if update_rule != "exact-bayes":
        raise ValueError(f"unsupported update rule {update_rule!r}")
    weights = _checked_weights(
        model, model.prior if posterior is None else posterior
    )
    rows = [model.likelihood_row(h, question) for h in model.hypotheses]
    width = len(question.options)
    expected = 0.0
    for y in range(width):
        joint = [weights[i] * rows[i][y] for i in range(len(rows))]
        p_y = math.fsum(joint)
        if p_y <= 0.0:
            continue
        post = [w / p_y for w in joint]
        expected += p_y * max(0.0, -math.fsum(p * math.log(p) for p in post if p > 0.0))
    return expected
