"""The generative-backend contract.

A backend supplies everything the engine cannot compute by itself: hypothesis
samples, answer likelihoods, candidate questions, simulated answers, and
recommendation judging.  Two implementations ship with the package: a remote
chat-completions client (`remote.RemoteBackend`) and a deterministic tabular
oracle (`tabular.TabularBackend`) that makes every estimator exactly checkable.

Backends must be safe to call from multiple in-flight requests.  Questioner
and answerer roles are isolated by construction: the questioner-side methods
never receive the ground-truth target, and `simulate_answer` never receives
the session history.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from infogain.core import (
    Answer,
    CategoricalDistribution,
    History,
    Hypothesis,
    Question,
)


class BackendError(RuntimeError):
    """Transport or protocol failure that survived the retry policy."""


class QuestionGenerationError(BackendError):
    """No parseable question could be produced after all attempts."""


class LogprobMode(Enum):
    LOGITS = "logits"
    SAMPLE_FREQUENCY = "sample-frequency"


@dataclass(frozen=True)
class BackendConfig:
    """Connection and sampling settings for a remote backend.

    The API key is environment-sourced: `api_key_env` names the variable and
    the key itself never appears in configuration files.
    """

    endpoint: str = "http://localhost:8000/v1"
    model: str = "local-model"
    api_key_env: str = "INFOGAIN_API_KEY"
    temperature_hypotheses: float = 1.3
    temperature_questions: float = 1.3
    temperature_naive: float = 1.0
    max_tokens: int = 512
    logprob_mode: LogprobMode = LogprobMode.LOGITS
    sample_count: int = 32
    top_logprobs: int = 20
    timeout: float = 60.0
    max_retries: int = 3
    retry_backoff: float = 0.5
    max_concurrency: int = 8

    def __post_init__(self) -> None:
        for name in ("temperature_hypotheses", "temperature_questions", "temperature_naive"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class Backend(abc.ABC):
    """Interface every generative backend implements."""

    @abc.abstractmethod
    def sample_hypothesis_batch(
        self, history: History, n: int, prior_batches: Sequence[Hypothesis] = ()
    ) -> list[Hypothesis]:
        """Draw up to ``n`` candidate hypotheses conditioned on the history.

        One generation call returns a line-delimited batch; earlier batches are
        placed in context to push the generator toward unseen candidates.  May
        return fewer than ``n`` (or an empty list) on parse failure; raises
        BackendError only for transport failure after retries.
        """

    @abc.abstractmethod
    def answer_distribution(self, hyp: Hypothesis, question: Question) -> CategoricalDistribution:
        """Likelihood of each answer option assuming ``hyp`` is the target."""

    @abc.abstractmethod
    def predictive_answer_distribution(
        self, history: History, question: Question
    ) -> CategoricalDistribution:
        """Answer distribution conditioned on the history alone (no hypothesis)."""

    @abc.abstractmethod
    def propose_questions_unconstrained(self, history: History, m: int) -> list[Question]:
        """Sample ``m`` candidate questions given only the history."""

    @abc.abstractmethod
    def propose_questions_conditional(
        self, history: History, hypotheses: Sequence[Hypothesis], m: int
    ) -> list[Question]:
        """Sample ``m`` questions aimed at splitting the hypothesis pool evenly."""

    @abc.abstractmethod
    def propose_question_naive(self, history: History) -> Question:
        """Single direct question draw, no scoring support required."""

    @abc.abstractmethod
    def simulate_answer(self, target: Hypothesis, question: Question, seed: int) -> Answer:
        """Answer as the environment holding ``target``.

        Stateless per call: the only inputs are the target, the question, and
        the seed.  The history is deliberately not available here.
        """

    @abc.abstractmethod
    def judge_recommendations(
        self, persona: Hypothesis, items: Sequence[str]
    ) -> list[float | None]:
        """Rate each item 1.0-5.0 in half steps against the persona; None = unscorable."""

    @abc.abstractmethod
    def posterior_hypothesis_entropy(
        self, history: History, question: Question, answer: Answer, k: int
    ) -> float:
        """Entropy of the hypothesis distribution after appending (question, answer).

        Sampling implementations draw ``k`` hypotheses and return the plug-in
        entropy of the empirical key-frequency distribution.
        """

    @abc.abstractmethod
    def greedy_guess(
        self, history: History, candidates: Sequence[Hypothesis] | None = None
    ) -> Hypothesis:
        """Most likely target by greedy decoding.

        With ``candidates`` given, the result is one of them; otherwise it is a
        direct generation from the history alone.
        """

    @abc.abstractmethod
    def recommendations(self, history: History, count: int) -> list[str]:
        """Generate ``count`` item recommendations conditioned on the history."""

    @abc.abstractmethod
    def item_consistency(self, item: str, history: History) -> bool:
        """Whether recommending ``item`` is compatible with the observed answers."""


@dataclass
class CallCounter:
    """Wraps a backend and counts calls per method; test and audit helper."""

    inner: Backend
    counts: dict[str, int] = field(default_factory=dict)

    def __getattr__(self, name: str):
        attr = getattr(self.inner, name)
        if not callable(attr):
            return attr

        def wrapper(*args, **kwargs):
            self.counts[name] = self.counts.get(name, 0) + 1
            return attr(*args, **kwargs)

        return wrapper
