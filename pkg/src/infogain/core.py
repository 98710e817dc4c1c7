"""Domain types shared by every module, plus exact discrete-probability primitives.

All types are immutable values and safe to share across threads.  Probabilities
are plain Python floats; entropy is reported in nats (argmax decisions are
invariant to the log base, so this is purely a reporting convention).
"""

from __future__ import annotations

import math
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

#: Tolerance for "probabilities sum to one" checks.
PROB_ATOL = 1e-9

_WHITESPACE = re.compile(r"\s+")


def normalize_key(text: str) -> str:
    """Canonical form used for dedup and case-insensitive exact matching.

    Lowercases, collapses runs of whitespace, strips the ends, and folds
    accented characters to their base letters so that e.g. "Beyoncé" and
    "beyonce" share a key.
    """
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return _WHITESPACE.sub(" ", stripped).strip().lower()


class QuestionKind(Enum):
    BINARY = "binary"
    MULTIPLE_CHOICE = "multiple-choice"


@dataclass(frozen=True)
class AnswerOption:
    """One admissible response: a short label token plus its full text."""

    label: str
    text: str

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("option label must be non-empty")


MULTIPLE_CHOICE_LABELS = ("A", "B", "C", "D", "E")
NONE_OF_THE_ABOVE = "none of the above"


def binary_options() -> tuple[AnswerOption, AnswerOption]:
    return (AnswerOption("Yes", "Yes"), AnswerOption("No", "No"))


def multiple_choice_options(texts: Sequence[str]) -> tuple[AnswerOption, ...]:
    """Build the five A-E options; the final slot is always "none of the above"."""
    if len(texts) != 4:
        raise ValueError(f"expected 4 option texts plus the fixed final option, got {len(texts)}")
    opts = [AnswerOption(label, text) for label, text in zip(MULTIPLE_CHOICE_LABELS, texts)]
    opts.append(AnswerOption("E", NONE_OF_THE_ABOVE))
    return tuple(opts)


@dataclass(frozen=True)
class Question:
    """A question together with its closed, ordered set of answer options."""

    id: str
    text: str
    options: tuple[AnswerOption, ...]
    kind: QuestionKind

    def __post_init__(self) -> None:
        if len(self.options) < 2:
            raise ValueError("a question needs at least two options")
        labels = [o.label for o in self.options]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate option labels: {labels}")
        if self.kind is QuestionKind.BINARY:
            if labels != ["Yes", "No"]:
                raise ValueError(f"binary questions take exactly Yes/No options, got {labels}")
        elif self.kind is QuestionKind.MULTIPLE_CHOICE:
            if tuple(labels) != MULTIPLE_CHOICE_LABELS:
                raise ValueError(f"multiple-choice questions take options A-E, got {labels}")
            if self.options[-1].text.strip().lower() != NONE_OF_THE_ABOVE:
                raise ValueError('option E must read "none of the above"')

    def option_index(self, label: str) -> int:
        """Index of the option whose label matches (case-insensitive)."""
        wanted = label.strip().lower()
        for i, opt in enumerate(self.options):
            if opt.label.lower() == wanted:
                return i
        raise KeyError(f"no option labelled {label!r}")


@dataclass(frozen=True)
class GuessQuestion(Question):
    """A direct "Is it X?" question that names one candidate outright.

    Behaves as an ordinary binary question for scoring and history purposes.
    Controllers detect the subtype to route it specially: a simulated opponent
    answers it by name matching rather than by the answerer model, and a Yes
    ends the game.
    """

    guess: Hypothesis = None  # type: ignore[assignment]  # required; default only orders fields

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.guess is None:
            raise ValueError("a guess question must carry the hypothesis it names")
        if self.kind is not QuestionKind.BINARY:
            raise ValueError("guess questions are binary")


def make_guess_question(hypothesis: Hypothesis, qid: str) -> GuessQuestion:
    return GuessQuestion(
        id=qid,
        text=f"Is it {hypothesis.text}?",
        options=binary_options(),
        kind=QuestionKind.BINARY,
        guess=hypothesis,
    )


@dataclass(frozen=True)
class Answer:
    """An observed response: which option of which question was chosen."""

    question_id: str
    option_index: int

    def __post_init__(self) -> None:
        if self.option_index < 0:
            raise ValueError("option_index must be non-negative")


@dataclass(frozen=True)
class Hypothesis:
    """A candidate value of the target: an entity name or a persona paragraph.

    The dedup key is derived, never supplied: two hypotheses are the same
    candidate exactly when their normalized keys coincide.
    """

    text: str
    key: str = field(init=False)

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("hypothesis text must be non-empty")
        object.__setattr__(self, "key", normalize_key(self.text))


@dataclass(frozen=True)
class History:
    """Append-only record of (question, answer) pairs for one session."""

    pairs: tuple[tuple[Question, Answer], ...] = ()

    def __post_init__(self) -> None:
        for question, answer in self.pairs:
            if answer.question_id != question.id:
                raise ValueError(
                    f"answer for {answer.question_id!r} paired with question {question.id!r}"
                )
            if answer.option_index >= len(question.options):
                raise ValueError(
                    f"option index {answer.option_index} out of range for {question.id!r}"
                )

    def append(self, question: Question, answer: Answer) -> "History":
        return History(self.pairs + ((question, answer),))

    def __len__(self) -> int:
        return len(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)


@dataclass(frozen=True)
class CategoricalDistribution:
    """Probabilities aligned with a question's options; the unit of all entropy math."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) < 1:
            raise ValueError("distribution must have at least one outcome")
        for p in self.probs:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probability {p} outside [0, 1]")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > PROB_ATOL:
            raise ValueError(f"probabilities sum to {total}, not 1")

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "CategoricalDistribution":
        """Renormalize non-negative weights into a distribution."""
        ws = [float(w) for w in weights]
        if any(w < 0 for w in ws):
            raise ValueError(f"negative weight in {ws}")
        total = math.fsum(ws)
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        return cls(tuple(w / total for w in ws))

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, i: int) -> float:
        return self.probs[i]


@dataclass(frozen=True)
class BeliefState:
    """The uniformly weighted, deduplicated hypothesis set at a given turn.

    Weights are implicitly uniform: downstream estimators treat every member
    equally and never consult a backend probability on the hypothesis itself.
    """

    hypotheses: tuple[Hypothesis, ...]
    turn: int = 0

    def __post_init__(self) -> None:
        if self.turn < 0:
            raise ValueError("turn must be >= 0")
        keys = [h.key for h in self.hypotheses]
        if len(set(keys)) != len(keys):
            raise ValueError("belief contains duplicate hypothesis keys")

    @classmethod
    def of(cls, hypotheses: Iterable[Hypothesis], turn: int = 0) -> "BeliefState":
        """Build a belief from any iterable, deduplicating by key (first wins)."""
        seen: dict[str, Hypothesis] = {}
        for h in hypotheses:
            seen.setdefault(h.key, h)
        return cls(tuple(seen.values()), turn)

    def __len__(self) -> int:
        return len(self.hypotheses)

    def __iter__(self):
        return iter(self.hypotheses)

    def keys(self) -> set[str]:
        return {h.key for h in self.hypotheses}


def entropy(dist: CategoricalDistribution) -> float:
    """Shannon entropy -sum(p * ln p) in nats; zero-probability terms contribute 0.

    Result lies in [0, ln(number of outcomes)].  A max() guards the floating
    dust that summation can leave just below zero for near-point masses.
    """
    return max(0.0, -math.fsum(p * math.log(p) for p in dist.probs if p > 0.0))


def mix(dists: Sequence[CategoricalDistribution]) -> CategoricalDistribution:
    """Elementwise arithmetic mean of equal-length distributions."""
    if not dists:
        raise ValueError("mix() needs at least one distribution")
    width = len(dists[0])
    for d in dists:
        if len(d) != width:
            raise ValueError(f"mixed distributions differ in length: {len(d)} vs {width}")
    n = len(dists)
    return CategoricalDistribution(
        tuple(math.fsum(d.probs[j] for d in dists) / n for j in range(width))
    )
