"""Deterministic tabular backend: a fully specified finite world.

The world is a prior over a finite hypothesis list plus a table of exact
answer likelihoods for every (hypothesis, question) pair.  Every engine
quantity (posterior, predictive distribution, information gain) then has a
closed form, so tests can pin estimator output to independently computed
values, and benchmarks and demos run with no network.

The backend emulates the generative operations of a language model in the
cheapest faithful way:

- hypothesis batches draw from the exact posterior (plus a smoothing floor so
  ruled-out candidates still surface occasionally, as they would from a real
  generator at high temperature); candidates named in the novelty context are
  excluded, draws are distinct while fresh positive-mass candidates remain and
  then repeat posterior-proportionally, mimicking a generator that circles
  back to the few candidates it still believes in;
- conditional question proposal ranks the bank by predictive answer entropy
  under the given hypothesis pool (descending, ties kept in bank order), which
  mirrors "propose questions that split the candidates evenly";
- unconstrained proposal is a seeded draw from the unasked bank;
- the naive single-question draw takes the first unasked question in bank
  order, emulating an unreflective asker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from infogain.backends.base import Backend, QuestionGenerationError
from infogain.core import (
    Answer,
    CategoricalDistribution,
    GuessQuestion,
    History,
    Hypothesis,
    Question,
    QuestionKind,
    binary_options,
    entropy,
    mix,
    multiple_choice_options,
    normalize_key,
)


@dataclass(frozen=True)
class TabularModel:
    """A finite universe: hypotheses, prior, question bank, exact likelihoods.

    ``rows[i][j]`` is the answer distribution of hypothesis ``i`` for question
    ``j``; the grid must be complete and aligned with each question's options.
    ``prior`` may be passed as any non-negative weights (or omitted for
    uniform) and is stored normalized.  ``true_target`` optionally fixes the
    answerer's ground truth for single games.
    """

    topic: str
    hypotheses: tuple[Hypothesis, ...]
    questions: tuple[Question, ...]
    rows: tuple[tuple[CategoricalDistribution, ...], ...]
    prior: tuple[float, ...] = None  # type: ignore[assignment]  # None = uniform
    true_target: Hypothesis | None = None
    seed: int = 0
    hyp_index: Mapping[str, int] = field(init=False)
    question_index: Mapping[str, int] = field(init=False)

    def __post_init__(self) -> None:
        if not self.hypotheses:
            raise ValueError("model needs at least one hypothesis")
        if not self.questions:
            raise ValueError("model needs at least one question")
        hyp_index = {h.key: i for i, h in enumerate(self.hypotheses)}
        if len(hyp_index) != len(self.hypotheses):
            raise ValueError("duplicate hypothesis keys in model")
        question_index = {q.id: j for j, q in enumerate(self.questions)}
        if len(question_index) != len(self.questions):
            raise ValueError("duplicate question ids in model")
        if len(self.rows) != len(self.hypotheses):
            raise ValueError(
                f"likelihood grid has {len(self.rows)} rows for {len(self.hypotheses)} hypotheses"
            )
        for i, row in enumerate(self.rows):
            if len(row) != len(self.questions):
                raise ValueError(
                    f"hypothesis {self.hypotheses[i].text!r} has {len(row)} entries "
                    f"for {len(self.questions)} questions"
                )
            for j, dist in enumerate(row):
                if len(dist) != len(self.questions[j].options):
                    raise ValueError(
                        f"entry ({self.hypotheses[i].text!r}, {self.questions[j].id!r}) has "
                        f"{len(dist)} probabilities for {len(self.questions[j].options)} options"
                    )
        if self.prior is None:
            n = len(self.hypotheses)
            normalized = tuple(1.0 / n for _ in self.hypotheses)
        else:
            if len(self.prior) != len(self.hypotheses):
                raise ValueError(
                    f"{len(self.prior)} prior weights for {len(self.hypotheses)} hypotheses"
                )
            weights = [float(w) for w in self.prior]
            if any(w < 0 for w in weights):
                raise ValueError("prior weights must be non-negative")
            total = math.fsum(weights)
            if total <= 0:
                raise ValueError("prior weights must have positive total mass")
            normalized = tuple(w / total for w in weights)
        object.__setattr__(self, "prior", normalized)
        if self.true_target is not None and self.true_target.key not in hyp_index:
            raise ValueError(f"true_target {self.true_target.text!r} is not in the hypothesis list")
        object.__setattr__(self, "hyp_index", hyp_index)
        object.__setattr__(self, "question_index", question_index)

    def likelihood_row(self, hyp: Hypothesis, question: Question) -> CategoricalDistribution:
        """Answer distribution for (hyp, question); guess questions are synthesized.

        A guess question is Yes with certainty exactly when the guessed key
        matches the hypothesis key, so the table never needs guess entries.
        """
        if isinstance(question, GuessQuestion):
            hit = question.guess.key == hyp.key
            return CategoricalDistribution((1.0, 0.0) if hit else (0.0, 1.0))
        i = self.hyp_index.get(hyp.key)
        if i is None:
            raise KeyError(f"unknown hypothesis {hyp.text!r}")
        j = self.question_index.get(question.id)
        if j is None:
            raise KeyError(f"unknown question id {question.id!r}")
        return self.rows[i][j]

    def raw_weights(self, history: History) -> tuple[float, ...]:
        """Unnormalized posterior: prior times the product of observed likelihoods."""
        weights = list(self.prior)
        for question, answer in history.pairs:
            for i, hyp in enumerate(self.hypotheses):
                if weights[i] == 0.0:
                    continue
                weights[i] *= self.likelihood_row(hyp, question)[answer.option_index]
        return tuple(weights)

    def posterior(self, history: History) -> tuple[float, ...]:
        """Exact posterior over the universe.

        If every hypothesis has zero likelihood (the history contradicts the
        whole universe) the posterior falls back to the prior rather than
        raising, matching how a generative model keeps answering under
        contradiction.
        """
        raw = self.raw_weights(history)
        total = math.fsum(raw)
        if total <= 0.0:
            return self.prior
        return tuple(w / total for w in raw)


class TabularBackend(Backend):
    """Backend over a :class:`TabularModel`; all randomness is seed-controlled.

    ``proposal_smoothing`` is added to every posterior weight when sampling
    hypothesis batches, so candidates the history has ruled out still surface
    occasionally.  With ``sampled_posterior_entropy`` the posterior-entropy
    query returns a plug-in estimate from ``k`` posterior draws instead of the
    exact value, emulating a degraded in-context estimator.
    """

    def __init__(
        self,
        model: TabularModel,
        seed: int | None = None,
        proposal_smoothing: float = 0.05,
        sampled_posterior_entropy: bool = False,
    ) -> None:
        if proposal_smoothing < 0:
            raise ValueError("proposal_smoothing must be >= 0")
        self.model = model
        self.proposal_smoothing = proposal_smoothing
        self.sampled_posterior_entropy = sampled_posterior_entropy
        self._rng = np.random.default_rng(model.seed if seed is None else seed)

    # -- hypothesis side -------------------------------------------------

    def sample_hypothesis_batch(
        self, history: History, n: int, prior_batches: Sequence[Hypothesis] = ()
    ) -> list[Hypothesis]:
        if n < 1:
            raise ValueError("n must be >= 1")
        hyps = self.model.hypotheses
        posterior = self.model.posterior(history)
        weights = np.array([p + self.proposal_smoothing for p in posterior])
        excluded = {h.key for h in prior_batches}
        fresh = [i for i, h in enumerate(hyps) if h.key not in excluded and weights[i] > 0.0]
        chosen: list[int] = []
        if fresh:
            take = min(n, len(fresh))
            w = weights[fresh]
            picks = self._rng.choice(len(fresh), size=take, replace=False, p=w / w.sum())
            chosen = [fresh[int(k)] for k in picks]
        if len(chosen) < n:
            # Fresh candidates exhausted: keep drawing with replacement, the way
            # a generator pressed for more names circles back to the few it
            # still believes in.  Repeats are deduplicated downstream.
            pool = [i for i in range(len(hyps)) if weights[i] > 0.0] or list(range(len(hyps)))
            w = weights[pool]
            p = w / w.sum() if w.sum() > 0 else None
            extra = self._rng.choice(pool, size=n - len(chosen), replace=True, p=p)
            chosen.extend(int(k) for k in extra)
        return [hyps[i] for i in chosen]

    def answer_distribution(self, hyp: Hypothesis, question: Question) -> CategoricalDistribution:
        return self.model.likelihood_row(hyp, question)

    def predictive_answer_distribution(
        self, history: History, question: Question
    ) -> CategoricalDistribution:
        posterior = self.model.posterior(history)
        rows = [self.model.likelihood_row(h, question) for h in self.model.hypotheses]
        width = len(question.options)
        mass = [
            math.fsum(posterior[i] * rows[i][j] for i in range(len(rows))) for j in range(width)
        ]
        return CategoricalDistribution.from_weights(mass)

    # -- question side ---------------------------------------------------

    def _unasked(self, history: History) -> list[int]:
        asked = {q.id for q, _ in history.pairs}
        return [j for j, q in enumerate(self.model.questions) if q.id not in asked]

    def propose_questions_unconstrained(self, history: History, m: int) -> list[Question]:
        if m < 1:
            raise ValueError("m must be >= 1")
        free = self._unasked(history)
        if not free:
            raise QuestionGenerationError("question bank exhausted")
        take = min(m, len(free))
        picks = self._rng.choice(len(free), size=take, replace=False)
        return [self.model.questions[free[int(k)]] for k in picks]

    def propose_questions_conditional(
        self, history: History, hypotheses: Sequence[Hypothesis], m: int
    ) -> list[Question]:
        if m < 1:
            raise ValueError("m must be >= 1")
        free = self._unasked(history)
        if not free:
            raise QuestionGenerationError("question bank exhausted")
        if not hypotheses:
            return [self.model.questions[j] for j in free[:m]]
        scored: list[tuple[float, int]] = []
        for j in free:
            question = self.model.questions[j]
            rows = [self.model.likelihood_row(h, question) for h in hypotheses]
            scored.append((-entropy(mix(rows)), j))
        scored.sort()
        return [self.model.questions[j] for _, j in scored[:m]]

    def propose_question_naive(self, history: History) -> Question:
        free = self._unasked(history)
        if not free:
            raise QuestionGenerationError("question bank exhausted")
        return self.model.questions[free[0]]

    # -- environment side ------------------------------------------------

    def simulate_answer(self, target: Hypothesis, question: Question, seed: int) -> Answer:
        row = self.model.likelihood_row(target, question)
        rng = np.random.default_rng(seed)
        idx = int(rng.choice(len(row), p=np.array(row.probs)))
        return Answer(question_id=question.id, option_index=idx)

    def judge_recommendations(
        self, persona: Hypothesis, items: Sequence[str]
    ) -> list[float | None]:
        return [5.0 if normalize_key(item) == persona.key else 1.0 for item in items]

    def posterior_hypothesis_entropy(
        self, history: History, question: Question, answer: Answer, k: int
    ) -> float:
        if k < 2:
            raise ValueError("k must be >= 2")
        posterior = self.model.posterior(history.append(question, answer))
        if not self.sampled_posterior_entropy:
            return max(0.0, -math.fsum(p * math.log(p) for p in posterior if p > 0.0))
        draws = self._rng.choice(len(posterior), size=k, replace=True, p=np.array(posterior))
        counts = np.bincount(draws, minlength=len(posterior))
        freqs = counts / k
        return max(0.0, -math.fsum(f * math.log(f) for f in freqs if f > 0.0))

    def greedy_guess(
        self, history: History, candidates: Sequence[Hypothesis] | None = None
    ) -> Hypothesis:
        posterior = self.model.posterior(history)
        if candidates is not None:
            if not candidates:
                raise ValueError("candidates must be non-empty when given")
            best, best_weight = candidates[0], -1.0
            for cand in candidates:
                i = self.model.hyp_index.get(cand.key)
                weight = posterior[i] if i is not None else 0.0
                if weight > best_weight:
                    best, best_weight = cand, weight
            return best
        order = sorted(range(len(posterior)), key=lambda i: (-posterior[i], i))
        return self.model.hypotheses[order[0]]

    def recommendations(self, history: History, count: int) -> list[str]:
        posterior = self.model.posterior(history)
        order = sorted(range(len(posterior)), key=lambda i: (-posterior[i], i))
        return [self.model.hypotheses[i].text for i in order[:count]]

    def item_consistency(self, item: str, history: History) -> bool:
        i = self.model.hyp_index.get(normalize_key(item))
        if i is None:
            return False
        return self.model.raw_weights(history)[i] > 0.0


def bit_split_model(
    names: Sequence[str],
    noise_questions: int = 0,
    noise_first: bool = False,
    topic: str = "animal",
    seed: int = 0,
) -> TabularModel:
    """Binary-search world: split questions partition the universe by index bits.

    Split question ``j`` answers Yes exactly for hypotheses whose index has bit
    ``j`` clear, so ``ceil(log2(n))`` well-chosen questions always isolate the
    target.  Optional noise questions answer Yes/No as a fair coin for every
    hypothesis; they carry no information but have maximal answer entropy,
    which makes this world the canonical separator of gain-based and
    entropy-based question scoring.
    """
    if len(names) < 2:
        raise ValueError("need at least two names")
    keys = {normalize_key(n) for n in names}
    if len(keys) != len(names):
        raise ValueError("names must be unique under normalization")
    n_bits = max(1, math.ceil(math.log2(len(names))))
    splits = [
        Question(
            id=f"split-{j + 1}",
            text=f"Is it in partition A of split {j + 1}?",
            options=binary_options(),
            kind=QuestionKind.BINARY,
        )
        for j in range(n_bits)
    ]
    noise = [
        Question(
            id=f"noise-{j + 1}",
            text=f"Coin flip {j + 1}: heads?",
            options=binary_options(),
            kind=QuestionKind.BINARY,
        )
        for j in range(noise_questions)
    ]
    questions = noise + splits if noise_first else splits + noise
    hypotheses = tuple(Hypothesis(n) for n in names)
    rows = []
    for i in range(len(names)):
        row = {}
        for j, q in enumerate(splits):
            yes = (i >> j) & 1 == 0
            row[q.id] = CategoricalDistribution((1.0, 0.0) if yes else (0.0, 1.0))
        for q in noise:
            row[q.id] = CategoricalDistribution((0.5, 0.5))
        rows.append(tuple(row[q.id] for q in questions))
    return TabularModel(
        topic=topic,
        hypotheses=hypotheses,
        questions=tuple(questions),
        rows=tuple(rows),
        seed=seed,
    )


def parse_tabular_model(text: str) -> TabularModel:
    """Parse the plain-text world format.

    Sections are headed by ``[name]`` lines; ``#`` lines and blank lines are
    ignored.  Required sections: ``[hypotheses]`` (one name per line),
    ``[questions]`` (``id | binary | text`` or ``id | mc | text | four option
    texts`` pipe-separated; the final "none of the above" choice is implied),
    and ``[likelihoods]`` (``hypothesis | question id | weights`` with
    whitespace-separated weights, renormalized, one line per pair, all pairs
    present).  Optional: ``[topic]`` (single line, default "item"),
    ``[prior]`` (one line of whitespace-separated weights, default uniform),
    ``[target]`` (single line naming a hypothesis), and ``[seed]`` (single
    integer line, default 0).
    """
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current in sections:
                raise ValueError(f"duplicate section [{current}]")
            sections[current] = []
            continue
        if current is None:
            raise ValueError(f"content before first section: {line!r}")
        sections[current].append(line)

    for required in ("hypotheses", "questions", "likelihoods"):
        if required not in sections:
            raise ValueError(f"missing section [{required}]")
    known = {"topic", "hypotheses", "questions", "likelihoods", "prior", "target", "seed"}
    unknown = set(sections) - known
    if unknown:
        raise ValueError(f"unknown sections: {sorted(unknown)}")

    def single_line(name: str) -> str:
        if len(sections[name]) != 1:
            raise ValueError(f"[{name}] must contain exactly one line")
        return sections[name][0]

    topic = single_line("topic") if "topic" in sections else "item"
    hypotheses = tuple(Hypothesis(line) for line in sections["hypotheses"])

    questions: list[Question] = []
    for line in sections["questions"]:
        parts = [p.strip() for p in line.split("|")]
        if len(parts) < 3:
            raise ValueError(f"question line needs 'id | kind | text': {line!r}")
        qid, kind_token, text_ = parts[0], parts[1].lower(), parts[2]
        if kind_token == "binary":
            if len(parts) != 3:
                raise ValueError(f"binary question takes no option texts: {line!r}")
            questions.append(
                Question(id=qid, text=text_, options=binary_options(), kind=QuestionKind.BINARY)
            )
        elif kind_token in ("mc", "multiple-choice"):
            if len(parts) != 7:
                raise ValueError(f"multiple-choice question takes four option texts: {line!r}")
            questions.append(
                Question(
                    id=qid,
                    text=text_,
                    options=multiple_choice_options(parts[3:7]),
                    kind=QuestionKind.MULTIPLE_CHOICE,
                )
            )
        else:
            raise ValueError(f"unknown question kind {kind_token!r} in {line!r}")

    hyp_pos = {h.key: i for i, h in enumerate(hypotheses)}
    q_pos = {q.id: j for j, q in enumerate(questions)}
    grid: dict[tuple[int, int], CategoricalDistribution] = {}
    for line in sections["likelihoods"]:
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 3:
            raise ValueError(f"likelihood line needs 'hypothesis | question id | weights': {line!r}")
        name, qid, weight_text = parts
        i = hyp_pos.get(normalize_key(name))
        if i is None:
            raise ValueError(f"likelihood for unknown hypothesis {name!r}")
        j = q_pos.get(qid)
        if j is None:
            raise ValueError(f"likelihood for unknown question id {qid!r}")
        if (i, j) in grid:
            raise ValueError(f"duplicate likelihood entry for ({name!r}, {qid!r})")
        weights = [float(w) for w in weight_text.split()]
        if len(weights) != len(questions[j].options):
            raise ValueError(
                f"({name!r}, {qid!r}) has {len(weights)} weights for "
                f"{len(questions[j].options)} options"
            )
        grid[(i, j)] = CategoricalDistribution.from_weights(weights)

    missing = [
        (hypotheses[i].text, questions[j].id)
        for i in range(len(hypotheses))
        for j in range(len(questions))
        if (i, j) not in grid
    ]
    if missing:
        raise ValueError(f"missing likelihood entries (first few): {missing[:5]}")
    rows = tuple(
        tuple(grid[(i, j)] for j in range(len(questions))) for i in range(len(hypotheses))
    )

    prior = None
    if "prior" in sections:
        prior_weights = [float(w) for w in single_line("prior").split()]
        prior = tuple(prior_weights)

    true_target = None
    if "target" in sections:
        target_line = single_line("target")
        target_key = normalize_key(target_line)
        if target_key not in hyp_pos:
            raise ValueError(f"target {target_line!r} is not a hypothesis")
        true_target = hypotheses[hyp_pos[target_key]]

    seed = int(single_line("seed")) if "seed" in sections else 0

    return TabularModel(
        topic=topic,
        hypotheses=hypotheses,
        questions=tuple(questions),
        rows=rows,
        prior=prior,
        true_target=true_target,
        seed=seed,
    )


def load_tabular_model(path: str | Path) -> TabularModel:
    return parse_tabular_model(Path(path).read_text(encoding="utf-8"))
