"""Chat-completions client backend.

Talks to any OpenAI-compatible endpoint (`POST {endpoint}/chat/completions`).
Two ways of reading an answer distribution off the model:

- logit mode (default): request top token log-probabilities for the first
  generated token, keep the probability mass on tokens that case-insensitively
  match an option label, discard the rest, and renormalize;
- sample-frequency mode (also the automatic fallback when the endpoint returns
  no usable logprobs): draw `sample_count` one-word completions and use
  add-one-smoothed label frequencies, so every option keeps nonzero mass.

Transient failures (transport errors, 429, 5xx) are retried with exponential
backoff; anything else raises `BackendError`.  A semaphore caps in-flight
requests at `max_concurrency` across threads.
"""

from __future__ import annotations

import math
import os
import re
import threading
import time
import uuid
from typing import Sequence

import httpx

from infogain.backends.base import Backend, BackendConfig, BackendError, LogprobMode, QuestionGenerationError
from infogain.backends.prompts import (
    BINARY_FORMAT_RULES,
    DEFAULT_TEMPLATES,
    MULTIPLE_CHOICE_FORMAT_RULES,
    PromptTemplates,
    format_history,
)
from infogain.core import (
    Answer,
    CategoricalDistribution,
    History,
    Hypothesis,
    Question,
    QuestionKind,
    binary_options,
    multiple_choice_options,
    normalize_key,
)

_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")
_MC_OPTION = re.compile(r"^([A-Da-d])[\).:\-]\s*(.+)$")
_JUDGE_LINE = re.compile(r"^\s*(\d+)[.)]?\s*[:\-]?\s*([0-9]+(?:\.[0-9]+)?)")
_PUNCT = ".,:;!?()'\"`"

#: Extra attempts when a generation parses to nothing (distinct from transport retries).
PARSE_REASKS = 2


def snap_rating(value: float) -> float:
    """Clamp to [1, 5] and snap to the nearest half step, ties rounding up."""
    snapped = math.floor(value * 2.0 + 0.5) / 2.0
    return min(5.0, max(1.0, snapped))


def _clean_lines(text: str) -> list[str]:
    lines = []
    for raw in text.splitlines():
        line = _LIST_MARKER.sub("", raw.strip()).strip()
        if line:
            lines.append(line)
    return lines


def _first_word(text: str) -> str:
    stripped = text.strip()
    if not stripped:
        return ""
    return stripped.split()[0].strip(_PUNCT)


class RemoteBackend(Backend):
    """Backend over a remote chat model for one topic domain.

    ``topic`` names what the hidden target is (it is spliced into every
    prompt); ``question_kind`` selects the proposal format, binary Yes/No or
    five-way multiple choice.
    """

    def __init__(
        self,
        config: BackendConfig | None = None,
        topic: str = "thing",
        question_kind: QuestionKind = QuestionKind.BINARY,
        templates: PromptTemplates = DEFAULT_TEMPLATES,
        client: httpx.Client | None = None,
    ) -> None:
        self.config = config or BackendConfig()
        self.topic = topic
        self.question_kind = question_kind
        self.templates = templates
        self._client = client or httpx.Client(timeout=self.config.timeout)
        self._gate = threading.Semaphore(self.config.max_concurrency)

    # -- transport ---------------------------------------------------------

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _chat(
        self,
        prompt: str,
        temperature: float,
        n: int = 1,
        logprobs: bool = False,
        max_tokens: int | None = None,
        seed: int | None = None,
    ) -> dict:
        payload: dict = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": self.config.max_tokens if max_tokens is None else max_tokens,
        }
        if n != 1:
            payload["n"] = n
        if logprobs:
            payload["logprobs"] = True
            payload["top_logprobs"] = self.config.top_logprobs
        if seed is not None:
            payload["seed"] = seed
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        delay = self.config.retry_backoff
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                with self._gate:
                    response = self._client.post(url, json=payload, headers=self._headers())
            except httpx.HTTPError as exc:
                last_error = exc
            else:
                if response.status_code == 200:
                    return response.json()
                if response.status_code != 429 and not 500 <= response.status_code < 600:
                    raise BackendError(
                        f"chat endpoint returned {response.status_code}: {response.text[:200]}"
                    )
                last_error = BackendError(
                    f"chat endpoint returned {response.status_code}: {response.text[:200]}"
                )
            if attempt < self.config.max_retries:
                time.sleep(delay)
                delay *= 2
        raise BackendError(f"chat request failed after retries: {last_error}")

    @staticmethod
    def _contents(data: dict) -> list[str]:
        try:
            return [choice["message"]["content"] or "" for choice in data["choices"]]
        except (KeyError, TypeError) as exc:
            raise BackendError(f"malformed chat response: {exc}") from exc

    # -- option distributions -----------------------------------------------

    @staticmethod
    def _label_index(token: str, question: Question) -> int | None:
        cleaned = token.strip().strip(_PUNCT).lower()
        for i, option in enumerate(question.options):
            if cleaned == option.label.lower():
                return i
        return None

    def _distribution_from_logprobs(self, data: dict, question: Question) -> CategoricalDistribution | None:
        try:
            top = data["choices"][0]["logprobs"]["content"][0]["top_logprobs"]
        except (KeyError, IndexError, TypeError):
            return None
        if not top:
            return None
        mass = [0.0] * len(question.options)
        for entry in top:
            idx = self._label_index(str(entry.get("token", "")), question)
            if idx is not None:
                mass[idx] += math.exp(float(entry["logprob"]))
        if math.fsum(mass) <= 0.0:
            return None
        return CategoricalDistribution.from_weights(mass)

    def _distribution_from_samples(self, prompt: str, question: Question) -> CategoricalDistribution:
        k = self.config.sample_count
        data = self._chat(prompt, temperature=1.0, n=k, max_tokens=8)
        counts = [0] * len(question.options)
        for content in self._contents(data):
            idx = self._label_index(_first_word(content), question)
            if idx is not None:
                counts[idx] += 1
        # Add-one smoothing keeps every option representable at small k.
        weights = [c + 1 for c in counts]
        return CategoricalDistribution.from_weights(weights)

    def _option_distribution(self, prompt: str, question: Question) -> CategoricalDistribution:
        if self.config.logprob_mode is LogprobMode.LOGITS:
            data = self._chat(prompt, temperature=1.0, logprobs=True, max_tokens=4)
            dist = self._distribution_from_logprobs(data, question)
            if dist is not None:
                return dist
        return self._distribution_from_samples(prompt, question)

    @staticmethod
    def _render_options(question: Question) -> str:
        if question.kind is QuestionKind.BINARY:
            return "Yes or No"
        return "\n".join(f"{o.label}) {o.text}" for o in question.options)

    # -- hypothesis side -----------------------------------------------------

    def sample_hypothesis_batch(
        self, history: History, n: int, prior_batches: Sequence[Hypothesis] = ()
    ) -> list[Hypothesis]:
        previous = "\n".join(h.text for h in prior_batches) or "(none yet)"
        prompt = self.templates.hypothesis_batch.format(
            topic=self.topic,
            count=n,
            history=format_history(history, most_recent_first=True),
            previous=previous,
        )
        data = self._chat(prompt, temperature=self.config.temperature_hypotheses)
        lines = _clean_lines(self._contents(data)[0])
        return [Hypothesis(line) for line in lines[:n]]

    def answer_distribution(self, hyp: Hypothesis, question: Question) -> CategoricalDistribution:
        prompt = self.templates.likelihood_query.format(
            topic=self.topic,
            hypothesis=hyp.text,
            question=question.text,
            options=self._render_options(question),
        )
        return self._option_distribution(prompt, question)

    def predictive_answer_distribution(
        self, history: History, question: Question
    ) -> CategoricalDistribution:
        prompt = self.templates.predictive_query.format(
            topic=self.topic,
            history=format_history(history),
            question=question.text,
            options=self._render_options(question),
        )
        return self._option_distribution(prompt, question)

    # -- question side ---------------------------------------------------------

    def _format_rules(self) -> str:
        if self.question_kind is QuestionKind.BINARY:
            return BINARY_FORMAT_RULES
        return MULTIPLE_CHOICE_FORMAT_RULES

    def _parse_question(self, text: str) -> Question | None:
        """Parse one generation into one question of the session's kind, or None."""
        if self.question_kind is QuestionKind.BINARY:
            for line in _clean_lines(text):
                if line.endswith("?"):
                    return Question(
                        id=f"q-{uuid.uuid4().hex[:12]}",
                        text=line,
                        options=binary_options(),
                        kind=QuestionKind.BINARY,
                    )
            return None
        stem: str | None = None
        choices: dict[str, str] = {}
        for line in (ln.strip() for ln in text.splitlines() if ln.strip()):
            if line.lower().startswith("question:"):
                stem = line.split(":", 1)[1].strip()
                continue
            matched = _MC_OPTION.match(line)
            if matched:
                choices[matched.group(1).upper()] = matched.group(2).strip()
            elif stem is None and line.endswith("?"):
                stem = line
        if stem and all(letter in choices for letter in "ABCD"):
            return Question(
                id=f"q-{uuid.uuid4().hex[:12]}",
                text=stem,
                options=multiple_choice_options([choices[c] for c in "ABCD"]),
                kind=QuestionKind.MULTIPLE_CHOICE,
            )
        return None

    def _propose_questions(self, prompt: str, m: int) -> list[Question]:
        """m independent generations; malformed ones re-asked, result deduped by text."""
        if m < 1:
            raise ValueError("m must be >= 1")
        questions: list[Question] = []
        seen: set[str] = set()
        for attempt in range(PARSE_REASKS + 1):
            want = m - len(questions)
            data = self._chat(prompt, temperature=self.config.temperature_questions, n=want)
            for content in self._contents(data):
                question = self._parse_question(content)
                if question is None:
                    continue
                key = normalize_key(question.text)
                if key in seen:
                    continue
                seen.add(key)
                questions.append(question)
            if len(questions) >= m:
                break
        if not questions:
            raise QuestionGenerationError("no parseable question after all attempts")
        return questions[:m]

    def propose_questions_unconstrained(self, history: History, m: int) -> list[Question]:
        prompt = self.templates.question_unconstrained.format(
            topic=self.topic,
            history=format_history(history),
            format_rules=self._format_rules(),
        )
        return self._propose_questions(prompt, m)

    def propose_questions_conditional(
        self, history: History, hypotheses: Sequence[Hypothesis], m: int
    ) -> list[Question]:
        listing = "\n".join(h.text for h in hypotheses) or "(none)"
        prompt = self.templates.question_conditional.format(
            topic=self.topic,
            history=format_history(history),
            hypotheses=listing,
            format_rules=self._format_rules(),
        )
        return self._propose_questions(prompt, m)

    def propose_question_naive(self, history: History) -> Question:
        prompt = self.templates.naive_question.format(
            topic=self.topic,
            history=format_history(history),
            format_rules=self._format_rules(),
        )
        for _ in range(PARSE_REASKS + 1):
            data = self._chat(prompt, temperature=self.config.temperature_naive)
            parsed = self._parse_question(self._contents(data)[0])
            if parsed is not None:
                return parsed
        raise QuestionGenerationError("no parseable question from the naive prompt")

    # -- environment side -------------------------------------------------------

    def simulate_answer(self, target: Hypothesis, question: Question, seed: int) -> Answer:
        prompt = self.templates.answerer.format(
            topic=self.topic,
            target=target.text,
            question=question.text,
            options=self._render_options(question),
        )
        # One completion, reply mapped to an option label; one re-ask on an
        # unmappable reply.  The seed rides along to the endpoint for whatever
        # reproducibility it offers.
        for _ in range(2):
            data = self._chat(prompt, temperature=1.0, max_tokens=8, seed=seed)
            idx = self._label_index(_first_word(self._contents(data)[0]), question)
            if idx is not None:
                return Answer(question_id=question.id, option_index=idx)
        raise BackendError(f"answerer reply did not name an option for {question.id!r}")

    def _judge_once(self, persona: Hypothesis, items: Sequence[str]) -> list[float | None]:
        listing = "\n".join(f"{i + 1}. {item}" for i, item in enumerate(items))
        prompt = self.templates.judge.format(persona=persona.text, items=listing)
        data = self._chat(prompt, temperature=0.0)
        ratings: list[float | None] = [None] * len(items)
        for line in self._contents(data)[0].splitlines():
            matched = _JUDGE_LINE.match(line)
            if not matched:
                continue
            position = int(matched.group(1)) - 1
            if 0 <= position < len(items):
                ratings[position] = snap_rating(float(matched.group(2)))
        return ratings

    def judge_recommendations(
        self, persona: Hypothesis, items: Sequence[str]
    ) -> list[float | None]:
        if not items:
            raise ValueError("items must be non-empty")
        ratings = self._judge_once(persona, items)
        missing = [i for i, r in enumerate(ratings) if r is None]
        if missing:
            # One re-ask covering just the unrated items; still-missing ratings
            # stay None and are excluded from downstream means.
            retry = self._judge_once(persona, [items[i] for i in missing])
            for slot, rating in zip(missing, retry):
                ratings[slot] = rating
        return ratings

    def posterior_hypothesis_entropy(
        self, history: History, question: Question, answer: Answer, k: int
    ) -> float:
        if k < 2:
            raise ValueError("k must be >= 2")
        extended = history.append(question, answer)
        draws = self.sample_hypothesis_batch(extended, k)
        if not draws:
            raise BackendError("no hypotheses parsed for the posterior-entropy estimate")
        counts: dict[str, int] = {}
        for hyp in draws:
            counts[hyp.key] = counts.get(hyp.key, 0) + 1
        total = len(draws)
        return max(0.0, -math.fsum((c / total) * math.log(c / total) for c in counts.values()))

    def greedy_guess(
        self, history: History, candidates: Sequence[Hypothesis] | None = None
    ) -> Hypothesis:
        if candidates is not None:
            if not candidates:
                raise ValueError("candidates must be non-empty when given")
            listing = "\n".join(c.text for c in candidates)
            prompt = self.templates.greedy_guess.format(
                topic=self.topic, history=format_history(history), candidates=listing
            )
            data = self._chat(prompt, temperature=0.0)
            lines = _clean_lines(self._contents(data)[0])
            reply = normalize_key(lines[0]) if lines else ""
            for cand in candidates:
                if cand.key == reply:
                    return cand
            return candidates[0]
        prompt = self.templates.greedy_guess_open.format(
            topic=self.topic, history=format_history(history)
        )
        data = self._chat(prompt, temperature=0.0)
        lines = _clean_lines(self._contents(data)[0])
        if not lines:
            raise BackendError("empty greedy-guess response")
        return Hypothesis(lines[0])

    def recommendations(self, history: History, count: int) -> list[str]:
        prompt = self.templates.recommendations.format(
            count=count, history=format_history(history)
        )
        data = self._chat(prompt, temperature=1.0)
        return _clean_lines(self._contents(data)[0])[:count]

    def item_consistency(self, item: str, history: History) -> bool:
        prompt = self.templates.item_consistency.format(
            item=item, history=format_history(history)
        )
        data = self._chat(prompt, temperature=0.0)
        word = _first_word(self._contents(data)[0]).lower()
        if word == "yes":
            return False
        return True
