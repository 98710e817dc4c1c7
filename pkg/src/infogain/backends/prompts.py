"""Prompt templates for the remote backend.

The wordings here are this package's own; the engine only depends on the
intent of each template and on its placeholders.  Swap any of them through
``RemoteBackend(templates=...)`` without touching engine code.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, fields

from infogain.core import History


def format_history(history: History, most_recent_first: bool = False) -> str:
    """Render question-answer pairs as plain text lines.

    Hypothesis sampling puts the most recent pair first so late constraints sit
    at the top of the context; other prompts keep chronological order.
    """
    if not history:
        return "(no questions asked yet)"
    pairs = list(history.pairs)
    if most_recent_first:
        pairs.reverse()
    lines = []
    for question, answer in pairs:
        option = question.options[answer.option_index]
        lines.append(f"Q: {question.text}")
        lines.append(f"A: {option.text}")
    return "\n".join(lines)


_REQUIRED_PLACEHOLDERS = {
    "hypothesis_batch": {"topic", "count", "history", "previous"},
    "likelihood_query": {"topic", "hypothesis", "question", "options"},
    "predictive_query": {"topic", "history", "question", "options"},
    "question_unconstrained": {"topic", "history", "format_rules"},
    "question_conditional": {"topic", "history", "hypotheses", "format_rules"},
    "naive_question": {"topic", "history", "format_rules"},
    "answerer": {"topic", "target", "question", "options"},
    "judge": {"persona", "items"},
    "greedy_guess": {"topic", "history", "candidates"},
    "greedy_guess_open": {"topic", "history"},
    "recommendations": {"count", "history"},
    "item_consistency": {"item", "history"},
}


@dataclass(frozen=True)
class PromptTemplates:
    """Named templates, one per backend operation that talks to the model."""

    hypothesis_batch: str
    likelihood_query: str
    predictive_query: str
    question_unconstrained: str
    question_conditional: str
    naive_question: str
    answerer: str
    judge: str
    greedy_guess: str
    greedy_guess_open: str
    recommendations: str
    item_consistency: str

    def __post_init__(self) -> None:
        formatter = string.Formatter()
        for f in fields(self):
            found = {
                name for _, name, _, _ in formatter.parse(getattr(self, f.name)) if name
            }
            missing = _REQUIRED_PLACEHOLDERS[f.name] - found
            if missing:
                raise ValueError(f"template {f.name!r} is missing placeholders {sorted(missing)}")


DEFAULT_TEMPLATES = PromptTemplates(
    hypothesis_batch=(
        "You are playing a deduction game about a hidden {topic}.\n"
        "Answers gathered so far, most recent first:\n{history}\n\n"
        "Candidates proposed in earlier rounds (do NOT repeat any of them):\n{previous}\n\n"
        "List {count} new, diverse candidates that are consistent with every answer above.\n"
        "Spread your picks across different categories, regions, and levels of fame or rarity.\n"
        "Output exactly one candidate per line with no numbering and no commentary."
    ),
    likelihood_query=(
        "The hidden {topic} is: {hypothesis}\n"
        "Question: {question}\n"
        "Possible responses: {options}\n"
        "Reply with exactly one of the response labels and nothing else."
    ),
    predictive_query=(
        "You are answering questions about a hidden {topic}.\n"
        "What is known so far:\n{history}\n\n"
        "Question: {question}\n"
        "Possible responses: {options}\n"
        "Given only what is known, reply with the single most plausible response "
        "label and nothing else."
    ),
    question_unconstrained=(
        "You are identifying a hidden {topic} by asking questions.\n"
        "Conversation so far:\n{history}\n\n"
        "Propose one sharp new question that would reveal a lot about the hidden "
        "{topic}, whatever it turns out to be. Avoid repeating earlier questions.\n"
        "{format_rules}"
    ),
    question_conditional=(
        "You are identifying a hidden {topic} by asking questions.\n"
        "Conversation so far:\n{history}\n\n"
        "The remaining plausible candidates are:\n{hypotheses}\n\n"
        "Propose one new question whose answer would split these candidates into "
        "roughly equal groups. Prefer a question that stays informative even for "
        "candidates not on the list. Avoid repeating earlier questions.\n"
        "{format_rules}"
    ),
    naive_question=(
        "You are identifying a hidden {topic} by asking questions.\n"
        "Conversation so far:\n{history}\n\n"
        "Ask the single question you most want answered next.\n"
        "{format_rules}"
    ),
    answerer=(
        "You are answering questions in a guessing game. The secret {topic} is: {target}\n"
        "Question: {question}\n"
        "Possible responses: {options}\n"
        "Answer truthfully for the secret {topic}. Reply with exactly one response label "
        "and nothing else."
    ),
    judge=(
        "A person describes their taste as follows:\n{persona}\n\n"
        "Rate how well each item below matches that taste on a scale from 1 to 5 in steps "
        "of 0.5 (5 = perfect match). For every item output one line in the form\n"
        "<number>. <rating> - <one short sentence of justification>\n\n"
        "Items:\n{items}"
    ),
    greedy_guess=(
        "You are identifying a hidden {topic}.\n"
        "Conversation so far:\n{history}\n\n"
        "Candidates:\n{candidates}\n\n"
        "Which single candidate is most likely? Reply with that candidate exactly as "
        "written above and nothing else."
    ),
    greedy_guess_open=(
        "You are identifying a hidden {topic}.\n"
        "Conversation so far:\n{history}\n\n"
        "State your single best guess for the hidden {topic}. Reply with the name only."
    ),
    recommendations=(
        "You are recommending films to a person you have been interviewing.\n"
        "Interview so far:\n{history}\n\n"
        "Recommend {count} films this person is likely to enjoy, consistent with every "
        "answer above. Output exactly one title per line, no numbering, no commentary."
    ),
    item_consistency=(
        "Interview with a person about their film taste:\n{history}\n\n"
        "Would recommending {item} contradict anything this person said? "
        "Reply Yes if it contradicts, No if it is consistent. Reply with one word."
    ),
)

BINARY_FORMAT_RULES = (
    "The question must be answerable with Yes or No. Output only the question itself, "
    "ending in a question mark, with no numbering and no commentary."
)

MULTIPLE_CHOICE_FORMAT_RULES = (
    "The question must be multiple choice with exactly four specific answer choices; "
    "a fifth choice \"none of the above\" is added automatically. Use this exact layout "
    "and output nothing else:\n"
    "Question: <the question>\n"
    "A) <choice>\n"
    "B) <choice>\n"
    "C) <choice>\n"
    "D) <choice>"
)
