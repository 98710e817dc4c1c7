"""Persona world: a synthetic preference-elicitation environment.

The world holds a roster of persona archetypes (each loving and hating a few
tags) and a catalog of items carrying tags.  Personas double as hypotheses:
their description paragraphs are the candidate texts the engine reasons over.
Questions are multiple choice over groups of four tags, with the fixed final
"none of the above" escape.

Answer behaviour is tabular underneath (see `TabularBackend`), so posterior
and gain computations stay exactly checkable; only the three recommendation
operations get persona-specific semantics:

- recommendations rank catalog items by posterior-expected tag affinity;
- an item is consistent with the history when that expected affinity is not
  negative;
- the judge rates an item 3 plus the target persona's affinity for it,
  yielding whole-number ratings on the 1-5 scale, and None for items outside
  the catalog.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from infogain.backends.tabular import TabularBackend, TabularModel
from infogain.core import (
    CategoricalDistribution,
    History,
    Hypothesis,
    Question,
    QuestionKind,
    multiple_choice_options,
    normalize_key,
)

LOVED_WEIGHT = 8.0
NEUTRAL_WEIGHT = 1.0
HATED_WEIGHT = 0.2
NONE_WEIGHT = 1.0


@dataclass(frozen=True)
class PersonaEntry:
    """One archetype: a short name, a description paragraph, and tag tastes."""

    name: str
    description: str
    loves: tuple[str, ...]
    hates: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("persona name must be non-empty")
        if not self.description.strip():
            raise ValueError(f"persona {self.name!r} needs a description")
        object.__setattr__(self, "loves", tuple(normalize_key(t) for t in self.loves))
        object.__setattr__(self, "hates", tuple(normalize_key(t) for t in self.hates))
        overlap = set(self.loves) & set(self.hates)
        if overlap:
            raise ValueError(f"persona {self.name!r} both loves and hates {sorted(overlap)}")

    def affinity(self, tags: Sequence[str]) -> int:
        """Net taste for a tag set: loved minus hated tag count, clipped to [-2, 2]."""
        loved = sum(1 for t in tags if t in self.loves)
        hated = sum(1 for t in tags if t in self.hates)
        return max(-2, min(2, loved - hated))


@dataclass(frozen=True)
class PersonaWorld:
    """Roster of personas plus a tagged item catalog."""

    personas: tuple[PersonaEntry, ...]
    items: tuple[tuple[str, tuple[str, ...]], ...]
    topic: str = "films"

    def __post_init__(self) -> None:
        if len(self.personas) < 2:
            raise ValueError("world needs at least two personas")
        names = [p.name for p in self.personas]
        if len(set(names)) != len(names):
            raise ValueError("persona names must be unique")
        keys = [normalize_key(p.description) for p in self.personas]
        if len(set(keys)) != len(keys):
            raise ValueError("persona descriptions must be distinct under normalization")
        if not self.items:
            raise ValueError("world needs a non-empty item catalog")
        titles = [normalize_key(title) for title, _ in self.items]
        if len(set(titles)) != len(titles):
            raise ValueError("item titles must be unique under normalization")
        normalized = tuple(
            (title, tuple(normalize_key(t) for t in tags)) for title, tags in self.items
        )
        for title, tags in normalized:
            if not tags:
                raise ValueError(f"item {title!r} has no tags")
        object.__setattr__(self, "items", normalized)

    def tag_vocabulary(self) -> list[str]:
        tags = {t for p in self.personas for t in p.loves + p.hates}
        tags |= {t for _, item_tags in self.items for t in item_tags}
        return sorted(tags)

    def persona_by_name(self, name: str) -> PersonaEntry:
        for p in self.personas:
            if p.name == name:
                return p
        raise KeyError(f"no persona named {name!r}")


def _tag_questions(world: PersonaWorld) -> tuple[Question, ...]:
    """Bank of multiple-choice questions covering the tag vocabulary in groups of four."""
    vocab = world.tag_vocabulary()
    if len(vocab) < 4:
        raise ValueError(f"need at least four distinct tags, got {vocab}")
    groups: list[list[str]] = []
    for start in range(0, len(vocab) - len(vocab) % 4, 4):
        groups.append(vocab[start : start + 4])
    if len(vocab) % 4:
        # Remainder tags still get asked about; the final group overlaps.
        groups.append(vocab[-4:])
    return tuple(
        Question(
            id=f"tags-{g + 1}",
            text=f"Which of these kinds of {world.topic} do you enjoy most?",
            options=multiple_choice_options(group),
            kind=QuestionKind.MULTIPLE_CHOICE,
        )
        for g, group in enumerate(groups)
    )


def _persona_row(persona: PersonaEntry, question: Question) -> CategoricalDistribution:
    weights = []
    for option in question.options[:-1]:
        tag = normalize_key(option.text)
        if tag in persona.loves:
            weights.append(LOVED_WEIGHT)
        elif tag in persona.hates:
            weights.append(HATED_WEIGHT)
        else:
            weights.append(NEUTRAL_WEIGHT)
    weights.append(NONE_WEIGHT)
    return CategoricalDistribution.from_weights(weights)


def _build_model(world: PersonaWorld) -> TabularModel:
    questions = _tag_questions(world)
    hypotheses = tuple(Hypothesis(p.description) for p in world.personas)
    rows = tuple(
        tuple(_persona_row(p, q) for q in questions) for p in world.personas
    )
    return TabularModel(
        topic=f"{world.topic} taste", hypotheses=hypotheses, questions=questions, rows=rows
    )


class PersonaBackend(TabularBackend):
    """Tabular backend over persona descriptions plus catalog-aware judging."""

    def __init__(
        self,
        world: PersonaWorld,
        seed: int = 0,
        proposal_smoothing: float = 0.05,
        sampled_posterior_entropy: bool = False,
    ) -> None:
        super().__init__(
            _build_model(world),
            seed=seed,
            proposal_smoothing=proposal_smoothing,
            sampled_posterior_entropy=sampled_posterior_entropy,
        )
        self.world = world
        self._persona_by_key: Mapping[str, PersonaEntry] = {
            normalize_key(p.description): p for p in world.personas
        }
        self._item_by_key: Mapping[str, tuple[str, ...]] = {
            normalize_key(title): tags for title, tags in world.items
        }

    def persona_hypothesis(self, name: str) -> Hypothesis:
        """The Hypothesis carrying the named persona's description."""
        return Hypothesis(self.world.persona_by_name(name).description)

    def _expected_affinity(self, tags: Sequence[str], posterior: Sequence[float]) -> float:
        return math.fsum(
            posterior[i] * self.world.personas[i].affinity(tags)
            for i in range(len(self.world.personas))
        )

    def judge_recommendations(
        self, persona: Hypothesis, items: Sequence[str]
    ) -> list[float | None]:
        entry = self._persona_by_key.get(persona.key)
        if entry is None:
            raise KeyError(f"unknown persona {persona.text!r}")
        ratings: list[float | None] = []
        for item in items:
            tags = self._item_by_key.get(normalize_key(item))
            if tags is None:
                ratings.append(None)
            else:
                ratings.append(float(3 + entry.affinity(tags)))
        return ratings

    def recommendations(self, history: History, count: int) -> list[str]:
        posterior = self.model.posterior(history)
        scored = [
            (-self._expected_affinity(tags, posterior), idx, title)
            for idx, (title, tags) in enumerate(self.world.items)
        ]
        scored.sort()
        return [title for _, _, title in scored[:count]]

    def item_consistency(self, item: str, history: History) -> bool:
        tags = self._item_by_key.get(normalize_key(item))
        if tags is None:
            return False
        posterior = self.model.posterior(history)
        return self._expected_affinity(tags, posterior) >= 0.0


def parse_persona_world(payload: dict) -> PersonaWorld:
    personas = tuple(
        PersonaEntry(
            name=p["name"],
            description=p["description"],
            loves=tuple(p.get("loves", ())),
            hates=tuple(p.get("hates", ())),
        )
        for p in payload["personas"]
    )
    items = tuple((item["title"], tuple(item["tags"])) for item in payload["items"])
    return PersonaWorld(personas=personas, items=items, topic=payload.get("topic", "films"))


def load_persona_world(path: str | Path) -> PersonaWorld:
    return parse_persona_world(json.loads(Path(path).read_text(encoding="utf-8")))


def bundled_persona_world() -> PersonaWorld:
    """The shipped 20-persona film-taste fixture with its tagged catalog."""
    text = resources.files("infogain").joinpath("data/personas.json").read_text(encoding="utf-8")
    return parse_persona_world(json.loads(text))
