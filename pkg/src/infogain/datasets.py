"""Target datasets: parsing, guess matching, and the bundled animals fixture.

Dataset files are UTF-8 text with one target per line.  Fields are separated
by `` | ``; the first field is the canonical display name and any further
fields are alternative names that also count as correct guesses:

    Golden poison frog | Golden poison dart frog

``#`` lines and blank lines are ignored.  Guess matching is case-insensitive
exact matching after normalization (whitespace collapsing and accent folding),
applied symmetrically to the guess and to every listed name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from infogain.core import normalize_key


@dataclass(frozen=True)
class TargetEntry:
    """One target: canonical name plus alternative names that count as correct."""

    name: str
    alternatives: tuple[str, ...] = ()
    keys: frozenset[str] = field(init=False)

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("target name must be non-empty")
        keys = {normalize_key(self.name)}
        for alt in self.alternatives:
            if not alt.strip():
                raise ValueError(f"empty alternative name for {self.name!r}")
            keys.add(normalize_key(alt))
        object.__setattr__(self, "keys", frozenset(keys))

    @property
    def id(self) -> str:
        """Stable identifier used for per-target artifact files."""
        return normalize_key(self.name).replace(" ", "-")


def evaluate_guess(guess: str, entry: TargetEntry) -> bool:
    """Case-insensitive exact match against the canonical or any alternative name."""
    return normalize_key(guess) in entry.keys


def parse_dataset(text: str) -> tuple[TargetEntry, ...]:
    entries: list[TargetEntry] = []
    seen: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("|")]
        if any(not f for f in fields):
            raise ValueError(f"line {lineno}: empty field in {line!r}")
        entry = TargetEntry(name=fields[0], alternatives=tuple(fields[1:]))
        previous = seen.get(normalize_key(entry.name))
        if previous is not None:
            raise ValueError(f"line {lineno}: duplicate target {entry.name!r} (also {previous!r})")
        seen[normalize_key(entry.name)] = entry.name
        entries.append(entry)
    if not entries:
        raise ValueError("dataset contains no targets")
    return tuple(entries)


def load_dataset(path: str | Path) -> tuple[TargetEntry, ...]:
    return parse_dataset(Path(path).read_text(encoding="utf-8"))


def animals_dataset() -> tuple[TargetEntry, ...]:
    """The bundled list of 100 animals, several with alternative names."""
    text = resources.files("infogain").joinpath("data/animals.txt").read_text(encoding="utf-8")
    return parse_dataset(text)
