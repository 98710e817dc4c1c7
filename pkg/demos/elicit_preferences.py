"""
=======================================
Adaptive preference elicitation
=======================================

The same engine pointed at taste instead of trivia.  Hypotheses are candidate
user profiles, questions are multiple choice ("which of these do you enjoy?",
final option always "none of the above"), and after every answer the session
recommends items under the current belief.  A simulated persona answers and
then rates each recommendation 1-5; per-turn mean ratings show the value of
each extra question.
"""

from infogain.backends.personas import PersonaBackend, bundled_persona_world
from infogain.belief import FilterConfig
from infogain.controller import SessionConfig
from infogain.core import QuestionKind
from infogain.harness import rate_run, run_preference_session

PERSONA = "hopeless-romantic"
BUDGET = 4

world = bundled_persona_world()
config = SessionConfig(
    question_kind=QuestionKind.MULTIPLE_CHOICE,
    budget=BUDGET,
    filter=FilterConfig(target_count=8),
    seed=11,
)
questioner = PersonaBackend(world, seed=11)
answerer = PersonaBackend(world, seed=12)
persona = answerer.persona_hypothesis(PERSONA)

record = run_preference_session(config, persona, questioner, answerer, count=5)
print(f"Persona: {PERSONA}")
print(f"Catalog: {len(world.items)} items, {len(world.personas)} candidate profiles\n")

for turn in record.turns:
    print(f"Q{turn.index}: {turn.question.text}")
    print(f"    answered {turn.answer_text!r}")
    rated = [
        f"{item} ({'unrated' if score is None else f'{score:.1f}'})"
        for item, score in zip(turn.recommendations, turn.ratings)
    ]
    print(f"    recommends: {', '.join(rated)}")

# Aggregate the run as the harness would for many personas.

metrics = rate_run([record])
print("\nmean rating by turn:",
      ", ".join("n/a" if m is None else f"{m:.2f}" for m in metrics.rating_mean))
if record.error:
    print(f"session ended early: {record.error}")
