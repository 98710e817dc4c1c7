"""
==============================
An automated twenty questions
==============================

One full game of sequential questioning, played end to end on the bundled
animals list with the tabular emulation backend.  The questioner maintains a
filtered belief over candidate animals, scores each candidate question by the
expected information gain of its answer, asks the best one, and guesses once
the belief collapses.  The answerer only ever sees (target, question).
"""

from infogain.backends.tabular import TabularBackend, bit_split_model
from infogain.belief import FilterConfig
from infogain.controller import SessionConfig, apply_answer, run_turn, start_session, turn_seed
from infogain.datasets import animals_dataset

SEED = 7
TARGET = "Snow leopard"

dataset = animals_dataset()
model = bit_split_model([e.name for e in dataset], topic="animal", seed=SEED)
questioner = TabularBackend(model, seed=SEED)
answerer = TabularBackend(model, seed=SEED + 1)

config = SessionConfig(budget=12, filter=FilterConfig(target_count=24), seed=SEED)
target = next(h for h in model.hypotheses if h.text == TARGET)

# The initial belief is a fresh batch of candidates; no question asked yet.

state, report = start_session(config, questioner)
print(f"Target (hidden from the questioner): {target.text}")
print(f"Initial belief holds {len(state.belief)} candidates, "
      f"{len(report.rejections)} rejected while sampling\n")

while state.turn < config.budget:
    question, state = run_turn(state, questioner)
    if state.candidates:
        best = max(state.candidates, key=lambda s: s.score)
        score_note = f"score {best.score:.3f} ({best.estimator_kind.value})"
    else:
        score_note = "direct guess, no scoring needed"
    answer = answerer.simulate_answer(target, question, seed=turn_seed(SEED, state.turn + 1))
    state, report, solved = apply_answer(state, answer, questioner)
    print(f"Q{state.turn}: {question.text}")
    print(f"    {score_note}; answer {question.options[answer.option_index].text}; "
          f"{len(state.belief)} candidates remain")
    if solved:
        print(f"\nSolved in {state.turn} questions.")
        break
else:
    print("\nBudget exhausted without a confident guess.")
