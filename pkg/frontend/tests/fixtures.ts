/** Shared wire-shaped fixtures for the unit tests. */

import { ScoreRow, Snapshot, WireQuestion } from "../src/api.js";
import { StoreState } from "../src/store.js";

export function binaryQuestion(id: string, text: string, guess?: string): WireQuestion {
  const question: WireQuestion = {
    id,
    text,
    kind: "binary",
    options: [
      { label: "Yes", text: "Yes" },
      { label: "No", text: "No" },
    ],
  };
  if (guess !== undefined) question.guess = guess;
  return question;
}

export function multipleChoiceQuestion(id: string, text: string): WireQuestion {
  return {
    id,
    text,
    kind: "multiple-choice",
    options: [
      { label: "A", text: "red" },
      { label: "B", text: "green" },
      { label: "C", text: "blue" },
      { label: "D", text: "plaid" },
      { label: "E", text: "none of the above" },
    ],
  };
}

export function scoreRow(id: string, score: number, overrides: Partial<ScoreRow> = {}): ScoreRow {
  return { question_id: id, text: `Question ${id}?`, score, estimator: "eig", is_guess: false, ...overrides };
}

export function snapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    id: "s1",
    status: "awaiting-answer",
    turn: 0,
    budget: 20,
    pending_question: binaryQuestion("q1", "Is it bigger than a breadbox?"),
    history: [],
    belief: { count: 3, hypotheses: ["Cat", "Dog", "Newt"] },
    last_scores: [scoreRow("q1", 0.69), scoreRow("q2", 0.12)],
    outcome: null,
    error: null,
    ...overrides,
  };
}

export function storeState(snap: Snapshot | null, extra: Partial<StoreState> = {}): StoreState {
  return { phase: "active", snapshot: snap, submitting: false, notice: null, ...extra };
}
