/** DOM renderers: pure functions from state to elements, no client-side scores.
 *
 * Everything shown comes from the latest snapshot; the panels never compute
 * or re-rank anything the service did not send, except for presentation
 * order (score bars render highest first, ties stable by arrival index).
 */

import { ScoreRow, SessionConfigInput, Snapshot } from "./api.js";
import { StoreState } from "./store.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function formatScore(score: number): string {
  return score.toFixed(3);
}

/** Highest score first; equal scores keep their original (bank) order. */
export function rankScores(rows: ScoreRow[]): ScoreRow[] {
  return rows
    .map((row, index) => ({ row, index }))
    .sort((a, b) => b.row.score - a.row.score || a.index - b.index)
    .map((entry) => entry.row);
}

// -- wizard -------------------------------------------------------------------

export interface WizardValues {
  strategy: string;
  question_kind: string;
  budget: string;
  seed: string;
  target_count: string;
}

export const WIZARD_DEFAULTS: WizardValues = {
  strategy: "eig",
  question_kind: "binary",
  budget: "20",
  seed: "0",
  target_count: "15",
};

/** Client-side mirror of the service's config validation. */
export function validateWizard(values: WizardValues): Record<string, string> {
  const errors: Record<string, string> = {};
  const integer = (raw: string) => /^-?\d+$/.test(raw.trim());
  if (!integer(values.budget)) errors.budget = "expected an integer";
  else if (Number(values.budget) < 1) errors.budget = "must be at least 1";
  if (!integer(values.seed)) errors.seed = "expected an integer";
  else if (Number(values.seed) < 0) errors.seed = "must be at least 0";
  if (!integer(values.target_count)) errors["filter.target_count"] = "expected an integer";
  else if (Number(values.target_count) < 1) errors["filter.target_count"] = "must be at least 1";
  return errors;
}

export function wizardConfig(values: WizardValues): SessionConfigInput {
  return {
    strategy: values.strategy,
    question_kind: values.question_kind as SessionConfigInput["question_kind"],
    budget: Number(values.budget),
    seed: Number(values.seed),
    filter: { target_count: Number(values.target_count) },
  };
}

export interface WizardProps {
  values: WizardValues;
  /** Field errors, client- or service-reported, keyed like the service's. */
  errors: Record<string, string>;
  /** Non-field failure, e.g. the service being down. */
  banner: string | null;
  onSubmit: (values: WizardValues) => void;
}

export function renderWizard(props: WizardProps): HTMLElement {
  const root = el("section", "wizard");
  root.append(el("h1", undefined, "New session"));
  if (props.banner) {
    const banner = el("div", "banner error", props.banner);
    banner.setAttribute("data-banner", "");
    root.append(banner);
  }
  const form = el("form");
  const values = { ...props.values };
  const consumed = new Set<string>();

  const field = (name: keyof WizardValues, label: string, control: HTMLElement) => {
    const wrap = el("label", "field");
    wrap.append(el("span", "field-name", label), control);
    const key = name === "target_count" ? "filter.target_count" : name;
    consumed.add(key);
    const message = props.errors[key];
    if (message) {
      const err = el("span", "field-error", message);
      err.setAttribute("data-error-for", name);
      wrap.append(err);
    }
    form.append(wrap);
  };

  const select = (name: keyof WizardValues, options: string[]) => {
    const node = el("select");
    node.setAttribute("name", name);
    for (const value of options) {
      const opt = el("option", undefined, value);
      opt.setAttribute("value", value);
      if (value === values[name]) opt.setAttribute("selected", "");
      node.append(opt);
    }
    node.addEventListener("change", () => (values[name] = node.value));
    return node;
  };

  const input = (name: keyof WizardValues) => {
    const node = el("input");
    node.setAttribute("name", name);
    node.value = values[name];
    node.addEventListener("input", () => (values[name] = node.value));
    return node;
  };

  field("strategy", "Strategy", select("strategy", ["eig", "entropy", "data-estimation", "naive"]));
  field("question_kind", "Questions", select("question_kind", ["binary", "multiple-choice"]));
  field("budget", "Question budget", input("budget"));
  field("seed", "Seed", input("seed"));
  field("target_count", "Belief size", input("target_count"));

  // Service errors keyed outside the rendered fields (e.g. whole-config
  // rejections) still need somewhere visible to land.
  const leftovers = Object.entries(props.errors).filter(([key]) => !consumed.has(key));
  if (leftovers.length > 0) {
    const banner = el("div", "banner error", leftovers.map(([k, v]) => `${k}: ${v}`).join("; "));
    banner.setAttribute("data-banner", "");
    root.append(banner);
  }

  const submit = el("button", "primary", "Start session");
  submit.setAttribute("type", "submit");
  form.append(submit);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    props.onSubmit(values);
  });
  root.append(form);
  return root;
}

// -- session panels -----------------------------------------------------------

export function renderAnswerPanel(state: StoreState, onAnswer: (label: string) => void): HTMLElement {
  const root = el("section", "answer-panel");
  const snapshot = state.snapshot;
  if (!snapshot) return root;

  root.append(el("div", "turn-meta", `Turn ${snapshot.turn} of ${snapshot.budget}`));

  if (state.notice) {
    const notice = el("div", "banner notice", state.notice);
    notice.setAttribute("data-notice", "");
    root.append(notice);
  }

  if (snapshot.status === "finished") {
    const banner = el("div", `banner outcome ${snapshot.outcome ?? ""}`);
    banner.setAttribute("data-outcome", snapshot.outcome ?? "");
    banner.textContent =
      snapshot.outcome === "success"
        ? `Got it in ${snapshot.turn} questions.`
        : snapshot.outcome === "budget-exhausted"
          ? "Budget exhausted; the answerer wins."
          : `Session aborted: ${snapshot.error ?? "unknown error"}`;
    root.append(banner);
    return root;
  }

  if (snapshot.status === "computing" || !snapshot.pending_question) {
    const busy = el("div", "computing", "Choosing the next question...");
    busy.setAttribute("data-computing", "");
    root.append(busy);
    return root;
  }

  const question = snapshot.pending_question;
  const card = el("div", "question-card");
  card.append(el("h2", "question-text", question.text));
  const buttons = el("div", "options");
  for (const option of question.options) {
    const caption = option.text === option.label ? option.label : `${option.label}. ${option.text}`;
    const button = el("button", "option", caption);
    button.setAttribute("data-option-label", option.label);
    if (state.submitting) button.setAttribute("disabled", "");
    button.addEventListener("click", () => onAnswer(option.label));
    buttons.append(button);
  }
  card.append(buttons);
  root.append(card);
  return root;
}

export function renderBeliefPanel(snapshot: Snapshot): HTMLElement {
  const root = el("section", "belief-panel");
  const count = el("h2", undefined, `Belief: ${snapshot.belief.count} candidates`);
  count.setAttribute("data-belief-count", String(snapshot.belief.count));
  root.append(count);

  if (snapshot.belief.count === 0) {
    root.append(
      el("div", "fallback-notice", "No consistent candidates; questions fall back to history only."),
    );
  } else {
    const list = el("ul", "hypotheses");
    for (const text of snapshot.belief.hypotheses) list.append(el("li", undefined, text));
    root.append(list);
  }

  const ranked = rankScores(snapshot.last_scores);
  if (ranked.length > 0) {
    const estimator = ranked[0]!.estimator;
    root.append(el("h3", undefined, `Candidate questions (${estimator})`));
    const lo = Math.min(0, ...ranked.map((r) => r.score));
    const hi = Math.max(0, ...ranked.map((r) => r.score));
    const span = hi - lo || 1;
    const rows = el("div", "score-rows");
    for (const row of ranked) {
      const line = el("div", "score-row");
      line.setAttribute("data-score-row", row.question_id);
      line.setAttribute("data-score", formatScore(row.score));
      const label = row.is_guess ? `guess: ${row.text}` : row.text;
      line.append(el("span", "score-label", label));
      const bar = el("div", "score-bar");
      bar.style.width = `${(((row.score - lo) / span) * 100).toFixed(1)}%`;
      line.append(bar, el("span", "score-value", formatScore(row.score)));
      rows.append(line);
    }
    root.append(rows);
  }
  return root;
}

export function renderHistory(snapshot: Snapshot): HTMLElement {
  const root = el("section", "history");
  if (snapshot.history.length === 0) return root;
  root.append(el("h3", undefined, "Asked so far"));
  const list = el("ol");
  for (const pair of snapshot.history) {
    list.append(el("li", undefined, `${pair.question.text} ${pair.answer_text}`));
  }
  root.append(list);
  return root;
}

export interface SessionHandlers {
  onAnswer: (label: string) => void;
}

export function renderSessionView(state: StoreState, handlers: SessionHandlers): HTMLElement {
  const root = el("main", "session");
  if (state.phase === "connecting") {
    root.append(el("div", "computing", "Connecting..."));
    return root;
  }
  if (state.phase === "gone") {
    const banner = el("div", "banner error", "Unknown session; it may have expired.");
    banner.setAttribute("data-banner", "");
    root.append(banner);
    return root;
  }
  root.append(renderAnswerPanel(state, handlers.onAnswer));
  if (state.snapshot) {
    root.append(renderBeliefPanel(state.snapshot));
    root.append(renderHistory(state.snapshot));
  }
  return root;
}
