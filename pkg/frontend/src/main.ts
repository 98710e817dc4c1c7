/** Entry point: hash routing between the wizard and a live session view.
 *
 * `#/session/<id>` resumes that session (refresh-safe: all state is
 * re-fetched); anything else shows the wizard.  The service base URL
 * defaults to same-origin and can be overridden with `?api=http://...`.
 */

import { ApiClient, ApiError } from "./api.js";
import { SessionStore } from "./store.js";
import {
  renderSessionView,
  renderWizard,
  validateWizard,
  wizardConfig,
  WIZARD_DEFAULTS,
  WizardValues,
} from "./views.js";

function apiBase(): string {
  const param = new URLSearchParams(window.location.search).get("api");
  return param ? param.replace(/\/$/, "") : "";
}

const client = new ApiClient(apiBase());
const mount = document.getElementById("app") as HTMLElement;

let store: SessionStore | null = null;
let wizardValues: WizardValues = { ...WIZARD_DEFAULTS };
let wizardErrors: Record<string, string> = {};
let wizardBanner: string | null = null;

function swap(node: HTMLElement): void {
  mount.replaceChildren(node);
}

function showWizard(): void {
  swap(
    renderWizard({
      values: wizardValues,
      errors: wizardErrors,
      banner: wizardBanner,
      onSubmit: (values) => void startSession(values),
    }),
  );
}

async function startSession(values: WizardValues): Promise<void> {
  wizardValues = values;
  wizardErrors = validateWizard(values);
  wizardBanner = null;
  if (Object.keys(wizardErrors).length > 0) {
    showWizard();
    return;
  }
  try {
    const snapshot = await client.createSession(wizardConfig(values));
    window.location.hash = `#/session/${snapshot.id}`;
  } catch (err) {
    if (err instanceof ApiError && Object.keys(err.fields).length > 0) {
      wizardErrors = err.fields;
    } else if (err instanceof ApiError && err.code !== "network") {
      wizardBanner = err.message;
    } else {
      wizardBanner = "Service unreachable; check the server and retry.";
    }
    showWizard();
  }
}

function showSession(id: string): void {
  store = new SessionStore(client, id);
  store.subscribe((state) => {
    swap(
      renderSessionView(state, {
        onAnswer: (label) => void store?.submit(label),
      }),
    );
  });
  void store.start();
}

function route(): void {
  store?.stop();
  store = null;
  const match = /^#\/session\/([\w-]+)$/.exec(window.location.hash);
  if (match && match[1]) {
    showSession(match[1]);
  } else {
    showWizard();
  }
}

window.addEventListener("hashchange", route);
route();
