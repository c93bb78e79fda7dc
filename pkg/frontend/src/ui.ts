/** DOM rendering for one negotiation session.
 *
 * The page re-renders from the current SessionView on every state change;
 * there is no optimistic UI.  The agent's valuation appears only in the
 * outcome panel, which exists only once the state is "done".
 */

import type { SessionView, Take } from "./api.js";
import { ITEM_NAMES, controlsFor, outcomeBanner, step, validateMessage, validateTake } from "./state.js";

export interface Handlers {
  onSend(text: string): void;
  onSelect(take: Take): void;
}

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

function renderGoalPanel(view: SessionView): HTMLElement {
  const panel = el("div", "goal-panel");
  panel.appendChild(el("h2", undefined, "on the table"));
  const table = el("table", "goal-table");
  const head = el("tr");
  for (const label of ["item", "count", "worth to you"]) {
    head.appendChild(el("th", undefined, label));
  }
  table.appendChild(head);
  view.pool.forEach((count, i) => {
    const row = el("tr");
    row.appendChild(el("td", undefined, ITEM_NAMES[i]));
    row.appendChild(el("td", undefined, String(count)));
    row.appendChild(el("td", undefined, String(view.values[i])));
    table.appendChild(row);
  });
  panel.appendChild(table);
  panel.appendChild(
    el("p", "hint", `turns used: ${view.turns_used} / ${view.max_turns}`),
  );
  return panel;
}

function renderChatLog(view: SessionView): HTMLElement {
  const log = el("div", "chat-log");
  for (const message of view.messages) {
    const line = el("div", `chat-line ${message.speaker}`);
    line.appendChild(el("span", "speaker", message.speaker === "human" ? "you" : "agent"));
    line.appendChild(el("span", "text", message.text));
    log.appendChild(line);
  }
  if (view.messages.length === 0) {
    log.appendChild(el("p", "hint", "you speak first — make an opening offer"));
  }
  return log;
}

function renderComposer(view: SessionView, handlers: Handlers): HTMLElement {
  const controls = controlsFor(view.state);
  const composer = el("div", "composer");
  const input = el("input") as HTMLInputElement;
  input.type = "text";
  input.id = "message-input";
  input.placeholder = "say something… (end with <choose> to stop talking)";
  input.disabled = !controls.inputEnabled;
  const send = el("button", undefined, "send") as HTMLButtonElement;
  send.id = "send-button";
  send.disabled = !controls.inputEnabled;
  const error = el("p", "inline-error");
  error.id = "message-error";

  const submit = () => {
    const problem = validateMessage(input.value);
    if (problem) {
      error.textContent = problem;
      return;
    }
    error.textContent = "";
    handlers.onSend(input.value);
  };
  send.addEventListener("click", submit);
  input.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") submit();
  });

  composer.appendChild(input);
  composer.appendChild(send);
  composer.appendChild(error);
  return composer;
}

function renderSelectionForm(view: SessionView, handlers: Handlers): HTMLElement {
  const form = el("div", "selection-form");
  form.id = "selection-form";
  form.appendChild(el("h2", undefined, "your final claim"));
  const takes = view.pool.map(() => 0);

  view.pool.forEach((count, i) => {
    const row = el("div", "stepper-row");
    row.appendChild(el("span", "stepper-label", `${ITEM_NAMES[i]} (of ${count})`));
    const minus = el("button", "stepper", "−") as HTMLButtonElement;
    const value = el("span", "stepper-value", "0");
    value.id = `take-${i}`;
    const plus = el("button", "stepper", "+") as HTMLButtonElement;
    plus.id = `take-${i}-plus`;
    minus.id = `take-${i}-minus`;
    minus.addEventListener("click", () => {
      takes[i] = step(takes[i], -1, count);
      value.textContent = String(takes[i]);
    });
    plus.addEventListener("click", () => {
      takes[i] = step(takes[i], +1, count);
      value.textContent = String(takes[i]);
    });
    row.appendChild(minus);
    row.appendChild(value);
    row.appendChild(plus);
    form.appendChild(row);
  });

  const error = el("p", "inline-error");
  error.id = "selection-error";
  const submit = el("button", "primary", "submit claim") as HTMLButtonElement;
  submit.id = "submit-selection";
  submit.addEventListener("click", () => {
    const problem = validateTake(takes, view.pool);
    if (problem) {
      error.textContent = problem;
      return;
    }
    error.textContent = "";
    handlers.onSelect([...takes]);
  });
  const noDeal = el("button", undefined, "no deal") as HTMLButtonElement;
  noDeal.id = "submit-no-agreement";
  noDeal.addEventListener("click", () => handlers.onSelect("no_agreement"));

  form.appendChild(error);
  form.appendChild(submit);
  form.appendChild(noDeal);
  return form;
}

function renderOutcome(view: SessionView): HTMLElement {
  const outcome = view.outcome!;
  const panel = el("div", "outcome-panel");
  panel.id = "outcome-panel";
  panel.appendChild(el("h2", undefined, outcomeBanner(outcome)));
  const lines = [
    `your score: ${outcome.reward_human}`,
    `agent score: ${outcome.reward_agent}`,
    `agent's hidden values: ${ITEM_NAMES.map((n, i) => `${n}=${outcome.agent_values[i]}`).join(", ")}`,
  ];
  if (outcome.agent_take) {
    lines.push(`agent claimed: ${outcome.agent_take.join(", ")}`);
  }
  if (outcome.agreed) {
    lines.push(outcome.pareto ? "the deal was Pareto-optimal" : "a better deal existed for both of you");
  }
  for (const line of lines) panel.appendChild(el("p", undefined, line));
  return panel;
}

/** Render the whole page for one view into `root`, wiring the handlers. */
export function renderSession(root: HTMLElement, view: SessionView, handlers: Handlers): void {
  const controls = controlsFor(view.state);
  root.textContent = "";
  root.appendChild(renderGoalPanel(view));
  root.appendChild(renderChatLog(view));
  root.appendChild(renderComposer(view, handlers));
  if (controls.selectionVisible) root.appendChild(renderSelectionForm(view, handlers));
  if (controls.outcomeVisible && view.outcome) root.appendChild(renderOutcome(view));
}

/** Surface a server rejection inline without re-rendering (chat stays put). */
export function showServerError(root: HTMLElement, message: string, detail: Record<string, string>): void {
  const parts = [message, ...Object.entries(detail).map(([k, v]) => `${k}: ${v}`)];
  const target =
    root.querySelector("#selection-error") ?? root.querySelector("#message-error");
  if (target) target.textContent = parts.join("; ");
}
