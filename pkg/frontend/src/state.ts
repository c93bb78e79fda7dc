/** Pure view-model logic: client-side validation mirroring the server rules,
 * and which controls each session state enables.  No DOM, no network.
 */

import type { MessageResponse, SessionState, SessionView } from "./api.js";

export const ITEM_NAMES = ["book", "hat", "ball"] as const;

export interface Controls {
  inputEnabled: boolean;
  selectionVisible: boolean;
  outcomeVisible: boolean;
}

export function controlsFor(state: SessionState): Controls {
  return {
    inputEnabled: state === "human_turn",
    selectionVisible: state === "awaiting_selections",
    outcomeVisible: state === "done",
  };
}

/** Mirrors the server's message rules: non-empty, at most 100 tokens. */
export function validateMessage(text: string): string | null {
  const tokens = text.trim().split(/\s+/).filter((t) => t.length > 0);
  if (tokens.length === 0) return "message is empty";
  if (tokens.length > 100) return "message longer than 100 tokens";
  return null;
}

/** Mirrors the server's claim rules: three integers, each within 0..pool[i]. */
export function validateTake(take: number[], pool: number[]): string | null {
  if (take.length !== pool.length) return "claim must cover every item";
  for (let i = 0; i < pool.length; i++) {
    if (!Number.isInteger(take[i])) {
      return `${ITEM_NAMES[i]} count must be a whole number`;
    }
    if (take[i] < 0 || take[i] > pool[i]) {
      return `${ITEM_NAMES[i]} count must be in 0..${pool[i]}`;
    }
  }
  return null;
}

/** Keep a stepper value inside 0..max under +1/-1 clicks. */
export function step(current: number, delta: number, max: number): number {
  return Math.min(max, Math.max(0, current + delta));
}

/** Fold a message response into the session view the page renders from. */
export function applyMessageResponse(view: SessionView, response: MessageResponse): SessionView {
  const messages = [...view.messages];
  for (const event of response.events) {
    if (event.text !== "<choose>") messages.push(event);
  }
  return {
    ...view,
    messages,
    state: response.state,
    outcome: response.outcome ?? view.outcome,
  };
}

export function outcomeBanner(outcome: { agreed: boolean; reward_human: number }): string {
  if (!outcome.agreed) return "no deal, 0 points";
  return `deal! you scored ${outcome.reward_human} points`;
}
