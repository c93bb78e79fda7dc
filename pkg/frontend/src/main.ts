/** Page bootstrap: open a session and round-trip every action through the
 * service.  One session per tab; "new game" starts over.
 */

import { ApiClient, ApiError, type SessionView, type Take } from "./api.js";
import { applyMessageResponse } from "./state.js";
import { renderSession, showServerError } from "./ui.js";

const api = new ApiClient("");
const root = document.getElementById("app")!;

let view: SessionView;

function rerender(): void {
  renderSession(root, view, { onSend, onSelect });
}

async function onSend(text: string): Promise<void> {
  try {
    const response = await api.sendMessage(view.id, text);
    view = applyMessageResponse(view, response);
    rerender();
  } catch (error) {
    if (error instanceof ApiError) showServerError(root, error.message, error.detail);
    else throw error;
  }
}

async function onSelect(take: Take): Promise<void> {
  try {
    const outcome = await api.sendSelection(view.id, take);
    view = { ...view, state: "done", outcome };
    rerender();
  } catch (error) {
    if (error instanceof ApiError) showServerError(root, error.message, error.detail);
    else throw error;
  }
}

async function start(): Promise<void> {
  view = await api.createSession();
  rerender();
}

document.getElementById("new-game")!.addEventListener("click", () => void start());
void start();
