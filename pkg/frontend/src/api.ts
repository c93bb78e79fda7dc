/** Typed client for the negotiation session service.
 *
 * The service is the single source of truth; this client only knows the four
 * documented endpoints and never computes outcomes locally.
 */

export interface Message {
  speaker: "human" | "agent";
  text: string;
}

export interface Outcome {
  agreed: boolean;
  reward_human: number;
  reward_agent: number;
  agent_values: number[];
  pareto: boolean;
  agent_take?: number[];
}

export type SessionState = "human_turn" | "awaiting_selections" | "done";

export interface SessionView {
  id: string;
  pool: number[];
  values: number[];
  state: SessionState;
  messages: Message[];
  turns_used: number;
  max_turns: number;
  outcome?: Outcome;
}

export interface MessageResponse {
  events: Message[];
  state: SessionState;
  outcome?: Outcome;
}

export type Take = number[] | "no_agreement";

/** A non-2xx response from the service, with the server's explanation. */
export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public detail: Record<string, string> = {},
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      throw new ApiError(
        response.status,
        payload.error ?? `request failed (${response.status})`,
        payload.detail ?? {},
      );
    }
    return payload as T;
  }

  createSession(seed?: number): Promise<SessionView> {
    return this.request("POST", "/sessions", seed === undefined ? {} : { seed });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${id}`);
  }

  sendMessage(id: string, text: string): Promise<MessageResponse> {
    return this.request("POST", `/sessions/${id}/message`, { text });
  }

  sendSelection(id: string, take: Take): Promise<Outcome> {
    return this.request("POST", `/sessions/${id}/selection`, { take });
  }
}
