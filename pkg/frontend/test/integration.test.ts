// @vitest-environment node
/** Live-session integration: a scripted session against the real HTTP
 * service (tiny randomly initialized model — the state machine, not the
 * negotiation skill, is under test).  Runs in the node environment because
 * happy-dom's fetch enforces the same-origin policy.
 */

import { spawn, execFileSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError, type SessionView } from "../src/api.js";
import { validateTake } from "../src/state.js";

const PORT = 8731;
const PREP = `
import numpy as np
from negotiator.corpus import SynthConfig, build_vocab, synth_corpus, to_perspectives
from negotiator.model import ModelConfig, NegotiationModel
import sys

out = sys.argv[1]
records = synth_corpus(np.random.default_rng(0), 40, SynthConfig())
examples = [p for r in records for p in to_perspectives(r)]
vocab = build_vocab(examples, min_count=5)
vocab.save(out + "/vocab.txt")
model = NegotiationModel(ModelConfig(
    vocab_size=len(vocab), goal_embed_dim=4, dialogue_embed_dim=8,
    goal_hidden=4, lm_hidden=8, output_hidden=8, attn_dim=4, summary_dim=8))
model.init(np.random.default_rng(1))
model.save(out + "/model.ckpt")
`;

let workdir: string;
let server: ChildProcess;
const api = new ApiClient(`http://127.0.0.1:${PORT}`);

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const response = await fetch(`http://127.0.0.1:${PORT}/sessions/none`);
      if (response.status === 404) return;
    } catch {
      /* not up yet */
    }
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "webui-it-"));
  execFileSync("python3", ["-c", PREP, workdir], { stdio: "inherit" });
  server = spawn(
    "negotiator",
    [
      "serve",
      "--model", join(workdir, "model.ckpt"),
      "--vocab", join(workdir, "vocab.txt"),
      "--port", String(PORT),
      "--seed", "5",
    ],
    { stdio: "ignore" },
  );
  await waitForServer();
});

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

describe("live session", () => {
  it("runs create -> 3 exchanges -> selection -> revealed outcome", async () => {
    const view = await api.createSession(11);
    expect(view.pool).toHaveLength(3);
    expect(view.values).toHaveLength(3);
    expect(view.state).toBe("human_turn");

    let state: string = view.state;
    const payloads: unknown[] = [view];
    for (const text of ["i want the books", "you take the rest", "last offer"]) {
      if (state !== "human_turn") break;
      const response = await api.sendMessage(view.id, text);
      payloads.push(response);
      state = response.state;
    }

    if (state === "human_turn") {
      const ended = await api.sendMessage(view.id, "ok <choose>");
      payloads.push(ended);
      state = ended.state;
    }
    expect(state).toBe("awaiting_selections");

    // Agent valuation must be absent from every pre-Done payload.
    const midView = await api.getSession(view.id);
    payloads.push(midView);
    for (const payload of payloads) {
      expect(JSON.stringify(payload)).not.toContain("agent_values");
    }

    // Infeasible claim: rejected client-side...
    const bad = view.pool.map((c) => c + 1);
    expect(validateTake(bad, view.pool)).not.toBeNull();
    // ...and server-side, if it were sent anyway.
    const failure = await api.sendSelection(view.id, bad).catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(400);
    expect(Object.keys((failure as ApiError).detail).length).toBeGreaterThan(0);

    // The session survives the rejection and accepts a feasible claim.
    const outcome = await api.sendSelection(view.id, [view.pool[0], 0, 0]);
    expect(typeof outcome.agreed).toBe("boolean");
    expect(outcome.agent_values).toHaveLength(3);
    expect(outcome.reward_human).toBeGreaterThanOrEqual(0);

    const finalView: SessionView = await api.getSession(view.id);
    expect(finalView.state).toBe("done");
    expect(finalView.outcome?.agent_values).toHaveLength(3);
  });

  it("rejects messages for unknown sessions with 404", async () => {
    const failure = await api.sendMessage("nope", "hello").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(404);
  });

  it("rejects empty messages server-side", async () => {
    const view = await api.createSession(12);
    const failure = await api.sendMessage(view.id, "   ").catch((e) => e);
    expect(failure).toBeInstanceOf(ApiError);
    expect((failure as ApiError).status).toBe(400);
  });
});
