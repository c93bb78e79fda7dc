import { describe, expect, it } from "vitest";

import type { MessageResponse, SessionView } from "../src/api.js";
import {
  applyMessageResponse,
  controlsFor,
  outcomeBanner,
  step,
  validateMessage,
  validateTake,
} from "../src/state.js";

describe("controlsFor", () => {
  it("enables only the composer during the human turn", () => {
    expect(controlsFor("human_turn")).toEqual({
      inputEnabled: true,
      selectionVisible: false,
      outcomeVisible: false,
    });
  });

  it("shows only the selection form while awaiting selections", () => {
    expect(controlsFor("awaiting_selections")).toEqual({
      inputEnabled: false,
      selectionVisible: true,
      outcomeVisible: false,
    });
  });

  it("shows the outcome when done", () => {
    expect(controlsFor("done").outcomeVisible).toBe(true);
    expect(controlsFor("done").inputEnabled).toBe(false);
  });
});

describe("validateMessage", () => {
  it("rejects empty and whitespace-only text", () => {
    expect(validateMessage("")).not.toBeNull();
    expect(validateMessage("   ")).not.toBeNull();
  });

  it("accepts ordinary text", () => {
    expect(validateMessage("i want the books")).toBeNull();
  });

  it("rejects more than 100 tokens", () => {
    expect(validateMessage(Array(101).fill("word").join(" "))).not.toBeNull();
    expect(validateMessage(Array(100).fill("word").join(" "))).toBeNull();
  });
});

describe("validateTake", () => {
  const pool = [3, 2, 1];

  it("accepts takes within the pool bounds", () => {
    expect(validateTake([0, 0, 0], pool)).toBeNull();
    expect(validateTake([3, 2, 1], pool)).toBeNull();
  });

  it("rejects a count above the pool", () => {
    expect(validateTake([4, 0, 0], pool)).toMatch(/book/);
    expect(validateTake([0, 3, 0], pool)).toMatch(/hat/);
  });

  it("rejects negatives and non-integers", () => {
    expect(validateTake([-1, 0, 0], pool)).not.toBeNull();
    expect(validateTake([0.5, 0, 0], pool)).not.toBeNull();
  });

  it("rejects the wrong number of items", () => {
    expect(validateTake([1, 1], pool)).not.toBeNull();
  });
});

describe("step", () => {
  it("clamps to 0..max", () => {
    expect(step(0, -1, 3)).toBe(0);
    expect(step(3, +1, 3)).toBe(3);
    expect(step(1, +1, 3)).toBe(2);
  });
});

describe("applyMessageResponse", () => {
  const view: SessionView = {
    id: "s",
    pool: [1, 1, 3],
    values: [3, 1, 2],
    state: "human_turn",
    messages: [{ speaker: "human", text: "hi" }],
    turns_used: 1,
    max_turns: 20,
  };

  it("appends agent events and tracks the new state", () => {
    const response: MessageResponse = {
      events: [{ speaker: "agent", text: "i want the hat" }],
      state: "human_turn",
    };
    const next = applyMessageResponse(view, response);
    expect(next.messages).toHaveLength(2);
    expect(next.messages[1].text).toBe("i want the hat");
  });

  it("drops <choose> markers from the chat log but keeps the state change", () => {
    const response: MessageResponse = {
      events: [{ speaker: "agent", text: "<choose>" }],
      state: "awaiting_selections",
    };
    const next = applyMessageResponse(view, response);
    expect(next.messages).toHaveLength(1);
    expect(next.state).toBe("awaiting_selections");
  });
});

describe("outcomeBanner", () => {
  it("surfaces the zero-reward rule on no deal", () => {
    expect(outcomeBanner({ agreed: false, reward_human: 0 })).toBe("no deal, 0 points");
  });

  it("reports the score on a deal", () => {
    expect(outcomeBanner({ agreed: true, reward_human: 7 })).toContain("7");
  });
});
