import { describe, expect, it } from "vitest";

import { DIMENSIONS } from "../src/api.js";
import { CardState } from "../src/card.js";

describe("CardState", () => {
  it("starts untouched and submits as a skip", () => {
    const state = new CardState();
    expect(state.untouched).toBe(true);
    expect(state.payload()).toEqual({});
  });

  it("carries only touched dimensions in the payload", () => {
    const state = new CardState();
    state.select("emo", "positive");
    expect(state.payload()).toEqual({ emo: "positive" });
    state.select("vit", "negative");
    expect(state.payload()).toEqual({ emo: "positive", vit: "negative" });
  });

  it("encodes the multi-dimension pattern", () => {
    const state = new CardState();
    state.select("emo", "positive");
    state.select("res", "positive");
    state.select("vit", "negative");
    expect(state.payload()).toEqual({ emo: "positive", res: "positive", vit: "negative" });
  });

  it("off-topic toggle clears selections and vice versa", () => {
    const state = new CardState();
    state.select("emo", "positive");
    state.toggleOfftopic();
    expect(state.offtopic).toBe(true);
    expect(state.selection("emo")).toBeUndefined();
    expect(state.payload()).toEqual({ all: "offtopic" });
    state.select("sat", "neutral");
    expect(state.offtopic).toBe(false);
    expect(state.payload()).toEqual({ sat: "neutral" });
  });

  it("toggling off-topic twice returns to a skip", () => {
    const state = new CardState();
    state.toggleOfftopic();
    state.toggleOfftopic();
    expect(state.untouched).toBe(true);
    expect(state.payload()).toEqual({});
  });

  it("clear removes one dimension", () => {
    const state = new CardState();
    state.select("emo", "positive");
    state.select("wor", "negative");
    state.clear("emo");
    expect(state.payload()).toEqual({ wor: "negative" });
  });

  it("reset returns to untouched for the next card", () => {
    const state = new CardState();
    for (const dimension of DIMENSIONS) {
      state.select(dimension, "neutral");
    }
    state.reset();
    expect(state.untouched).toBe(true);
  });
});
