// Game-view math: countdown interpolation between session polls.

import { describe, expect, it } from "vitest";

import { gameView, needsRefresh } from "../src/game.js";
import type { GameSessionDoc } from "../src/types.js";

function session(overrides: Partial<GameSessionDoc> = {}): GameSessionDoc {
  return {
    id: "g",
    project_id: "p",
    model_version: 1,
    rng_seed: 1,
    duration_s: 90,
    round_s: 5,
    round_count: 18,
    state: "running",
    time_left_s: 90,
    current_round: { index: 1, target_label_id: "a", target_name: "Banana", ends_in_s: 5 },
    total_score: null,
    ...overrides,
  };
}

describe("gameView", () => {
  it("shows round 1 with full countdowns right after start", () => {
    const view = gameView(session(), 0);
    expect(view).toMatchObject({
      state: "running",
      roundIndex: 1,
      roundCount: 18,
      targetName: "Banana",
    });
    expect(view.gameEndsIn).toBe(90);
    expect(view.roundEndsIn).toBe(5);
  });

  it("interpolates between polls", () => {
    const view = gameView(session(), 2.5);
    expect(view.gameEndsIn).toBeCloseTo(87.5);
    expect(view.roundEndsIn).toBeCloseTo(2.5);
    expect(view.roundIndex).toBe(1);
  });

  it("advances the local round index past a boundary before the next poll", () => {
    const view = gameView(session(), 6.0);
    expect(view.roundIndex).toBe(2);
    expect(view.state).toBe("running");
  });

  it("flips to finished when the interpolated clock runs out", () => {
    const doc = session({ time_left_s: 0.5 });
    expect(gameView(doc, 0.2).state).toBe("running");
    expect(gameView(doc, 0.8).state).toBe("finished");
  });

  it("clamps the round index to the round count", () => {
    const doc = session({ time_left_s: 2, current_round: { index: 18, target_label_id: "a", target_name: "Pear", ends_in_s: 2 } });
    expect(gameView(doc, 1.0).roundIndex).toBe(18);
  });

  it("reports finished sessions as finished", () => {
    const view = gameView(session({ state: "finished", total_score: 42 }), 0);
    expect(view.state).toBe("finished");
    expect(view.targetName).toBeNull();
  });
});

describe("needsRefresh", () => {
  it("requests a poll on round boundaries and state changes", () => {
    const base = gameView(session(), 0);
    expect(needsRefresh(base, gameView(session(), 1))).toBe(false);
    expect(needsRefresh(base, gameView(session(), 6))).toBe(true);
    expect(needsRefresh(base, gameView(session({ state: "finished" }), 0))).toBe(true);
  });
});
