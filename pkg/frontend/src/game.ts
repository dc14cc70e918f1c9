// Pure game-view math: countdowns and round tracking for a running session.
// The server owns the clock; the browser interpolates between polls so the
// countdown is smooth even at a low poll rate.

import type { GameSessionDoc } from "./types.js";

export interface GameView {
  state: "running" | "finished";
  roundIndex: number;
  roundCount: number;
  targetName: string | null;
  roundEndsIn: number;
  gameEndsIn: number;
}

// elapsedSincePoll: seconds since the session doc was fetched.
export function gameView(doc: GameSessionDoc, elapsedSincePoll: number): GameView {
  if (doc.state === "finished") {
    return {
      state: "finished",
      roundIndex: doc.round_count,
      roundCount: doc.round_count,
      targetName: null,
      roundEndsIn: 0,
      gameEndsIn: 0,
    };
  }
  const gameEndsIn = Math.max(doc.time_left_s - elapsedSincePoll, 0);
  const current = doc.current_round;
  const roundEndsInRaw = (current?.ends_in_s ?? 0) - elapsedSincePoll;
  const elapsedTotal = doc.duration_s - gameEndsIn;
  const roundIndex = Math.min(
    Math.floor(elapsedTotal / doc.round_s) + 1,
    doc.round_count,
  );
  return {
    state: gameEndsIn <= 0 ? "finished" : "running",
    roundIndex,
    roundCount: doc.round_count,
    targetName: current?.target_name ?? null,
    roundEndsIn: Math.max(roundEndsInRaw, 0),
    gameEndsIn,
  };
}

export function needsRefresh(previous: GameView, next: GameView): boolean {
  return previous.roundIndex !== next.roundIndex || previous.state !== next.state;
}
