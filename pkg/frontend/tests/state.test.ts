// Reducer semantics must mirror the server: tombstones, renames with stable
// ids, self-contained retrain events, dashboard ordering.

import { describe, expect, it } from "vitest";

import {
  applyEvent,
  applyEvents,
  datasetReport,
  emptyState,
  formatPct,
  formatScore,
  liveLabels,
  sampleCorrect,
  testDashboard,
} from "../src/state.js";
import type { EventRecord } from "../src/types.js";

let seq = 0;

function event(kind: string, payload: Record<string, unknown>, author = "t"): EventRecord {
  seq += 1;
  return { seq, project_id: "p", kind, payload, author, server_time: "2026-01-01T00:00:00Z" };
}

function freshState() {
  seq = 0;
  return emptyState("p");
}

describe("reducer", () => {
  it("adds, renames, and tombstones labels with stable ids", () => {
    const state = freshState();
    applyEvents(state, [
      event("LabelAdded", { label_id: "l1", name: "Banana" }),
      event("LabelAdded", { label_id: "l2", name: "Orange" }),
      event("LabelRenamed", { label_id: "l1", name: "Plantain" }),
      event("LabelDeleted", { label_id: "l2" }),
    ]);
    expect(state.headSeq).toBe(4);
    expect(liveLabels(state).map((l) => l.name)).toEqual(["Plantain"]);
    expect(state.labels).toHaveLength(2);
    expect(state.labels[1].deleted).toBe(true);
  });

  it("rejects gaps in the event sequence", () => {
    const state = freshState();
    const first = event("LabelAdded", { label_id: "l1", name: "A" });
    const skipped = event("LabelAdded", { label_id: "l2", name: "B" });
    skipped.seq = 5;
    applyEvent(state, first);
    expect(() => applyEvent(state, skipped)).toThrow(/gap/);
  });

  it("counts only live samples under live labels in the dataset report", () => {
    const state = freshState();
    applyEvents(state, [
      event("LabelAdded", { label_id: "spaghetti", name: "spaghetti" }),
      event("LabelAdded", { label_id: "spoon", name: "spoon" }),
      event("SampleAdded", { sample_id: "s1", label_id: "spaghetti", image_sha256: "aa" }),
      event("SampleAdded", { sample_id: "s2", label_id: "spaghetti", image_sha256: "bb" }),
      event("SampleAdded", { sample_id: "s3", label_id: "spoon", image_sha256: "cc" }),
      event("SampleDeleted", { sample_id: "s2" }),
    ]);
    const report = datasetReport(state);
    expect(report.total).toBe(2);
    expect(report.rows).toEqual([
      { labelId: "spaghetti", name: "spaghetti", count: 1 },
      { labelId: "spoon", name: "spoon", count: 1 },
    ]);
  });

  it("applies retrain reclassifications to live test samples only", () => {
    const state = freshState();
    applyEvents(state, [
      event("LabelAdded", { label_id: "a", name: "A" }),
      event("LabelAdded", { label_id: "b", name: "B" }),
      event("TestSampleAdded", {
        sample_id: "t1",
        image_sha256: "dd",
        result: { distribution: { a: 0.9, b: 0.1 }, top_label_id: "a", top_confidence: 0.9 },
        model_version: 1,
      }),
      event("TestSampleAdded", { sample_id: "t2", image_sha256: "ee", result: null, model_version: null }),
      event("TestSampleDeleted", { sample_id: "t2" }),
      event("ModelTrained", {
        model: { version: 2, label_ids: ["a", "b"] },
        reclassified: [
          {
            sample_id: "t1",
            result: { distribution: { a: 0.2, b: 0.8 }, top_label_id: "b", top_confidence: 0.8 },
          },
          {
            sample_id: "t2",
            result: { distribution: { a: 0.5, b: 0.5 }, top_label_id: "a", top_confidence: 0.5 },
          },
        ],
      }),
    ]);
    expect(state.modelVersion).toBe(2);
    expect(state.testSamples.get("t1")!.latestModelVersion).toBe(2);
    expect(state.testSamples.get("t1")!.latestResult!.top_label_id).toBe("b");
    expect(state.testSamples.get("t2")!.latestModelVersion).toBeNull(); // tombstoned
  });

  it("derives correctness only when the expected label is live", () => {
    const state = freshState();
    applyEvents(state, [
      event("LabelAdded", { label_id: "a", name: "A" }),
      event("LabelAdded", { label_id: "b", name: "B" }),
      event("TestSampleAdded", {
        sample_id: "t1",
        image_sha256: "ff",
        result: { distribution: { a: 0.7, b: 0.3 }, top_label_id: "a", top_confidence: 0.7 },
        model_version: 1,
      }),
    ]);
    const sample = state.testSamples.get("t1")!;
    expect(sampleCorrect(state, sample)).toBeNull();
    applyEvent(state, event("ExpectedLabelSet", { sample_id: "t1", expected_label_id: "b" }));
    expect(sampleCorrect(state, sample)).toBe(false);
    applyEvent(state, event("ExpectedLabelSet", { sample_id: "t1", expected_label_id: "a" }));
    expect(sampleCorrect(state, sample)).toBe(true);
    applyEvent(state, event("LabelDeleted", { label_id: "a" }));
    expect(sampleCorrect(state, sample)).toBeNull(); // expected label tombstoned
  });
});

describe("test dashboard ordering", () => {
  it("orders wrong, right, unverdicted; newest first within each group", () => {
    const state = freshState();
    const result = (top: string) => ({
      distribution: { a: top === "a" ? 0.9 : 0.1, b: top === "b" ? 0.9 : 0.1 },
      top_label_id: top,
      top_confidence: 0.9,
    });
    applyEvents(state, [
      event("LabelAdded", { label_id: "a", name: "A" }),
      event("LabelAdded", { label_id: "b", name: "B" }),
      event("TestSampleAdded", { sample_id: "right-old", image_sha256: "1", result: result("a"), model_version: 1 }),
      event("TestSampleAdded", { sample_id: "wrong-old", image_sha256: "2", result: result("b"), model_version: 1 }),
      event("TestSampleAdded", { sample_id: "wrong-new", image_sha256: "3", result: result("b"), model_version: 1 }),
      event("TestSampleAdded", { sample_id: "plain", image_sha256: "4", result: result("a"), model_version: 1 }),
      event("ExpectedLabelSet", { sample_id: "right-old", expected_label_id: "a" }),
      event("ExpectedLabelSet", { sample_id: "wrong-old", expected_label_id: "a" }),
      event("ExpectedLabelSet", { sample_id: "wrong-new", expected_label_id: "a" }),
    ]);
    const rows = testDashboard(state);
    expect(rows.map((r) => r.sample.id)).toEqual(["wrong-new", "wrong-old", "right-old", "plain"]);
    expect(rows.map((r) => r.badge)).toEqual(["cross", "cross", "check", "none"]);
  });
});

describe("formatting", () => {
  it("formats confidences and scores the way the game reports them", () => {
    expect(formatPct(0.78)).toBe("78.0%");
    expect(formatScore(7.8)).toBe("7.8");
    expect(formatScore(0)).toBe("0.0");
  });
});
