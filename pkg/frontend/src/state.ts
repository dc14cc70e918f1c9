// Client-side replica of project state, rebuilt purely from server events.
// This reducer mirrors the server's semantics exactly: tombstone deletes,
// stable label ids across renames, self-contained ModelTrained events that
// re-classify every live test sample. Reloading and replaying from seq 0
// reconstructs the same view.

import type { EventRecord, ResultDoc } from "./types.js";

export interface Label {
  id: string;
  name: string;
  deleted: boolean;
}

export interface TrainingSample {
  id: string;
  labelId: string;
  imageSha: string;
  author: string;
  addedSeq: number;
  deleted: boolean;
}

export interface TestSample {
  id: string;
  imageSha: string;
  author: string;
  addedSeq: number;
  expectedLabelId: string | null;
  latestResult: ResultDoc | null;
  latestModelVersion: number | null;
  deleted: boolean;
}

export interface ReplicaState {
  projectId: string;
  headSeq: number;
  labels: Label[];
  samples: Map<string, TrainingSample>;
  testSamples: Map<string, TestSample>;
  modelVersion: number | null;
  modelLabelIds: string[];
}

export function emptyState(projectId: string): ReplicaState {
  return {
    projectId,
    headSeq: 0,
    labels: [],
    samples: new Map(),
    testSamples: new Map(),
    modelVersion: null,
    modelLabelIds: [],
  };
}

export function applyEvent(state: ReplicaState, event: EventRecord): void {
  if (event.seq !== state.headSeq + 1) {
    throw new Error(`event gap: expected seq ${state.headSeq + 1}, got ${event.seq}`);
  }
  const p = event.payload as Record<string, any>;
  switch (event.kind) {
    case "LabelAdded":
      state.labels.push({ id: p.label_id, name: p.name, deleted: false });
      break;
    case "LabelRenamed": {
      const label = state.labels.find((l) => l.id === p.label_id);
      if (label) label.name = p.name;
      break;
    }
    case "LabelDeleted": {
      const label = state.labels.find((l) => l.id === p.label_id);
      if (label) label.deleted = true;
      break;
    }
    case "SampleAdded":
      state.samples.set(p.sample_id, {
        id: p.sample_id,
        labelId: p.label_id,
        imageSha: p.image_sha256,
        author: event.author,
        addedSeq: event.seq,
        deleted: false,
      });
      break;
    case "SampleDeleted": {
      const sample = state.samples.get(p.sample_id);
      if (sample) sample.deleted = true;
      break;
    }
    case "TestSampleAdded":
      state.testSamples.set(p.sample_id, {
        id: p.sample_id,
        imageSha: p.image_sha256,
        author: event.author,
        addedSeq: event.seq,
        expectedLabelId: null,
        latestResult: (p.result as ResultDoc) ?? null,
        latestModelVersion: p.model_version ?? null,
        deleted: false,
      });
      break;
    case "TestSampleDeleted": {
      const sample = state.testSamples.get(p.sample_id);
      if (sample) sample.deleted = true;
      break;
    }
    case "ExpectedLabelSet": {
      const sample = state.testSamples.get(p.sample_id);
      if (sample) sample.expectedLabelId = p.expected_label_id ?? null;
      break;
    }
    case "ModelTrained": {
      const model = p.model as { version: number; label_ids: string[] };
      state.modelVersion = model.version;
      state.modelLabelIds = model.label_ids;
      const entries = (p.reclassified ?? []) as { sample_id: string; result: ResultDoc }[];
      for (const entry of entries) {
        const sample = state.testSamples.get(entry.sample_id);
        if (sample && !sample.deleted) {
          sample.latestResult = entry.result;
          sample.latestModelVersion = model.version;
        }
      }
      break;
    }
    default:
      break; // unknown kinds are ignored so old clients survive new servers
  }
  state.headSeq = event.seq;
}

export function applyEvents(state: ReplicaState, events: EventRecord[]): void {
  for (const event of events) applyEvent(state, event);
}

export function liveLabels(state: ReplicaState): Label[] {
  return state.labels.filter((l) => !l.deleted);
}

export function labelName(state: ReplicaState, labelId: string): string {
  return state.labels.find((l) => l.id === labelId)?.name ?? labelId;
}

export interface ReportRow {
  labelId: string;
  name: string;
  count: number;
}

// Per-label live sample counts; tombstoned labels and samples excluded.
export function datasetReport(state: ReplicaState): { rows: ReportRow[]; total: number } {
  const counts = new Map<string, number>();
  for (const label of liveLabels(state)) counts.set(label.id, 0);
  for (const sample of state.samples.values()) {
    if (!sample.deleted && counts.has(sample.labelId)) {
      counts.set(sample.labelId, (counts.get(sample.labelId) ?? 0) + 1);
    }
  }
  const rows = liveLabels(state).map((label) => ({
    labelId: label.id,
    name: label.name,
    count: counts.get(label.id) ?? 0,
  }));
  return { rows, total: rows.reduce((acc, row) => acc + row.count, 0) };
}

export function samplesByLabel(state: ReplicaState): Map<string, TrainingSample[]> {
  const grouped = new Map<string, TrainingSample[]>();
  for (const label of liveLabels(state)) grouped.set(label.id, []);
  for (const sample of state.samples.values()) {
    if (!sample.deleted) grouped.get(sample.labelId)?.push(sample);
  }
  for (const list of grouped.values()) list.sort((a, b) => a.addedSeq - b.addedSeq);
  return grouped;
}

export type Badge = "cross" | "check" | "none";

export function sampleCorrect(state: ReplicaState, sample: TestSample): boolean | null {
  if (!sample.latestResult || !sample.expectedLabelId) return null;
  const expected = state.labels.find((l) => l.id === sample.expectedLabelId);
  if (!expected || expected.deleted) return null;
  return sample.latestResult.top_label_id === sample.expectedLabelId;
}

export interface DashboardRow {
  sample: TestSample;
  badge: Badge;
  correct: boolean | null;
}

// Misclassified first, then correct, then unverdicted; newest first in groups.
export function testDashboard(state: ReplicaState): DashboardRow[] {
  const rank = (correct: boolean | null) => (correct === false ? 0 : correct === true ? 1 : 2);
  const rows: DashboardRow[] = [];
  for (const sample of state.testSamples.values()) {
    if (sample.deleted) continue;
    const correct = sampleCorrect(state, sample);
    rows.push({
      sample,
      correct,
      badge: correct === null ? "none" : correct ? "check" : "cross",
    });
  }
  rows.sort(
    (a, b) => rank(a.correct) - rank(b.correct) || b.sample.addedSeq - a.sample.addedSeq,
  );
  return rows;
}

export function formatPct(confidence: number): string {
  return `${(confidence * 100).toFixed(1)}%`;
}

export function formatScore(score: number): string {
  return score.toFixed(1);
}
