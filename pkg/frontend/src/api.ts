// Thin typed client over the documented HTTP endpoints.

import type {
  DatasetReportDoc,
  GameSessionDoc,
  GameSummaryDoc,
  LabelDoc,
  ProjectDoc,
  TestSampleDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parse<T>(response: Response): Promise<T> {
  if (response.ok) return (await response.json()) as T;
  let code = "http_error";
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    code = body.error?.code ?? code;
    message = body.error?.message ?? message;
  } catch {
    // non-JSON error body
  }
  throw new ApiError(response.status, code, message);
}

export class Api {
  constructor(
    public baseUrl: string,
    public author: string = "browser",
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  blobUrl(sha: string): string {
    return this.url(`/blobs/${sha}`);
  }

  listProjects(): Promise<ProjectDoc[]> {
    return fetch(this.url("/projects")).then((r) => parse<ProjectDoc[]>(r));
  }

  createProject(name: string): Promise<ProjectDoc> {
    return fetch(this.url("/projects"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name }),
    }).then((r) => parse<ProjectDoc>(r));
  }

  getProject(projectId: string): Promise<ProjectDoc> {
    return fetch(this.url(`/projects/${projectId}`)).then((r) => parse<ProjectDoc>(r));
  }

  addLabel(projectId: string, name: string): Promise<LabelDoc> {
    return fetch(this.url(`/projects/${projectId}/labels?author=${this.author}`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name }),
    }).then((r) => parse<LabelDoc>(r));
  }

  renameLabel(projectId: string, labelId: string, name: string): Promise<LabelDoc> {
    return fetch(this.url(`/projects/${projectId}/labels/${labelId}?author=${this.author}`), {
      method: "PATCH",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ name }),
    }).then((r) => parse<LabelDoc>(r));
  }

  deleteLabel(projectId: string, labelId: string): Promise<void> {
    return fetch(this.url(`/projects/${projectId}/labels/${labelId}?author=${this.author}`), {
      method: "DELETE",
    }).then((r) => parse(r));
  }

  uploadSample(projectId: string, labelId: string, image: Blob): Promise<unknown> {
    const form = new FormData();
    form.append("image", image, "capture.png");
    form.append("label_id", labelId);
    form.append("author", this.author);
    return fetch(this.url(`/projects/${projectId}/samples`), {
      method: "POST",
      body: form,
    }).then((r) => parse(r));
  }

  deleteSample(projectId: string, sampleId: string): Promise<void> {
    return fetch(this.url(`/projects/${projectId}/samples/${sampleId}?author=${this.author}`), {
      method: "DELETE",
    }).then((r) => parse(r));
  }

  train(projectId: string): Promise<{ version: number; train_sample_count: number }> {
    return fetch(this.url(`/projects/${projectId}/train?author=${this.author}`), {
      method: "POST",
    }).then((r) => parse(r));
  }

  classify(projectId: string, image: Blob): Promise<{ sample: TestSampleDoc; result: TestSampleDoc["latest_result"] }> {
    const form = new FormData();
    form.append("image", image, "photo.png");
    return fetch(this.url(`/projects/${projectId}/classify?author=${this.author}`), {
      method: "POST",
      body: form,
    }).then((r) => parse(r));
  }

  setExpectedLabel(projectId: string, sampleId: string, labelId: string | null): Promise<TestSampleDoc> {
    return fetch(
      this.url(`/projects/${projectId}/test-samples/${sampleId}/expected-label?author=${this.author}`),
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ label_id: labelId }),
      },
    ).then((r) => parse<TestSampleDoc>(r));
  }

  deleteTestSample(projectId: string, sampleId: string): Promise<void> {
    return fetch(
      this.url(`/projects/${projectId}/test-samples/${sampleId}?author=${this.author}`),
      { method: "DELETE" },
    ).then((r) => parse(r));
  }

  report(projectId: string): Promise<DatasetReportDoc> {
    return fetch(this.url(`/projects/${projectId}/report`)).then((r) => parse<DatasetReportDoc>(r));
  }

  pullEvents(projectId: string, since: number): Promise<{ events: unknown[]; head_seq: number }> {
    return fetch(this.url(`/projects/${projectId}/events?since=${since}`)).then((r) => parse(r));
  }

  startGame(projectId: string, seed: number): Promise<GameSessionDoc> {
    return fetch(this.url(`/projects/${projectId}/game`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ seed, simulated: false }),
    }).then((r) => parse<GameSessionDoc>(r));
  }

  gameState(projectId: string, sessionId: string): Promise<GameSessionDoc> {
    return fetch(this.url(`/projects/${projectId}/game/${sessionId}`)).then((r) =>
      parse<GameSessionDoc>(r),
    );
  }

  submitGameFrame(
    projectId: string,
    sessionId: string,
    roundIndex: number,
    image: Blob,
  ): Promise<{ result: { distribution: Record<string, number>; top_label_id: string } }> {
    const form = new FormData();
    form.append("image", image, "frame.png");
    return fetch(
      this.url(`/projects/${projectId}/game/${sessionId}/frames?round_index=${roundIndex}`),
      { method: "POST", body: form },
    ).then((r) => parse(r));
  }

  gameSummary(projectId: string, sessionId: string): Promise<GameSummaryDoc> {
    return fetch(this.url(`/projects/${projectId}/game/${sessionId}/summary`)).then((r) =>
      parse<GameSummaryDoc>(r),
    );
  }

  liveClassifySocket(projectId: string): WebSocket {
    const ws = this.baseUrl.replace(/^http/, "ws");
    return new WebSocket(`${ws}/projects/${projectId}/classify/live`);
  }
}
