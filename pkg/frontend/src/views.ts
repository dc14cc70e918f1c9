// Screen renderers. Every screen is a pure projection of the replica state
// plus local ephemeral camera/game state; any server event triggers a
// re-render through the app's refresh callback.

import { Api } from "./api.js";
import { captureFrame, startCamera, stopCamera } from "./camera.js";
import { drawBars } from "./charts.js";
import { gameView } from "./game.js";
import {
  datasetReport,
  formatPct,
  formatScore,
  labelName,
  liveLabels,
  ReplicaState,
  samplesByLabel,
  testDashboard,
} from "./state.js";
import type { GameSessionDoc, GameSummaryDoc, ResultDoc } from "./types.js";

export interface ViewContext {
  api: Api;
  state: ReplicaState;
  refresh: () => void;
  flash: (message: string) => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function confidenceBars(canvas: HTMLCanvasElement, state: ReplicaState, result: ResultDoc): void {
  const bars = Object.entries(result.distribution)
    .sort((a, b) => b[1] - a[1])
    .map(([labelId, confidence]) => ({
      label: labelName(state, labelId),
      value: confidence,
      highlight: labelId === result.top_label_id,
    }));
  canvas.width = 420;
  canvas.height = Math.max(bars.length * 34, 34);
  drawBars(canvas, bars, { maxValue: 1, format: formatPct });
}

// -- training data dashboard ---------------------------------------------------

export function renderTrainingDashboard(root: HTMLElement, ctx: ViewContext): void {
  root.innerHTML = "";
  const report = datasetReport(ctx.state);
  const headline = el("div", "headline");
  headline.append(
    el("h2", "", "Training data"),
    el("span", "muted", `${report.total} live samples`),
  );
  root.append(headline);

  const addRow = el("div", "row");
  const nameInput = el("input") as HTMLInputElement;
  nameInput.placeholder = "new label name";
  const addButton = el("button", "", "Add label");
  addButton.onclick = async () => {
    if (!nameInput.value.trim()) return;
    try {
      await ctx.api.addLabel(ctx.state.projectId, nameInput.value.trim());
      nameInput.value = "";
    } catch (e) {
      ctx.flash(String(e));
    }
  };
  addRow.append(nameInput, addButton);
  root.append(addRow);

  if (!liveLabels(ctx.state).length) {
    root.append(
      el("p", "muted", "No labels yet. Decide what your classifier should tell apart and add the first label above."),
    );
  }

  const grouped = samplesByLabel(ctx.state);
  for (const label of liveLabels(ctx.state)) {
    const samples = grouped.get(label.id) ?? [];
    const section = el("section", "label-group");
    const header = el("div", "row");
    header.append(
      el("h3", "", label.name),
      el("span", "muted", `${samples.length}`),
    );
    const renameButton = el("button", "small", "rename");
    renameButton.onclick = async () => {
      const name = prompt(`Rename ${label.name} to:`, label.name);
      if (!name || name === label.name) return;
      try {
        await ctx.api.renameLabel(ctx.state.projectId, label.id, name);
      } catch (e) {
        ctx.flash(String(e));
      }
    };
    const deleteButton = el("button", "small danger", "delete");
    deleteButton.onclick = async () => {
      if (!confirm(`Delete label ${label.name}?`)) return;
      try {
        await ctx.api.deleteLabel(ctx.state.projectId, label.id);
      } catch (e) {
        ctx.flash(String(e));
      }
    };
    header.append(renameButton, deleteButton);
    section.append(header);

    const grid = el("div", "thumb-grid");
    for (const sample of samples) {
      const cell = el("div", "thumb");
      const img = el("img") as HTMLImageElement;
      img.src = ctx.api.blobUrl(sample.imageSha);
      img.title = `by ${sample.author} — tap to remove`;
      img.onclick = async () => {
        if (!confirm("Remove this image from the dataset?")) return;
        try {
          await ctx.api.deleteSample(ctx.state.projectId, sample.id);
        } catch (e) {
          ctx.flash(String(e));
        }
      };
      cell.append(img);
      grid.append(cell);
    }
    section.append(grid);
    root.append(section);
  }

  const trainButton = el("button", "primary", "Train Model");
  trainButton.onclick = async () => {
    trainButton.disabled = true;
    trainButton.textContent = "Training…";
    try {
      const model = await ctx.api.train(ctx.state.projectId);
      ctx.flash(`Trained model v${model.version} on ${model.train_sample_count} samples`);
    } catch (e) {
      ctx.flash(String(e));
    } finally {
      trainButton.disabled = false;
      trainButton.textContent = "Train Model";
    }
  };
  root.append(trainButton);
}

// -- capture -----------------------------------------------------------------------

export function renderCapture(root: HTMLElement, ctx: ViewContext): () => void {
  root.innerHTML = "";
  root.append(el("h2", "", "Collect training data"));
  const labels = liveLabels(ctx.state);
  if (!labels.length) {
    root.append(el("p", "muted", "Add a label first, then collect photos for it."));
    return () => undefined;
  }

  const picker = el("select") as HTMLSelectElement;
  for (const label of labels) {
    const option = el("option", "", label.name) as HTMLOptionElement;
    option.value = label.id;
    picker.append(option);
  }
  const video = el("video", "camera") as HTMLVideoElement;
  video.muted = true;
  video.playsInline = true;
  const canvas = el("canvas") as HTMLCanvasElement;
  canvas.style.display = "none";
  const shutter = el("button", "primary", "Capture");
  const status = el("p", "muted");
  const existing = el("div", "thumb-grid");

  // existing images for the selected label sit alongside the camera
  const renderExisting = () => {
    existing.innerHTML = "";
    const samples = samplesByLabel(ctx.state).get(picker.value) ?? [];
    for (const sample of samples) {
      const img = el("img") as HTMLImageElement;
      img.src = ctx.api.blobUrl(sample.imageSha);
      const cell = el("div", "thumb");
      cell.append(img);
      existing.append(cell);
    }
  };
  picker.onchange = renderExisting;
  renderExisting();

  let stream: MediaStream | null = null;
  startCamera(video)
    .then((s) => (stream = s))
    .catch((e) => (status.textContent = `camera unavailable: ${e}`));

  shutter.onclick = async () => {
    const frame = await captureFrame(video, canvas);
    if (!frame) {
      status.textContent = "no frame yet";
      return;
    }
    try {
      await ctx.api.uploadSample(ctx.state.projectId, picker.value, frame);
      status.textContent = `added to ${labelName(ctx.state, picker.value)}`;
      renderExisting();
    } catch (e) {
      status.textContent = String(e);
    }
  };

  const row = el("div", "row");
  row.append(picker, shutter);
  root.append(row, video, canvas, status, existing);
  return () => stopCamera(stream);
}

// -- classify -----------------------------------------------------------------------

export function renderClassify(root: HTMLElement, ctx: ViewContext): () => void {
  root.innerHTML = "";
  root.append(el("h2", "", "Classify"));
  if (ctx.state.modelVersion === null) {
    root.append(el("p", "muted", "Train a model first."));
    return () => undefined;
  }

  const modeRow = el("div", "row");
  const photoButton = el("button", "primary", "Photo mode");
  const liveButton = el("button", "", "Live mode");
  modeRow.append(photoButton, liveButton);

  const video = el("video", "camera") as HTMLVideoElement;
  video.muted = true;
  video.playsInline = true;
  const canvas = el("canvas") as HTMLCanvasElement;
  canvas.style.display = "none";
  const chart = el("canvas", "chart") as HTMLCanvasElement;
  const status = el("p", "muted");
  const verdictRow = el("div", "row");

  let stream: MediaStream | null = null;
  let socket: WebSocket | null = null;
  let liveTimer: number | null = null;

  startCamera(video)
    .then((s) => (stream = s))
    .catch((e) => (status.textContent = `camera unavailable: ${e}`));

  const stopLive = () => {
    if (liveTimer !== null) clearInterval(liveTimer);
    liveTimer = null;
    socket?.close();
    socket = null;
  };

  photoButton.onclick = async () => {
    stopLive();
    const frame = await captureFrame(video, canvas);
    if (!frame) return;
    try {
      const doc = await ctx.api.classify(ctx.state.projectId, frame);
      const result = doc.result!;
      confidenceBars(chart, ctx.state, result);
      status.textContent = `top: ${labelName(ctx.state, result.top_label_id)} (${formatPct(result.top_confidence)})`;
      verdictRow.innerHTML = "";
      verdictRow.append(el("span", "muted", "If that was wrong, pick the correct label:"));
      for (const label of liveLabels(ctx.state)) {
        const fix = el("button", "small", label.name);
        fix.onclick = async () => {
          await ctx.api.setExpectedLabel(ctx.state.projectId, doc.sample.id, label.id);
          ctx.flash("recorded the correct label");
        };
        verdictRow.append(fix);
      }
    } catch (e) {
      status.textContent = String(e);
    }
  };

  liveButton.onclick = () => {
    if (socket) return;
    verdictRow.innerHTML = "";
    socket = ctx.api.liveClassifySocket(ctx.state.projectId);
    socket.binaryType = "arraybuffer";
    socket.onmessage = (message) => {
      const doc = JSON.parse(message.data as string);
      if (doc.result) {
        confidenceBars(chart, ctx.state, doc.result as ResultDoc);
        status.textContent = `live: ${labelName(ctx.state, doc.result.top_label_id)}`;
      }
    };
    // stream a bit above the server's 5 Hz cap; the server drops extras
    liveTimer = setInterval(async () => {
      if (!socket || socket.readyState !== WebSocket.OPEN) return;
      const frame = await captureFrame(video, canvas, 256);
      if (frame) socket.send(await frame.arrayBuffer());
    }, 150) as unknown as number;
  };

  root.append(modeRow, video, canvas, chart, status, verdictRow);
  return () => {
    stopLive();
    stopCamera(stream);
  };
}

// -- test dashboard -----------------------------------------------------------------

export function renderTestDashboard(root: HTMLElement, ctx: ViewContext): void {
  root.innerHTML = "";
  root.append(el("h2", "", "Test data"));
  const rows = testDashboard(ctx.state);
  if (!rows.length) {
    root.append(el("p", "muted", "Photos taken in photo mode land here as test data."));
    return;
  }
  const grid = el("div", "thumb-grid");
  for (const row of rows) {
    const cell = el("div", "thumb test-thumb");
    const img = el("img") as HTMLImageElement;
    img.src = ctx.api.blobUrl(row.sample.imageSha);
    const badge = el(
      "span",
      `badge badge-${row.badge}`,
      row.badge === "check" ? "✓" : row.badge === "cross" ? "✗" : "·",
    );
    const detail = el("div", "detail");
    cell.onclick = () => {
      detail.innerHTML = "";
      if (row.sample.latestResult) {
        const chart = el("canvas", "chart") as HTMLCanvasElement;
        confidenceBars(chart, ctx.state, row.sample.latestResult);
        detail.append(chart);
      }
      const remove = el("button", "small danger", "remove");
      remove.onclick = async (click) => {
        click.stopPropagation();
        await ctx.api.deleteTestSample(ctx.state.projectId, row.sample.id);
      };
      detail.append(remove);
    };
    cell.append(img, badge, detail);
    grid.append(cell);
  }
  root.append(grid);
}

// -- game --------------------------------------------------------------------------

export function renderGame(root: HTMLElement, ctx: ViewContext): () => void {
  root.innerHTML = "";
  root.append(el("h2", "", "Restaurant Frenzy"));
  if (ctx.state.modelVersion === null || liveLabels(ctx.state).length < 2) {
    root.append(el("p", "muted", "Train a model on at least two labels to play."));
    return () => undefined;
  }

  const video = el("video", "camera") as HTMLVideoElement;
  video.muted = true;
  video.playsInline = true;
  const canvas = el("canvas") as HTMLCanvasElement;
  canvas.style.display = "none";
  const chart = el("canvas", "chart") as HTMLCanvasElement;
  const hud = el("div", "hud");
  const startButton = el("button", "primary", "Start 90-second game");
  const status = el("p", "muted");

  let stream: MediaStream | null = null;
  let session: GameSessionDoc | null = null;
  let polledAt = 0;
  let loop: number | null = null;

  startCamera(video)
    .then((s) => (stream = s))
    .catch((e) => (status.textContent = `camera unavailable: ${e}`));

  const showSummary = (summary: GameSummaryDoc) => {
    root.querySelector(".summary")?.remove();
    const panel = el("section", "summary");
    panel.append(el("h3", "", "Game Over"));
    panel.append(
      el(
        "p",
        "",
        `Total score ${formatScore(summary.total_score)} over ${summary.round_count} rounds` +
          ` — high score ${formatScore(summary.high_score)}`,
      ),
    );
    const averages = el("canvas", "chart") as HTMLCanvasElement;
    averages.width = 420;
    averages.height = Math.max(summary.labels.length * 34, 34);
    drawBars(
      averages,
      summary.labels.map((row) => ({
        label: row.name,
        value: row.average_confidence_pct / 100,
      })),
      { maxValue: 1, format: formatPct },
    );
    panel.append(el("h4", "", "Average confidence per label"), averages);

    const details = el("details");
    details.append(el("summary", "", "View Round Details"));
    const table = el("table");
    const head = el("tr");
    for (const column of ["round", "target", "top", "score"]) {
      head.append(el("th", "", column));
    }
    table.append(head);
    for (const round of summary.rounds) {
      const tr = el("tr", round.correct ? "right" : "wrong");
      tr.append(
        el("td", "", String(round.index)),
        el("td", "", round.target_name),
        el("td", "", round.top_name ?? "—"),
        el("td", "", formatScore(round.score)),
      );
      table.append(tr);
    }
    details.append(table);
    panel.append(details);
    root.append(panel);
  };

  const stopLoop = () => {
    if (loop !== null) clearInterval(loop);
    loop = null;
  };

  startButton.onclick = async () => {
    root.querySelector(".summary")?.remove();
    try {
      session = await ctx.api.startGame(ctx.state.projectId, Date.now() >>> 0);
    } catch (e) {
      status.textContent = String(e);
      return;
    }
    polledAt = performance.now();
    startButton.disabled = true;

    loop = setInterval(async () => {
      if (!session) return;
      const sincePoll = (performance.now() - polledAt) / 1000;
      const view = gameView(session, sincePoll);
      hud.textContent =
        view.state === "running"
          ? `Round ${view.roundIndex}/${view.roundCount} — bring the ${view.targetName}! ` +
            `${view.roundEndsIn.toFixed(1)}s in round, ${Math.ceil(view.gameEndsIn)}s left`
          : "Time!";
      if (view.state === "finished") {
        stopLoop();
        startButton.disabled = false;
        try {
          showSummary(await ctx.api.gameSummary(ctx.state.projectId, session.id));
        } catch (e) {
          status.textContent = String(e);
        }
        session = null;
        return;
      }
      const frame = await captureFrame(video, canvas, 256);
      if (frame) {
        try {
          const doc = await ctx.api.submitGameFrame(
            ctx.state.projectId,
            session.id,
            view.roundIndex,
            frame,
          );
          confidenceBars(chart, ctx.state, doc.result as ResultDoc);
        } catch {
          // stale round at a boundary: refresh the session doc below
        }
      }
      try {
        session = await ctx.api.gameState(ctx.state.projectId, session.id);
        polledAt = performance.now();
      } catch {
        // transient poll failure; keep interpolating
      }
    }, 400) as unknown as number;
  };

  root.append(startButton, hud, video, canvas, chart, status);
  return () => {
    stopLoop();
    stopCamera(stream);
  };
}
