// App bootstrap: project picker, then a workspace whose tabs are pure
// projections of the event-stream replica.

import { Api } from "./api.js";
import { applyEvent, emptyState, ReplicaState } from "./state.js";
import { EventStream, fetchLineSource } from "./stream.js";
import type { EventRecord, ProjectDoc } from "./types.js";
import {
  renderCapture,
  renderClassify,
  renderGame,
  renderTestDashboard,
  renderTrainingDashboard,
  ViewContext,
} from "./views.js";

const TABS = ["Data", "Capture", "Classify", "Test", "Game"] as const;
type Tab = (typeof TABS)[number];

function baseUrl(): string {
  // Served from /ui/ on the API host; allow an override for development.
  const override = new URLSearchParams(location.search).get("server");
  return override ?? location.origin;
}

class App {
  api: Api;
  root: HTMLElement;
  state: ReplicaState | null = null;
  stream: EventStream | null = null;
  tab: Tab = "Data";
  teardown: () => void = () => undefined;
  flashTimer: number | null = null;

  constructor() {
    const author = localStorage.getItem("co-modeler-author") ?? `user-${Date.now() % 10000}`;
    localStorage.setItem("co-modeler-author", author);
    this.api = new Api(baseUrl(), author);
    this.root = document.getElementById("app")!;
  }

  flash(message: string): void {
    const banner = document.getElementById("flash")!;
    banner.textContent = message;
    banner.classList.add("visible");
    if (this.flashTimer !== null) clearTimeout(this.flashTimer);
    this.flashTimer = setTimeout(() => banner.classList.remove("visible"), 4000) as unknown as number;
  }

  async showPicker(): Promise<void> {
    this.teardown();
    this.stream?.stop();
    this.root.innerHTML = "";
    const panel = document.createElement("div");
    panel.className = "picker";
    panel.innerHTML = "<h1>co-modeler</h1><p class='muted'>Pick a project or start one.</p>";

    let projects: ProjectDoc[] = [];
    try {
      projects = await this.api.listProjects();
    } catch (e) {
      panel.append(Object.assign(document.createElement("p"), { textContent: String(e) }));
    }
    const list = document.createElement("div");
    list.className = "project-list";
    for (const project of projects) {
      const button = document.createElement("button");
      button.textContent = `${project.name} — ${project.sample_count} samples`;
      button.onclick = () => this.openProject(project);
      list.append(button);
    }
    panel.append(list);

    const row = document.createElement("div");
    row.className = "row";
    const input = document.createElement("input");
    input.placeholder = "new project name";
    const create = document.createElement("button");
    create.textContent = "Create";
    create.onclick = async () => {
      if (!input.value.trim()) return;
      try {
        this.openProject(await this.api.createProject(input.value.trim()));
      } catch (e) {
        this.flash(String(e));
      }
    };
    row.append(input, create);
    panel.append(row);
    this.root.append(panel);
  }

  async openProject(project: ProjectDoc): Promise<void> {
    this.state = emptyState(project.id);
    const source = fetchLineSource(this.api.baseUrl, project.id);
    this.stream = new EventStream(source, (event: EventRecord) => {
      if (!this.state) return;
      applyEvent(this.state, event);
      this.renderTab();
    });
    void this.stream.run();
    this.renderShell(project);
  }

  renderShell(project: ProjectDoc): void {
    this.root.innerHTML = "";
    const bar = document.createElement("nav");
    const back = document.createElement("button");
    back.textContent = "← projects";
    back.onclick = () => void this.showPicker();
    bar.append(back);
    const title = document.createElement("strong");
    title.textContent = project.name;
    bar.append(title);
    for (const tab of TABS) {
      const button = document.createElement("button");
      button.textContent = tab;
      button.dataset.tab = tab;
      button.onclick = () => {
        this.tab = tab;
        this.renderTab();
      };
      bar.append(button);
    }
    this.root.append(bar);
    const body = document.createElement("main");
    body.id = "tab-body";
    this.root.append(body);
    this.renderTab();
  }

  renderTab(): void {
    if (!this.state) return;
    const body = document.getElementById("tab-body");
    if (!body) return;
    for (const button of this.root.querySelectorAll("nav button[data-tab]")) {
      button.classList.toggle("active", (button as HTMLElement).dataset.tab === this.tab);
    }
    this.teardown();
    this.teardown = () => undefined;
    const ctx: ViewContext = {
      api: this.api,
      state: this.state,
      refresh: () => this.renderTab(),
      flash: (message) => this.flash(message),
    };
    switch (this.tab) {
      case "Data":
        renderTrainingDashboard(body, ctx);
        break;
      case "Capture":
        this.teardown = renderCapture(body, ctx);
        break;
      case "Classify":
        this.teardown = renderClassify(body, ctx);
        break;
      case "Test":
        renderTestDashboard(body, ctx);
        break;
      case "Game":
        this.teardown = renderGame(body, ctx);
        break;
    }
  }
}

const app = new App();
void app.showPicker();
