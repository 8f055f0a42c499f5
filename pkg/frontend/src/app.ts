/**
 * Dashboard wiring: an overview table across experiments plus one live
 * panel (chart, status, stop control) per experiment.
 *
 * Query parameters: ?api=<base url> (default same origin), ?poll=<ms>
 * (default 2000), ?level=<ci level> (default 0.95).
 */

import { ApiClient, ApiError } from "./api.js";
import { renderChart } from "./chart.js";
import { HistorySeries } from "./history.js";
import { createPoller, DEFAULT_POLL_INTERVAL_MS, Poller } from "./poller.js";
import { markOverviewStale, renderOverview } from "./overview.js";
import { decisionBanner, StopFlow } from "./stop.js";

interface PanelHandles {
  series: HistorySeries;
  poller: Poller;
  root: HTMLElement;
}

export interface DashboardOptions {
  api: ApiClient;
  pollIntervalMs?: number;
  ciLevel?: string;
  alpha?: number;
  procedure?: string;
}

export class Dashboard {
  private readonly api: ApiClient;
  private readonly pollMs: number;
  private readonly level: string;
  private alpha: number;
  private procedure: string;
  private readonly panels = new Map<string, PanelHandles>();
  private overviewPoller: Poller | null = null;

  constructor(
    private readonly root: HTMLElement,
    options: DashboardOptions,
  ) {
    this.api = options.api;
    this.pollMs = options.pollIntervalMs ?? DEFAULT_POLL_INTERVAL_MS;
    this.level = options.ciLevel ?? "0.95";
    this.alpha = options.alpha ?? 0.05;
    this.procedure = options.procedure ?? "bh-independent";
  }

  start(): void {
    const doc = this.root.ownerDocument;
    this.root.textContent = "";

    const controls = doc.createElement("div");
    controls.className = "controls";
    controls.appendChild(this.procedureSelect(doc));
    controls.appendChild(this.alphaInput(doc));
    this.root.appendChild(controls);

    const overviewBox = doc.createElement("section");
    overviewBox.id = "overview-box";
    this.root.appendChild(overviewBox);

    const panelsBox = doc.createElement("section");
    panelsBox.id = "panels";
    this.root.appendChild(panelsBox);

    this.overviewPoller = createPoller(
      async () => {
        const overview = await this.api.overview({
          alpha: this.alpha,
          procedure: this.procedure,
          fcr: true,
        });
        renderOverview(overviewBox, overview);
        for (const row of overview.rows) this.ensurePanel(panelsBox, row.id);
      },
      {
        intervalMs: this.pollMs,
        onError: () => markOverviewStale(overviewBox, new Date()),
      },
    );
    this.overviewPoller.start();
  }

  stop(): void {
    this.overviewPoller?.stop();
    for (const panel of this.panels.values()) panel.poller.stop();
  }

  /** Changing alpha or procedure re-requests; nothing is recomputed here. */
  setCorrection(procedure: string, alpha: number): void {
    this.procedure = procedure;
    this.alpha = alpha;
    void this.overviewPoller?.tickNow();
  }

  private procedureSelect(doc: Document): HTMLSelectElement {
    const select = doc.createElement("select");
    select.id = "procedure";
    for (const name of ["bh-independent", "bh-general", "bonferroni"]) {
      const option = doc.createElement("option");
      option.value = name;
      option.textContent = name;
      select.appendChild(option);
    }
    select.value = this.procedure;
    select.addEventListener("change", () => this.setCorrection(select.value, this.alpha));
    return select;
  }

  private alphaInput(doc: Document): HTMLInputElement {
    const input = doc.createElement("input");
    input.id = "alpha";
    input.type = "number";
    input.step = "0.01";
    input.min = "0.001";
    input.max = "0.999";
    input.value = String(this.alpha);
    input.addEventListener("change", () => {
      const alpha = Number(input.value);
      if (alpha > 0 && alpha < 1) this.setCorrection(this.procedure, alpha);
    });
    return input;
  }

  private ensurePanel(parent: HTMLElement, id: string): void {
    if (this.panels.has(id)) return;
    const doc = parent.ownerDocument;

    const root = doc.createElement("article");
    root.className = "experiment-panel";
    root.dataset.id = id;

    const heading = doc.createElement("h2");
    heading.textContent = id;
    root.appendChild(heading);

    const banner = doc.createElement("div");
    banner.className = "decision-banner";
    root.appendChild(banner);

    const chartBox = doc.createElement("div");
    chartBox.className = "chart-box";
    root.appendChild(chartBox);

    const stopControls = doc.createElement("div");
    stopControls.className = "stop-controls";
    root.appendChild(stopControls);
    parent.appendChild(root);

    const series = new HistorySeries(id);
    const flow = new StopFlow(this.api, id);
    this.bindStopControls(stopControls, banner, flow, root);

    const poller = createPoller(
      async () => {
        try {
          const page = await this.api.history(id, series.cursor);
          if (series.append(page.events) > 0) {
            renderChart(chartBox, series.points, { level: this.level });
          }
        } catch (err) {
          if (err instanceof ApiError && err.isNotFound) {
            root.classList.add("missing");
            banner.textContent = "experiment missing";
            return;
          }
          throw err;
        }
      },
      { intervalMs: this.pollMs },
    );
    poller.start();
    this.panels.set(id, { series, poller, root });

    flow.onChange((state) => {
      if (state.kind === "decided") {
        poller.stop(); // freeze the chart at the decision
        banner.textContent = decisionBanner(state.record);
        root.classList.add("stopped");
      }
    });
  }

  private bindStopControls(
    box: HTMLElement,
    banner: HTMLElement,
    flow: StopFlow,
    panelRoot: HTMLElement,
  ): void {
    const doc = box.ownerDocument;

    const stopButton = doc.createElement("button");
    stopButton.className = "stop-begin";
    stopButton.textContent = "stop experiment";
    box.appendChild(stopButton);

    const confirmBox = doc.createElement("div");
    confirmBox.className = "stop-confirm";
    confirmBox.hidden = true;

    const prompt = doc.createElement("label");
    prompt.textContent = `type "${flow.experimentId}" to confirm; this cannot be undone`;
    confirmBox.appendChild(prompt);

    const input = doc.createElement("input");
    input.className = "stop-confirm-input";
    input.type = "text";
    confirmBox.appendChild(input);

    const submit = doc.createElement("button");
    submit.className = "stop-submit";
    submit.textContent = "stop now";
    submit.disabled = true;
    confirmBox.appendChild(submit);
    box.appendChild(confirmBox);

    stopButton.addEventListener("click", () => flow.begin());
    input.addEventListener("input", () => flow.type(input.value));
    submit.addEventListener("click", () => {
      const alphaField = panelRoot.ownerDocument.getElementById("alpha") as HTMLInputElement | null;
      void flow.submit(alphaField ? Number(alphaField.value) : 0.05, "stopped from dashboard");
    });

    flow.onChange((state) => {
      confirmBox.hidden = state.kind !== "confirming" && state.kind !== "submitting";
      submit.disabled = !(state.kind === "confirming" && state.armed);
      if (state.kind === "error") {
        banner.textContent = `stop failed: ${state.message}`;
      }
    });
  }
}

export function mountFromLocation(root: HTMLElement, location: Location): Dashboard {
  const params = new URLSearchParams(location.search);
  const base = params.get("api") ?? location.origin;
  const poll = params.get("poll");
  const dashboard = new Dashboard(root, {
    api: new ApiClient(base),
    pollIntervalMs: poll ? Number(poll) : undefined,
    ciLevel: params.get("level") ?? undefined,
  });
  dashboard.start();
  return dashboard;
}
