/**
 * Annotation app controller.
 *
 * Left click places a foreground point for the active object, right click (or
 * the background mode toggle) places a background point. Every change posts
 * the full prompt set to the segment endpoint (debounced 250 ms; latest reply
 * wins) and redraws the overlays. "Remove objects" launches a propagation job
 * and polls it; finished jobs populate a filmstrip with provenance badges and
 * a before/after slider.
 */

import { ApiClient, JobInfo, MaskEntry, Report, ViewInfo } from "./api.js";
import { BACKGROUND_COLOR, colorFor, colorToRgb } from "./palette.js";
import { decodeRle } from "./rle.js";
import { AnnotationState, PointKind } from "./state.js";

const SEGMENT_DEBOUNCE_MS = 250;
const JOB_POLL_MS = 700;
const JOB_STORAGE_KEY = "homer.job";

export interface AppOptions {
  debounceMs?: number;
  pollMs?: number;
  /** test hook: called instead of drawing when the 2D canvas is unavailable */
  onOverlaysRendered?: (masks: MaskEntry[]) => void;
}

export class App {
  state = new AnnotationState();
  views: ViewInfo[] = [];
  backgroundMode = false;
  job: JobInfo | null = null;
  report: Report | null = null;

  private root!: HTMLElement;
  private canvas!: HTMLCanvasElement;
  private banner!: HTMLElement;
  private launchBtn!: HTMLButtonElement;
  private filmstrip!: HTMLElement;
  private jobStatus!: HTMLElement;
  private viewStrip!: HTMLElement;
  private objectBar!: HTMLElement;
  private compare!: HTMLElement;
  private baseImage: HTMLImageElement | null = null;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;
  private pendingSegment = 0;

  constructor(
    private api: ApiClient,
    private opts: AppOptions = {},
  ) {}

  async mount(root: HTMLElement): Promise<void> {
    this.root = root;
    root.innerHTML = `
      <header>
        <h1>Object removal annotator</h1>
        <span class="hint">left click: mark object - right click: mark background to keep</span>
      </header>
      <div class="layout">
        <nav id="view-strip" aria-label="views"></nav>
        <main>
          <div id="object-bar"></div>
          <div class="canvas-wrap">
            <canvas id="annot-canvas"></canvas>
          </div>
          <div id="banner" hidden></div>
          <div class="controls">
            <label>background mode
              <input type="checkbox" id="bg-mode">
            </label>
            <label>key view interval n
              <input type="number" id="cfg-interval" value="10" min="1" size="4">
            </label>
            <button id="undo-btn" type="button">undo point</button>
            <button id="clear-btn" type="button">clear</button>
            <button id="export-btn" type="button">export prompts</button>
            <button id="import-btn" type="button">import prompts</button>
            <button id="launch-btn" type="button" disabled
              title="place at least one foreground point">remove objects</button>
            <span id="job-status"></span>
          </div>
          <div id="filmstrip" aria-label="results"></div>
          <div id="compare" hidden></div>
        </main>
      </div>`;
    this.canvas = root.querySelector("#annot-canvas")!;
    this.banner = root.querySelector("#banner")!;
    this.launchBtn = root.querySelector("#launch-btn")!;
    this.filmstrip = root.querySelector("#filmstrip")!;
    this.jobStatus = root.querySelector("#job-status")!;
    this.viewStrip = root.querySelector("#view-strip")!;
    this.objectBar = root.querySelector("#object-bar")!;
    this.compare = root.querySelector("#compare")!;

    this.canvas.addEventListener("click", (ev) => this.onCanvasClick(ev, false));
    this.canvas.addEventListener("contextmenu", (ev) => {
      ev.preventDefault();
      this.onCanvasClick(ev, true);
    });
    (root.querySelector("#bg-mode") as HTMLInputElement).addEventListener("change", (ev) => {
      this.backgroundMode = (ev.target as HTMLInputElement).checked;
    });
    root.querySelector("#undo-btn")!.addEventListener("click", () => {
      this.state.undoPoint();
      this.afterPointChange();
    });
    root.querySelector("#clear-btn")!.addEventListener("click", () => {
      this.state.clearPoints();
      this.afterPointChange();
    });
    root.querySelector("#export-btn")!.addEventListener("click", () => this.exportPrompts());
    root.querySelector("#import-btn")!.addEventListener("click", () => this.importPrompts());
    this.launchBtn.addEventListener("click", () => void this.launchPropagation());

    this.views = await this.api.listViews();
    this.renderViewStrip();
    this.renderObjectBar();
    if (this.views.length) this.selectView(this.views[0].index);
    this.resumeJobIfAny();
  }

  // -- view selection --

  private renderViewStrip(): void {
    this.viewStrip.innerHTML = "";
    for (const v of this.views) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = "view-thumb";
      btn.dataset.index = String(v.index);
      const img = document.createElement("img");
      img.src = this.api.viewImageUrl(v.index);
      img.alt = `view ${v.index}`;
      btn.append(img, document.createTextNode(`view ${v.index}`));
      btn.addEventListener("click", () => this.selectView(v.index));
      this.viewStrip.append(btn);
    }
  }

  selectView(index: number): void {
    this.state.selectView(index);
    for (const el of this.viewStrip.querySelectorAll(".view-thumb")) {
      el.classList.toggle("selected", (el as HTMLElement).dataset.index === String(index));
    }
    const info = this.views.find((v) => v.index === index)!;
    this.canvas.width = info.width;
    this.canvas.height = info.height;
    this.baseImage = new Image();
    this.baseImage.onload = () => this.redraw();
    this.baseImage.src = this.api.viewImageUrl(index);
    this.redraw();
  }

  private renderObjectBar(): void {
    this.objectBar.innerHTML = "";
    const ids = this.state.objectIds;
    const options = [...ids];
    if (options.length < 64) options.push(this.state.nextObjectId);
    for (const id of options) {
      const btn = document.createElement("button");
      btn.type = "button";
      btn.className = "object-chip";
      btn.dataset.objectId = String(id);
      btn.style.setProperty("--chip", colorFor(id));
      btn.textContent = ids.includes(id) ? `object ${id}` : `+ object ${id}`;
      btn.classList.toggle("active", id === this.state.activeObject);
      btn.addEventListener("click", () => {
        this.state.activeObject = id;
        this.renderObjectBar();
      });
      this.objectBar.append(btn);
    }
  }

  // -- annotation --

  private onCanvasClick(ev: MouseEvent, forceBackground: boolean): void {
    const rect = this.canvas.getBoundingClientRect();
    const scaleX = rect.width > 0 ? this.canvas.width / rect.width : 1;
    const scaleY = rect.height > 0 ? this.canvas.height / rect.height : 1;
    const x = (ev.clientX - rect.left) * scaleX;
    const y = (ev.clientY - rect.top) * scaleY;
    this.placePoint(x, y, forceBackground || this.backgroundMode
      ? { kind: "background" }
      : { kind: "foreground", objectId: this.state.activeObject });
  }

  /** Core entry used by both mouse handlers and tests. */
  placePoint(x: number, y: number, kind: PointKind): boolean {
    const info = this.views.find((v) => v.index === this.state.selectedView);
    if (!info) return false;
    const ok = this.state.placePoint(x, y, kind, info);
    if (!ok) {
      this.showBanner("click landed outside the image; ignored");
      return false;
    }
    if (kind.kind === "foreground") {
      this.state.activeObject = Math.min(kind.objectId, this.state.objectIds.length);
    }
    this.afterPointChange();
    return true;
  }

  private afterPointChange(): void {
    this.renderObjectBar();
    this.launchBtn.disabled = !this.state.hasForeground();
    this.launchBtn.title = this.launchBtn.disabled
      ? "place at least one foreground point"
      : "";
    this.redraw();
    this.scheduleSegment();
  }

  private scheduleSegment(): void {
    if (this.debounceTimer) clearTimeout(this.debounceTimer);
    if (!this.state.hasForeground()) {
      this.state.acceptOverlays(this.state.issueSeq(), []);
      this.redraw();
      return;
    }
    this.debounceTimer = setTimeout(
      () => void this.requestSegment(),
      this.opts.debounceMs ?? SEGMENT_DEBOUNCE_MS,
    );
  }

  /** Posts the current prompt set; stale replies are dropped by sequence. */
  async requestSegment(): Promise<void> {
    if (!this.state.hasForeground()) return;
    const seq = this.state.issueSeq();
    this.pendingSegment += 1;
    try {
      const reply = await this.api.segment(this.state.selectedView, this.state.toPrompts());
      if (this.state.acceptOverlays(seq, reply.masks)) {
        this.redraw();
        this.opts.onOverlaysRendered?.(reply.masks);
      }
    } catch (err) {
      this.showBanner(`segmentation failed: ${(err as Error).message}`);
    } finally {
      this.pendingSegment -= 1;
    }
  }

  /** Wait for the debounced request (and any in flight) to settle. */
  async settle(): Promise<void> {
    while (this.debounceTimer || this.pendingSegment > 0) {
      if (this.debounceTimer) {
        clearTimeout(this.debounceTimer);
        this.debounceTimer = null;
        await this.requestSegment();
      }
      await new Promise((r) => setTimeout(r, 10));
    }
  }

  // -- drawing --

  private redraw(): void {
    const ctx = this.canvas.getContext?.("2d");
    if (!ctx) return; // environments without 2D canvas (tests) skip painting
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.baseImage?.complete) ctx.drawImage(this.baseImage, 0, 0);
    for (const entry of this.state.overlays) {
      const [r, g, b] = colorToRgb(colorFor(entry.object_id));
      const bits = decodeRle(entry.rle);
      const img = ctx.createImageData(entry.rle.width, entry.rle.height);
      for (let i = 0; i < bits.length; i++) {
        if (bits[i]) {
          img.data[4 * i] = r;
          img.data[4 * i + 1] = g;
          img.data[4 * i + 2] = b;
          img.data[4 * i + 3] = 102; // ~40% opacity
        }
      }
      ctx.putImageData(img, 0, 0);
    }
    for (const p of this.state.foreground) {
      this.drawDot(ctx, p.x, p.y, colorFor(p.objectId));
    }
    for (const p of this.state.background) {
      this.drawDot(ctx, p.x, p.y, BACKGROUND_COLOR);
    }
  }

  private drawDot(ctx: CanvasRenderingContext2D, x: number, y: number, color: string): void {
    ctx.beginPath();
    ctx.arc(x, y, 4, 0, 2 * Math.PI);
    ctx.fillStyle = color;
    ctx.fill();
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }

  private showBanner(message: string): void {
    this.banner.hidden = false;
    this.banner.textContent = message;
    const dismiss = document.createElement("button");
    dismiss.type = "button";
    dismiss.textContent = "dismiss";
    dismiss.addEventListener("click", () => (this.banner.hidden = true));
    this.banner.append(" ", dismiss);
  }

  // -- prompts import/export --

  private exportPrompts(): void {
    const blob = new Blob([this.state.exportJson()], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = `prompts_view_${this.state.selectedView}.json`;
    a.click();
    URL.revokeObjectURL(a.href);
  }

  private importPrompts(): void {
    const input = document.createElement("input");
    input.type = "file";
    input.accept = "application/json";
    input.addEventListener("change", async () => {
      const file = input.files?.[0];
      if (!file) return;
      this.importPromptsText(await file.text());
    });
    input.click();
  }

  importPromptsText(text: string): void {
    try {
      this.state.importJson(text);
    } catch (err) {
      this.showBanner(`import failed: ${(err as Error).message}`);
      return;
    }
    if (this.state.selectedView >= 0) this.selectViewKeepingPoints(this.state.selectedView);
    this.afterPointChange();
  }

  private selectViewKeepingPoints(index: number): void {
    const info = this.views.find((v) => v.index === index);
    if (!info) return;
    this.canvas.width = info.width;
    this.canvas.height = info.height;
    this.baseImage = new Image();
    this.baseImage.onload = () => this.redraw();
    this.baseImage.src = this.api.viewImageUrl(index);
  }

  // -- propagation --

  async launchPropagation(): Promise<void> {
    if (!this.state.hasForeground() || this.job?.state === "running") return;
    const interval = Number(
      (this.root.querySelector("#cfg-interval") as HTMLInputElement).value || "10",
    );
    const reply = await this.api.propagate(this.state.toPrompts(), {
      key_view_interval: interval,
    });
    localStorage.setItem(JOB_STORAGE_KEY, reply.job_id);
    await this.trackJob(reply.job_id);
  }

  private resumeJobIfAny(): void {
    const id = localStorage.getItem(JOB_STORAGE_KEY);
    if (id) void this.trackJob(id);
  }

  async trackJob(id: string): Promise<void> {
    if (this.pollTimer) clearTimeout(this.pollTimer);
    try {
      this.job = await this.api.getJob(id);
    } catch {
      localStorage.removeItem(JOB_STORAGE_KEY);
      return;
    }
    this.renderJobStatus();
    if (this.job.state === "done") {
      await this.loadResults();
      return;
    }
    if (this.job.state === "failed") {
      this.showBanner(`propagation failed: ${this.job.error}`);
      return;
    }
    await new Promise((resolve) => {
      this.pollTimer = setTimeout(resolve, this.opts.pollMs ?? JOB_POLL_MS);
    });
    await this.trackJob(id);
  }

  private renderJobStatus(): void {
    if (!this.job) {
      this.jobStatus.textContent = "";
      return;
    }
    const p = this.job.progress;
    const extra = p.views_total ? ` ${p.views_done}/${p.views_total}` : "";
    this.jobStatus.textContent = `job ${this.job.state}: ${p.stage}${extra}`;
    this.jobStatus.className = `job-${this.job.state}`;
  }

  async loadResults(): Promise<void> {
    this.report = await this.api.report();
    this.renderFilmstrip();
  }

  /** Filmstrip of per-view results with provenance badges. */
  private renderFilmstrip(): void {
    this.filmstrip.innerHTML = "";
    if (!this.report) return;
    for (const view of this.report.views) {
      const cell = document.createElement("figure");
      cell.className = "film-cell";
      cell.dataset.index = String(view.index);
      const img = document.createElement("img");
      img.src = this.api.resultImageUrl(view.index);
      img.alt = `result view ${view.index}`;
      const badge = document.createElement("figcaption");
      badge.className = `badge badge-${view.provenance}`;
      badge.textContent = view.provenance;
      cell.append(img, badge);
      cell.addEventListener("click", () => this.showComparison(view.index));
      this.filmstrip.append(cell);
    }
  }

  /** Before/after slider: clip the "after" layer at the given percentage. */
  showComparison(viewIndex: number): void {
    this.compare.hidden = false;
    this.compare.innerHTML = `
      <h2>view ${viewIndex}: before / after</h2>
      <div class="compare-stack">
        <img class="before" src="${this.api.viewImageUrl(viewIndex)}" alt="before">
        <img class="after" src="${this.api.resultImageUrl(viewIndex)}" alt="after">
      </div>
      <input class="compare-slider" type="range" min="0" max="100" value="50">`;
    const after = this.compare.querySelector(".after") as HTMLElement;
    const slider = this.compare.querySelector(".compare-slider") as HTMLInputElement;
    const update = () => {
      after.style.clipPath = `inset(0 ${100 - Number(slider.value)}% 0 0)`;
    };
    slider.addEventListener("input", update);
    update();
  }
}
