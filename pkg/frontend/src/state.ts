/**
 * Annotation state: the points on screen are exactly the points that get
 * posted. Segment responses are matched to a request sequence number so a
 * slow earlier reply can never overwrite a newer overlay.
 */

import type { MaskEntry, PromptPayload } from "./api.js";

export type PointKind = { kind: "foreground"; objectId: number } | { kind: "background" };

export interface FgPoint {
  x: number;
  y: number;
  objectId: number;
}

export interface BgPoint {
  x: number;
  y: number;
}

export class AnnotationState {
  selectedView = -1;
  foreground: FgPoint[] = [];
  background: BgPoint[] = [];
  activeObject = 1;
  overlays: MaskEntry[] = [];
  overlaySeq = 0; // sequence number of the request that produced `overlays`
  private nextSeq = 1;
  private placedOrder: ("fg" | "bg")[] = [];

  selectView(index: number): void {
    if (index !== this.selectedView) {
      this.selectedView = index;
      this.clearPoints();
    }
  }

  clearPoints(): void {
    this.foreground = [];
    this.background = [];
    this.placedOrder = [];
    this.overlays = [];
    this.overlaySeq = this.nextSeq++;
  }

  get objectIds(): number[] {
    return [...new Set(this.foreground.map((p) => p.objectId))].sort((a, b) => a - b);
  }

  /** Object ids must stay contiguous 1..K; adding a point renumbers nothing,
   * so the UI only offers existing ids plus the next fresh one. */
  get nextObjectId(): number {
    return this.objectIds.length + 1;
  }

  placePoint(x: number, y: number, kind: PointKind, imageSize: { width: number; height: number }): boolean {
    if (x < 0 || y < 0 || x >= imageSize.width || y >= imageSize.height) return false;
    if (kind.kind === "foreground") {
      const id = Math.min(kind.objectId, this.nextObjectId);
      this.foreground.push({ x: Math.round(x), y: Math.round(y), objectId: id });
      this.placedOrder.push("fg");
    } else {
      this.background.push({ x: Math.round(x), y: Math.round(y) });
      this.placedOrder.push("bg");
    }
    return true;
  }

  undoPoint(): void {
    const last = this.placedOrder.pop();
    if (last === "fg") this.foreground.pop();
    else if (last === "bg") this.background.pop();
  }

  hasForeground(): boolean {
    return this.foreground.length > 0;
  }

  /** Sequence number for a new segment request. */
  issueSeq(): number {
    return this.nextSeq++;
  }

  /** Install a segment response; stale replies are discarded. */
  acceptOverlays(seq: number, masks: MaskEntry[]): boolean {
    if (seq < this.overlaySeq) return false;
    this.overlaySeq = seq;
    this.overlays = masks;
    return true;
  }

  toPrompts(): PromptPayload {
    return {
      view_index: this.selectedView,
      foreground: this.foreground.map((p) => ({ x: p.x, y: p.y, object_id: p.objectId })),
      background: this.background.map((p) => ({ x: p.x, y: p.y })),
    };
  }

  exportJson(): string {
    return JSON.stringify(this.toPrompts(), null, 1);
  }

  importJson(text: string): void {
    const obj = JSON.parse(text) as PromptPayload;
    this.selectedView = obj.view_index ?? this.selectedView;
    this.foreground = (obj.foreground ?? []).map((p) => ({
      x: p.x,
      y: p.y,
      objectId: p.object_id,
    }));
    this.background = (obj.background ?? []).map((p) => ({ x: p.x, y: p.y }));
    this.placedOrder = [
      ...this.foreground.map(() => "fg" as const),
      ...this.background.map(() => "bg" as const),
    ];
  }
}
