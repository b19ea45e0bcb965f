import { describe, expect, it } from "vitest";

import { AnnotationState } from "../src/state.js";

const SIZE = { width: 100, height: 80 };

describe("AnnotationState", () => {
  it("places, clamps and exports points", () => {
    const s = new AnnotationState();
    s.selectView(2);
    expect(s.placePoint(10, 20, { kind: "foreground", objectId: 1 }, SIZE)).toBe(true);
    expect(s.placePoint(200, 20, { kind: "foreground", objectId: 1 }, SIZE)).toBe(false);
    expect(s.placePoint(30, 40, { kind: "background" }, SIZE)).toBe(true);
    expect(s.toPrompts()).toEqual({
      view_index: 2,
      foreground: [{ x: 10, y: 20, object_id: 1 }],
      background: [{ x: 30, y: 40 }],
    });
  });

  it("keeps object ids contiguous", () => {
    const s = new AnnotationState();
    s.selectView(0);
    s.placePoint(1, 1, { kind: "foreground", objectId: 5 }, SIZE); // clamped to 1
    s.placePoint(2, 2, { kind: "foreground", objectId: 2 }, SIZE);
    s.placePoint(3, 3, { kind: "foreground", objectId: 7 }, SIZE); // clamped to 3
    expect(s.objectIds).toEqual([1, 2, 3]);
  });

  it("round-trips prompts through JSON identically", () => {
    const s = new AnnotationState();
    s.selectView(1);
    s.placePoint(5, 6, { kind: "foreground", objectId: 1 }, SIZE);
    s.placePoint(9, 9, { kind: "foreground", objectId: 2 }, SIZE);
    s.placePoint(50, 50, { kind: "background" }, SIZE);
    const exported = s.exportJson();

    const t = new AnnotationState();
    t.importJson(exported);
    expect(t.exportJson()).toBe(exported);
    expect(t.selectedView).toBe(1);
  });

  it("undo removes the most recently placed point across kinds", () => {
    const s = new AnnotationState();
    s.selectView(0);
    s.placePoint(1, 1, { kind: "foreground", objectId: 1 }, SIZE);
    s.placePoint(2, 2, { kind: "background" }, SIZE);
    s.undoPoint();
    expect(s.background).toHaveLength(0);
    expect(s.foreground).toHaveLength(1);
    s.undoPoint();
    expect(s.foreground).toHaveLength(0);
    s.undoPoint(); // no-op on empty
  });

  it("discards stale segment responses by sequence number", () => {
    const s = new AnnotationState();
    const early = s.issueSeq();
    const late = s.issueSeq();
    const maskA = { object_id: 1, rle: { width: 1, height: 1, runs: [0, 1] } };
    const maskB = { object_id: 1, rle: { width: 1, height: 1, runs: [1] } };
    expect(s.acceptOverlays(late, [maskB])).toBe(true);
    expect(s.acceptOverlays(early, [maskA])).toBe(false); // stale: dropped
    expect(s.overlays).toEqual([maskB]);
  });

  it("clearing points invalidates in-flight requests", () => {
    const s = new AnnotationState();
    const inflight = s.issueSeq();
    s.clearPoints();
    expect(s.acceptOverlays(inflight, [])).toBe(false);
  });
});
