import { describe, expect, it } from "vitest";

import {
  applyScrollDetent,
  pointerToWorkspace,
  snapTheta,
  TargetCoalescer,
  workspaceToPointer,
} from "../src/mapping.js";

const XB = { min: 0, max: 450 };
const YB = { min: 0, max: 450 };

describe("pointer mapping", () => {
  it("maps the canvas centre to the workspace centre", () => {
    const { x_mm, y_mm } = pointerToWorkspace(200, 150, 400, 300, XB, YB);
    expect(x_mm).toBeCloseTo(225);
    expect(y_mm).toBeCloseTo(225);
  });

  it("flips the vertical axis and clamps to bounds", () => {
    expect(pointerToWorkspace(0, 0, 400, 300, XB, YB)).toEqual({
      x_mm: 0,
      y_mm: 450,
    });
    const { x_mm } = pointerToWorkspace(9999, 0, 400, 300, XB, YB);
    expect(x_mm).toBe(450);
  });

  it("round-trips with workspaceToPointer", () => {
    for (const [x, y] of [[10, 20], [225, 225], [440, 5]]) {
      const { px, py } = workspaceToPointer(x, y, 400, 300, XB, YB);
      const back = pointerToWorkspace(px, py, 400, 300, XB, YB);
      expect(back.x_mm).toBeCloseTo(x, 6);
      expect(back.y_mm).toBeCloseTo(y, 6);
    }
  });
});

describe("z scroll detents", () => {
  it("moves one millimetre per wheel click", () => {
    expect(applyScrollDetent(225, -120, { min: 0, max: 450 })).toBe(226);
    expect(applyScrollDetent(225, 120, { min: 0, max: 450 })).toBe(224);
  });

  it("clamps at the travel limits", () => {
    expect(applyScrollDetent(450, -120, { min: 0, max: 450 })).toBe(450);
    expect(applyScrollDetent(0, 120, { min: 0, max: 450 })).toBe(0);
  });
});

describe("theta snapping", () => {
  it("snaps to the stepper grid", () => {
    expect(snapTheta(0.4, 1.5)).toBe(0);
    expect(snapTheta(30.1, 1.5)).toBe(30);
    expect(snapTheta(-2.9, 1.5)).toBe(-3);
  });

  it("keeps the result in (-180, 180]", () => {
    expect(snapTheta(180, 1.5)).toBe(180);
    expect(snapTheta(-180, 1.5)).toBe(180);
  });
});

describe("target coalescing", () => {
  it("sends at most one target per period", () => {
    const c = new TargetCoalescer(50); // 20 ms period
    expect(c.offer("a", 0)).toBe("a");
    expect(c.offer("b", 5)).toBeNull();
    expect(c.offer("c", 10)).toBeNull();
    expect(c.hasPending).toBe(true);
    expect(c.take(19)).toBeNull();
    expect(c.take(20)).toBe("c"); // latest pose wins
    expect(c.hasPending).toBe(false);
  });

  it("never exceeds the rate over a burst", () => {
    const c = new TargetCoalescer(50);
    let sent = 0;
    for (let t = 0; t < 1000; t += 2) {
      if (c.offer(t, t) !== null) sent += 1;
    }
    expect(sent).toBeLessThanOrEqual(51);
    expect(sent).toBeGreaterThanOrEqual(49);
  });
});
