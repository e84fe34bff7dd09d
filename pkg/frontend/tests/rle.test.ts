import { describe, expect, it } from "vitest";

import { decodeRle, maskArea } from "../src/rle.js";
import { buildOverlays, hitTest } from "../src/overlay.js";
import type { InstancePayload, Rle } from "../src/types.js";

describe("decodeRle", () => {
  it("decodes an all-background mask", () => {
    const mask = decodeRle({ counts: [4], size: [2, 2] });
    expect([...mask]).toEqual([0, 0, 0, 0]);
  });

  it("decodes an all-foreground mask", () => {
    const mask = decodeRle({ counts: [0, 4], size: [2, 2] });
    expect([...mask]).toEqual([1, 1, 1, 1]);
  });

  it("decodes column-major runs", () => {
    // 1 background, 2 foreground, 1 background in column order:
    // pixels (1,0) and (0,1) are set in row-major terms
    const mask = decodeRle({ counts: [1, 2, 1], size: [2, 2] });
    expect([...mask]).toEqual([0, 1, 1, 0]);
  });

  it("rejects malformed run totals", () => {
    expect(() => decodeRle({ counts: [1, 2], size: [2, 2] })).toThrow(/malformed/);
  });

  it("counts area", () => {
    expect(maskArea(decodeRle({ counts: [1, 2, 1], size: [2, 2] }))).toBe(2);
  });
});

function instance(annId: number, rle: Rle): InstancePayload {
  return {
    ann_id: annId,
    image_id: 1,
    category: "thing",
    bbox: [0, 0, 2, 2],
    segmentation: rle,
  };
}

describe("overlays", () => {
  it("assigns a distinct color per instance", () => {
    const overlays = buildOverlays([
      instance(1, { counts: [0, 4], size: [2, 2] }),
      instance(2, { counts: [4], size: [2, 2] }),
    ]);
    expect(overlays[0].color).not.toEqual(overlays[1].color);
  });

  it("hit-tests against decoded masks", () => {
    const overlays = buildOverlays([
      instance(7, { counts: [1, 2, 1], size: [2, 2] }),
    ]);
    expect(hitTest(overlays, 1, 0)?.instance.ann_id).toBe(7); // row 0, col 1
    expect(hitTest(overlays, 0, 0)).toBeNull();
    expect(hitTest(overlays, 9, 9)).toBeNull();
  });
});
