import { decodeRle } from "./rle.js";
import type { InstancePayload } from "./types.js";

// one distinct hue per instance, cycled
const OVERLAY_COLORS: [number, number, number][] = [
  [251, 146, 60],
  [59, 130, 246],
  [34, 197, 94],
  [168, 85, 247],
  [236, 72, 153],
  [6, 182, 212],
  [245, 158, 11],
  [99, 102, 241],
];

export interface InstanceOverlay {
  instance: InstancePayload;
  mask: Uint8Array;
  color: [number, number, number];
}

export function buildOverlays(instances: InstancePayload[]): InstanceOverlay[] {
  return instances.map((instance, i) => ({
    instance,
    mask: decodeRle(instance.segmentation),
    color: OVERLAY_COLORS[i % OVERLAY_COLORS.length],
  }));
}

/** Topmost instance whose mask covers the pixel, or null. */
export function hitTest(
  overlays: InstanceOverlay[], x: number, y: number,
): InstanceOverlay | null {
  for (let i = overlays.length - 1; i >= 0; i--) {
    const [height, width] = overlays[i].instance.segmentation.size;
    const col = Math.floor(x);
    const row = Math.floor(y);
    if (row < 0 || col < 0 || row >= height || col >= width) continue;
    if (overlays[i].mask[row * width + col]) return overlays[i];
  }
  return null;
}

/**
 * Paint instance masks over the image: selected instances get a strong
 * fill, unselected ones a faint tint so they stay discoverable.
 */
export function paintOverlays(
  ctx: CanvasRenderingContext2D,
  overlays: InstanceOverlay[],
  selected: Set<number>,
  scale: number,
): void {
  for (const overlay of overlays) {
    const [height, width] = overlay.instance.segmentation.size;
    const [r, g, b] = overlay.color;
    const chosen = selected.has(overlay.instance.ann_id);
    const alpha = chosen ? 0.55 : 0.18;
    ctx.fillStyle = `rgba(${r}, ${g}, ${b}, ${alpha})`;
    for (let row = 0; row < height; row++) {
      for (let col = 0; col < width; col++) {
        if (overlay.mask[row * width + col]) {
          ctx.fillRect(col * scale, row * scale, scale, scale);
        }
      }
    }
    if (chosen) {
      const [x, y, w, h] = overlay.instance.bbox;
      ctx.strokeStyle = `rgb(${r}, ${g}, ${b})`;
      ctx.lineWidth = 2;
      ctx.strokeRect(x * scale, y * scale, w * scale, h * scale);
    }
  }
}
