import type { Rle } from "./types.js";

/**
 * Decode uncompressed RLE (column-major pixel order, first run counts
 * background) into a row-major Uint8Array of 0/1 values.
 */
export function decodeRle(rle: Rle): Uint8Array {
  const [height, width] = rle.size;
  const total = height * width;
  const declared = rle.counts.reduce((a, b) => a + b, 0);
  if (declared !== total) {
    throw new Error(`malformed RLE: runs cover ${declared} of ${total} pixels`);
  }
  const mask = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of rle.counts) {
    if (value === 1) {
      for (let i = 0; i < run; i++) {
        const columnMajor = pos + i;
        const row = columnMajor % height;
        const col = Math.floor(columnMajor / height);
        mask[row * width + col] = 1;
      }
    }
    pos += run;
    value ^= 1;
  }
  return mask;
}

/** Foreground pixel count of a decoded mask. */
export function maskArea(mask: Uint8Array): number {
  let area = 0;
  for (const v of mask) area += v;
  return area;
}
