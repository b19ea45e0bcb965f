/**
 * Run-length-encoded binary masks, matching the service wire format:
 * row-major, alternating zero/one run lengths, starting with the zero run.
 */

export interface RleMask {
  width: number;
  height: number;
  runs: number[];
}

export function rleArea(rle: RleMask): number {
  let area = 0;
  for (let i = 1; i < rle.runs.length; i += 2) area += rle.runs[i];
  return area;
}

export function decodeRle(rle: RleMask): Uint8Array {
  const out = new Uint8Array(rle.width * rle.height);
  let pos = 0;
  let value = 0;
  for (const run of rle.runs) {
    if (value) out.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  if (pos !== rle.width * rle.height) {
    throw new Error(`RLE covers ${pos} pixels, expected ${rle.width * rle.height}`);
  }
  return out;
}

export function rleContains(rle: RleMask, x: number, y: number): boolean {
  if (x < 0 || y < 0 || x >= rle.width || y >= rle.height) return false;
  const target = y * rle.width + x;
  let pos = 0;
  let value = 0;
  for (const run of rle.runs) {
    pos += run;
    if (target < pos) return value === 1;
    value ^= 1;
  }
  return false;
}
