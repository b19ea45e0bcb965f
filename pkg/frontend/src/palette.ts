/** Object colors: 8 distinguishable hues, cycling for higher object ids. */

export const OBJECT_COLORS = [
  "#e6194b",
  "#3cb44b",
  "#4363d8",
  "#f58231",
  "#911eb4",
  "#46f0f0",
  "#f032e6",
  "#bcf60c",
] as const;

export const BACKGROUND_COLOR = "#2dd4bf";

export function colorFor(objectId: number): string {
  return OBJECT_COLORS[(objectId - 1) % OBJECT_COLORS.length];
}

export function colorToRgb(hex: string): [number, number, number] {
  const v = parseInt(hex.slice(1), 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}
