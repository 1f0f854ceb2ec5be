/** Thirds-grid geometry for the 3x3 region overlay.
 *
 * Matches the backend's centroid-to-region mapping: a point exactly on a
 * third boundary joins the lower-index band.
 */

import { SpatialRegion } from "./types.js";

export const REGION_GRID: SpatialRegion[][] = [
  ["top-left", "top", "top-right"],
  ["left", "center", "right"],
  ["bottom-left", "bottom", "bottom-right"],
];

export interface GridCell {
  row: number;
  col: number;
}

export function regionForCell(cell: GridCell): SpatialRegion {
  if (cell.row < 0 || cell.row > 2 || cell.col < 0 || cell.col > 2) {
    throw new RangeError(`cell out of 3x3 grid: ${cell.row},${cell.col}`);
  }
  return REGION_GRID[cell.row][cell.col];
}

export function cellForRegion(region: SpatialRegion): GridCell {
  for (let row = 0; row < 3; row++) {
    const col = REGION_GRID[row].indexOf(region);
    if (col >= 0) return { row, col };
  }
  throw new RangeError(`unknown region: ${region}`);
}

function band(v: number): number {
  return v <= 1 / 3 ? 0 : v <= 2 / 3 ? 1 : 2;
}

/** Region for a unit-square point (u right, v down). */
export function regionForPoint(u: number, v: number): SpatialRegion {
  if (u < 0 || u > 1 || v < 0 || v > 1) {
    throw new RangeError(`point outside unit square: ${u},${v}`);
  }
  return REGION_GRID[band(v)][band(u)];
}

/** CSS-percentage rectangle for one overlay cell. */
export function cellRectPercent(cell: GridCell): { left: number; top: number; width: number; height: number } {
  return {
    left: (cell.col / 3) * 100,
    top: (cell.row / 3) * 100,
    width: 100 / 3,
    height: 100 / 3,
  };
}
