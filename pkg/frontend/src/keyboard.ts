/** Keyboard shortcuts for bulk review.
 *
 * Digits 1-9 pick a region in reading order on the 3x3 grid, "p" toggles
 * presence, q/w/e/r pick quantity buckets, Enter submits.
 */

import { regionForCell } from "./overlay.js";
import { QUANTITY_BUCKETS, QuantityValue, SpatialRegion } from "./types.js";

export type KeyAction =
  | { kind: "toggle-presence" }
  | { kind: "pick-region"; region: SpatialRegion }
  | { kind: "pick-quantity"; quantity: QuantityValue }
  | { kind: "submit" };

const QUANTITY_KEYS: Record<string, QuantityValue> = {
  q: QUANTITY_BUCKETS[0],
  w: QUANTITY_BUCKETS[1],
  e: QUANTITY_BUCKETS[2],
  r: QUANTITY_BUCKETS[3],
};

export function actionForKey(key: string): KeyAction | null {
  if (key === "p") return { kind: "toggle-presence" };
  if (key === "Enter") return { kind: "submit" };
  if (key in QUANTITY_KEYS) return { kind: "pick-quantity", quantity: QUANTITY_KEYS[key] };
  if (/^[1-9]$/.test(key)) {
    const index = Number(key) - 1;
    const cell = { row: Math.floor(index / 3), col: index % 3 };
    return { kind: "pick-region", region: regionForCell(cell) };
  }
  return null;
}
