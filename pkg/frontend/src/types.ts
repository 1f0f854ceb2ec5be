/** Shared vocabulary and wire types, mirroring the service's JSON contract. */

export const SPATIAL_REGIONS = [
  "top-left",
  "top",
  "top-right",
  "left",
  "center",
  "right",
  "bottom-left",
  "bottom",
  "bottom-right",
] as const;

export type SpatialRegion = (typeof SPATIAL_REGIONS)[number];
export type LocationLabel = SpatialRegion | "NA";

export const QUANTITY_BUCKETS = ["0 to 1", "1 to 5", "5 to 10", "10 to inf"] as const;
export type QuantityValue = (typeof QUANTITY_BUCKETS)[number];
export type QuantityLabel = QuantityValue | "NA";

export interface Prediction {
  solar_panels_present: boolean;
  location: string;
  quantity: string;
  likelihood_of_solar_panels_present: number;
  confidence_of_solar_panels_present: number;
}

export interface QueueItem {
  tile_id: string;
  prediction: Prediction | null;
  confidence: number | null;
  likelihood: number | null;
}

export interface QueueView {
  items: QueueItem[];
  total_pending: number;
}

export interface CorrectionPayload {
  present: boolean;
  location: LocationLabel;
  quantity: QuantityLabel;
  reviewer: string;
}

export interface CorrectionResult {
  tile_id: string;
  status: "confirmed" | "corrected";
}

export function isSpatialRegion(value: string): value is SpatialRegion {
  return (SPATIAL_REGIONS as readonly string[]).includes(value);
}

export function isQuantityValue(value: string): value is QuantityValue {
  return (QUANTITY_BUCKETS as readonly string[]).includes(value);
}
