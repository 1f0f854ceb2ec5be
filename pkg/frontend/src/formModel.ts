/** Pure correction-form state.
 *
 * The form can never produce a payload violating the assessment consistency
 * rules: absent forces location and quantity to NA, and present requires both
 * to be chosen before the payload builds.
 */

import {
  CorrectionPayload,
  LocationLabel,
  Prediction,
  QuantityLabel,
  QuantityValue,
  SpatialRegion,
  isQuantityValue,
  isSpatialRegion,
} from "./types.js";

export interface FormState {
  present: boolean;
  location: LocationLabel;
  quantity: QuantityLabel;
  reviewer: string;
}

export function emptyForm(reviewer: string): FormState {
  return { present: false, location: "NA", quantity: "NA", reviewer };
}

/** Seed the form from the model's prediction so confirming is one keystroke. */
export function formFromPrediction(prediction: Prediction | null, reviewer: string): FormState {
  if (!prediction || !prediction.solar_panels_present) {
    return emptyForm(reviewer);
  }
  return {
    present: true,
    location: isSpatialRegion(prediction.location) ? prediction.location : "NA",
    quantity: isQuantityValue(prediction.quantity) ? prediction.quantity : "NA",
    reviewer,
  };
}

export function setPresence(state: FormState, present: boolean): FormState {
  if (present === state.present) return state;
  if (!present) {
    return { ...state, present: false, location: "NA", quantity: "NA" };
  }
  return { ...state, present: true };
}

/** Ignored while absent: the pickers are disabled in that mode. */
export function setLocation(state: FormState, location: SpatialRegion): FormState {
  if (!state.present) return state;
  return { ...state, location };
}

export function setQuantity(state: FormState, quantity: QuantityValue): FormState {
  if (!state.present) return state;
  return { ...state, quantity };
}

export function validationError(state: FormState): string | null {
  if (!state.present) return null;
  if (state.location === "NA") return "pick a region for present panels";
  if (state.quantity === "NA") return "pick a quantity bucket for present panels";
  return null;
}

export function buildPayload(state: FormState): CorrectionPayload {
  const error = validationError(state);
  if (error) throw new Error(error);
  if (!state.present) {
    return { present: false, location: "NA", quantity: "NA", reviewer: state.reviewer };
  }
  return {
    present: true,
    location: state.location,
    quantity: state.quantity,
    reviewer: state.reviewer,
  };
}
