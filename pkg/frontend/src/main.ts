/** Browser entry point: wires the session controller to the DOM. */

import { ApiClient } from "./api.js";
import {
  FormState,
  formFromPrediction,
  setLocation,
  setPresence,
  setQuantity,
  validationError,
} from "./formModel.js";
import { actionForKey } from "./keyboard.js";
import { REGION_GRID, cellForRegion, cellRectPercent } from "./overlay.js";
import { ReviewSession } from "./session.js";
import { QUANTITY_BUCKETS, isSpatialRegion } from "./types.js";

const client = new ApiClient();
const session = new ReviewSession(client);

let form: FormState = { present: false, location: "NA", quantity: "NA", reviewer: "reviewer" };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderOverlay(): void {
  const overlay = el<HTMLDivElement>("overlay");
  overlay.innerHTML = "";
  const item = session.current();
  const predicted = item?.prediction?.location;
  for (const row of REGION_GRID) {
    for (const region of row) {
      const cell = document.createElement("button");
      cell.className = "overlay-cell";
      cell.dataset.region = region;
      const rect = cellRectPercent(cellForRegion(region));
      cell.style.left = `${rect.left}%`;
      cell.style.top = `${rect.top}%`;
      cell.style.width = `${rect.width}%`;
      cell.style.height = `${rect.height}%`;
      if (region === predicted) cell.classList.add("predicted");
      if (form.present && region === form.location) cell.classList.add("selected");
      cell.disabled = !form.present;
      cell.addEventListener("click", () => {
        form = setLocation(form, region);
        render();
      });
      overlay.appendChild(cell);
    }
  }
}

function renderForm(): void {
  el<HTMLInputElement>("present").checked = form.present;
  const quantityBox = el<HTMLDivElement>("quantity-box");
  quantityBox.innerHTML = "";
  for (const bucket of QUANTITY_BUCKETS) {
    const button = document.createElement("button");
    button.textContent = bucket;
    button.disabled = !form.present;
    if (form.present && bucket === form.quantity) button.classList.add("selected");
    button.addEventListener("click", () => {
      form = setQuantity(form, bucket);
      render();
    });
    quantityBox.appendChild(button);
  }
  const error = validationError(form);
  el<HTMLButtonElement>("submit").disabled = error !== null || !session.current();
  el<HTMLSpanElement>("form-error").textContent = error ?? "";
}

function render(): void {
  const item = session.current();
  el<HTMLSpanElement>("remaining").textContent = String(session.remaining());
  const notice = session.lastNotice();
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = notice ? `${notice.kind}: ${notice.message}` : "";
  banner.className = notice ? `banner ${notice.kind}` : "banner hidden";
  if (!item) {
    el<HTMLDivElement>("viewer").classList.add("hidden");
    el<HTMLDivElement>("done").classList.remove("hidden");
    return;
  }
  el<HTMLDivElement>("viewer").classList.remove("hidden");
  el<HTMLDivElement>("done").classList.add("hidden");
  el<HTMLSpanElement>("tile-id").textContent = item.tile_id;
  el<HTMLImageElement>("tile-image").src = client.tileImageUrl(item.tile_id);
  const p = item.prediction;
  el<HTMLSpanElement>("prediction").textContent = p
    ? `present=${p.solar_panels_present} location=${p.location} quantity=${p.quantity} ` +
      `likelihood=${p.likelihood_of_solar_panels_present.toFixed(2)} ` +
      `confidence=${p.confidence_of_solar_panels_present.toFixed(2)}`
    : "unparseable model output";
  renderOverlay();
  renderForm();
}

function resetFormForCurrent(): void {
  const item = session.current();
  form = formFromPrediction(item?.prediction ?? null, form.reviewer);
}

async function submit(): Promise<void> {
  if (validationError(form) !== null || !session.current()) return;
  await session.submit(form);
  resetFormForCurrent();
  render();
}

async function start(): Promise<void> {
  try {
    await session.load();
  } catch (error) {
    const banner = el<HTMLDivElement>("banner");
    banner.textContent = `offline: ${String(error)}`;
    banner.className = "banner offline";
    return;
  }
  resetFormForCurrent();
  el<HTMLInputElement>("present").addEventListener("change", (event) => {
    form = setPresence(form, (event.target as HTMLInputElement).checked);
    render();
  });
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submit());
  document.addEventListener("keydown", (event) => {
    if ((event.target as HTMLElement | null)?.tagName === "INPUT") return;
    const action = actionForKey(event.key);
    if (!action) return;
    event.preventDefault();
    if (action.kind === "toggle-presence") form = setPresence(form, !form.present);
    else if (action.kind === "pick-region" && isSpatialRegion(action.region)) {
      form = setLocation(form, action.region);
    } else if (action.kind === "pick-quantity") form = setQuantity(form, action.quantity);
    else if (action.kind === "submit") void submit();
    render();
  });
  render();
}

void start();
