/** Review session controller: queue paging, optimistic submit, 409 skipping.
 *
 * DOM-free so the full loop is testable against a fake or live service.
 */

import { ApiClient, ApiError, NetworkError } from "./api.js";
import { FormState, buildPayload } from "./formModel.js";
import { QueueItem } from "./types.js";

export interface Notice {
  kind: "conflict" | "validation" | "offline" | "error";
  message: string;
}

export type SubmitOutcome = "submitted" | "skipped-conflict" | "rejected";

export class ReviewSession {
  private items: QueueItem[] = [];
  private notices: Notice[] = [];
  private pendingTotal = 0;

  constructor(private readonly client: ApiClient) {}

  async load(): Promise<void> {
    const view = await this.client.getQueue();
    this.items = [...view.items];
    this.pendingTotal = view.total_pending;
  }

  current(): QueueItem | null {
    return this.items[0] ?? null;
  }

  remaining(): number {
    return this.items.length;
  }

  totalPending(): number {
    return this.pendingTotal;
  }

  lastNotice(): Notice | null {
    return this.notices[this.notices.length - 1] ?? null;
  }

  allNotices(): readonly Notice[] {
    return this.notices;
  }

  /** Submit the form for the current item and advance.
   *
   * Optimistic: the item leaves the list immediately. A 409 means someone
   * else resolved it, so the removal stands and the item is skipped. Other
   * failures roll the item back to the front of the list.
   */
  async submit(form: FormState): Promise<SubmitOutcome> {
    const item = this.current();
    if (!item) throw new Error("no pending item to submit");
    const payload = buildPayload(form);
    this.items = this.items.slice(1);
    this.pendingTotal = Math.max(0, this.pendingTotal - 1);
    try {
      await this.client.postCorrection(item.tile_id, payload);
      return "submitted";
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.notices.push({ kind: "conflict", message: `${item.tile_id}: ${error.detail}` });
        return "skipped-conflict";
      }
      // Roll the optimistic removal back; the item is still ours to review.
      this.items = [item, ...this.items];
      this.pendingTotal += 1;
      if (error instanceof ApiError && error.status === 400) {
        this.notices.push({ kind: "validation", message: error.detail });
      } else if (error instanceof NetworkError) {
        this.notices.push({ kind: "offline", message: error.message });
      } else {
        this.notices.push({ kind: "error", message: String(error) });
      }
      return "rejected";
    }
  }
}
