/** Typed client for the review service's HTTP+JSON API. */

import { CorrectionPayload, CorrectionResult, QueueView } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
    this.name = "NetworkError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function detailOf(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return response.statusText || "request failed";
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (!response.ok) {
      throw new ApiError(response.status, await detailOf(response));
    }
    return response;
  }

  async getQueue(limit = 50): Promise<QueueView> {
    const response = await this.request(`/api/queue?limit=${limit}`);
    return (await response.json()) as QueueView;
  }

  tileImageUrl(tileId: string): string {
    return `${this.baseUrl}/api/tiles/${encodeURIComponent(tileId)}/image`;
  }

  async postCorrection(tileId: string, payload: CorrectionPayload): Promise<CorrectionResult> {
    const response = await this.request(`/api/items/${encodeURIComponent(tileId)}/correction`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    return (await response.json()) as CorrectionResult;
  }
}
