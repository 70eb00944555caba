import type { GraphPayload, RelationsPayload, SayResponse } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    throw new ApiError(response.status, `${response.status} ${response.statusText}`);
  }
  return (await response.json()) as T;
}

/** Thin typed client over the session endpoints. */
export class ApiClient {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async createSession(): Promise<string> {
    const data = await asJson<{ session_id: string }>(
      await this.fetchImpl(`${this.base}/api/session`, { method: "POST" }));
    return data.session_id;
  }

  async say(sid: string, text: string): Promise<SayResponse> {
    return asJson<SayResponse>(await this.fetchImpl(
      `${this.base}/api/session/${sid}/say`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text }),
      }));
  }

  async graph(sid: string): Promise<GraphPayload> {
    return asJson<GraphPayload>(
      await this.fetchImpl(`${this.base}/api/session/${sid}/graph`));
  }

  async relations(sid: string, a: number, b: number): Promise<RelationsPayload> {
    return asJson<RelationsPayload>(await this.fetchImpl(
      `${this.base}/api/session/${sid}/relations?a=${a}&b=${b}`));
  }
}
