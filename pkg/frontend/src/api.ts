import type {
  AppointmentResponse,
  BalanceWire,
  EndResponse,
  ListingDetail,
  ListingWire,
  RatingWire,
  RegisterResponse,
  SearchResponse,
  SessionWire,
  WindowWire,
} from "./types.js";

/** A gateway error envelope, surfaced with its code verbatim. */
export class ApiError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.status = status;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin typed client over the gateway's REST surface. Every method issues
 * exactly one HTTP request, so UI actions map one-to-one onto calls.
 */
export class Gateway {
  token: string | null = null;

  constructor(
    private readonly fetchImpl: FetchLike,
    readonly base: string,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["content-type"] = "application/json";
    if (this.token) headers["authorization"] = `Bearer ${this.token}`;
    const response = await this.fetchImpl(`${this.base}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let code = `Http${response.status}`;
      let message = response.statusText;
      try {
        const envelope = (await response.json()) as { code?: string; message?: string };
        if (envelope.code) code = envelope.code;
        if (envelope.message) message = envelope.message;
      } catch {
        // non-JSON error body; keep the status fallback
      }
      throw new ApiError(code, message, response.status);
    }
    return (await response.json()) as T;
  }

  async register(displayName: string, fingerprint: string): Promise<RegisterResponse> {
    const out = await this.call<RegisterResponse>("POST", "/accounts", {
      display_name: displayName,
      fingerprint,
    });
    this.token = out.token;
    return out;
  }

  search(query: string, maxPriceCents?: number): Promise<SearchResponse> {
    const params = new URLSearchParams({ q: query });
    if (maxPriceCents !== undefined) params.set("max_price", String(maxPriceCents));
    return this.call<SearchResponse>("GET", `/search?${params.toString()}`);
  }

  listingDetail(listingId: string): Promise<ListingDetail> {
    return this.call<ListingDetail>("GET", `/listings/${listingId}`);
  }

  createListing(
    title: string,
    description: string,
    tags: string[],
    rate: { kind: string; amount: number },
  ): Promise<ListingWire> {
    return this.call<ListingWire>("POST", "/listings", { title, description, tags, rate });
  }

  setAvailability(
    listingId: string,
    windows: { start: number; end: number; level: string }[],
  ): Promise<{ listing_id: string; windows: WindowWire[] }> {
    return this.call("PUT", `/listings/${listingId}/availability`, { windows });
  }

  requestSession(listingId: string): Promise<SessionWire> {
    return this.call<SessionWire>("POST", "/sessions", { listing_id: listingId });
  }

  bookAppointment(listingId: string, slotStart: number): Promise<AppointmentResponse> {
    return this.call<AppointmentResponse>("POST", "/appointments", {
      listing_id: listingId,
      slot_start: slotStart,
    });
  }

  getSession(sessionId: string): Promise<SessionWire> {
    return this.call<SessionWire>("GET", `/sessions/${sessionId}`);
  }

  mySessions(accountId: string): Promise<{ sessions: SessionWire[] }> {
    return this.call("GET", `/accounts/${accountId}/sessions`);
  }

  respond(sessionId: string, decision: "accept" | "reject"): Promise<SessionWire> {
    return this.call<SessionWire>("POST", `/sessions/${sessionId}/respond`, { decision });
  }

  endSession(sessionId: string): Promise<EndResponse> {
    return this.call<EndResponse>("POST", `/sessions/${sessionId}/end`);
  }

  getReceipt(sessionId: string): Promise<EndResponse["receipt"]> {
    return this.call("GET", `/sessions/${sessionId}/receipt`);
  }

  rateSession(sessionId: string, stars: number, review: string): Promise<RatingWire> {
    return this.call<RatingWire>("POST", `/sessions/${sessionId}/rating`, { stars, review });
  }

  balance(accountId: string): Promise<BalanceWire> {
    return this.call<BalanceWire>("GET", `/accounts/${accountId}/balance`);
  }

  /** ws:// or wss:// URL for a session's realtime channel. */
  channelUrl(sessionId: string): string {
    const token = this.token ?? "";
    const http = this.base || (typeof location !== "undefined" ? location.origin : "");
    const ws = http.replace(/^http/, "ws");
    return `${ws}/sessions/${sessionId}/channel?token=${encodeURIComponent(token)}`;
  }
}
