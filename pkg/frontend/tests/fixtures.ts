import type { ReceiptWire, SearchCard, SessionWire } from "../src/types.js";

export const NOW = 1_800_000_000;

export function session(over: Partial<SessionWire> = {}): SessionWire {
  return {
    session_id: "ses-000001",
    buyer_id: "acct-buyer",
    seller_id: "acct-seller",
    listing_id: "lst-000001",
    level: "L1",
    state: "accepted",
    requested_at: NOW,
    respond_deadline: null,
    appointment_id: null,
    accepted_at: NOW,
    started_at: null,
    ended_at: null,
    metered_seconds: 0,
    end_reason: null,
    buyer_joined: false,
    seller_joined: false,
    accrued_charge: { amount: 0, currency: "USD" },
    ...over,
  };
}

export function card(over: Partial<SearchCard> = {}): SearchCard {
  return {
    listing_id: "lst-000001",
    rank: 1,
    total_score: 0.91,
    parts: { lexical: 0.5, reputation: 0.2, price: 0.11, availability: 0.1 },
    listing: {
      listing_id: "lst-000001",
      seller_id: "acct-seller",
      title: "Fix a leaking kitchen trap",
      description: "guided repair",
      tags: ["plumbing"],
      rate: { kind: "per_minute", amount: { amount: 100, currency: "USD" } },
      active: true,
      created_at: NOW,
    },
    seller: { account_id: "acct-seller", display_name: "Sam", created_at: NOW },
    seller_summary: { seller_id: "acct-seller", rating_count: 0, stars_total: 0, average: null },
    level_now: "L1",
    ...over,
  };
}

export function receipt(): ReceiptWire {
  return {
    settlement_id: "stl-ses-000001",
    session_id: "ses-000001",
    charge: { amount: 150, currency: "USD" },
    commission: { amount: 30, currency: "USD" },
    seller_credit: { amount: 120, currency: "USD" },
    settled_at: NOW,
  };
}

/** Server frame envelope as the channel mints it. */
export function frame(
  frameType: string,
  body: Record<string, unknown> | null,
  sender = "server",
): Record<string, unknown> {
  return {
    frame_type: frameType,
    session_id: "ses-000001",
    sender,
    body,
    sent_at: "2027-01-15T12:00:00Z",
  };
}
