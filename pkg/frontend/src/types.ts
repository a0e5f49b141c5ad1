/** Wire shapes of the marketplace gateway (HTTP + channel). */

export interface Money {
  amount: number;
  currency: string;
}

export interface RateWire {
  kind: "per_minute" | "per_case";
  amount: Money;
}

export interface AccountPublic {
  account_id: string;
  display_name: string;
  created_at: number;
}

export interface RegisterResponse {
  account: AccountPublic;
  token: string;
}

export interface ListingWire {
  listing_id: string;
  seller_id: string;
  title: string;
  description: string;
  tags: string[];
  rate: RateWire;
  active: boolean;
  created_at: number;
}

export interface WindowWire {
  window_id: string;
  listing_id: string;
  start: number;
  end: number;
  level: string;
}

export interface SellerSummaryWire {
  seller_id: string;
  rating_count: number;
  stars_total: number;
  average: number | null;
}

export interface RatingWire {
  session_id: string;
  rater_id: string;
  seller_id: string;
  stars: number;
  review: string;
  created_at: number;
}

export interface ListingDetail {
  listing: ListingWire;
  windows: WindowWire[];
  seller: AccountPublic;
  seller_summary: SellerSummaryWire;
  reviews: RatingWire[];
  level_now: string | null;
}

/** One row of GET /search: ranking fields plus the listing context. */
export interface SearchCard {
  listing_id: string;
  rank: number;
  total_score: number;
  parts: Record<string, number>;
  listing: ListingWire;
  seller: AccountPublic;
  seller_summary: SellerSummaryWire;
  level_now: string | null;
}

export interface SearchResponse {
  query: string;
  results: SearchCard[];
}

export type SessionStateName =
  | "requested"
  | "pending"
  | "scheduled"
  | "accepted"
  | "live"
  | "ended"
  | "settled"
  | "rejected"
  | "expired"
  | "canceled";

export interface SessionWire {
  session_id: string;
  buyer_id: string;
  seller_id: string;
  listing_id: string;
  level: string;
  state: SessionStateName;
  requested_at: number;
  respond_deadline: number | null;
  appointment_id: string | null;
  accepted_at: number | null;
  started_at: number | null;
  ended_at: number | null;
  metered_seconds: number;
  end_reason: string | null;
  buyer_joined: boolean;
  seller_joined: boolean;
  accrued_charge: Money;
  rating?: RatingWire | null;
}

export interface ReceiptWire {
  settlement_id: string;
  session_id: string;
  charge: Money;
  commission: Money;
  seller_credit: Money;
  settled_at: number;
}

export interface EndResponse {
  session: SessionWire;
  receipt: ReceiptWire | null;
}

export interface BalanceWire {
  account_id: string;
  available: Money;
  held: Money;
}

export interface AppointmentResponse {
  appointment: {
    appointment_id: string;
    session_id: string;
    listing_id: string;
    buyer_id: string;
    seller_id: string;
    slot_start: number;
    grace_seconds: number;
  };
  session: SessionWire;
}

/** Frames arriving on the session channel. All are server-enveloped. */
export interface ServerFrame {
  frame_type: "meter" | "ended" | "chat" | "offer" | "answer" | "candidate";
  session_id: string;
  sender: string;
  body: Record<string, unknown> | null;
  sent_at: string;
}

export interface MeterBody {
  metered_seconds: number;
  accrued_charge: Money;
  state: SessionStateName;
}

export interface EndedBody {
  state: SessionStateName;
  end_reason: string | null;
  settlement_id: string | null;
}
