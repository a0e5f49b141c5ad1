import type {
  BalanceWire,
  EndedBody,
  ListingWire,
  Money,
  ReceiptWire,
  SearchCard,
  SessionWire,
  WindowWire,
} from "./types.js";

/**
 * The rendered meter. Set exclusively from server meter/ended frames —
 * never advanced locally, so the screen can only show figures the
 * platform actually asserted.
 */
export interface MeterReading {
  seconds: number;
  charge: Money;
}

export interface ChatLine {
  from: "me" | "peer";
  text: string;
  at: string;
}

export interface RoomState {
  sessionId: string;
  role: "buyer" | "seller";
  session: SessionWire;
  transcript: ChatLine[];
  meter: MeterReading | null;
  mediaEvents: number;
  receipt: ReceiptWire | null;
  ratingPosted: boolean;
  ended: EndedBody | null;
  error: string | null;
}

export interface BuyerState {
  query: string;
  results: SearchCard[];
  sessions: SessionWire[];
  error: string | null;
}

export interface SellerState {
  listings: ListingWire[];
  windows: Record<string, WindowWire[]>;
  sessions: SessionWire[];
  balance: BalanceWire | null;
  error: string | null;
}

export type ViewName = "auth" | "buyer" | "seller" | "room";

export interface ViewState {
  me: { accountId: string; displayName: string } | null;
  view: ViewName;
  authError: string | null;
  buyer: BuyerState;
  seller: SellerState;
  room: RoomState | null;
}

export function initialState(): ViewState {
  return {
    me: null,
    view: "auth",
    authError: null,
    buyer: { query: "", results: [], sessions: [], error: null },
    seller: { listings: [], windows: {}, sessions: [], balance: null, error: null },
    room: null,
  };
}

/** Minimal observable state holder; every mutation triggers a re-render. */
export class Store {
  state: ViewState = initialState();
  private listeners: Array<() => void> = [];

  subscribe(listener: () => void): void {
    this.listeners.push(listener);
  }

  update(mutate: (state: ViewState) => void): void {
    mutate(this.state);
    for (const listener of this.listeners) listener();
  }
}
