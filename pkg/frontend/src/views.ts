import {
  formatCents,
  formatDuration,
  formatMoney,
  formatRate,
  formatScoreParts,
  formatStars,
  secondsLeft,
} from "./format.js";
import type { RoomState, SellerState, ViewState } from "./store.js";
import type { SearchCard, SessionWire } from "./types.js";

/** Everything a click in the UI can ask the controller to do. */
export interface Handlers {
  register(name: string, fingerprint: string): void;
  switchView(view: "buyer" | "seller"): void;
  search(query: string): void;
  callListing(listingId: string): void;
  bookListing(listingId: string, slotStart: number): void;
  respond(sessionId: string, decision: "accept" | "reject"): void;
  joinSession(sessionId: string): void;
  leaveRoom(): void;
  sendChat(text: string): void;
  endSession(): void;
  rate(stars: number, review: string): void;
  createListing(title: string, description: string, tags: string, kind: string, amount: number): void;
  setWindow(listingId: string, start: number, end: number, level: string): void;
  refresh(): void;
}

type Child = Node | string | null;

function el(
  tag: string,
  attrs: Record<string, string> = {},
  ...children: Child[]
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) {
    if (child === null) continue;
    node.append(typeof child === "string" ? document.createTextNode(child) : child);
  }
  return node;
}

function button(label: string, attrs: Record<string, string>, onClick: () => void): HTMLElement {
  const node = el("button", { type: "button", ...attrs }, label);
  node.addEventListener("click", onClick);
  return node;
}

function errorLine(error: string | null): HTMLElement | null {
  return error === null ? null : el("p", { class: "error", role: "alert" }, error);
}

function stateChip(session: SessionWire): HTMLElement {
  return el("span", { class: `chip chip-${session.state}` }, session.state);
}

// --- auth ---

function renderAuth(state: ViewState, handlers: Handlers): HTMLElement {
  const name = el("input", { id: "register-name", placeholder: "display name" }) as HTMLInputElement;
  const fingerprint = el("input", {
    id: "register-fingerprint",
    placeholder: "device fingerprint",
  }) as HTMLInputElement;
  const submit = button("Create account", { id: "register-submit" }, () =>
    handlers.register(name.value, fingerprint.value),
  );
  return el(
    "section",
    { "data-view": "auth" },
    el("h1", {}, "parley"),
    el("p", {}, "Live conversations, metered by the minute."),
    name,
    fingerprint,
    submit,
    errorLine(state.authError),
  );
}

// --- buyer ---

function cardAction(card: SearchCard, handlers: Handlers): HTMLElement {
  if (card.level_now === "L1") {
    return button("Call now", { class: "card-action", "data-level": "L1" }, () =>
      handlers.callListing(card.listing_id),
    );
  }
  if (card.level_now === "L2") {
    return button("Request call", { class: "card-action", "data-level": "L2" }, () =>
      handlers.callListing(card.listing_id),
    );
  }
  if (card.level_now === "L3") {
    const slot = el("input", {
      class: "slot-input",
      placeholder: "slot start (unix s)",
      inputmode: "numeric",
    }) as HTMLInputElement;
    const book = button("Book", { class: "card-action", "data-level": "L3" }, () =>
      handlers.bookListing(card.listing_id, Number(slot.value)),
    );
    return el("span", {}, slot, book);
  }
  const off = el("button", { class: "card-action", disabled: "" }, "Off duty");
  return off;
}

function renderCard(card: SearchCard, handlers: Handlers): HTMLElement {
  return el(
    "article",
    { class: "result-card", "data-listing": card.listing_id },
    el("h3", {}, card.listing.title),
    el("p", { class: "card-rate" }, formatRate(card.listing.rate)),
    el("p", { class: "card-stars" }, formatStars(card.seller_summary)),
    el("span", { class: "level-badge" }, card.level_now ?? "off duty"),
    el("p", { class: "score-parts" }, formatScoreParts(card.parts)),
    cardAction(card, handlers),
  );
}

function sessionTile(session: SessionWire, handlers: Handlers): HTMLElement {
  const engaged = ["pending", "accepted", "live", "scheduled"].includes(session.state);
  return el(
    "li",
    { class: "session-tile", "data-session": session.session_id },
    stateChip(session),
    ` ${session.session_id} `,
    engaged
      ? button("Open", { "data-action": "join" }, () => handlers.joinSession(session.session_id))
      : null,
  );
}

function renderBuyer(state: ViewState, handlers: Handlers): HTMLElement {
  const input = el("input", {
    id: "search-input",
    placeholder: "what do you need?",
    value: state.buyer.query,
  }) as HTMLInputElement;
  const go = button("Search", { id: "search-submit" }, () => handlers.search(input.value));
  return el(
    "section",
    { "data-view": "buyer" },
    el("div", { class: "searchbar" }, input, go),
    errorLine(state.buyer.error),
    el("div", { id: "results" }, ...state.buyer.results.map((card) => renderCard(card, handlers))),
    el("h2", {}, "My sessions"),
    el(
      "ul",
      { id: "buyer-sessions" },
      ...state.buyer.sessions.map((session) => sessionTile(session, handlers)),
    ),
  );
}

// --- seller ---

/**
 * The incoming queue. Only a pending (L2) request carries accept/reject —
 * an L1 call arrives already accepted and renders with a join control
 * only: there is nothing to decline.
 */
function incomingPrompt(session: SessionWire, handlers: Handlers, now: number): HTMLElement | null {
  if (session.state === "pending") {
    const deadline = session.respond_deadline;
    if (deadline !== null && secondsLeft(deadline, now) === 0) return null; // expired: self-dismiss
    return el(
      "li",
      { class: "incoming-prompt", "data-session": session.session_id },
      `Incoming request ${session.session_id} `,
      deadline === null
        ? null
        : el("span", { class: "prompt-countdown" }, `${secondsLeft(deadline, now)}s`),
      button("Accept", { "data-action": "accept" }, () =>
        handlers.respond(session.session_id, "accept"),
      ),
      button("Reject", { "data-action": "reject" }, () =>
        handlers.respond(session.session_id, "reject"),
      ),
    );
  }
  if (session.state === "accepted") {
    return el(
      "li",
      { class: "incoming-prompt incoming-call", "data-session": session.session_id },
      `Incoming call ${session.session_id} (${session.level}) `,
      button("Join", { "data-action": "join" }, () => handlers.joinSession(session.session_id)),
    );
  }
  return null;
}

function listingEditorRow(state: SellerState, listingId: string, handlers: Handlers): HTMLElement {
  const listing = state.listings.find((l) => l.listing_id === listingId)!;
  const windows = state.windows[listingId] ?? [];
  const start = el("input", { class: "win-start", placeholder: "start (unix s)" }) as HTMLInputElement;
  const end = el("input", { class: "win-end", placeholder: "end (unix s)" }) as HTMLInputElement;
  const level = el(
    "select",
    { class: "win-level" },
    el("option", { value: "L1" }, "L1 — call me any time"),
    el("option", { value: "L2" }, "L2 — ask me first"),
    el("option", { value: "L3" }, "L3 — by appointment"),
  ) as HTMLSelectElement;
  const set = button("Set window", { "data-action": "set-window" }, () =>
    handlers.setWindow(listingId, Number(start.value), Number(end.value), level.value),
  );
  return el(
    "li",
    { class: "my-listing", "data-listing": listingId },
    el("h3", {}, listing.title),
    el("p", { class: "card-rate" }, formatRate(listing.rate)),
    el(
      "ul",
      { class: "window-list" },
      ...windows.map((w) =>
        el("li", {}, `${w.level}: ${w.start} → ${w.end}`),
      ),
    ),
    start,
    end,
    level,
    set,
  );
}

function renderSeller(state: ViewState, handlers: Handlers, now: number): HTMLElement {
  const seller = state.seller;
  const title = el("input", { id: "listing-title", placeholder: "title" }) as HTMLInputElement;
  const description = el("input", {
    id: "listing-description",
    placeholder: "description",
  }) as HTMLInputElement;
  const tags = el("input", { id: "listing-tags", placeholder: "tags, comma separated" }) as HTMLInputElement;
  const kind = el(
    "select",
    { id: "listing-kind" },
    el("option", { value: "per_minute" }, "per minute"),
    el("option", { value: "per_case" }, "per case"),
  ) as HTMLSelectElement;
  const amount = el("input", {
    id: "listing-amount",
    placeholder: "price in cents",
    inputmode: "numeric",
  }) as HTMLInputElement;
  const create = button("Create listing", { id: "listing-create" }, () =>
    handlers.createListing(title.value, description.value, tags.value, kind.value, Number(amount.value)),
  );

  const prompts = seller.sessions
    .map((session) => incomingPrompt(session, handlers, now))
    .filter((node): node is HTMLElement => node !== null);

  return el(
    "section",
    { "data-view": "seller" },
    errorLine(seller.error),
    seller.balance === null
      ? null
      : el(
          "p",
          { id: "seller-balance" },
          `Available ${formatMoney(seller.balance.available)} · held ${formatMoney(seller.balance.held)}`,
        ),
    el("h2", {}, "Incoming"),
    el("ul", { id: "incoming-queue" }, ...prompts),
    el("h2", {}, "My listings"),
    el(
      "ul",
      { id: "my-listings" },
      ...seller.listings.map((l) => listingEditorRow(seller, l.listing_id, handlers)),
    ),
    el("h2", {}, "New listing"),
    el("div", { id: "listing-form" }, title, description, tags, kind, amount, create),
  );
}

// --- the session room ---

function meterText(room: RoomState): string {
  if (room.meter === null) return "—";
  return `${formatDuration(room.meter.seconds)} · ${formatMoney(room.meter.charge)}`;
}

function ratingForm(room: RoomState, handlers: Handlers): HTMLElement | null {
  // The rating control exists only after settlement put a receipt on
  // screen, and only for the buyer; it can never fire pre-settlement.
  if (room.role !== "buyer" || room.receipt === null) return null;
  if (room.ratingPosted || (room.session.rating ?? null) !== null) {
    return el("p", { id: "rating-done" }, "Thanks for rating this call.");
  }
  const review = el("input", { id: "rating-review", placeholder: "say a word (optional)" }) as HTMLInputElement;
  const stars = [1, 2, 3, 4, 5].map((n) =>
    button("★".repeat(n), { class: "star-button", "data-stars": String(n) }, () =>
      handlers.rate(n, review.value),
    ),
  );
  return el("div", { id: "rating-form" }, el("h3", {}, "Rate this seller"), ...stars, review);
}

function receiptPanel(room: RoomState): HTMLElement | null {
  if (room.receipt === null) return null;
  const r = room.receipt;
  return el(
    "div",
    { id: "receipt-modal" },
    el("h3", {}, "Receipt"),
    el("p", { class: "receipt-charge" }, `Charge ${formatCents(r.charge.amount)}`),
    el("p", { class: "receipt-split" },
      `Seller credit ${formatCents(r.seller_credit.amount)} · commission ${formatCents(r.commission.amount)}`),
    el("p", { class: "receipt-id" }, r.settlement_id),
  );
}

function renderRoom(state: ViewState, handlers: Handlers): HTMLElement {
  const room = state.room!;
  const live = room.session.state === "live";
  const over = room.ended !== null || ["ended", "settled"].includes(room.session.state);
  const chat = el("input", { id: "chat-input", placeholder: "say something" }) as HTMLInputElement;
  const send = button("Send", { id: "chat-send" }, () => {
    handlers.sendChat(chat.value);
    chat.value = "";
  });
  return el(
    "section",
    { "data-view": "room", "data-session": room.sessionId },
    el(
      "header",
      {},
      button("← back", { id: "leave-room" }, () => handlers.leaveRoom()),
      el("span", { id: "room-state", class: `chip chip-${room.session.state}` }, room.session.state),
      el("span", { id: "meter" }, meterText(room)),
    ),
    errorLine(room.error),
    el(
      "ul",
      { id: "transcript" },
      ...room.transcript.map((line) =>
        el("li", { class: `chat-${line.from}` }, `${line.from === "me" ? "you" : "them"}: ${line.text}`),
      ),
    ),
    el(
      "div",
      { id: "media-panel" },
      room.mediaEvents === 0
        ? "voice/video: negotiation idle (stub)"
        : `voice/video: ${room.mediaEvents} negotiation frames exchanged (stub)`,
    ),
    over ? null : el("div", { class: "composer" }, chat, send),
    over || !live
      ? null
      : button("End call", { id: "end-session" }, () => handlers.endSession()),
    room.ended === null
      ? null
      : el("p", { id: "ended-banner" }, `call over (${room.ended.end_reason ?? "ended"})`),
    receiptPanel(room),
    ratingForm(room, handlers),
  );
}

// --- shell ---

export function renderApp(
  root: HTMLElement,
  state: ViewState,
  handlers: Handlers,
  now: number,
): void {
  root.textContent = "";
  const nav =
    state.me === null
      ? null
      : el(
          "nav",
          {},
          el("strong", {}, state.me.displayName),
          button("Buy", { id: "nav-buyer" }, () => handlers.switchView("buyer")),
          button("Sell", { id: "nav-seller" }, () => handlers.switchView("seller")),
          button("Refresh", { id: "nav-refresh" }, () => handlers.refresh()),
        );
  let view: HTMLElement;
  if (state.view === "auth" || state.me === null) view = renderAuth(state, handlers);
  else if (state.view === "room" && state.room !== null) view = renderRoom(state, handlers);
  else if (state.view === "seller") view = renderSeller(state, handlers, now);
  else view = renderBuyer(state, handlers);
  root.append(el("main", { id: "shell" }, nav, view));
}
