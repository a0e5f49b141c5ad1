import { ApiError, Gateway, type FetchLike } from "./api.js";
import { SessionChannel, type WebSocketCtor } from "./channel.js";
import { Store, type RoomState } from "./store.js";
import type { EndedBody, MeterBody, ServerFrame, SessionWire } from "./types.js";
import { renderApp, type Handlers } from "./views.js";

export interface AppDeps {
  fetchImpl: FetchLike;
  WebSocketImpl: WebSocketCtor;
  apiBase: string;
  /** Epoch seconds; countdowns are computed against this. */
  now?: () => number;
  /** Channel keepalive cadence (ms). */
  keepaliveMs?: number;
  /** Auto refresh cadence (ms); 0 disables the timer. */
  refreshMs?: number;
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return error instanceof Error ? error.message : String(error);
}

/**
 * The marketplace console. Holds no truth of its own: every figure on
 * screen is either a gateway read or a server frame, so a reload (or
 * the Refresh button) always reconverges on the platform's state.
 */
export class App implements Handlers {
  readonly api: Gateway;
  readonly store = new Store();
  private channel: SessionChannel | null = null;
  private readonly now: () => number;
  private readonly keepaliveMs: number;
  private readonly refreshMs: number;
  private readonly WebSocketImpl: WebSocketCtor;
  private timers: Array<ReturnType<typeof setInterval>> = [];

  constructor(
    private readonly root: HTMLElement,
    deps: AppDeps,
  ) {
    this.api = new Gateway(deps.fetchImpl, deps.apiBase);
    this.WebSocketImpl = deps.WebSocketImpl;
    this.now = deps.now ?? (() => Math.floor(Date.now() / 1000));
    this.keepaliveMs = deps.keepaliveMs ?? 1000;
    this.refreshMs = deps.refreshMs ?? 2000;
  }

  mount(): void {
    this.store.subscribe(() => this.render());
    this.render();
    // Countdown labels in the seller queue depend on wall time, so that
    // view re-renders once a second. The meter is untouched by this: it
    // changes only when a server frame lands.
    this.timers.push(
      setInterval(() => {
        if (this.store.state.view === "seller") this.store.update(() => {});
      }, 1000),
    );
    if (this.refreshMs > 0) {
      this.timers.push(setInterval(() => void this.autoRefresh(), this.refreshMs));
    }
  }

  destroy(): void {
    for (const timer of this.timers) clearInterval(timer);
    this.timers = [];
    this.channel?.close();
    this.channel = null;
  }

  private render(): void {
    renderApp(this.root, this.store.state, this, this.now());
  }

  // --- actions (each issues exactly one gateway call) ---

  register(name: string, fingerprint: string): void {
    void (async () => {
      try {
        const out = await this.api.register(name, fingerprint);
        this.store.update((s) => {
          s.me = { accountId: out.account.account_id, displayName: out.account.display_name };
          s.authError = null;
          s.view = "buyer";
        });
      } catch (error) {
        this.store.update((s) => {
          s.authError = describe(error);
        });
      }
    })();
  }

  switchView(view: "buyer" | "seller"): void {
    this.store.update((s) => {
      s.view = view;
    });
    void this.refreshAsync();
  }

  search(query: string): void {
    void (async () => {
      try {
        const out = await this.api.search(query);
        this.store.update((s) => {
          s.buyer.query = query;
          s.buyer.results = out.results;
          s.buyer.error = null;
        });
      } catch (error) {
        this.store.update((s) => {
          s.buyer.error = describe(error);
        });
      }
    })();
  }

  callListing(listingId: string): void {
    void (async () => {
      try {
        const session = await this.api.requestSession(listingId);
        this.openRoom(session);
      } catch (error) {
        this.store.update((s) => {
          s.buyer.error = describe(error);
        });
      }
    })();
  }

  bookListing(listingId: string, slotStart: number): void {
    void (async () => {
      try {
        const out = await this.api.bookAppointment(listingId, slotStart);
        this.store.update((s) => {
          s.buyer.sessions = [out.session, ...s.buyer.sessions];
          s.buyer.error = null;
        });
      } catch (error) {
        this.store.update((s) => {
          s.buyer.error = describe(error);
        });
      }
    })();
  }

  respond(sessionId: string, decision: "accept" | "reject"): void {
    void (async () => {
      try {
        const session = await this.api.respond(sessionId, decision);
        this.store.update((s) => {
          s.seller.sessions = s.seller.sessions.map((row) =>
            row.session_id === sessionId ? session : row,
          );
          s.seller.error = null;
        });
      } catch (error) {
        this.store.update((s) => {
          s.seller.error = describe(error);
        });
      }
    })();
  }

  joinSession(sessionId: string): void {
    const { buyer, seller } = this.store.state;
    const session =
      buyer.sessions.find((row) => row.session_id === sessionId) ??
      seller.sessions.find((row) => row.session_id === sessionId);
    if (session !== undefined) this.openRoom(session);
  }

  leaveRoom(): void {
    this.channel?.close();
    this.channel = null;
    this.store.update((s) => {
      const back = s.room?.role === "seller" ? "seller" : "buyer";
      s.room = null;
      s.view = back;
    });
  }

  sendChat(text: string): void {
    if (text.trim() === "" || this.channel === null) return;
    this.channel.sendChat(text);
    this.store.update((s) => {
      s.room?.transcript.push({ from: "me", text, at: new Date().toISOString() });
    });
  }

  endSession(): void {
    const room = this.store.state.room;
    if (room === null) return;
    void (async () => {
      try {
        const out = await this.api.endSession(room.sessionId);
        this.store.update((s) => {
          if (s.room === null || s.room.sessionId !== out.session.session_id) return;
          s.room.session = out.session;
          s.room.receipt = out.receipt;
          s.room.error = null;
        });
      } catch (error) {
        this.store.update((s) => {
          if (s.room !== null) s.room.error = describe(error);
        });
      }
    })();
  }

  rate(stars: number, review: string): void {
    const room = this.store.state.room;
    if (room === null) return;
    void (async () => {
      try {
        await this.api.rateSession(room.sessionId, stars, review);
        this.store.update((s) => {
          if (s.room !== null) {
            s.room.ratingPosted = true;
            s.room.error = null;
          }
        });
      } catch (error) {
        this.store.update((s) => {
          if (s.room !== null) s.room.error = describe(error);
        });
      }
    })();
  }

  createListing(title: string, description: string, tags: string, kind: string, amount: number): void {
    void (async () => {
      try {
        const listing = await this.api.createListing(
          title,
          description,
          tags.split(",").map((t) => t.trim()).filter((t) => t !== ""),
          { kind, amount },
        );
        this.store.update((s) => {
          s.seller.listings = [...s.seller.listings, listing];
          s.seller.windows[listing.listing_id] = [];
          s.seller.error = null;
        });
      } catch (error) {
        this.store.update((s) => {
          s.seller.error = describe(error);
        });
      }
    })();
  }

  setWindow(listingId: string, start: number, end: number, level: string): void {
    void (async () => {
      try {
        const out = await this.api.setAvailability(listingId, [{ start, end, level }]);
        this.store.update((s) => {
          s.seller.windows[listingId] = out.windows;
          s.seller.error = null;
        });
      } catch (error) {
        this.store.update((s) => {
          s.seller.error = describe(error);
        });
      }
    })();
  }

  refresh(): void {
    void this.refreshAsync();
  }

  /** Reconstruct the current view from gateway reads. */
  async refreshAsync(): Promise<void> {
    const me = this.store.state.me;
    if (me === null) return;
    const view = this.store.state.view;
    try {
      if (view === "room") {
        await this.refreshRoom();
        return;
      }
      const out = await this.api.mySessions(me.accountId);
      this.store.update((s) => {
        if (view === "seller") {
          s.seller.sessions = out.sessions.filter((row) => row.seller_id === me.accountId);
          s.seller.error = null;
        } else {
          s.buyer.sessions = out.sessions.filter((row) => row.buyer_id === me.accountId);
          s.buyer.error = null;
        }
      });
    } catch (error) {
      this.store.update((s) => {
        if (view === "seller") s.seller.error = describe(error);
        else s.buyer.error = describe(error);
      });
    }
  }

  private async autoRefresh(): Promise<void> {
    const state = this.store.state;
    if (state.me === null) return;
    if (state.view === "room" && state.room !== null) {
      const settled = state.room.ended !== null || state.room.receipt !== null;
      const connected = this.channel !== null;
      if (!settled && !connected) await this.refreshRoom();
      return;
    }
    if (state.view === "buyer" || state.view === "seller") await this.refreshAsync();
  }

  /** One read to pull the room's session forward (pending → accepted …). */
  private async refreshRoom(): Promise<void> {
    const room = this.store.state.room;
    if (room === null) return;
    try {
      const session = await this.api.getSession(room.sessionId);
      this.store.update((s) => {
        if (s.room !== null && s.room.sessionId === session.session_id) {
          s.room.session = session;
        }
      });
      this.maybeConnectChannel();
    } catch (error) {
      this.store.update((s) => {
        if (s.room !== null) s.room.error = describe(error);
      });
    }
  }

  // --- the room and its channel ---

  private openRoom(session: SessionWire): void {
    const me = this.store.state.me;
    if (me === null) return;
    const room: RoomState = {
      sessionId: session.session_id,
      role: session.buyer_id === me.accountId ? "buyer" : "seller",
      session,
      transcript: [],
      meter: null,
      mediaEvents: 0,
      receipt: null,
      ratingPosted: false,
      ended: null,
      error: null,
    };
    this.store.update((s) => {
      s.room = room;
      s.view = "room";
    });
    this.maybeConnectChannel();
  }

  /** Joinable states only; the gateway refuses a channel for the rest. */
  private maybeConnectChannel(): void {
    const room = this.store.state.room;
    if (room === null || this.channel !== null) return;
    if (room.session.state !== "accepted" && room.session.state !== "live") return;
    const channel = new SessionChannel(
      this.api.channelUrl(room.sessionId),
      this.WebSocketImpl,
      {
        onFrame: (frame) => this.handleFrame(frame),
        onClose: (code, reason) => {
          if (code !== 1000) {
            this.store.update((s) => {
              if (s.room !== null && s.room.ended === null) {
                s.room.error = `channel closed: ${reason || code}`;
              }
            });
          }
          this.channel = null;
        },
        onError: () => {
          // transport hiccup; the close handler carries the verdict
        },
      },
      this.keepaliveMs,
    );
    this.channel = channel;
    channel.connect();
  }

  /**
   * Server frames, applied in arrival order. This is the only place the
   * rendered meter is ever assigned — the figures on screen are always
   * the platform's own.
   */
  private handleFrame(frame: ServerFrame): void {
    this.store.update((s) => {
      const room = s.room;
      if (room === null || room.sessionId !== frame.session_id) return;
      if (frame.frame_type === "meter") {
        const body = frame.body as unknown as MeterBody;
        room.meter = { seconds: body.metered_seconds, charge: body.accrued_charge };
        room.session.state = body.state;
        return;
      }
      if (frame.frame_type === "ended") {
        const body = frame.body as unknown as EndedBody;
        room.ended = body;
        room.session.state = body.state;
        room.session.end_reason = body.end_reason;
        return;
      }
      if (frame.frame_type === "chat") {
        const text = frame.body === null ? undefined : (frame.body["text"] as string | undefined);
        if (typeof text === "string" && text !== "") {
          room.transcript.push({ from: "peer", text, at: frame.sent_at });
        }
        return;
      }
      room.mediaEvents += 1; // offer / answer / candidate: stub panel only
    });
    if (this.store.state.room?.ended != null) void this.afterEnded();
  }

  /** Event-driven reads once the platform says the call is over. */
  private async afterEnded(): Promise<void> {
    const room = this.store.state.room;
    if (room === null) return;
    if (room.receipt === null) {
      try {
        const receipt = await this.api.getReceipt(room.sessionId);
        this.store.update((s) => {
          if (s.room !== null && s.room.sessionId === room.sessionId) s.room.receipt = receipt;
        });
      } catch {
        // zero-charge sessions may settle without a receipt to show
      }
    }
    const me = this.store.state.me;
    if (room.role === "seller" && me !== null) {
      try {
        const balance = await this.api.balance(me.accountId);
        this.store.update((s) => {
          s.seller.balance = balance;
        });
      } catch {
        // balance chip is best-effort
      }
    }
  }
}
