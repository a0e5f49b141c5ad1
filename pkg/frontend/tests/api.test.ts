import { describe, expect, it } from "vitest";

import { ApiError, Gateway, type FetchLike } from "../src/api.js";

interface Call {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: unknown;
}

function fakeFetch(
  reply: (call: Call) => { status: number; json: unknown },
): { fetchImpl: FetchLike; calls: Call[] } {
  const calls: Call[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    const call: Call = {
      url,
      method: init?.method ?? "GET",
      headers: (init?.headers as Record<string, string>) ?? {},
      body: init?.body === undefined ? undefined : JSON.parse(init.body as string),
    };
    calls.push(call);
    const out = reply(call);
    return new Response(JSON.stringify(out.json), {
      status: out.status,
      headers: { "content-type": "application/json" },
    });
  };
  return { fetchImpl, calls };
}

const REGISTERED = {
  account: { account_id: "acct-000001", display_name: "Carol", created_at: 0 },
  token: "tok_secret",
};

describe("Gateway", () => {
  it("registers and keeps the bearer token for later calls", async () => {
    const { fetchImpl, calls } = fakeFetch((call) =>
      call.url === "/accounts"
        ? { status: 201, json: REGISTERED }
        : { status: 200, json: { sessions: [] } },
    );
    const api = new Gateway(fetchImpl, "");
    const out = await api.register("Carol", "fp-1");
    expect(out.account.account_id).toBe("acct-000001");
    expect(calls[0]!.body).toEqual({ display_name: "Carol", fingerprint: "fp-1" });

    await api.mySessions("acct-000001");
    expect(calls[1]!.headers["authorization"]).toBe("Bearer tok_secret");
  });

  it("issues exactly one request per method call", async () => {
    const { fetchImpl, calls } = fakeFetch(() => ({ status: 200, json: { query: "", results: [] } }));
    const api = new Gateway(fetchImpl, "");
    await api.search("plumbing");
    await api.search("tax help");
    expect(calls).toHaveLength(2);
    expect(calls[0]!.url).toBe("/search?q=plumbing");
  });

  it("surfaces the server's error code verbatim", async () => {
    const { fetchImpl } = fakeFetch(() => ({
      status: 409,
      json: { code: "SelfDealing", message: "you cannot buy your own service" },
    }));
    const api = new Gateway(fetchImpl, "");
    const failure = await api.requestSession("lst-000001").catch((e: unknown) => e);
    expect(failure).toBeInstanceOf(ApiError);
    const apiError = failure as ApiError;
    expect(apiError.code).toBe("SelfDealing");
    expect(apiError.message).toBe("you cannot buy your own service");
    expect(apiError.status).toBe(409);
  });

  it("falls back to the HTTP status when the error body is not an envelope", async () => {
    const fetchImpl: FetchLike = async () =>
      new Response("boom", { status: 502, statusText: "Bad Gateway" });
    const api = new Gateway(fetchImpl, "");
    const failure = await api.search("x").catch((e: unknown) => e);
    expect((failure as ApiError).code).toBe("Http502");
  });

  it("builds the channel url from the http base and token", async () => {
    const { fetchImpl } = fakeFetch(() => ({ status: 201, json: REGISTERED }));
    const api = new Gateway(fetchImpl, "http://127.0.0.1:8775");
    await api.register("Carol", "fp-1");
    expect(api.channelUrl("ses-000001")).toBe(
      "ws://127.0.0.1:8775/sessions/ses-000001/channel?token=tok_secret",
    );
  });
});
