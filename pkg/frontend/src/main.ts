import { App } from "./app.js";

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

// Same-origin by default; point PARLEY_API at the gateway when the UI
// is served from somewhere else.
const base = (window as unknown as { PARLEY_API?: string }).PARLEY_API ?? "";

const app = new App(root, {
  fetchImpl: window.fetch.bind(window),
  WebSocketImpl: WebSocket,
  apiBase: base,
});
app.mount();
