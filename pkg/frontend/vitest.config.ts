import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    globals: true,
    // the conformance suite boots the real gateway in a child process
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
