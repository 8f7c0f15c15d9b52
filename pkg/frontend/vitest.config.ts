import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the integration suite boots a real server and runs a full pipeline
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
