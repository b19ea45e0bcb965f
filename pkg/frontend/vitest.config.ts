import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 60_000,
    hookTimeout: 120_000,
    // the UI contract suite drives one shared live service; run files serially
    fileParallelism: false,
  },
});
