import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // The end-to-end test boots the backing service and walks several
    // review rounds, so it needs far more headroom than a unit test.
    testTimeout: 180_000,
    hookTimeout: 120_000,
  },
});
