import { defineConfig } from "vitest/config";

// The e2e suite drives a real experiment service spawned as a child
// process, so files must not share ports or data directories.
export default defineConfig({
  test: {
    environment: "node",
    include: ["e2e/**/*.e2e.test.ts"],
    fileParallelism: false,
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
