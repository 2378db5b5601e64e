import { defineConfig } from "vitest/config";

export default defineConfig({
  server: {
    // the annotation API runs in the Python service during development
    proxy: { "/api": "http://127.0.0.1:8000" },
  },
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
  },
});
