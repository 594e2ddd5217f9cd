import { defineConfig } from "vitest/config";

// The annotation API runs separately (lidarlabel serve, default port 8077).
// During development the dev server proxies API paths so the UI can stay
// same-origin; a built bundle talks to the API directly via ?api=<base>.
const api = process.env.LIDARLABEL_API ?? "http://127.0.0.1:8077";

export default defineConfig({
  base: "./",
  server: {
    proxy: {
      "/sequences": api,
      "/eval": api,
    },
  },
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 15_000,
  },
});
