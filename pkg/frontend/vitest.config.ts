import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      // live tests fetch the real service, so the page shares its origin
      happyDOM: { url: process.env.ESV_SERVICE_URL || "http://localhost:3000" },
    },
    include: ["test/**/*.test.ts"],
  },
});
