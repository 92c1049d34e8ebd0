import { existsSync } from "node:fs";
import { join, normalize } from "node:path";
import react from "@vitejs/plugin-react";
import type { Plugin } from "vite";
import { defineConfig } from "vitest/config";
import { placeholderPng } from "./src/placeholderImage";

// Contract for snippets: any /imgs/<name> reference resolves. Real assets
// in public/imgs are served verbatim by vite; absent ones get a
// deterministic placeholder. Anything outside imgs/ falls through (404).
export function imgsPlaceholderPlugin(publicDir = "public"): Plugin {
  return {
    name: "imgs-placeholder",
    configureServer(server) {
      server.middlewares.use((req, res, next) => {
        const url = (req.url ?? "").split("?")[0];
        if (!url.startsWith("/imgs/")) {
          return next();
        }
        const name = normalize(url.slice("/imgs/".length));
        if (name.startsWith("..") || name.includes("/")) {
          res.statusCode = 404;
          return res.end("not found");
        }
        if (existsSync(join(publicDir, "imgs", name))) {
          return next(); // static middleware serves the real asset
        }
        const png = placeholderPng(name);
        res.setHeader("Content-Type", "image/png");
        res.setHeader("Content-Length", String(png.length));
        res.end(png);
      });
    },
  };
}

export default defineConfig({
  plugins: [react(), imgsPlaceholderPlugin()],
  server: {
    host: "127.0.0.1",
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.{ts,tsx}"],
  },
});
