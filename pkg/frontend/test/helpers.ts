import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { vi } from "vitest";

const HERE = dirname(fileURLToPath(import.meta.url));

export function loadFixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(HERE, "fixtures", name), "utf-8")) as T;
}

/** Mount the real index.html markup into the happy-dom document. */
export function mountDom(): void {
  const html = readFileSync(join(HERE, "..", "index.html"), "utf-8")
    .replace(/<script[\s\S]*?<\/script>/g, "")
    .replace(/<link[^>]*>/g, "");
  document.body.innerHTML = html.match(/<body>([\s\S]*)<\/body>/)![1];
}

export interface FetchStub {
  calls: string[];
  respond: (url: string) => Promise<Response>;
}

/** Stub fetch with a route table: path (before ?) or full path+query to a
 * payload, a status override, or a deferred promise for ordering tests. */
export function stubFetch(
  routes: Record<string, unknown | (() => Promise<unknown>)>,
): string[] {
  const calls: string[] = [];
  vi.stubGlobal("fetch", async (input: string | URL): Promise<Response> => {
    const url = new URL(String(input), "http://service.test");
    const key = url.pathname + url.search;
    calls.push(key);
    const route = routes[key] ?? routes[url.pathname];
    if (route === undefined) {
      return jsonResponse({ error: `no fixture for ${key}` }, 404);
    }
    const payload = typeof route === "function"
      ? await (route as () => Promise<unknown>)()
      : route;
    if (payload instanceof Response) return payload;
    return jsonResponse(payload, 200);
  });
  return calls;
}

export function jsonResponse(payload: unknown, status: number): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** Read rendered lane bars back into segment objects for snapshot equality. */
export function barsInLane(level: string): Record<string, unknown>[] {
  const track = document.querySelector(`.track[data-level="${level}"]`)!;
  return Array.from(track.querySelectorAll(".bar")).map((el) => {
    const d = (el as HTMLElement).dataset;
    return {
      surgery_id: d.surgery,
      level: d.level,
      label: d.label,
      label_ordinal: Number(d.ordinal),
      start_s: Number(d.start),
      end_s: Number(d.end),
      source: d.source,
    };
  });
}

export function renderedResults(): Record<string, unknown>[] {
  return Array.from(document.querySelectorAll("#results .result")).map((el) => {
    const d = (el as HTMLElement).dataset;
    return {
      surgery_id: d.surgery,
      level: d.level,
      label: d.label,
      label_ordinal: Number(d.ordinal),
      start_s: Number(d.start),
      end_s: Number(d.end),
      source: d.source,
    };
  });
}

export function setUrl(search: string): void {
  window.history.replaceState(null, "", search || "/");
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
