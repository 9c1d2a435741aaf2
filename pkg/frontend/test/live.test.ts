/** Optional end-to-end check against a live service:
 *
 *   esv-forge serve --config demo.cfg --bind 127.0.0.1:8793 &
 *   ESV_SERVICE_URL=http://127.0.0.1:8793 npx vitest run test/live.test.ts
 */
import { describe, expect, it } from "vitest";

import { ApiClient, LEVELS } from "../src/api.js";
import { App } from "../src/app.js";
import { barsInLane, mountDom, setUrl } from "./helpers.js";

const BASE = process.env.ESV_SERVICE_URL;

describe.skipIf(!BASE)("live service", () => {
  it("renders lanes equal to the live timeline payload", async () => {
    const api = new ApiClient(BASE!);
    const surgeries = await api.surgeries();
    expect(surgeries.length).toBeGreaterThan(0);
    const first = surgeries[0].surgery_id;
    const payload = await api.timeline(first);

    mountDom();
    setUrl(`?surgery_view=${first}`);
    await new App(document, api).init();
    for (const level of LEVELS) {
      expect(barsInLane(level)).toEqual(payload.levels[level]);
    }
  });
});
