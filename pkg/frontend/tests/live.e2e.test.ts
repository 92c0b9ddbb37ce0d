// Live smoke against a real running service. Skipped unless LIVE_BASE_URL
// and LIVE_TOKEN are set:
//   SHELLTRIAGE_SECRET=s shelltriage serve --index ref.idx --port 8733 &
//   LIVE_BASE_URL=http://127.0.0.1:8733 LIVE_TOKEN=$(shelltriage token) \
//     LIVE_IMAGE=path/to/in-domain.png npm test
import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { TriageClient } from "../src/api";
import { createApp } from "../src/app";
import { isWireVerdict } from "../src/types";
import { PNG_1PX, makeFile } from "./fixtures";

const BASE = process.env.LIVE_BASE_URL;
const TOKEN = process.env.LIVE_TOKEN;
const IMAGE = process.env.LIVE_IMAGE;
const live = BASE && TOKEN ? describe : describe.skip;

// happy-dom's window.fetch is sandboxed to the page origin; the node global
// does real HTTP
const nodeFetch: typeof fetch = (url, init) => fetch(url, init);

function liveFile(name: string): File {
  const bytes = IMAGE ? readFileSync(IMAGE) : PNG_1PX;
  return new File([new Uint8Array(bytes)], name, { type: "image/png" });
}

live("live service", () => {
  const client = () =>
    new TriageClient({ baseUrl: BASE as string, token: TOKEN as string }, (u, i) =>
      nodeFetch(u, i),
    );

  it("healthz reports ready", async () => {
    const health = await client().healthz();
    expect(health?.status).toBe("ok");
    expect(health?.index_fingerprint).toBeTruthy();
  });

  it.skipIf(!IMAGE)("an in-domain image comes back valid with a coast", async () => {
    const result = await client().submitFile(liveFile("live-smoke.png"));
    expect(result.kind).toBe("verdict");
    if (result.kind === "verdict") {
      expect(isWireVerdict(result.verdict)).toBe(true);
      expect(result.verdict.status).toBe("valid");
      expect(["Pacific", "Caribbean"]).toContain(result.verdict.label);
    }
  });

  it("a degenerate flat image yields an error verdict, not a 500", async () => {
    const result = await client().submitFile(makeFile("flat.png"));
    expect(result.kind).toBe("verdict");
    if (result.kind === "verdict") {
      expect(result.verdict.status).toBe("error");
      expect(result.verdict.score).toBeNull();
    }
  });

  it("a stale token is unauthorized", async () => {
    const stale = new TriageClient(
      { baseUrl: BASE as string, token: "stale" },
      (u, i) => nodeFetch(u, i),
    );
    const result = await stale.submitFile(makeFile("x.png"));
    expect(result).toEqual({ kind: "unauthorized" });
  });

  it.skipIf(!IMAGE)("the full app round-trips a file live", async () => {
    const root = document.createElement("div");
    document.body.append(root);
    const app = createApp(root, {
      fetchImpl: (u, i) => nodeFetch(u, i),
      baseUrl: BASE as string,
    });
    app.session.token = TOKEN as string;
    await app.handleFiles([liveFile("live-app.png")]);
    const card = root.querySelector<HTMLElement>("#cards .card");
    expect(card?.dataset.status).toBe("valid");
    expect(root.querySelectorAll("#batch-table tbody tr")).toHaveLength(1);
  });
});
