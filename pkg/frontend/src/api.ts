import { HealthInfo, ServiceStats, WireVerdict, isWireVerdict } from "./types";

// Connection settings live in memory only; the token is never persisted.
export interface Session {
  baseUrl: string;
  token: string;
}

// Narrow fetch signature so tests can hand in a plain function.
export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export type ClientResult =
  | { kind: "verdict"; verdict: WireVerdict }
  | { kind: "unauthorized" }
  // response parsed but does not match the verdict schema: show raw JSON
  | { kind: "malformed"; raw: unknown }
  // network failure or service not ready: offer a retry
  | { kind: "transport"; message: string };

// Base64-encode a file client-side, chunked to keep btoa off the call-stack
// limit for large images.
export async function fileToBase64(file: Blob): Promise<string> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  const chunks: string[] = [];
  const step = 0x8000;
  for (let i = 0; i < bytes.length; i += step) {
    chunks.push(String.fromCharCode(...bytes.subarray(i, i + step)));
  }
  return btoa(chunks.join(""));
}

function trimBase(url: string): string {
  return url.endsWith("/") ? url.slice(0, -1) : url;
}

export class TriageClient {
  constructor(
    private readonly session: Session,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private headers(): Record<string, string> {
    return {
      "Content-Type": "application/json",
      Authorization: `Bearer ${this.session.token}`,
    };
  }

  async submitImage(imageB64: string, requestId: string): Promise<ClientResult> {
    let response: Response;
    try {
      response = await this.fetchImpl(
        `${trimBase(this.session.baseUrl)}/receive-files`,
        {
          method: "POST",
          headers: this.headers(),
          body: JSON.stringify({ image_b64: imageB64, request_id: requestId }),
        },
      );
    } catch (err) {
      return { kind: "transport", message: String(err) };
    }
    if (response.status === 401) return { kind: "unauthorized" };

    let body: unknown;
    try {
      body = await response.json();
    } catch {
      return { kind: "malformed", raw: `non-JSON response (${response.status})` };
    }
    // 400/413 still carry an error verdict body, so this covers them too
    if (isWireVerdict(body)) return { kind: "verdict", verdict: body };
    const detail = (body as { detail?: unknown })?.detail;
    if (typeof detail === "string") return { kind: "transport", message: detail };
    return { kind: "malformed", raw: body };
  }

  async submitFile(file: File): Promise<ClientResult> {
    return this.submitImage(await fileToBase64(file), file.name);
  }

  async healthz(): Promise<HealthInfo | null> {
    try {
      const r = await this.fetchImpl(`${trimBase(this.session.baseUrl)}/healthz`);
      return r.ok ? ((await r.json()) as HealthInfo) : null;
    } catch {
      return null;
    }
  }

  async stats(): Promise<ServiceStats | null> {
    try {
      const r = await this.fetchImpl(`${trimBase(this.session.baseUrl)}/stats`, {
        headers: { Authorization: `Bearer ${this.session.token}` },
      });
      return r.ok ? ((await r.json()) as ServiceStats) : null;
    } catch {
      return null;
    }
  }
}
