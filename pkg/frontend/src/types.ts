// Wire schema of the triage service. The UI renders exclusively from these
// documents; it never re-scores anything client-side.

export type CoastLabel = "Pacific" | "Caribbean";
export type VerdictStatus = "valid" | "anomaly" | "error";

export interface StageTimings {
  decode: number;
  embed: number;
  gate: number;
  classify: number;
  total: number;
}

export interface WireVerdict {
  request_id: string;
  status: VerdictStatus;
  // null on error verdicts (the image never reached the gate)
  score: number | null;
  lambda: number;
  k: number;
  timings_ms: StageTimings;
  pipeline_version: string;
  // present only on valid verdicts
  label?: CoastLabel;
  confidence?: number;
  // present only on error verdicts
  error?: string;
}

export interface HealthInfo {
  status: string;
  index_fingerprint: string | null;
  pipeline_version: string;
}

export interface ServiceStats {
  count: number;
  p50: number | null;
  p95: number | null;
  p99: number | null;
}

const STATUSES: readonly string[] = ["valid", "anomaly", "error"];
const TIMING_KEYS = ["decode", "embed", "gate", "classify", "total"] as const;

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

// Narrow an arbitrary response body to the verdict schema. Anything that
// fails lands in the raw-JSON fallback view instead of a card.
export function isWireVerdict(x: unknown): x is WireVerdict {
  if (!isRecord(x)) return false;
  if (typeof x.request_id !== "string") return false;
  if (typeof x.status !== "string" || !STATUSES.includes(x.status)) return false;
  if (!(x.score === null || typeof x.score === "number")) return false;
  if (typeof x.lambda !== "number" || typeof x.k !== "number") return false;
  if (typeof x.pipeline_version !== "string") return false;
  const t = x.timings_ms;
  if (!isRecord(t)) return false;
  return TIMING_KEYS.every((key) => typeof t[key] === "number");
}
