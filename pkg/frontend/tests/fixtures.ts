// Golden verdicts captured from the triage pipeline on its three reference
// query images (planted 64-dim index), so UI tests run without the backend.
// Scores, labels, and confidences are the pipeline's exact outputs; timings
// are frozen at one observed run.
import { StageTimings, WireVerdict } from "../src/types";

const TIMINGS: StageTimings = {
  decode: 1.009,
  embed: 0.146,
  gate: 0.1,
  classify: 0.021,
  total: 1.276,
};

export const VALID_PACIFIC: WireVerdict = {
  request_id: "pacific.png",
  status: "valid",
  score: 0.9999714553289836,
  lambda: 0.955,
  k: 5,
  timings_ms: TIMINGS,
  pipeline_version: "0.1.0",
  label: "Pacific",
  confidence: 0.5625565823893035,
};

export const VALID_CARIBBEAN: WireVerdict = {
  request_id: "caribbean.png",
  status: "valid",
  score: 0.9999868649755331,
  lambda: 0.955,
  k: 5,
  timings_ms: { ...TIMINGS, decode: 0.959, embed: 0.13, gate: 0.046, total: 1.148 },
  pipeline_version: "0.1.0",
  label: "Caribbean",
  confidence: 0.5624519388794166,
};

export const ANOMALY_CHECKERBOARD: WireVerdict = {
  request_id: "ood.png",
  status: "anomaly",
  score: 0.4099800217328943,
  lambda: 0.955,
  k: 5,
  timings_ms: { ...TIMINGS, decode: 0.265, embed: 0.127, gate: 0.038, classify: 0.0, total: 0.43 },
  pipeline_version: "0.1.0",
};

export const ERROR_UNDECODABLE: WireVerdict = {
  request_id: "broken.png",
  status: "error",
  score: null,
  lambda: 0.955,
  k: 5,
  timings_ms: { decode: 0, embed: 0, gate: 0, classify: 0, total: 14.985 },
  pipeline_version: "0.1.0",
  error: "cannot decode image",
};

// re-key a golden verdict to another request id (one mock verdict per file)
export function asRequest(v: WireVerdict, requestId: string): WireVerdict {
  return { ...v, request_id: requestId };
}

// tiny but real 1x1 PNG so File contents are decodable-looking bytes
export const PNG_1PX = Uint8Array.from(
  atob(
    "iVBORw0KGgoAAAANSUhEUgAAAAEAAAABCAYAAAAfFcSJAAAADUlEQVR4nGNgYGBgAAAABQAB" +
      "h6FO1AAAAABJRU5ErkJggg==",
  ),
  (c) => c.charCodeAt(0),
);

export function makeFile(name: string): File {
  return new File([PNG_1PX], name, { type: "image/png" });
}
