import Papa from "papaparse";
import { WireVerdict } from "./types";

export const CSV_COLUMNS = [
  "request_id",
  "status",
  "label",
  "confidence",
  "score",
  "lambda",
] as const;

// One cell row per verdict, all values as strings so the export round-trips
// through any CSV parser without float re-formatting. Anomaly and error rows
// leave label/confidence empty regardless of what the document carries.
export function verdictCells(v: WireVerdict): string[] {
  const labeled = v.status === "valid";
  return [
    v.request_id,
    v.status,
    labeled && v.label ? v.label : "",
    labeled && v.confidence !== undefined ? String(v.confidence) : "",
    v.score === null ? "" : String(v.score),
    String(v.lambda),
  ];
}

export function verdictsToCsv(verdicts: WireVerdict[]): string {
  return Papa.unparse(
    { fields: [...CSV_COLUMNS], data: verdicts.map(verdictCells) },
    { newline: "\r\n" },
  );
}

// Parse-back used by tests and the import preview; strings only.
export function parseCsv(text: string): string[][] {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new Error(`CSV parse failed: ${parsed.errors[0].message}`);
  }
  return parsed.data;
}
