import { CardState } from "./cards";
import { verdictsToCsv } from "./csv";
import { WireVerdict } from "./types";

export interface TableRow {
  fileName: string;
  state: CardState;
}

// Batch table keyed by input position: rows are seeded when files are
// dropped and resolved in place, so the table order never depends on which
// upload finished first.
export class VerdictTable {
  private rows: TableRow[] = [];

  seed(fileNames: string[]): number[] {
    const start = this.rows.length;
    for (const name of fileNames) {
      this.rows.push({ fileName: name, state: { kind: "loading", fileName: name } });
    }
    return fileNames.map((_, i) => start + i);
  }

  resolve(rowIndex: number, state: CardState): void {
    this.rows[rowIndex].state = state;
  }

  all(): readonly TableRow[] {
    return this.rows;
  }

  verdicts(): WireVerdict[] {
    const out: WireVerdict[] = [];
    for (const row of this.rows) {
      if (row.state.kind === "verdict") out.push(row.state.verdict);
    }
    return out;
  }

  toCsv(): string {
    return verdictsToCsv(this.verdicts());
  }

  renderInto(tbody: HTMLTableSectionElement): void {
    tbody.replaceChildren();
    this.rows.forEach((row, i) => {
      const tr = document.createElement("tr");
      const v = row.state.kind === "verdict" ? row.state.verdict : null;
      const labeled = v !== null && v.status === "valid";
      const cells = [
        String(i + 1),
        row.fileName,
        v?.request_id ?? "",
        v?.status ?? row.state.kind,
        labeled && v.label ? v.label : "",
        labeled && v.confidence !== undefined ? `${(v.confidence * 100).toFixed(1)}%` : "",
        v && v.score !== null ? v.score.toFixed(4) : "",
      ];
      for (const text of cells) {
        const td = document.createElement("td");
        td.textContent = text;
        tr.append(td);
      }
      tr.dataset.state = v?.status ?? row.state.kind;
      tbody.append(tr);
    });
  }
}
