import { ClientResult, FetchLike, Session, TriageClient } from "./api";
import { CardState, renderCard } from "./cards";
import { VerdictTable } from "./table";

export interface AppOptions {
  fetchImpl?: FetchLike;
  baseUrl?: string;
}

export interface AppHandles {
  root: HTMLElement;
  session: Session;
  table: VerdictTable;
  handleFiles(files: File[]): Promise<void>;
  exportCsv(): string | null;
  refreshStats(): Promise<void>;
}

function resultToState(fileName: string, result: ClientResult): CardState {
  switch (result.kind) {
    case "verdict":
      return { kind: "verdict", verdict: result.verdict };
    case "unauthorized":
      return { kind: "unauthorized", fileName };
    case "malformed":
      return { kind: "malformed", fileName, raw: result.raw };
    case "transport":
      return { kind: "transport", fileName, message: result.message };
  }
}

function thumbnailFor(file: File): string | undefined {
  // object URLs are a browser nicety; test DOMs may not implement them
  try {
    return URL.createObjectURL(file);
  } catch {
    return undefined;
  }
}

export function createApp(root: HTMLElement, opts: AppOptions = {}): AppHandles {
  // the session (and therefore the token) lives only in this closure
  const session: Session = { baseUrl: opts.baseUrl ?? "http://localhost:8000", token: "" };
  const table = new VerdictTable();

  root.innerHTML = `
    <header class="app-head">
      <h1>shell triage</h1>
      <span id="health-chip" class="health-chip">not connected</span>
    </header>
    <section id="settings" class="settings">
      <label>service URL <input id="base-url" type="text"></label>
      <label>bearer token <input id="token" type="password"
        placeholder="kept in memory only"></label>
      <button id="apply-settings" type="button">apply</button>
    </section>
    <div id="banner" class="banner" hidden></div>
    <section id="dropzone" class="dropzone">
      drop shell photos here or
      <label class="picker">browse<input id="file-input" type="file" multiple hidden></label>
    </section>
    <section id="cards" class="cards"></section>
    <section class="batch">
      <div class="batch-head">
        <h2>batch</h2>
        <button id="export-csv" type="button">export CSV</button>
      </div>
      <table id="batch-table">
        <thead><tr>
          <th>#</th><th>file</th><th>request</th><th>status</th>
          <th>coast</th><th>confidence</th><th>score</th>
        </tr></thead>
        <tbody></tbody>
      </table>
    </section>
    <footer class="stats-bar">
      <span id="stats">no stats yet</span>
      <button id="refresh-stats" type="button">refresh stats</button>
    </footer>
  `;

  const pick = <T extends HTMLElement>(sel: string): T => {
    const node = root.querySelector<T>(sel);
    if (!node) throw new Error(`missing element ${sel}`);
    return node;
  };
  const baseUrlInput = pick<HTMLInputElement>("#base-url");
  const tokenInput = pick<HTMLInputElement>("#token");
  const banner = pick<HTMLDivElement>("#banner");
  const cards = pick<HTMLElement>("#cards");
  const tbody = pick<HTMLTableSectionElement>("#batch-table tbody");
  const statsSpan = pick<HTMLSpanElement>("#stats");
  const healthChip = pick<HTMLSpanElement>("#health-chip");
  baseUrlInput.value = session.baseUrl;

  const client = () => new TriageClient(session, opts.fetchImpl);

  function showReauthPrompt(): void {
    banner.hidden = false;
    banner.textContent =
      "the service rejected the token: paste a fresh one in settings and retry";
    tokenInput.focus();
  }

  function placeCard(state: CardState, replacing?: HTMLElement): HTMLElement {
    const cardEl = renderCard(state);
    if (state.kind === "transport") {
      const file = pendingFiles.get(state.fileName);
      const rowIndex = pendingRows.get(state.fileName);
      const retry = cardEl.querySelector<HTMLButtonElement>(".retry-button");
      if (retry && file && rowIndex !== undefined) {
        retry.addEventListener("click", () => void uploadOne(file, rowIndex, cardEl));
      }
    }
    if (replacing) replacing.replaceWith(cardEl);
    else cards.append(cardEl);
    return cardEl;
  }

  // retry bookkeeping: last file object and table row per file name
  const pendingFiles = new Map<string, File>();
  const pendingRows = new Map<string, number>();

  async function uploadOne(
    file: File,
    rowIndex: number,
    replacing?: HTMLElement,
  ): Promise<void> {
    pendingFiles.set(file.name, file);
    pendingRows.set(file.name, rowIndex);
    const result = await client().submitFile(file);
    const state = resultToState(file.name, result);
    if (state.kind === "verdict") state.thumbnailUrl = thumbnailFor(file);
    if (state.kind === "unauthorized") showReauthPrompt();
    table.resolve(rowIndex, state);
    table.renderInto(tbody);
    placeCard(state, replacing);
  }

  async function handleFiles(files: File[]): Promise<void> {
    if (files.length === 0) return;
    const rowIndexes = table.seed(files.map((f) => f.name));
    table.renderInto(tbody);
    // uploads run concurrently; the table keeps input order while cards
    // arrive in completion order
    await Promise.all(files.map((file, i) => uploadOne(file, rowIndexes[i])));
  }

  function exportCsv(): string | null {
    if (table.verdicts().length === 0) return null;
    const csv = table.toCsv();
    try {
      const url = URL.createObjectURL(new Blob([csv], { type: "text/csv" }));
      const a = document.createElement("a");
      a.href = url;
      a.download = "triage.csv";
      a.click();
      URL.revokeObjectURL(url);
    } catch {
      // headless DOMs without object URLs still get the string back
    }
    return csv;
  }

  async function refreshStats(): Promise<void> {
    const stats = await client().stats();
    statsSpan.textContent = stats
      ? `requests ${stats.count} · p50 ${stats.p50 ?? "–"} ms · ` +
        `p95 ${stats.p95 ?? "–"} ms · p99 ${stats.p99 ?? "–"} ms`
      : "stats unavailable";
  }

  pick<HTMLButtonElement>("#apply-settings").addEventListener("click", () => {
    session.baseUrl = baseUrlInput.value.trim();
    session.token = tokenInput.value;
    banner.hidden = true;
    void client()
      .healthz()
      .then((health) => {
        healthChip.textContent = health
          ? `${health.status} · index ${health.index_fingerprint ?? "none"}`
          : "unreachable";
      });
  });

  const dropzone = pick<HTMLElement>("#dropzone");
  dropzone.addEventListener("dragover", (e) => e.preventDefault());
  dropzone.addEventListener("drop", (e) => {
    e.preventDefault();
    const files = Array.from(e.dataTransfer?.files ?? []);
    void handleFiles(files);
  });
  const fileInput = pick<HTMLInputElement>("#file-input");
  fileInput.addEventListener("change", () => {
    void handleFiles(Array.from(fileInput.files ?? []));
    fileInput.value = "";
  });
  pick<HTMLButtonElement>("#export-csv").addEventListener("click", () => {
    void exportCsv();
  });
  pick<HTMLButtonElement>("#refresh-stats").addEventListener("click", () => {
    void refreshStats();
  });

  return { root, session, table, handleFiles, exportCsv, refreshStats };
}
