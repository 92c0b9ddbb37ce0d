import { WireVerdict } from "./types";

export type CardState =
  | { kind: "loading"; fileName: string }
  | { kind: "verdict"; verdict: WireVerdict; thumbnailUrl?: string }
  | { kind: "unauthorized"; fileName: string }
  | { kind: "malformed"; fileName: string; raw: unknown }
  | { kind: "transport"; fileName: string; message: string };

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function badge(status: string): HTMLElement {
  return el("span", `badge badge-${status}`, status);
}

// Horizontal 0..1 track with the anomaly score marker and the lambda
// threshold marker, so the gate decision is legible at a glance.
function scoreGauge(score: number, lambda: number): HTMLElement {
  const gauge = el("div", "score-gauge");
  const fill = el("div", "gauge-fill");
  fill.style.width = `${Math.max(0, Math.min(1, score)) * 100}%`;
  const threshold = el("div", "gauge-threshold");
  threshold.style.left = `${Math.max(0, Math.min(1, lambda)) * 100}%`;
  threshold.title = `lambda = ${lambda}`;
  gauge.append(fill, threshold);
  const caption = el(
    "div",
    "gauge-caption",
    `score ${score.toFixed(4)} vs λ ${lambda}`,
  );
  const wrap = el("div", "gauge-wrap");
  wrap.append(gauge, caption);
  return wrap;
}

function timingsLine(v: WireVerdict): HTMLElement {
  const t = v.timings_ms;
  return el(
    "div",
    "timings",
    `decode ${t.decode.toFixed(1)} · embed ${t.embed.toFixed(1)} · ` +
      `gate ${t.gate.toFixed(1)} · classify ${t.classify.toFixed(1)} · ` +
      `total ${t.total.toFixed(1)} ms`,
  );
}

function verdictCard(v: WireVerdict, thumbnailUrl?: string): HTMLElement {
  const card = el("article", `card card-${v.status}`);
  card.dataset.status = v.status;
  card.dataset.requestId = v.request_id;

  if (thumbnailUrl) {
    const img = el("img", "thumb");
    img.src = thumbnailUrl;
    img.alt = v.request_id;
    card.append(img);
  }
  const head = el("header", "card-head");
  head.append(el("span", "file-name", v.request_id), badge(v.status));
  card.append(head);

  if (v.status === "valid" && v.label) {
    // coast label plus confidence as a percentage bar
    card.append(el("div", "coast-label", v.label));
    const pct = (v.confidence ?? 0) * 100;
    const bar = el("div", "confidence-bar");
    const fill = el("div", "confidence-fill");
    fill.style.width = `${pct}%`;
    bar.append(fill);
    card.append(bar, el("div", "confidence-text", `${pct.toFixed(1)}% confidence`));
  } else if (v.status === "anomaly") {
    // never a coast label here, even if a document carried one
    card.append(
      el(
        "div",
        "rejection-note",
        "rejected: similarity below the gate threshold, not recognized as a shell",
      ),
    );
  } else if (v.status === "error") {
    card.append(el("div", "error-note", v.error ?? "processing failed"));
  }

  if (v.score !== null) card.append(scoreGauge(v.score, v.lambda));
  card.append(timingsLine(v));
  return card;
}

export function renderCard(state: CardState): HTMLElement {
  switch (state.kind) {
    case "loading": {
      const card = el("article", "card card-loading");
      card.dataset.status = "loading";
      card.append(
        el("span", "file-name", state.fileName),
        el("div", "spinner"),
        el("div", "loading-note", "uploading…"),
      );
      return card;
    }
    case "verdict":
      return verdictCard(state.verdict, state.thumbnailUrl);
    case "unauthorized": {
      const card = el("article", "card card-unauthorized");
      card.dataset.status = "unauthorized";
      card.append(
        el("span", "file-name", state.fileName),
        badge("unauthorized"),
        el(
          "div",
          "reauth-note",
          "token rejected: update the bearer token in settings and retry",
        ),
      );
      return card;
    }
    case "malformed": {
      const card = el("article", "card card-malformed");
      card.dataset.status = "malformed";
      card.append(
        el("span", "file-name", state.fileName),
        badge("error"),
        el("div", "error-note", "response did not match the verdict schema"),
        el("pre", "raw-json", JSON.stringify(state.raw, null, 2)),
      );
      return card;
    }
    case "transport": {
      const card = el("article", "card card-transport");
      card.dataset.status = "transport";
      const retry = el("button", "retry-button", "retry");
      retry.type = "button";
      card.append(
        el("span", "file-name", state.fileName),
        badge("error"),
        el("div", "error-note", state.message),
        retry,
      );
      return card;
    }
  }
}
