/** DOM wiring: upload, per-body selection, submit, poll, before/after. */

import { ApiError, GatewayClient, OPTIONS, isOption } from "./api";
import type { PanelState } from "./state";
import {
  canSubmit,
  choicesPayload,
  createPanel,
  jobDone,
  jobFailed,
  jobSubmitted,
  loadImage,
  optionFor,
  setChoice,
  toggleView,
} from "./state";
import { drawOverlays, overlaySpecs } from "./overlay";

const gatewayBase =
  new URLSearchParams(location.search).get("gateway") ?? "http://127.0.0.1:8080";
const client = new GatewayClient(gatewayBase);

let state: PanelState = createPanel();

const fileInput = document.querySelector<HTMLInputElement>("#file")!;
const submitButton = document.querySelector<HTMLButtonElement>("#submit")!;
const toggleButton = document.querySelector<HTMLButtonElement>("#toggle")!;
const canvas = document.querySelector<HTMLCanvasElement>("#view")!;
const bodyList = document.querySelector<HTMLDivElement>("#bodies")!;
const banner = document.querySelector<HTMLDivElement>("#banner")!;
const warningsBox = document.querySelector<HTMLUListElement>("#warnings")!;

let originalImage: HTMLImageElement | null = null;
let resultImage: HTMLImageElement | null = null;

function setBanner(text: string, kind: "info" | "error" | "ok"): void {
  banner.textContent = text;
  banner.dataset.kind = kind;
}

function loadBitmap(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const image = new Image();
    image.crossOrigin = "anonymous";
    image.onload = () => resolve(image);
    image.onerror = () => reject(new Error(`could not load ${url}`));
    image.src = url;
  });
}

function render(): void {
  submitButton.disabled = !canSubmit(state);
  toggleButton.hidden = state.jobPhase !== "done";
  toggleButton.textContent = state.showResult ? "show original" : "show result";

  warningsBox.replaceChildren(
    ...state.warnings.map((text) => {
      const item = document.createElement("li");
      item.textContent = text;
      return item;
    }),
  );

  const shown = state.showResult && resultImage ? resultImage : originalImage;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!shown) return;
  canvas.width = shown.naturalWidth;
  canvas.height = shown.naturalHeight;
  ctx.drawImage(shown, 0, 0);
  if (!state.showResult) {
    drawOverlays(ctx, overlaySpecs(state.bodies, state.choices));
  }
}

function renderBodyList(): void {
  bodyList.replaceChildren();
  if (state.imageId !== null && state.bodies.length === 0) {
    const notice = document.createElement("p");
    notice.textContent = "no people detected";
    bodyList.appendChild(notice);
    return;
  }
  state.bodies.forEach((body, index) => {
    const row = document.createElement("label");
    row.className = "body-row";
    const caption = document.createElement("span");
    const percent = Math.round(body.confidence * 100);
    caption.textContent = `body #${index + 1} (${percent}%)`;
    const select = document.createElement("select");
    for (const option of OPTIONS) {
      const entry = document.createElement("option");
      entry.value = option;
      entry.textContent = option.replaceAll("_", " ");
      select.appendChild(entry);
    }
    select.value = optionFor(state, body.body_id);
    select.addEventListener("change", () => {
      if (isOption(select.value)) {
        state = setChoice(state, body.body_id, select.value);
        render();
      }
    });
    row.append(caption, select);
    bodyList.appendChild(row);
  });
}

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  setBanner("uploading…", "info");
  try {
    const upload = await client.uploadImage(file);
    state = loadImage(state, upload);
    originalImage = await loadBitmap(client.imageUrl(upload.image_id));
    resultImage = null;
    setBanner(
      upload.bodies.length === 0
        ? "no people detected"
        : `${upload.bodies.length} ${upload.bodies.length === 1 ? "body" : "bodies"} detected`,
      "ok",
    );
  } catch (error) {
    setBanner(error instanceof ApiError ? error.message : String(error), "error");
  }
  renderBodyList();
  render();
});

submitButton.addEventListener("click", async () => {
  if (!canSubmit(state)) return;
  setBanner("submitting…", "info");
  state = { ...state, jobPhase: "submitting" };
  render();
  try {
    const jobId = await client.submit(choicesPayload(state));
    state = jobSubmitted(state, jobId);
    setBanner("processing…", "info");
    render();
    const job = await client.waitForJob(jobId);
    if (job.state === "failed") {
      state = jobFailed(state, job.error ?? "job failed");
      setBanner(state.jobError ?? "job failed", "error");
    } else {
      resultImage = await loadBitmap(client.resultUrl(jobId));
      state = jobDone(state, job.warnings);
      setBanner("done", "ok");
    }
  } catch (error) {
    const message = error instanceof ApiError ? error.message : String(error);
    state = jobFailed(state, message);
    setBanner(message, "error");
  }
  render();
});

toggleButton.addEventListener("click", () => {
  state = toggleView(state);
  render();
});

setBanner("pick a PNG to begin", "info");
render();
