/** Bounding-box overlay rendering against a minimal 2D-context surface. */

import type { AnonymizationOption, BodySummary } from "./api";

/** The slice of CanvasRenderingContext2D the overlay needs; tests fake it. */
export interface OverlayContext {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export const OPTION_COLORS: Record<AnonymizationOption, string> = {
  physical_removal: "#d62728",
  adversarial_removal: "#9467bd",
  mask_based_removal: "#1f77b4",
  identity_removal: "#ff7f0e",
  no_action: "#2ca02c",
};

export interface OverlaySpec {
  body: BodySummary;
  option: AnonymizationOption;
  color: string;
  label: string;
}

/** One labeled spec per body: index, chosen option, detector confidence. */
export function overlaySpecs(
  bodies: BodySummary[],
  choices: ReadonlyMap<string, AnonymizationOption>,
): OverlaySpec[] {
  return bodies.map((body, index) => {
    const option = choices.get(body.body_id);
    if (option === undefined) {
      throw new Error(`no option selected for body ${body.body_id}`);
    }
    const percent = Math.round(body.confidence * 100);
    return {
      body,
      option,
      color: OPTION_COLORS[option],
      label: `#${index + 1} ${option} (${percent}%)`,
    };
  });
}

const LABEL_HEIGHT = 14;

export function drawOverlays(
  ctx: OverlayContext,
  specs: OverlaySpec[],
  scaleX = 1,
  scaleY = 1,
): void {
  for (const spec of specs) {
    const [x, y, w, h] = spec.body.bbox;
    const sx = x * scaleX;
    const sy = y * scaleY;
    const sw = w * scaleX;
    const sh = h * scaleY;
    ctx.lineWidth = 2;
    ctx.strokeStyle = spec.color;
    ctx.strokeRect(sx, sy, sw, sh);
    ctx.fillStyle = spec.color;
    const labelY = sy >= LABEL_HEIGHT ? sy - LABEL_HEIGHT : sy + sh;
    ctx.fillRect(sx, labelY, Math.max(sw, 8 * spec.label.length * 0.6), LABEL_HEIGHT);
    ctx.fillStyle = "#ffffff";
    ctx.font = "11px system-ui, sans-serif";
    ctx.fillText(spec.label, sx + 3, labelY + LABEL_HEIGHT - 3);
  }
}
