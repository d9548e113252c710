/** Pure state logic for one choice panel. No DOM access here. */

import type {
  AnonymizationOption,
  AnonymizeRequest,
  BodySummary,
  UploadResponse,
} from "./api";
import { NO_ACTION, isOption } from "./api";

export type JobPhase = "idle" | "submitting" | "polling" | "done" | "failed";

export interface PanelState {
  imageId: string | null;
  bodies: BodySummary[];
  /** Exactly one option per detected body, keyed by body_id. */
  choices: ReadonlyMap<string, AnonymizationOption>;
  seed: number;
  jobId: string | null;
  jobPhase: JobPhase;
  jobError: string | null;
  warnings: string[];
  /** Before/after toggle; true shows the result image. */
  showResult: boolean;
}

export function createPanel(seed = 0): PanelState {
  return {
    imageId: null,
    bodies: [],
    choices: new Map(),
    seed,
    jobId: null,
    jobPhase: "idle",
    jobError: null,
    warnings: [],
    showResult: false,
  };
}

/** Installs an upload result; every body starts at no_action. */
export function loadImage(state: PanelState, upload: UploadResponse): PanelState {
  const choices = new Map<string, AnonymizationOption>();
  for (const body of upload.bodies) choices.set(body.body_id, NO_ACTION);
  return {
    ...createPanel(state.seed),
    imageId: upload.image_id,
    bodies: upload.bodies,
    choices,
  };
}

export function setChoice(
  state: PanelState,
  bodyId: string,
  option: AnonymizationOption,
): PanelState {
  if (!state.choices.has(bodyId)) {
    throw new Error(`unknown body_id ${bodyId}`);
  }
  if (!isOption(option)) {
    throw new Error(`unknown option ${String(option)}`);
  }
  const choices = new Map(state.choices);
  choices.set(bodyId, option);
  return { ...state, choices };
}

export function optionFor(state: PanelState, bodyId: string): AnonymizationOption {
  const option = state.choices.get(bodyId);
  if (option === undefined) throw new Error(`unknown body_id ${bodyId}`);
  return option;
}

export function setSeed(state: PanelState, seed: number): PanelState {
  if (!Number.isInteger(seed) || seed < 0) {
    throw new Error(`seed must be a non-negative integer, got ${seed}`);
  }
  return { ...state, seed };
}

export function canSubmit(state: PanelState): boolean {
  return (
    state.imageId !== null &&
    state.bodies.length > 0 &&
    state.jobPhase !== "submitting" &&
    state.jobPhase !== "polling"
  );
}

/** The exact wire payload the gateway accepts. */
export function choicesPayload(state: PanelState): AnonymizeRequest {
  if (state.imageId === null) throw new Error("no image loaded");
  return {
    image_id: state.imageId,
    seed: state.seed,
    choices: state.bodies.map((body) => ({
      body_id: body.body_id,
      option: optionFor(state, body.body_id),
    })),
  };
}

export function jobSubmitted(state: PanelState, jobId: string): PanelState {
  return {
    ...state,
    jobId,
    jobPhase: "polling",
    jobError: null,
    warnings: [],
    showResult: false,
  };
}

export function jobDone(state: PanelState, warnings: string[]): PanelState {
  return { ...state, jobPhase: "done", warnings, showResult: true };
}

export function jobFailed(state: PanelState, error: string): PanelState {
  return { ...state, jobPhase: "failed", jobError: error, showResult: false };
}

export function toggleView(state: PanelState): PanelState {
  if (state.jobPhase !== "done") return state;
  return { ...state, showResult: !state.showResult };
}
