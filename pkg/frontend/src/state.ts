/**
 * Session state machine for the annotation screen.
 *
 * Keeps all interaction rules out of the DOM layer: slider clamping and
 * touch-tracking, mark-mode gating with undo, category toggling, the
 * submit/acknowledge/auto-advance cycle, and media error handling. Failed
 * submissions stay queued and the local draft is only cleared once the
 * service acknowledges with a sequence number.
 */

import { AnnotationApi, ApiError, ItemDescriptor, SubmitAck, SubmitPayload } from "./api.js";
import { clientToIntrinsic, DisplayGeometry, Point } from "./coords.js";
import { SubmissionQueue } from "./queue.js";

/** Checkbox taxonomy, in the fixed presentation order. */
export const CATEGORY_CHOICES = [
  "Eye Distortions",
  "Mouth Distortions",
  "Hair Distortions",
  "Facial Feature Distortions",
  "Head Structure Distortions",
  "Overlap or Blending Issues",
  "Blurring / Exposure / Grain",
  "Accessories or Cloth Distortions",
  "No Distortion",
] as const;

export const SLIDER_MIN = 0;
export const SLIDER_MAX = 5;
export const SLIDER_DEFAULT = 2.5;

export type SubmissionStatus = "idle" | "pending" | "acknowledged" | "rejected";

export interface UiState {
  item: ItemDescriptor | null;
  quality: number;
  authenticity: number;
  qualityTouched: boolean;
  authenticityTouched: boolean;
  markMode: boolean;
  marks: Point[];
  description: string;
  categories: string[];
  status: SubmissionStatus;
  lastSeq: number | null;
  mediaError: string | null;
  statusMessage: string;
}

function freshDraft(): Pick<
  UiState,
  | "quality" | "authenticity" | "qualityTouched" | "authenticityTouched"
  | "markMode" | "marks" | "description" | "categories" | "status"
> {
  return {
    quality: SLIDER_DEFAULT,
    authenticity: SLIDER_DEFAULT,
    qualityTouched: false,
    authenticityTouched: false,
    markMode: false,
    marks: [],
    description: "",
    categories: [],
    status: "idle",
  };
}

export class SessionController {
  readonly state: UiState = {
    item: null,
    lastSeq: null,
    mediaError: null,
    statusMessage: "",
    ...freshDraft(),
  };

  constructor(
    private readonly api: AnnotationApi,
    private readonly queue: SubmissionQueue = new SubmissionQueue({
      isFatal: (error) => error instanceof ApiError && error.status < 500,
    }),
    private readonly listener: (state: UiState) => void = () => undefined,
  ) {}

  private notify(): void {
    this.listener(this.state);
  }

  private showItem(descriptor: ItemDescriptor): void {
    this.state.item = descriptor;
    this.state.mediaError = null;
    Object.assign(this.state, freshDraft());
    this.notify();
  }

  async start(subjectId: string, seed = 0): Promise<ItemDescriptor> {
    const descriptor = await this.api.createSession(subjectId, seed);
    this.showItem(descriptor);
    return descriptor;
  }

  get sessionId(): string {
    const item = this.state.item;
    if (!item) throw new Error("no active session");
    return item.session_id;
  }

  get complete(): boolean {
    return this.state.item?.state === "complete";
  }

  // -- sliders ---------------------------------------------------------------

  setQuality(value: number): void {
    this.state.quality = Math.min(SLIDER_MAX, Math.max(SLIDER_MIN, value));
    this.state.qualityTouched = true;
    this.notify();
  }

  setAuthenticity(value: number): void {
    this.state.authenticity = Math.min(SLIDER_MAX, Math.max(SLIDER_MIN, value));
    this.state.authenticityTouched = true;
    this.notify();
  }

  // -- marks -------------------------------------------------------------------

  setMarkMode(on: boolean): void {
    this.state.markMode = on;
    this.notify();
  }

  /** Record a click while mark mode is on; off-image or gated clicks are ignored. */
  captureMark(clientX: number, clientY: number, geometry: DisplayGeometry): Point | null {
    if (!this.state.markMode) return null;
    const point = clientToIntrinsic(clientX, clientY, geometry);
    if (point === null) return null;
    this.state.marks = [...this.state.marks, point];
    this.notify();
    return point;
  }

  undoMark(): void {
    this.state.marks = this.state.marks.slice(0, -1);
    this.notify();
  }

  // -- categories / description ------------------------------------------------

  toggleCategory(name: string): void {
    const current = new Set(this.state.categories);
    if (current.has(name)) {
      current.delete(name);
    } else {
      // "No Distortion" excludes everything else, both ways
      if (name === "No Distortion") current.clear();
      else current.delete("No Distortion");
      current.add(name);
    }
    this.state.categories = CATEGORY_CHOICES.filter((c) => current.has(c));
    this.notify();
  }

  setDescription(text: string): void {
    this.state.description = text;
    this.notify();
  }

  // -- media -------------------------------------------------------------------

  reportMediaError(message: string): void {
    // navigation stays usable; only the viewer shows the banner
    this.state.mediaError = message;
    this.notify();
  }

  // -- navigation ----------------------------------------------------------------

  async advance(): Promise<ItemDescriptor> {
    const descriptor = await this.api.advance(this.sessionId);
    this.showItem(descriptor);
    return descriptor;
  }

  async retreat(): Promise<ItemDescriptor> {
    const descriptor = await this.api.retreat(this.sessionId);
    this.showItem(descriptor);
    return descriptor;
  }

  // -- submission ----------------------------------------------------------------

  /**
   * Submit the current draft; resolves with the service acknowledgement.
   *
   * Requires both sliders touched unless `confirmDefaults` explicitly accepts
   * the midpoint values. On acknowledgement the draft clears and the session
   * auto-advances. Network failures keep the draft and retry via the queue.
   */
  async submit(options: { confirmDefaults?: boolean; autoAdvance?: boolean } = {}):
      Promise<SubmitAck> {
    const item = this.state.item;
    if (!item) throw new Error("no active session");
    if (!(this.state.qualityTouched && this.state.authenticityTouched)
        && !options.confirmDefaults) {
      throw new Error("both sliders must be touched (or defaults confirmed)");
    }
    const payload: SubmitPayload = {
      item_id: item.item_id,
      quality: this.state.quality,
      authenticity: this.state.authenticity,
    };
    if (this.state.marks.length > 0 || this.state.markMode) {
      payload.marks = this.state.marks.map((p) => [p.x, p.y]);
    }
    if (this.state.categories.length > 0) {
      payload.categories = [...this.state.categories];
    }
    if (this.state.description.trim() !== "") {
      payload.description = this.state.description;
    }
    this.state.status = "pending";
    this.notify();
    try {
      const ack = await this.queue.enqueue(() => this.api.submit(item.session_id, payload));
      if (typeof ack.seq !== "number") {
        throw new Error("service acknowledgement carried no sequence number");
      }
      this.state.lastSeq = ack.seq;
      this.state.status = "acknowledged";
      this.state.statusMessage = `saved #${ack.seq}`;
      this.notify();
      if (options.autoAdvance !== false) {
        await this.advance();
      }
      return ack;
    } catch (error) {
      this.state.status = "rejected";
      this.state.statusMessage = error instanceof Error ? error.message : String(error);
      this.notify();
      throw error;
    }
  }

  /** Resume queued submissions (wired to the browser "online" event). */
  flushQueue(): Promise<void> {
    return this.queue.flush();
  }

  get pendingSubmissions(): number {
    return this.queue.pending;
  }
}
