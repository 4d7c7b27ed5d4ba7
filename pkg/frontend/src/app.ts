/**
 * DOM wiring for the annotation screen.
 *
 * Layout: video pane with Previous / Replay / Next, the three-snapshot
 * composite with a red-dot overlay, two 0-5 sliders, the MARK toggle with
 * Undo, the category checkboxes, a description box, and Submit. All rules
 * live in SessionController; this file only renders state and forwards
 * events.
 */

import { AnnotationApi } from "./api.js";
import { DisplayGeometry, intrinsicToClient } from "./coords.js";
import { CATEGORY_CHOICES, SessionController, SLIDER_DEFAULT, UiState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (HTMLElement | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  for (const child of children) node.append(child);
  return node;
}

function geometryOf(image: HTMLImageElement): DisplayGeometry {
  const rect = image.getBoundingClientRect();
  return {
    left: rect.left,
    top: rect.top,
    width: rect.width,
    height: rect.height,
    naturalWidth: image.naturalWidth || rect.width,
    naturalHeight: image.naturalHeight || rect.height,
  };
}

export function mountApp(root: HTMLElement, baseUrl = ""): SessionController {
  const api = new AnnotationApi(baseUrl);

  const video = el("video", { controls: "", class: "viewer-video" });
  const previousBtn = el("button", {}, "Previous");
  const replayBtn = el("button", {}, "Replay");
  const nextBtn = el("button", {}, "Next");
  const mediaBanner = el("div", { class: "banner hidden" });
  const progress = el("span", { class: "progress" });

  const snapshot = el("img", { class: "snapshot", alt: "three-view composite" });
  const overlay = el("div", { class: "overlay" });
  const snapshotWrap = el("div", { class: "snapshot-wrap" }, snapshot, overlay);

  const qualitySlider = el("input", {
    type: "range", min: "0", max: "5", step: "0.1", value: String(SLIDER_DEFAULT),
  });
  const qualityValue = el("span", {}, SLIDER_DEFAULT.toFixed(1));
  const authenticitySlider = el("input", {
    type: "range", min: "0", max: "5", step: "0.1", value: String(SLIDER_DEFAULT),
  });
  const authenticityValue = el("span", {}, SLIDER_DEFAULT.toFixed(1));

  const markBtn = el("button", {}, "MARK");
  const undoBtn = el("button", {}, "Undo dot");
  const description = el("textarea", {
    rows: "3", placeholder: "Describe the distortions you marked…",
  });
  const submitBtn = el("button", { class: "submit" }, "Submit");
  const statusLine = el("div", { class: "status" });

  const categoryBoxes = new Map<string, HTMLInputElement>();
  const categoryList = el("fieldset", {}, el("legend", {}, "Distortion categories"));
  for (const name of CATEGORY_CHOICES) {
    const box = el("input", { type: "checkbox" });
    categoryBoxes.set(name, box);
    categoryList.append(el("label", { class: "category" }, box, name));
  }

  const controller = new SessionController(api, undefined, (state) => render(state));

  function render(state: UiState): void {
    const item = state.item;
    if (item) {
      progress.textContent = `${item.index + 1} / ${item.total}`
        + (item.state === "complete" ? " — session complete, thank you" : "");
      if (video.getAttribute("src") !== item.video_url) {
        video.setAttribute("src", item.video_url);
      }
      if (snapshot.getAttribute("src") !== item.snapshot_url) {
        snapshot.setAttribute("src", item.snapshot_url);
      }
    }
    qualitySlider.value = String(state.quality);
    qualityValue.textContent = state.quality.toFixed(1);
    authenticitySlider.value = String(state.authenticity);
    authenticityValue.textContent = state.authenticity.toFixed(1);
    markBtn.classList.toggle("active", state.markMode);
    description.value = state.description;
    for (const [name, box] of categoryBoxes) {
      box.checked = state.categories.includes(name);
    }
    mediaBanner.classList.toggle("hidden", state.mediaError === null);
    mediaBanner.textContent = state.mediaError ?? "";
    statusLine.textContent = state.statusMessage
      + (controller.pendingSubmissions > 0
        ? ` (${controller.pendingSubmissions} submission(s) waiting for network)` : "");
    renderDots(state);
    const done = item?.state === "complete";
    for (const button of [replayBtn, nextBtn, previousBtn, markBtn, undoBtn, submitBtn]) {
      button.toggleAttribute("disabled", done);
    }
  }

  function renderDots(state: UiState): void {
    overlay.replaceChildren();
    const geom = geometryOf(snapshot);
    const wrapRect = snapshotWrap.getBoundingClientRect();
    for (const mark of state.marks) {
      const css = intrinsicToClient(mark, geom);
      const dot = el("div", { class: "dot" });
      dot.style.left = `${css.x - wrapRect.left}px`;
      dot.style.top = `${css.y - wrapRect.top}px`;
      overlay.append(dot);
    }
  }

  previousBtn.addEventListener("click", () => void controller.retreat().catch(showError));
  nextBtn.addEventListener("click", () => void controller.advance().catch(showError));
  replayBtn.addEventListener("click", () => {
    video.currentTime = 0;
    void video.play().catch(() => undefined);
  });
  video.addEventListener("error", () =>
    controller.reportMediaError("video failed to load; you can still navigate"));
  snapshot.addEventListener("error", () =>
    controller.reportMediaError("snapshot failed to load; you can still navigate"));
  snapshot.addEventListener("click", (event) =>
    controller.captureMark(event.clientX, event.clientY, geometryOf(snapshot)));
  qualitySlider.addEventListener("input", () =>
    controller.setQuality(Number(qualitySlider.value)));
  authenticitySlider.addEventListener("input", () =>
    controller.setAuthenticity(Number(authenticitySlider.value)));
  markBtn.addEventListener("click", () => controller.setMarkMode(!controller.state.markMode));
  undoBtn.addEventListener("click", () => controller.undoMark());
  description.addEventListener("input", () => controller.setDescription(description.value));
  for (const [name, box] of categoryBoxes) {
    box.addEventListener("change", () => controller.toggleCategory(name));
  }
  submitBtn.addEventListener("click", () => void controller.submit().catch(showError));
  window.addEventListener("online", () => void controller.flushQueue());

  function showError(error: unknown): void {
    statusLine.textContent = error instanceof Error ? error.message : String(error);
  }

  root.append(
    el("section", { class: "viewer" },
      video,
      mediaBanner,
      el("div", { class: "nav" }, previousBtn, replayBtn, nextBtn, progress)),
    el("section", { class: "composite" }, snapshotWrap,
      el("div", { class: "mark-tools" }, markBtn, undoBtn)),
    el("section", { class: "scores" },
      el("label", {}, "Quality ", qualitySlider, qualityValue),
      el("label", {}, "Authenticity ", authenticitySlider, authenticityValue)),
    el("section", { class: "labels" }, categoryList, description),
    el("section", { class: "actions" }, submitBtn, statusLine),
  );

  const params = new URLSearchParams(window.location.search);
  const subject = params.get("subject") ?? `anon-${Math.floor(Math.random() * 1e6)}`;
  const seed = Number(params.get("seed") ?? "0");
  void controller.start(subject, seed).catch(showError);
  return controller;
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  mountApp(document.getElementById("app") as HTMLElement);
}
