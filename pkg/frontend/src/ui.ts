/** DOM rendering for the rating session: one render function per screen,
 * driven by SessionController state changes. */

import { ApiClient } from "./api.js";
import { decodePgm, drawBitmap } from "./pgm.js";
import { Screen, SessionController } from "./session.js";

export function mount(root: HTMLElement, controller: SessionController, api: ApiClient): void {
  controller.onChange((screen) => render(root, screen, controller, api));
  render(root, controller.screen, controller, api);
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function render(root: HTMLElement, screen: Screen, controller: SessionController, api: ApiClient): void {
  root.replaceChildren();
  switch (screen.kind) {
    case "connecting":
      root.append(el("p", { class: "status" }, "Connecting to the rating service..."));
      return;
    case "unreachable": {
      root.append(el("p", { class: "status error" }, `Service unreachable: ${screen.message}`));
      const retry = el("button", { class: "primary" }, "Retry");
      retry.addEventListener("click", () => void controller.start());
      root.append(retry);
      return;
    }
    case "instructions":
      renderInstructions(root, screen, controller);
      return;
    case "rating":
      renderRating(root, screen, controller, api);
      return;
    case "completed":
      root.append(el("h1", {}, "Session complete"));
      root.append(
        el(
          "p",
          { class: "status" },
          `All ${screen.rated} of ${screen.total} stimuli rated. Thank you; you may close this window.`,
        ),
      );
      return;
  }
}

function renderInstructions(
  root: HTMLElement,
  screen: Extract<Screen, { kind: "instructions" }>,
  controller: SessionController,
): void {
  const { instructions } = screen;
  root.append(el("h1", {}, "Rating instructions"));
  root.append(
    el(
      "p",
      {},
      "Each step shows the original scan on the left and the processed " +
        "result on the right, side by side. Judge how well the marked " +
        "region matches the visible tumor.",
    ),
  );
  const list = el("ol", { class: "scale-list", reversed: "" });
  for (const level of instructions.scale) {
    list.append(el("li", { value: String(level.value) }, `${level.value} — ${level.label}`));
  }
  root.append(el("h2", {}, "Impairment scale"), list);
  root.append(el("p", {}, `Also ${instructions.percent}.`));
  root.append(
    el("p", {}, `The session holds ${instructions.total_stimuli} image pairs; each is rated once and cannot be revised.`),
  );
  const begin = el("button", { class: "primary" }, "Begin session");
  begin.addEventListener("click", () => void controller.begin());
  root.append(begin);
}

function renderRating(
  root: HTMLElement,
  screen: Extract<Screen, { kind: "rating" }>,
  controller: SessionController,
  api: ApiClient,
): void {
  const { stimulus, draft, fieldError } = screen;
  root.append(
    el("p", { class: "progress" }, `Stimulus ${stimulus.rated + 1} of ${stimulus.total}`),
  );

  const panes = el("div", { class: "panes" });
  for (const [label, url] of [
    ["Original", stimulus.reference_url],
    ["Processed", stimulus.processed_url],
  ] as const) {
    const pane = el("figure", { class: "pane" });
    const canvas = el("canvas", { class: "stimulus" });
    void api
      .imageBytes(url)
      .then((bytes) => drawBitmap(canvas, decodePgm(bytes)))
      .catch(() => pane.append(el("p", { class: "error" }, "image failed to load")));
    pane.append(canvas, el("figcaption", {}, label));
    panes.append(pane);
  }
  root.append(panes);

  const form = el("div", { class: "controls" });
  const scaleGroup = el("fieldset", { class: "scale-group" });
  scaleGroup.append(el("legend", {}, "Impairment scale"));
  for (let value = 5; value >= 1; value -= 1) {
    const id = `scale-${value}`;
    const label = el("label", { for: id });
    const radio = el("input", { type: "radio", name: "scale", id, value: String(value) });
    if (draft.scale === value) radio.setAttribute("checked", "");
    radio.addEventListener("change", () => controller.setScale(value));
    label.append(radio, document.createTextNode(` ${value}`));
    scaleGroup.append(label);
  }
  form.append(scaleGroup);

  const percentGroup = el("fieldset", { class: "percent-group" });
  percentGroup.append(el("legend", {}, "Accuracy out of 100%"));
  const slider = el("input", {
    type: "range", min: "0", max: "100", step: "1",
    value: draft.percent === null ? "50" : String(draft.percent),
  });
  const number = el("input", {
    type: "number", min: "0", max: "100", step: "1",
    value: draft.percent === null ? "" : String(draft.percent),
  });
  const setPercent = (raw: string) => {
    const value = Number(raw);
    if (Number.isInteger(value) && value >= 0 && value <= 100) {
      controller.setPercent(value);
    }
  };
  slider.addEventListener("input", () => setPercent(slider.value));
  number.addEventListener("input", () => setPercent(number.value));
  percentGroup.append(slider, number);
  form.append(percentGroup);

  const submit = el("button", { class: "primary" }, "Submit rating");
  if (!controller.canSubmit) submit.setAttribute("disabled", "");
  submit.addEventListener("click", () => void controller.submit());
  form.append(submit);
  if (fieldError) form.append(el("p", { class: "error" }, fieldError));
  root.append(form);
}
