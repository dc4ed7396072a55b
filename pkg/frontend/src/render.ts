import { escapeHtml, formatAttribution, formatDays, formatProbability, rawTooltip } from "./format.js";
import type { ModelMeta, WhatifElement } from "./types.js";
import type { ScenarioState } from "./state.js";

/**
 * Rendering is split in two layers: a plain form/panel model (testable
 * without a DOM) and HTML-string emitters the browser shell injects.
 */

export interface FormField {
  name: string;
  label: string;   // name plus unit when the schema has one
  unit: string;
  kind: string;
}

export function formModel(meta: ModelMeta): FormField[] {
  return meta.features.map((f) => ({
    name: f.name,
    label: f.unit ? `${f.name} (${f.unit})` : f.name,
    unit: f.unit,
    kind: f.kind,
  }));
}

export function renderForm(fields: FormField[]): string {
  const rows = fields.map((field) => `
    <label class="field">
      <span class="field-name">${escapeHtml(field.label)}</span>
      <input type="text" inputmode="decimal" data-feature="${escapeHtml(field.name)}"
             placeholder="missing" autocomplete="off">
    </label>`);
  return `<form id="exam-form" autocomplete="off">${rows.join("")}</form>`;
}

function gauge(probability: number): string {
  const percent = Math.max(0, Math.min(100, probability * 100));
  return `
    <div class="gauge" title="${rawTooltip(probability)}">
      <div class="gauge-fill" style="width:${percent.toFixed(1)}%"></div>
      <span class="gauge-text">${formatProbability(probability)}</span>
    </div>`;
}

function attributionBars(element: WhatifElement): string {
  const rows = (element.attributions ?? []).map((a) => {
    const width = Math.min(100, Math.abs(a.value) * 120).toFixed(1);
    const side = a.value >= 0 ? "pos" : "neg";
    return `
      <div class="attr-row">
        <span class="attr-name">${escapeHtml(a.feature)}</span>
        <span class="attr-bar ${side}" style="width:${width}px"></span>
        <span class="attr-value" title="${rawTooltip(a.value)}">${formatAttribution(a.value)}</span>
      </div>`;
  });
  return `<div class="attributions">
    ${rows.join("")}
    <div class="attr-caveat">associational, not causal</div>
  </div>`;
}

export function renderPanel(title: string, element: WhatifElement): string {
  if (element.error) {
    return `<section class="panel panel-error">
      <h3>${escapeHtml(title)}</h3>
      <p class="error">${escapeHtml(element.error)}</p>
    </section>`;
  }
  const parts: string[] = [`<h3>${escapeHtml(title)}</h3>`];
  if (element.probability !== undefined) {
    parts.push(`<div class="metric"><span>special-care risk</span>${gauge(element.probability)}</div>`);
    if (element.threshold_flag !== undefined && element.threshold_flag !== null) {
      const flag = element.threshold_flag
        ? `<span class="flag flag-on">above operating threshold</span>`
        : `<span class="flag flag-off">below operating threshold</span>`;
      parts.push(`<div class="metric">${flag}</div>`);
    }
  }
  if (element.expected_days !== undefined) {
    const clamp = element.days_clamped
      ? ` <span class="flag flag-clamp" title="raw prediction ${rawTooltip(element.days_raw ?? 0)}">clamped at 0</span>`
      : "";
    parts.push(`<div class="metric"><span>expected days</span>
      <strong title="${rawTooltip(element.expected_days)}">${formatDays(element.expected_days)}</strong>${clamp}</div>`);
  }
  if (element.attributions && element.attributions.length) {
    parts.push(attributionBars(element));
  }
  return `<section class="panel">${parts.join("")}</section>`;
}

/** Side-by-side comparison: base first, then each variant in order. */
export function renderPanels(state: ScenarioState): string {
  if (!state.responses) {
    return `<p class="hint">enter lab values and run a scenario</p>`;
  }
  const titles = ["base", ...state.variants.map((v) => v.name)];
  const panels = state.responses.map((element, i) =>
    renderPanel(titles[i] ?? `variant ${i}`, element));
  return `<div class="panels">${panels.join("")}</div>`;
}
