import { describe, expect, it } from "vitest";

import { formModel, renderForm, renderPanel, renderPanels } from "../src/render.js";
import { emptyScenario, setBase, addVariant, withResponses } from "../src/state.js";
import type { ModelMeta, WhatifElement } from "../src/types.js";

const meta: ModelMeta = {
  format_version: 1,
  tasks: ["special_care", "days"],
  features: [
    { name: "Age", unit: "years", kind: "continuous" },
    { name: "CRP", unit: "mg/L", kind: "continuous" },
    { name: "Sex", unit: "", kind: "binary" },
  ],
};

const response: WhatifElement = {
  probability: 0.7312498734,
  probability_raw: 0.69,
  margin: 1.2,
  calibrated: true,
  best_threshold: 0.31,
  threshold_flag: true,
  expected_days: 0,
  days_raw: -0.34,
  days_clamped: true,
  attributions: [
    { feature: "CRP", value: 0.8123 },
    { feature: "Age", value: -0.25 },
  ],
};

describe("form rendering", () => {
  it("renders exactly one input per meta feature", () => {
    const html = renderForm(formModel(meta));
    const inputs = html.match(/<input /g) ?? [];
    expect(inputs).toHaveLength(meta.features.length);
  });

  it("labels carry the unit text", () => {
    const fields = formModel(meta);
    expect(fields[0]?.label).toBe("Age (years)");
    expect(fields[2]?.label).toBe("Sex");
    expect(renderForm(fields)).toContain("Age (years)");
  });

  it("escapes hostile feature names", () => {
    const hostile: ModelMeta = {
      ...meta,
      features: [{ name: "<script>", unit: "", kind: "continuous" }],
    };
    const html = renderForm(formModel(hostile));
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("panel rendering", () => {
  it("shows served numbers with the raw value in the tooltip", () => {
    const html = renderPanel("base", response);
    // displayed text is a formatting of the exact field; tooltip is verbatim
    expect(html).toContain(`title="${String(response.probability)}"`);
    expect(html).toContain("73.1%");
    expect(html).toContain(`title="${String(response.expected_days)}"`);
  });

  it("surfaces threshold and clamp flags verbatim", () => {
    const html = renderPanel("base", response);
    expect(html).toContain("above operating threshold");
    expect(html).toContain("clamped at 0");
    expect(html).toContain(`raw prediction ${String(response.days_raw)}`);
    const below = renderPanel("x", { ...response, threshold_flag: false,
                                     days_clamped: false });
    expect(below).toContain("below operating threshold");
    expect(below).not.toContain("clamped at 0");
  });

  it("renders the top attributions with the causal caveat", () => {
    const html = renderPanel("base", response);
    expect(html).toContain("CRP");
    expect(html).toContain("+0.8123");
    expect(html).toContain("-0.2500");
    expect(html).toContain("associational, not causal");
  });

  it("renders per-variant errors inline without dropping other panels", () => {
    let state = setBase(emptyScenario(), { Age: 60 });
    state = addVariant(state, { name: "bad", overrides: { Age: 1 } });
    state = withResponses(state, [response, { error: "unknown feature 'Bogus'" }]);
    const html = renderPanels(state);
    expect(html).toContain("73.1%");
    expect(html).toContain("unknown feature 'Bogus'");
    expect(html).toContain("panel-error");
  });

  it("panels appear side by side in base-then-variant order", () => {
    let state = setBase(emptyScenario(), { Age: 60 });
    state = addVariant(state, { name: "older", overrides: { Age: 85 } });
    state = withResponses(state, [response, { ...response, probability: 0.912 }]);
    const html = renderPanels(state);
    expect(html.indexOf("base")).toBeGreaterThan(-1);
    expect(html.indexOf("base")).toBeLessThan(html.indexOf("older"));
    expect((html.match(/<section class="panel"/g) ?? [])).toHaveLength(2);
  });
});

describe("state diff on re-run", () => {
  it("changing one variant leaves the other panels' markup unchanged", () => {
    let state = setBase(emptyScenario(), { Age: 60 });
    state = addVariant(state, { name: "a", overrides: { Age: 70 } });
    state = addVariant(state, { name: "b", overrides: { Age: 80 } });
    const responses: WhatifElement[] = [
      response,
      { ...response, probability: 0.5 },
      { ...response, probability: 0.6 },
    ];
    const before = renderPanels(withResponses(state, responses));

    // re-run after editing only variant "b": its response changes, others not
    const after = renderPanels(withResponses(state, [
      responses[0]!, responses[1]!, { ...response, probability: 0.95 },
    ]));
    const panelsBefore = before.split("<section");
    const panelsAfter = after.split("<section");
    expect(panelsAfter[1]).toBe(panelsBefore[1]); // base unchanged
    expect(panelsAfter[2]).toBe(panelsBefore[2]); // variant a unchanged
    expect(panelsAfter[3]).not.toBe(panelsBefore[3]); // variant b updated
  });
});
