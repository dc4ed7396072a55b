import { ServiceClient, fetchTransport } from "./api.js";
import { validateEntries } from "./schema.js";
import {
  ScenarioState, addVariant, buildWhatifRequest, emptyScenario, exportScenario,
  importScenario, removeVariant, setBase, withResponses,
} from "./state.js";
import { formModel, renderForm, renderPanels } from "./render.js";
import type { ModelMeta } from "./types.js";

/** Browser shell: wires the form, variant list and panels to the service. */

const serviceUrl =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8000";
const client = new ServiceClient(fetchTransport(serviceUrl));

let meta: ModelMeta | null = null;
let scenario: ScenarioState = emptyScenario();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function readInputs(): Record<string, string> {
  const raw: Record<string, string> = {};
  document.querySelectorAll<HTMLInputElement>("#exam-form input[data-feature]")
    .forEach((input) => {
      raw[input.dataset.feature as string] = input.value;
    });
  return raw;
}

function showErrors(messages: string[]): void {
  el("errors").innerHTML = messages
    .map((m) => `<li>${m.replace(/</g, "&lt;")}</li>`)
    .join("");
}

function redrawVariants(): void {
  el("variants").innerHTML = scenario.variants
    .map((v, i) => `<li>${v.name.replace(/</g, "&lt;")}
      (${Object.keys(v.overrides).length} overrides)
      <button data-remove="${i}">remove</button></li>`)
    .join("");
  document.querySelectorAll<HTMLButtonElement>("#variants button[data-remove]")
    .forEach((button) => {
      button.onclick = () => {
        scenario = removeVariant(scenario, Number(button.dataset.remove));
        redrawVariants();
      };
    });
}

function redrawPanels(): void {
  el("results").innerHTML = renderPanels(scenario);
}

async function run(): Promise<void> {
  if (!meta) return;
  const { values, errors } = validateEntries(meta, readInputs());
  if (errors.length) {
    showErrors(errors.map((e) => `${e.field}: ${e.message}`));
    return;
  }
  showErrors([]);
  scenario = setBase(scenario, values);
  try {
    const responses = await client.whatif(buildWhatifRequest(scenario));
    scenario = withResponses(scenario, responses);
    redrawPanels();
  } catch (error) {
    const message = error instanceof Error ? error.message : String(error);
    if (!message.includes("superseded")) {
      showErrors([message]);
    }
  }
}

function addVariantFromInputs(): void {
  if (!meta) return;
  const { values, errors } = validateEntries(meta, readInputs());
  if (errors.length) {
    showErrors(errors.map((e) => `${e.field}: ${e.message}`));
    return;
  }
  const name = window.prompt("variant name", `variant ${scenario.variants.length + 1}`);
  if (name === null) return;
  try {
    // a variant overrides exactly the currently entered fields; fields the
    // base also sets but with other values are replaced, blank stays base
    scenario = addVariant(scenario, { name, overrides: { ...values } });
  } catch (error) {
    showErrors([String(error)]);
    return;
  }
  redrawVariants();
}

function download(name: string, text: string): void {
  const blob = new Blob([text], { type: "application/json" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = name;
  link.click();
  URL.revokeObjectURL(link.href);
}

async function boot(): Promise<void> {
  const banner = el("banner");
  try {
    meta = await client.meta();
  } catch {
    banner.textContent =
      `service unreachable at ${serviceUrl}; start it and press retry`;
    banner.className = "banner banner-error";
    el<HTMLButtonElement>("retry").hidden = false;
    el<HTMLButtonElement>("run").disabled = true;
    return;
  }
  banner.textContent = `connected: ${meta.features.length} exam features, ` +
    `calibration ${meta.calibration ?? "none"}`;
  banner.className = "banner banner-ok";
  el<HTMLButtonElement>("retry").hidden = true;
  el<HTMLButtonElement>("run").disabled = false;
  el("form-slot").innerHTML = renderForm(formModel(meta));
  redrawVariants();
  redrawPanels();
}

el<HTMLButtonElement>("run").onclick = () => void run();
el<HTMLButtonElement>("add-variant").onclick = addVariantFromInputs;
el<HTMLButtonElement>("retry").onclick = () => void boot();
el<HTMLButtonElement>("export").onclick = () =>
  download("scenario.json", exportScenario(scenario));
el<HTMLInputElement>("import").onchange = async (event) => {
  const input = event.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  try {
    scenario = importScenario(await file.text());
    redrawVariants();
    redrawPanels();
    showErrors([]);
  } catch (error) {
    showErrors([String(error)]);
  }
  input.value = "";
};

void boot();
