/** Application shell: gateway picker plus the two work surfaces. */

import { GatewayClient } from "./api.js";
import { el, knowledgePanel } from "./forms.js";
import { createWizard } from "./wizard.js";

const DEFAULT_GATEWAY = "http://127.0.0.1:8000";
const STORAGE_KEY = "workshop-ui.gateway";

function mountApp(root: HTMLElement): void {
  const stored = localStorage.getItem(STORAGE_KEY) ?? DEFAULT_GATEWAY;
  const urlInput = el("input", { type: "text", id: "gateway-url",
    value: stored });
  const healthBadge = el("span", { class: "health-badge" }, "checking…");
  const knowledgeTab = el("button", { type: "button",
    class: "tab active", "data-tab": "knowledge" }, "Knowledge");
  const diagnosisTab = el("button", { type: "button",
    class: "tab", "data-tab": "diagnosis" }, "Diagnosis");
  const surface = el("main", { class: "surface" });

  let client = new GatewayClient(stored);

  const checkHealth = async () => {
    try {
      const health = await client.health();
      healthBadge.textContent =
        `gateway ok (revision ${health.revision})`;
      healthBadge.className = "health-badge ok";
    } catch {
      healthBadge.textContent = "gateway unreachable";
      healthBadge.className = "health-badge down";
    }
  };

  const showTab = (name: string) => {
    knowledgeTab.classList.toggle("active", name === "knowledge");
    diagnosisTab.classList.toggle("active", name === "diagnosis");
    surface.replaceChildren();
    if (name === "knowledge") {
      surface.append(knowledgePanel(client));
    } else {
      const mount = el("div", { class: "wizard" });
      surface.append(mount);
      createWizard(mount, client);
    }
  };

  urlInput.addEventListener("change", () => {
    client = new GatewayClient(urlInput.value.trim());
    localStorage.setItem(STORAGE_KEY, client.baseUrl);
    void checkHealth();
    showTab(knowledgeTab.classList.contains("active")
      ? "knowledge" : "diagnosis");
  });
  knowledgeTab.addEventListener("click", () => showTab("knowledge"));
  diagnosisTab.addEventListener("click", () => showTab("diagnosis"));

  root.replaceChildren(
    el("header", { class: "topbar" },
      el("h1", {}, "Workshop"),
      el("div", { class: "gateway-picker" },
        el("label", { for: "gateway-url" }, "Gateway"),
        urlInput, healthBadge),
      el("nav", {}, knowledgeTab, diagnosisTab)),
    surface);
  showTab("knowledge");
  void checkHealth();
}

const root = document.getElementById("app");
if (root !== null) {
  mountApp(root);
}

export { mountApp };
