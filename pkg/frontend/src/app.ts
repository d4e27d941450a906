// DOM wiring: polls the models and re-renders. Pure logic lives in the
// viewmodel/chart modules so it stays testable without a browser.

import { ObservatoryApi } from "./api.js";
import { barChart, shareChart, trendChart } from "./charts.js";
import { RuleDraft, emptyDraft, COMPARATORS, LEVELS, INDICATOR_SCOPES } from "./rules.js";
import { AlertFeedModel, DashboardModel, RuleEditorModel } from "./viewmodel.js";

const POLL_MS = 5000;

const baseUrl = new URLSearchParams(location.search).get("service")
  ?? "http://127.0.0.1:8077";
const api = new ObservatoryApi(baseUrl);
const dashboards = new DashboardModel(api);
const feed = new AlertFeedModel(api);
const editor = new RuleEditorModel(api);

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function renderDashboards(): void {
  const banner = el("stale-banner");
  if (dashboards.stale) {
    banner.hidden = false;
    banner.textContent = `service unreachable (${dashboards.lastError}); ` +
      `showing data as of seq ${dashboards.asOfSeq ?? "–"}`;
  } else {
    banner.hidden = true;
  }
  const data = dashboards.data;
  if (!data) return;
  el("chart-actors").innerHTML = barChart(data.actors);
  el("actors-total").textContent =
    `${dashboards.actorTotal} events · as_of_seq ${data.asOfSeq} · window ${windowLabel()}`;
  el("chart-share").innerHTML = shareChart(data.shares);
  el("share-meta").textContent = `as_of_seq ${data.asOfSeq} · window ${windowLabel()}`;
  el("chart-pm").innerHTML = trendChart(data.processModel.series, data.processModel.value);
  el("pm-meta").textContent = `as_of_seq ${data.asOfSeq} · window ${windowLabel()}`;
}

function windowLabel(): string {
  const { from, to } = dashboards.window;
  return !from && !to ? "all time" : `[${from ?? "…"}, ${to ?? "…"})`;
}

function renderFeed(): void {
  const list = el("alert-list");
  list.innerHTML = "";
  const visible = feed.visible;
  el("feed-meta").textContent = feed.stale ? "feed stale (service unreachable)"
    : `${visible.length} shown`;
  for (const entry of [...visible].reverse()) {
    const item = document.createElement("li");
    item.className = feed.isCritical(entry) ? "alert critical" : "alert";
    item.innerHTML =
      `<span class="level">${entry.level}</span> <span class="when">${entry.fired_at}</span> ` +
      `<span class="msg"></span> <button class="ack">ack</button>`;
    (item.querySelector(".msg") as HTMLElement).textContent = entry.message;
    (item.querySelector(".ack") as HTMLButtonElement).onclick = () => {
      feed.acknowledge(entry.journal_seq);
      renderFeed();
    };
    list.append(item);
  }
}

function renderRules(): void {
  const tbody = el("rule-rows");
  tbody.innerHTML = "";
  for (const rule of editor.rules) {
    const row = document.createElement("tr");
    const scope = "id" in rule.scope ? `${rule.scope.type}:${rule.scope.id}` : "global";
    row.innerHTML =
      `<td></td><td>${rule.indicator_id}</td><td>${scope}</td>` +
      `<td>${rule.comparator} ${rule.threshold}</td><td>${rule.level}</td>` +
      `<td><button>delete</button></td>`;
    (row.cells[0] as HTMLTableCellElement).textContent = rule.rule_id;
    (row.querySelector("button") as HTMLButtonElement).onclick = async () => {
      await editor.remove(rule.rule_id);
      renderRules();
    };
    tbody.append(row);
  }
  const problems = el("rule-problems");
  problems.textContent = [...editor.problems, editor.serverError].filter(Boolean).join("; ");
}

function draftFromForm(): RuleDraft {
  const value = (id: string) => (el<HTMLInputElement>(id)).value;
  return {
    ...emptyDraft(),
    rule_id: value("f-rule-id"),
    indicator_id: value("f-indicator"),
    comparator: value("f-comparator"),
    threshold: value("f-threshold"),
    level: value("f-level") as RuleDraft["level"],
    scopeType: value("f-scope-type") as RuleDraft["scopeType"],
    scopeId: value("f-scope-id"),
    cooldown_s: value("f-cooldown"),
    window_s: value("f-window"),
  };
}

function fillSelect(id: string, options: readonly string[]): void {
  el<HTMLSelectElement>(id).innerHTML =
    options.map((o) => `<option>${o}</option>`).join("");
}

async function refreshAll(): Promise<void> {
  await dashboards.refresh();
  await feed.poll();
  renderDashboards();
  renderFeed();
}

export async function start(): Promise<void> {
  fillSelect("f-indicator", Object.keys(INDICATOR_SCOPES));
  fillSelect("f-comparator", COMPARATORS);
  fillSelect("f-level", LEVELS);
  fillSelect("f-scope-type", ["global", "object", "actor", "task"]);

  el<HTMLFormElement>("rule-form").onsubmit = async (event) => {
    event.preventDefault();
    const ok = await editor.submit(draftFromForm());
    if (ok) el<HTMLFormElement>("rule-form").reset();
    renderRules(); // on failure the form keeps its values
  };
  el<HTMLInputElement>("w-from").onchange = el<HTMLInputElement>("w-to").onchange = () => {
    dashboards.window = {
      from: el<HTMLInputElement>("w-from").value || undefined,
      to: el<HTMLInputElement>("w-to").value || undefined,
    };
    void refreshAll();
  };
  el<HTMLSelectElement>("feed-level").onchange = () => {
    feed.levelFilter = el<HTMLSelectElement>("feed-level").value as AlertFeedModel["levelFilter"];
    renderFeed();
  };
  el<HTMLInputElement>("pm-id").onchange = () => {
    dashboards.processModelId = el<HTMLInputElement>("pm-id").value.trim();
    void refreshAll();
  };

  await editor.load().catch(() => undefined);
  renderRules();
  await refreshAll();
  setInterval(refreshAll, POLL_MS);
}

if (typeof document !== "undefined" && document.getElementById("console-root")) {
  void start();
}
