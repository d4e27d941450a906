// Drives the console's modules against the real observation service:
// boots `plmobs serve` on a scratch store, loads the mini fixture, and checks
// the three dashboards, the rule editor round-trip, and the alert feed.

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ObservatoryApi } from "../src/api.js";
import { barChart, shareChart, trendChart } from "../src/charts.js";
import { emptyDraft } from "../src/rules.js";
import { AlertFeedModel, DashboardModel, RuleEditorModel } from "../src/viewmodel.js";

const REPO_ROOT = resolve(__dirname, "..", "..");
const PORT = 8300 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
const api = new ObservatoryApi(BASE);

async function waitForHealth(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt++) {
    try {
      await api.health();
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 150));
    }
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "plmobs-console-"));
  service = spawn("python3", [
    "-m", "plmobs.cli",
    "--store", join(dir, "trace.ndjson"),
    "serve", "--addr", `127.0.0.1:${PORT}`, "--tick", "1",
  ], { cwd: REPO_ROOT, stdio: "ignore" });
  await waitForHealth();
  const lines = readFileSync(join(REPO_ROOT, "fixtures", "mini.log"), "utf-8")
    .trim().split("\n");
  const result = await api.ingest(lines);
  expect(result).toMatchObject({ accepted: 8, quarantined: 0 });
}, 30_000);

afterAll(() => {
  service?.kill();
});

describe("dashboards against the live service", () => {
  it("the three dashboards carry the fixture values", async () => {
    const model = new DashboardModel(api);
    await model.refresh();
    expect(model.stale).toBe(false);
    expect(model.data?.actors).toEqual([
      { label: "u1", value: 4 }, { label: "u2", value: 3 }, { label: "u3", value: 1 }]);
    const shares = Object.fromEntries(model.data!.shares.map((s) => [s.label, s.value]));
    expect(shares["DOCUMENT:D1"]).toBeCloseTo(62.5, 6);
    expect(shares["PROCESS_MODEL:P1"]).toBeCloseTo(37.5, 6);
    expect(model.data?.processModel.value).toBe(3);
    expect(model.actorTotal).toBe(8);
    expect(model.asOfSeq).toBe(8);

    // and the rendered chart markup shows exactly those numbers
    const actorsSvg = barChart(model.data!.actors);
    expect(actorsSvg).toContain("u1: 4");
    const shareSvg = shareChart(model.data!.shares);
    expect(shareSvg).toContain("62.5%");
    const pmSvg = trendChart(model.data!.processModel.series, model.data!.processModel.value);
    expect(pmSvg).toContain("3 changes");
  });

  it("narrowing the window to exclude P1 events zeroes the process chart", async () => {
    const model = new DashboardModel(api);
    model.window = { from: "2008-04-28T09:00:00Z", to: "2008-04-28T09:30:00Z" };
    model.processModelId = "P1";
    await model.refresh();
    expect(model.data?.processModel.value).toBe(0);
  });
});

describe("rule editor against the live service", () => {
  it("a rule created in the editor appears via GET /rules", async () => {
    const editor = new RuleEditorModel(api);
    await editor.load();
    const ok = await editor.submit({
      ...emptyDraft(),
      rule_id: "refusal-watch",
      indicator_id: "IP2",
      comparator: ">=",
      threshold: "2",
      level: "CRITICAL",
    });
    expect(ok).toBe(true);
    const listed = await api.rules();
    expect(listed.map((r) => r.rule_id)).toContain("refusal-watch");
  });

  it("a duplicate id is rejected with the server detail, edits preserved", async () => {
    const editor = new RuleEditorModel(api);
    await editor.load();
    const draft = {
      ...emptyDraft(), rule_id: "refusal-watch", indicator_id: "IP2",
      comparator: ">=", threshold: "5",
    };
    const ok = await editor.submit(draft);
    expect(ok).toBe(false);
    expect(editor.problems.some((p) => p.includes("already exists"))).toBe(true);
    expect(draft.threshold).toBe("5"); // draft untouched for the user to fix
  });
});

describe("alert feed against the live service", () => {
  it("the IP2 crossing produces exactly one feed entry", async () => {
    const feed = new AlertFeedModel(api);
    await feed.poll();
    expect(feed.visible).toEqual([]); // IP2 is 1, threshold 2: nothing yet

    await api.ingest(["2008-04-28T11:00:00Z INFO [u4] STATUS PROCESS_MODEL:P1 outcome=refused"]);
    const fresh = await feed.poll();
    expect(fresh).toHaveLength(1);
    expect(fresh[0].rule_id).toBe("refusal-watch");
    expect(feed.isCritical(fresh[0])).toBe(true);

    // staying above the threshold does not refire, and the cursor holds
    await api.ingest(["2008-04-28T11:05:00Z INFO [u1] VIEW DOCUMENT:D1"]);
    expect(await feed.poll()).toHaveLength(0);
    expect(feed.visible).toHaveLength(1);

    feed.acknowledge(fresh[0].journal_seq);
    expect(feed.visible).toHaveLength(0); // hidden locally, journal untouched
    expect((await api.alerts()).length).toBe(1);
  });
});
