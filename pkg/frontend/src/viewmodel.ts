// Console state: one model per view. Every number a view renders comes out of
// exactly one service response held here; the only client-side derivation is
// the presentational total at the foot of the actors dashboard.

import { ApiError, ObservatoryApi, WindowParams } from "./api.js";
import type { BarDatum } from "./charts.js";
import type { AlertRuleJson, NotificationJson } from "./types.js";
import { RuleDraft, draftToRule, validateDraft } from "./rules.js";

export interface DashboardData {
  actors: BarDatum[];
  shares: BarDatum[];
  processModel: { value: number; series: { from: string; value: number }[] };
  asOfSeq: number;
}

export class DashboardModel {
  window: WindowParams = {};
  granularity = "OBJECT_IDENTITY";
  processModelId = "";
  stale = false;
  lastError = "";
  data: DashboardData | null = null;

  constructor(private readonly api: ObservatoryApi) {}

  get asOfSeq(): number | null {
    return this.data ? this.data.asOfSeq : null;
  }

  /** Presentational footer total; must equal the sum of the rendered bars. */
  get actorTotal(): number {
    return (this.data?.actors ?? []).reduce((sum, d) => sum + d.value, 0);
  }

  async refresh(): Promise<void> {
    try {
      const actors = await this.api.activitiesByActor(this.window);
      const shares = await this.api.activityShareByObject(this.window, this.granularity)
        .catch((err) => {
          if (err instanceof ApiError && err.code === "EmptyWindow") {
            return { as_of_seq: actors.as_of_seq, shares: {} };
          }
          throw err;
        });
      const modelId = this.processModelId || this.guessProcessModel(shares.shares);
      const pm = modelId
        ? await this.api.processModelChanges(modelId, this.window, 3600)
        : { value: 0, series: [], as_of_seq: actors.as_of_seq };
      this.data = {
        actors: Object.entries(actors.counts).map(([label, value]) => ({ label, value })),
        shares: Object.entries(shares.shares).map(([label, value]) => ({ label, value })),
        processModel: { value: pm.value, series: pm.series ?? [] },
        asOfSeq: actors.as_of_seq,
      };
      this.stale = false;
      this.lastError = "";
    } catch (err) {
      // keep the last good data on screen; flag it stale instead of blanking
      this.stale = true;
      this.lastError = err instanceof Error ? err.message : String(err);
    }
  }

  private guessProcessModel(shares: Record<string, number>): string {
    const token = Object.keys(shares).find((k) => k.startsWith("PROCESS_MODEL:"));
    return token ? token.split(":", 2)[1] : "";
  }
}

export class AlertFeedModel {
  entries: NotificationJson[] = [];
  levelFilter: "ALL" | "INFO" | "WARNING" | "CRITICAL" = "ALL";
  stale = false;
  private cursor = 0;
  private acknowledged = new Set<number>();

  constructor(private readonly api: ObservatoryApi) {}

  async poll(): Promise<NotificationJson[]> {
    try {
      const fresh = await this.api.alerts(this.cursor);
      for (const entry of fresh) {
        this.entries.push(entry);
        this.cursor = Math.max(this.cursor, entry.journal_seq);
      }
      this.stale = false;
      return fresh;
    } catch {
      this.stale = true;
      return [];
    }
  }

  acknowledge(journalSeq: number): void {
    this.acknowledged.add(journalSeq); // hides locally, never deletes
  }

  get visible(): NotificationJson[] {
    return this.entries.filter((e) =>
      !this.acknowledged.has(e.journal_seq) &&
      (this.levelFilter === "ALL" || e.level === this.levelFilter));
  }

  isCritical(entry: NotificationJson): boolean {
    return entry.level === "CRITICAL";
  }
}

export class RuleEditorModel {
  rules: AlertRuleJson[] = [];
  problems: string[] = [];
  serverError = "";

  constructor(private readonly api: ObservatoryApi) {}

  async load(): Promise<void> {
    this.rules = await this.api.rules();
  }

  /** Validate locally, then PUT the whole set; 409 keeps the draft intact. */
  async submit(draft: RuleDraft): Promise<boolean> {
    this.problems = validateDraft(draft, this.rules.map((r) => r.rule_id));
    this.serverError = "";
    if (this.problems.length > 0) return false;
    const next = [...this.rules.map((r) => ({ ...r })), draftToRule(draft)];
    return this.put(next);
  }

  async remove(ruleId: string): Promise<boolean> {
    return this.put(this.rules.filter((r) => r.rule_id !== ruleId));
  }

  private async put(body: object[]): Promise<boolean> {
    try {
      this.rules = await this.api.putRules(body);
      return true;
    } catch (err) {
      this.serverError = err instanceof ApiError ? err.detail : String(err);
      return false;
    }
  }
}
