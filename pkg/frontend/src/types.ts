// Wire types for the observation service JSON routes.

export type ScopeJson =
  | { type: "global" }
  | { type: "object"; id: string }
  | { type: "actor"; id: string }
  | { type: "task"; id: string };

export type WindowJson = "ALL" | { from: string | null; to: string | null };

export interface IndicatorValueJson {
  indicator_id: string;
  scope: ScopeJson;
  window: WindowJson;
  value: number;
  unit: "count" | "seconds" | "percent";
  computed_at: string;
  as_of_seq: number;
}

export interface IndicatorSnapshotJson {
  as_of_seq: number;
  computed_at: string;
  indicators: IndicatorValueJson[];
}

export interface ActivitiesByActorJson {
  as_of_seq: number;
  counts: Record<string, number>;
}

export interface ActivityShareJson {
  as_of_seq: number;
  shares: Record<string, number>;
}

export interface ProcessModelChangesJson extends IndicatorValueJson {
  series?: { from: string; to: string; value: number }[];
}

export interface IngestResultJson {
  accepted: number;
  quarantined: number;
  last_seq: number;
}

export type AlertLevel = "INFO" | "WARNING" | "CRITICAL";

export interface AlertRuleJson {
  rule_id: string;
  indicator_id: string;
  scope: ScopeJson;
  comparator: string;
  threshold: number;
  level: AlertLevel;
  window_s: number | null;
  cooldown_s: number | null;
}

export interface NotificationJson {
  rule_id: string;
  fired_at: string;
  observed: number;
  threshold: number;
  level: AlertLevel;
  scope: ScopeJson;
  as_of_seq: number;
  message: string;
  journal_seq: number;
}

export interface HealthJson {
  status: string;
  last_seq: number;
}

export interface ApiErrorBody {
  status: number;
  code: string;
  detail: string;
}
