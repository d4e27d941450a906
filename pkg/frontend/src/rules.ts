// Client-side rule validation mirroring the service's: same comparator set,
// unique ids, known indicators with compatible scopes. The server remains the
// authority; a 409 from it is surfaced verbatim and the edits kept.

import type { AlertLevel, ScopeJson } from "./types.js";

export const COMPARATORS = [">=", ">", "<=", "<"] as const;
export const LEVELS: AlertLevel[] = ["INFO", "WARNING", "CRITICAL"];

export const INDICATOR_SCOPES: Record<string, string[]> = {
  IP2: ["global", "object", "actor"],
  IP4: ["object"],
  IP7: ["global", "object"],
  IP11: ["global", "task"],
  ACTIVITIES_BY_ACTOR: ["global", "actor"],
  ACTIVITY_SHARE_BY_OBJECT: ["object"],
};

export interface RuleDraft {
  rule_id: string;
  indicator_id: string;
  comparator: string;
  threshold: string; // raw form input, validated to a finite number
  level: AlertLevel;
  scopeType: "global" | "object" | "actor" | "task";
  scopeId: string;
  cooldown_s: string; // empty = fire on transitions only
  window_s: string;   // empty = all time
}

export function emptyDraft(): RuleDraft {
  return {
    rule_id: "",
    indicator_id: "IP2",
    comparator: ">=",
    threshold: "",
    level: "WARNING",
    scopeType: "global",
    scopeId: "",
    cooldown_s: "",
    window_s: "",
  };
}

export function validateDraft(draft: RuleDraft, existingIds: string[]): string[] {
  const problems: string[] = [];
  if (!draft.rule_id.trim()) problems.push("rule_id is required");
  if (existingIds.includes(draft.rule_id.trim())) {
    problems.push(`rule_id ${draft.rule_id.trim()} already exists`);
  }
  const scopes = INDICATOR_SCOPES[draft.indicator_id.toUpperCase()];
  if (!scopes) problems.push(`unknown indicator ${draft.indicator_id}`);
  else if (!scopes.includes(draft.scopeType)) {
    problems.push(`${draft.indicator_id} does not support ${draft.scopeType} scope`);
  }
  if (!COMPARATORS.includes(draft.comparator as (typeof COMPARATORS)[number])) {
    problems.push(`comparator must be one of ${COMPARATORS.join(" ")}`);
  }
  const threshold = Number(draft.threshold);
  if (draft.threshold.trim() === "" || !Number.isFinite(threshold)) {
    problems.push("threshold must be a finite number");
  }
  if (draft.scopeType !== "global" && !draft.scopeId.trim()) {
    problems.push(`${draft.scopeType} scope needs an id`);
  }
  for (const [label, raw] of [["cooldown_s", draft.cooldown_s],
                              ["window_s", draft.window_s]] as const) {
    if (raw.trim() !== "" && (!Number.isInteger(Number(raw)) || Number(raw) < 0)) {
      problems.push(`${label} must be a non-negative integer or empty`);
    }
  }
  return problems;
}

export function draftToRule(draft: RuleDraft): object {
  const scope: ScopeJson = draft.scopeType === "global"
    ? { type: "global" }
    : { type: draft.scopeType, id: draft.scopeId.trim() } as ScopeJson;
  return {
    rule_id: draft.rule_id.trim(),
    indicator_id: draft.indicator_id.toUpperCase(),
    comparator: draft.comparator,
    threshold: Number(draft.threshold),
    level: draft.level,
    scope,
    cooldown_s: draft.cooldown_s.trim() === "" ? null : Number(draft.cooldown_s),
    window_s: draft.window_s.trim() === "" ? null : Number(draft.window_s),
  };
}
