// Thin typed client over the service routes. The console renders what these
// calls return and nothing else; indicators are never recomputed client-side.

import type {
  ActivitiesByActorJson,
  ActivityShareJson,
  AlertRuleJson,
  ApiErrorBody,
  HealthJson,
  IndicatorSnapshotJson,
  IngestResultJson,
  NotificationJson,
  ProcessModelChangesJson,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export interface WindowParams {
  from?: string;
  to?: string;
}

type Fetch = typeof fetch;

export class ObservatoryApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: Fetch = fetch,
  ) {}

  private url(path: string, params: Record<string, string | number | undefined> = {}): string {
    const u = new URL(path, this.baseUrl);
    for (const [key, value] of Object.entries(params)) {
      if (value !== undefined) u.searchParams.set(key, String(value));
    }
    return u.toString();
  }

  private async request<T>(path: string, init?: RequestInit,
                           params: Record<string, string | number | undefined> = {}): Promise<T> {
    const response = await this.fetchImpl(this.url(path, params), init);
    if (!response.ok) {
      let body: Partial<ApiErrorBody> = {};
      try {
        body = await response.json();
      } catch {
        // non-JSON error body; fall through with defaults
      }
      throw new ApiError(response.status, body.code ?? "HttpError",
                         body.detail ?? response.statusText);
    }
    return response.json() as Promise<T>;
  }

  health(): Promise<HealthJson> {
    return this.request("/health");
  }

  ingest(lines: (string | object)[]): Promise<IngestResultJson> {
    return this.request("/ingest", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(lines),
    });
  }

  indicators(window: WindowParams = {}): Promise<IndicatorSnapshotJson> {
    return this.request("/indicators", undefined, { ...window });
  }

  activitiesByActor(window: WindowParams = {}): Promise<ActivitiesByActorJson> {
    return this.request("/dashboards/activities-by-actor", undefined, { ...window });
  }

  activityShareByObject(window: WindowParams = {},
                        granularity?: string): Promise<ActivityShareJson> {
    return this.request("/dashboards/activity-share-by-object", undefined,
                        { ...window, granularity });
  }

  processModelChanges(objectId: string, window: WindowParams = {},
                      intervalS?: number): Promise<ProcessModelChangesJson> {
    return this.request(`/dashboards/process-model-changes/${encodeURIComponent(objectId)}`,
                        undefined, { ...window, interval_s: intervalS });
  }

  rules(): Promise<AlertRuleJson[]> {
    return this.request("/rules");
  }

  putRules(rules: object[]): Promise<AlertRuleJson[]> {
    return this.request("/rules", {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(rules),
    });
  }

  alerts(cursor = 0, level?: string): Promise<NotificationJson[]> {
    return this.request("/alerts", undefined, { cursor, level });
  }
}
