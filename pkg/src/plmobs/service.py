"""Query and configuration service over the store, indicators, rules, and alerts.

One writer (ingest), many readers; every read route answers from a snapshot
pinned to an as_of_seq. Rules are evaluated after each ingest and on a periodic
tick, appending to the alert journal, which offline replay reproduces exactly
for the same snapshot sequence.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import logging
import os
from datetime import timedelta
from pathlib import Path

from fastapi import Body, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from filelock import FileLock, Timeout

from .collector import LogGrammar
from .model import EntityCatalog, ObjectKind, ObjectRef, parse_instant
from .notifier import (
    RuleError,
    Dispatcher,
    evaluate_rules,
    parse_rules,
    read_journal,
    rule_requests,
)
from .pipeline import ingest_context_objects, ingest_lines
from .statistics import (
    GLOBAL,
    EmptyWindowError,
    Granularity,
    IndicatorConfig,
    IndicatorValue,
    MeasureFunction,
    MeasureSpec,
    Scope,
    Window,
    WrongObjectKind,
    activities_by_actor,
    activity_share_by_object,
    event_time,
    frequent_triplets,
    indicator_ip2,
    indicator_ip4,
    indicator_ip7,
    indicator_ip11,
    snapshot_indicators,
)
from .store import TraceStore
from .structurer import QuarantineWriter

logger = logging.getLogger(__name__)

ENV_ADDR = "OBSERVATORY_ADDR"
ENV_STORE = "OBSERVATORY_STORE"
ENV_WEBHOOK = "OBSERVATORY_WEBHOOK"

FromParam = Query(None, alias="from")
ToParam = Query(None, alias="to")


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail


def _bad_request(detail: str) -> ApiError:
    return ApiError(400, "BadParams", detail)


def _parse_window(from_: str | None, to: str | None) -> Window:
    try:
        start = parse_instant(from_) if from_ else None
        end = parse_instant(to) if to else None
    except ValueError as exc:
        raise _bad_request(f"bad instant: {exc}")
    return Window(start, end)


def _object_ref(token: str) -> ObjectRef:
    try:
        return ObjectRef.from_token(token)
    except ValueError as exc:
        raise _bad_request(f"bad object token {token!r}: {exc}")


def _scope_from_params(object: str | None, actor: str | None, task: str | None) -> Scope:
    if object:
        return Scope("object", _object_ref(object).token)
    if actor:
        return Scope("actor", actor)
    if task:
        return Scope("task", task)
    return GLOBAL


def create_app(store_path: str | Path, catalog_path: str | Path | None = None,
               rules_path: str | Path | None = None,
               journal_path: str | Path | None = None,
               webhook_url: str | None = None,
               tick_s: float = 5.0,
               config: IndicatorConfig | None = None) -> FastAPI:
    """Build the service around one store; acquires the store's writer lock."""
    store_path = Path(store_path)
    catalog = EntityCatalog.load(catalog_path) if catalog_path else EntityCatalog()
    cfg = config or IndicatorConfig(catalog=catalog)
    cfg.catalog = catalog
    journal = Path(journal_path) if journal_path else Path(str(store_path) + ".alerts.ndjson")
    webhook = webhook_url or os.environ.get(ENV_WEBHOOK)

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        lock = FileLock(str(store_path) + ".lock")
        try:
            lock.acquire(timeout=0)
        except Timeout:
            raise RuntimeError(f"store {store_path} is locked by another process")
        state = app.state
        state.lock = lock
        state.store = TraceStore(store_path)
        state.quarantine = QuarantineWriter(store_path)
        ticker = None
        if tick_s > 0:
            async def tick_loop():
                while True:
                    await asyncio.sleep(tick_s)
                    try:
                        state.evaluate_tick()
                    except RuleError as exc:
                        logger.error("rule evaluation failed: %s", exc)
            ticker = asyncio.create_task(tick_loop())
        try:
            yield
        finally:
            if ticker:
                ticker.cancel()
            lock.release()

    app = FastAPI(title="plmobs", version="0.1.0", lifespan=lifespan)
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    state = app.state
    state.cfg = cfg
    state.catalog = catalog
    state.journal = journal
    state.dispatcher = Dispatcher(journal_path=journal, webhook_url=webhook)
    state.rules = []
    state.rules_path = Path(rules_path) if rules_path else None
    state.rule_state = {}
    state.last_evaluated_seq = -1

    if state.rules_path and state.rules_path.exists():
        state.rules = parse_rules(json.loads(state.rules_path.read_text(encoding="utf-8")))

    def evaluate_tick() -> int:
        """Evaluate rules against the current snapshot; returns firings."""
        snap = state.store.snapshot()
        if snap.as_of_seq == state.last_evaluated_seq:
            return 0
        end = event_time(snap)
        indicators = snapshot_indicators(snap, state.cfg, rule_requests(state.rules, end))
        notifications, state.rule_state = evaluate_rules(
            indicators, state.rules, state.rule_state, now=indicators.computed_at)
        state.dispatcher.dispatch_all(notifications)
        state.last_evaluated_seq = snap.as_of_seq
        return len(notifications)

    state.evaluate_tick = evaluate_tick

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={
            "status": exc.status, "code": exc.code, "detail": exc.detail})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content={
            "status": 422, "code": "InvalidBody", "detail": str(exc.errors()[:3])})

    @app.get("/health")
    def health():
        return {"status": "ok", "last_seq": state.store.last_seq}

    @app.post("/ingest")
    def ingest(body: list = Body(...)):
        if not body:
            raise ApiError(422, "InvalidBody", "body must be a non-empty JSON array")
        lines = [item for item in body if isinstance(item, str)]
        objects = [item for item in body if isinstance(item, dict)]
        if len(lines) + len(objects) != len(body):
            raise ApiError(422, "InvalidBody", "items must be log lines or context objects")
        accepted = quarantined = 0
        if lines:
            r = ingest_lines(state.store, lines, state.catalog, LogGrammar(), state.quarantine)
            accepted += r.accepted
            quarantined += r.quarantined
        if objects:
            r = ingest_context_objects(state.store, objects, state.catalog, state.quarantine)
            accepted += r.accepted
            quarantined += r.quarantined
        if accepted == 0 and quarantined == len(body):
            raise ApiError(422, "InvalidBody", "every item in the body was malformed")
        try:
            evaluate_tick()
        except RuleError as exc:
            logger.error("post-ingest evaluation failed: %s", exc)
        return {"accepted": accepted, "quarantined": quarantined,
                "last_seq": state.store.last_seq}

    @app.get("/indicators")
    def all_indicators(from_: str | None = FromParam, to: str | None = ToParam):
        window = _parse_window(from_, to)
        snap = state.store.snapshot()
        cfg = state.cfg
        if not window.is_all:
            cfg = IndicatorConfig(catalog=cfg.catalog, gap_s=cfg.gap_s,
                                  granularity=cfg.granularity, window=window,
                                  include_view_in_search=cfg.include_view_in_search)
        return snapshot_indicators(snap, cfg).to_json_obj()

    @app.get("/indicators/{indicator_id}")
    def one_indicator(indicator_id: str, from_: str | None = FromParam,
                      to: str | None = ToParam, object: str | None = None,
                      actor: str | None = None, task: str | None = None,
                      gap: int | None = None):
        window = _parse_window(from_, to)
        snap = state.store.snapshot()
        ind = indicator_id.upper().replace("-", "_")
        try:
            if ind == "IP2":
                return indicator_ip2(snap, window,
                                     _scope_from_params(object, actor, task)).to_json_obj()
            if ind == "IP4":
                if not object:
                    raise _bad_request("IP4 requires an object parameter (PROCESS_MODEL:<id>)")
                return indicator_ip4(snap, _object_ref(object), window).to_json_obj()
            if ind == "IP7":
                gap_s = gap if gap is not None else state.cfg.gap_s
                if gap_s < 0:
                    raise _bad_request("gap must be non-negative")
                per_object = indicator_ip7(snap, gap_s, window,
                                           state.cfg.include_view_in_search)
                if object:
                    token = _object_ref(object).token
                    if token in per_object:
                        return per_object[token].to_json_obj()
                    return IndicatorValue("IP7", Scope("object", token), window, 0.0,
                                          "seconds", event_time(snap),
                                          snap.as_of_seq).to_json_obj()
                total = sum(v.value for v in per_object.values())
                body = IndicatorValue("IP7", GLOBAL, window, total, "seconds",
                                      event_time(snap), snap.as_of_seq).to_json_obj()
                body["per_object"] = {k: v.value for k, v in sorted(per_object.items())}
                return body
            if ind == "IP11":
                scope = Scope("task", task) if task else GLOBAL
                value, overdue = indicator_ip11(snap, state.catalog, window, scope)
                body = value.to_json_obj()
                body["overdue"] = [
                    {"task_id": s.task_id, "duration_s": s.duration_s,
                     "deadline_s": state.catalog.deadline_for(s.task_id)}
                    for s in overdue]
                return body
            if ind == "ACTIVITIES_BY_ACTOR":
                counts = activities_by_actor(snap, window)
                n = counts.get(actor, 0) if actor else sum(counts.values())
                scope = Scope("actor", actor) if actor else GLOBAL
                return IndicatorValue("ACTIVITIES_BY_ACTOR", scope, window, float(n),
                                      "count", event_time(snap), snap.as_of_seq).to_json_obj()
        except WrongObjectKind as exc:
            raise _bad_request(str(exc))
        raise ApiError(404, "UnknownIndicator", f"no indicator named {indicator_id!r}")

    @app.get("/triplets/frequent")
    def triplets_frequent(function: str, threshold: float,
                          granularity: str = "OBJECT_IDENTITY",
                          from_: str | None = FromParam, to: str | None = ToParam):
        try:
            spec = MeasureSpec(MeasureFunction(function.upper()),
                               Granularity(granularity.upper()), threshold)
        except ValueError as exc:
            raise _bad_request(str(exc))
        window = _parse_window(from_, to)
        snap = state.store.snapshot()
        try:
            found = frequent_triplets(snap, spec, window)
        except EmptyWindowError as exc:
            raise ApiError(400, "EmptyWindow", str(exc))
        rows = [{"activity": k[0], "object": k[1], "actor": k[2], "value": v}
                for k, v in found]
        rows.sort(key=lambda r: (-r["value"], r["activity"], r["object"], r["actor"]))
        return {"as_of_seq": snap.as_of_seq, "triplets": rows}

    @app.get("/dashboards/activities-by-actor")
    def dash_activities(from_: str | None = FromParam, to: str | None = ToParam):
        window = _parse_window(from_, to)
        snap = state.store.snapshot()
        counts = activities_by_actor(snap, window)
        return {"as_of_seq": snap.as_of_seq, "counts": dict(sorted(counts.items()))}

    @app.get("/dashboards/activity-share-by-object")
    def dash_share(from_: str | None = FromParam, to: str | None = ToParam,
                   granularity: str = "OBJECT_IDENTITY"):
        window = _parse_window(from_, to)
        try:
            g = Granularity(granularity.upper())
        except ValueError as exc:
            raise _bad_request(str(exc))
        snap = state.store.snapshot()
        try:
            shares = activity_share_by_object(snap, window, g)
        except EmptyWindowError as exc:
            raise ApiError(400, "EmptyWindow", str(exc))
        return {"as_of_seq": snap.as_of_seq, "shares": dict(sorted(shares.items()))}

    @app.get("/dashboards/process-model-changes/{object_id}")
    def dash_process_model(object_id: str, from_: str | None = FromParam,
                           to: str | None = ToParam, interval_s: int | None = None):
        window = _parse_window(from_, to)
        snap = state.store.snapshot()
        try:
            ref = ObjectRef(ObjectKind.PROCESS_MODEL, object_id)
        except ValueError as exc:
            raise _bad_request(str(exc))
        body = indicator_ip4(snap, ref, window).to_json_obj()
        if interval_s:
            if interval_s <= 0:
                raise _bad_request("interval_s must be positive")
            stamps = [c.timestamp for c in snap
                      if c.object == ref and window.contains(c.timestamp)]
            series = []
            if stamps:
                cursor = min(stamps).replace(minute=0, second=0)
                last = max(stamps)
                while cursor <= last:
                    nxt = cursor + timedelta(seconds=interval_s)
                    bucket = Window(cursor, nxt)
                    series.append({
                        "from": bucket.to_json_obj()["from"],
                        "to": bucket.to_json_obj()["to"],
                        "value": indicator_ip4(snap, ref, bucket).value,
                    })
                    cursor = nxt
            body["series"] = series
        return body

    @app.get("/rules")
    def get_rules():
        return [r.to_json_obj() for r in state.rules]

    @app.put("/rules")
    def put_rules(body: list = Body(...)):
        try:
            rules = parse_rules(body)
        except RuleError as exc:
            raise ApiError(409, exc.code, str(exc))
        state.rules = rules
        if state.rules_path:
            tmp = state.rules_path.with_suffix(".tmp")
            tmp.write_text(json.dumps([r.to_json_obj() for r in rules], indent=2),
                           encoding="utf-8")
            tmp.replace(state.rules_path)
        state.last_evaluated_seq = -1  # force re-evaluation with the new set
        return [r.to_json_obj() for r in state.rules]

    @app.get("/alerts")
    def get_alerts(since: str | None = None, level: str | None = None,
                   cursor: int = 0, limit: int | None = None):
        try:
            since_ts = parse_instant(since) if since else None
        except ValueError as exc:
            raise _bad_request(f"bad since: {exc}")
        entries = read_journal(state.journal)
        out = []
        for pos, n in enumerate(entries, 1):
            if pos <= cursor:
                continue
            if since_ts is not None and n.fired_at < since_ts:
                continue
            if level is not None and n.level.value != level.upper():
                continue
            item = n.to_json_obj()
            item["journal_seq"] = pos
            out.append(item)
        if limit is not None:
            out = out[:limit]
        return out

    @app.get("/trace")
    def get_trace(after_seq: int = 0, limit: int = 1000):
        return [c.to_json_obj() for c in state.store.records_after(after_seq, limit)]

    return app
