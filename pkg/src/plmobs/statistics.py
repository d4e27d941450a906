"""Measure functions over triplets, frequent-triplet mining, and indicators.

Everything here is a pure function of (snapshot prefix, parameters): reads
only, no hidden state, safe to evaluate concurrently. Windows are half-open
[from, to) so counts over adjacent windows add up.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .model import (
    Activity,
    EntityCatalog,
    ExtractionContext,
    Granularity,
    MODIFICATION_ACTIVITIES,
    ObjectKind,
    ObjectRef,
    TripletKey,
    format_instant,
    triplet_key,
)
from .store import Snapshot
from .structurer import Session, TaskSpan, correlate_tasks, _gap_runs

COLLAPSED = "*"  # marks a triplet slot a grouped measure does not distinguish

_EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


class EmptyWindowError(Exception):
    """Raised when a ratio measure has no events to normalize by."""


class WrongObjectKind(Exception):
    pass


@dataclass(frozen=True)
class Window:
    """Half-open interval [start, end); None means unbounded on that side."""

    start: datetime | None = None
    end: datetime | None = None

    def contains(self, ts: datetime) -> bool:
        if self.start is not None and ts < self.start:
            return False
        if self.end is not None and ts >= self.end:
            return False
        return True

    @property
    def is_all(self) -> bool:
        return self.start is None and self.end is None

    def token(self) -> str:
        if self.is_all:
            return "ALL"
        fmt = lambda t: format_instant(t) if t else "-"
        return f"[{fmt(self.start)},{fmt(self.end)})"

    def to_json_obj(self):
        if self.is_all:
            return "ALL"
        return {
            "from": format_instant(self.start) if self.start else None,
            "to": format_instant(self.end) if self.end else None,
        }


ALL_TIME = Window()


class MeasureFunction(str, Enum):
    OCCURRENCE_COUNT = "OCCURRENCE_COUNT"
    FREQUENCY = "FREQUENCY"
    DISTINCT_ACTORS = "DISTINCT_ACTORS"
    MODIFICATION_COUNT = "MODIFICATION_COUNT"
    TASK_OUTPUT_COUNT = "TASK_OUTPUT_COUNT"
    SPAN_DURATION = "SPAN_DURATION"


@dataclass(frozen=True)
class MeasureSpec:
    function: MeasureFunction
    granularity: Granularity = Granularity.OBJECT_IDENTITY
    threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")


def _windowed(snapshot: Snapshot, window: Window) -> list[ExtractionContext]:
    return [c for c in snapshot if window.contains(c.timestamp)]


def _object_label(ctx: ExtractionContext, granularity: Granularity) -> str:
    return ctx.object.kind.value if granularity is Granularity.OBJECT_KIND else ctx.object.token


def compute_measure(snapshot: Snapshot, spec: MeasureSpec,
                    window: Window = ALL_TIME) -> dict[TripletKey, float]:
    """Score triplet groups with the chosen measure function.

    Grouped functions collapse slots they do not distinguish to ``"*"``:
    DISTINCT_ACTORS groups by (activity, object); MODIFICATION_COUNT and
    TASK_OUTPUT_COUNT group by object alone.
    """
    events = _windowed(snapshot, window)
    fn = spec.function
    g = spec.granularity

    if fn is MeasureFunction.OCCURRENCE_COUNT:
        return dict(Counter(triplet_key(c, g) for c in events))

    if fn is MeasureFunction.FREQUENCY:
        if not events:
            raise EmptyWindowError("no events in window, frequency undefined")
        total = len(events)
        counts = Counter(triplet_key(c, g) for c in events)
        return {k: v / total for k, v in counts.items()}

    if fn is MeasureFunction.DISTINCT_ACTORS:
        actors: dict[tuple[str, str], set[str]] = defaultdict(set)
        for c in events:
            actors[(c.activity.value, _object_label(c, g))].add(c.actor.id)
        return {(act, obj, COLLAPSED): float(len(ids)) for (act, obj), ids in actors.items()}

    if fn is MeasureFunction.MODIFICATION_COUNT:
        counts = Counter(_object_label(c, g) for c in events
                         if c.activity in MODIFICATION_ACTIVITIES)
        return {(COLLAPSED, obj, COLLAPSED): float(n) for obj, n in counts.items()}

    if fn is MeasureFunction.TASK_OUTPUT_COUNT:
        tasks: dict[str, set[str]] = defaultdict(set)
        for c in events:
            task = c.attrs.get("task")
            if task is not None and c.attrs.get("role") == "output":
                tasks[_object_label(c, g)].add(task)
        return {(COLLAPSED, obj, COLLAPSED): float(len(ids)) for obj, ids in tasks.items()}

    if fn is MeasureFunction.SPAN_DURATION:
        first: dict[TripletKey, datetime] = {}
        last: dict[TripletKey, datetime] = {}
        for c in events:
            key = triplet_key(c, g)
            if key not in first or c.timestamp < first[key]:
                first[key] = c.timestamp
            if key not in last or c.timestamp > last[key]:
                last[key] = c.timestamp
        return {k: (last[k] - first[k]).total_seconds() for k in first}

    raise ValueError(f"unknown measure function: {fn}")


def frequent_triplets(snapshot: Snapshot, spec: MeasureSpec,
                      window: Window = ALL_TIME) -> set[tuple[TripletKey, float]]:
    """The triplet keys whose measure value reaches the configured threshold."""
    values = compute_measure(snapshot, spec, window)
    return {(k, v) for k, v in values.items() if v >= spec.threshold}


@dataclass(frozen=True)
class Scope:
    kind: str                # global | object | actor | task
    ident: str | None = None

    def token(self) -> str:
        return self.kind if self.ident is None else f"{self.kind}:{self.ident}"

    def to_json_obj(self) -> dict:
        obj = {"type": self.kind}
        if self.ident is not None:
            obj["id"] = self.ident
        return obj

    @classmethod
    def from_json_obj(cls, obj) -> "Scope":
        if obj == "global" or obj is None:
            return GLOBAL
        if isinstance(obj, str):
            return GLOBAL if obj == "global" else cls(*obj.split(":", 1))
        return cls(obj["type"], obj.get("id"))


GLOBAL = Scope("global")


@dataclass(frozen=True)
class IndicatorValue:
    indicator_id: str
    scope: Scope
    window: Window
    value: float
    unit: str  # count | seconds | percent
    computed_at: datetime
    as_of_seq: int

    def to_json_obj(self) -> dict:
        return {
            "indicator_id": self.indicator_id,
            "scope": self.scope.to_json_obj(),
            "window": self.window.to_json_obj(),
            "value": self.value,
            "unit": self.unit,
            "computed_at": format_instant(self.computed_at),
            "as_of_seq": self.as_of_seq,
        }


def event_time(snapshot: Snapshot) -> datetime:
    # Deterministic "now": the latest event time, so equal prefixes give
    # byte-equal snapshots and replayable journals.
    return max((c.timestamp for c in snapshot), default=_EPOCH)


def _value(snapshot: Snapshot, indicator_id: str, scope: Scope, window: Window,
           value: float, unit: str, now: datetime | None) -> IndicatorValue:
    return IndicatorValue(
        indicator_id=indicator_id,
        scope=scope,
        window=window,
        value=value,
        unit=unit,
        computed_at=now if now is not None else event_time(snapshot),
        as_of_seq=snapshot.as_of_seq,
    )


def indicator_ip2(snapshot: Snapshot, window: Window = ALL_TIME,
                  scope: Scope = GLOBAL, now: datetime | None = None) -> IndicatorValue:
    """IP2: refused change/validation requests (STATUS events with outcome=refused)."""
    refusals = [c for c in _windowed(snapshot, window)
                if c.activity is Activity.STATUS and c.attrs.get("outcome") == "refused"]
    if scope.kind == "object":
        refusals = [c for c in refusals if c.object.token == scope.ident]
    elif scope.kind == "actor":
        refusals = [c for c in refusals if c.actor.id == scope.ident]
    return _value(snapshot, "IP2", scope, window, float(len(refusals)), "count", now)


def indicator_ip11(snapshot: Snapshot, catalog: EntityCatalog,
                   window: Window = ALL_TIME, scope: Scope = GLOBAL,
                   now: datetime | None = None) -> tuple[IndicatorValue, list[TaskSpan]]:
    """IP11: tasks whose realization time exceeded their deadline.

    Only closed spans count; open and orphan spans cannot have a duration.
    The deadline is the longest task-id prefix configured in the catalog,
    falling back to its default.
    """
    correlation = correlate_tasks(_windowed(snapshot, window))
    overdue = [s for s in correlation.closed()
               if s.duration_s > catalog.deadline_for(s.task_id)]
    if scope.kind == "task":
        overdue = [s for s in overdue if s.task_id == scope.ident]
    return (_value(snapshot, "IP11", scope, window, float(len(overdue)), "count", now),
            overdue)


def search_sessions(snapshot: Snapshot, gap_s: int, window: Window = ALL_TIME,
                    include_view: bool = False) -> list[Session]:
    """Gap-based sessions over information-search events, per (actor, object)."""
    wanted = {Activity.SEARCH} | ({Activity.VIEW} if include_view else set())
    partitions: dict[tuple[str, ObjectRef], list[ExtractionContext]] = {}
    for c in _windowed(snapshot, window):
        if c.activity in wanted:
            partitions.setdefault((c.actor.id, c.object), []).append(c)
    sessions: list[Session] = []
    for (actor_id, obj), events in partitions.items():
        events.sort(key=lambda c: (c.timestamp, c.seq))
        for run in _gap_runs(events, gap_s):
            sessions.append(Session(actor_id, obj, run[0].activity,
                                    run[0].timestamp, run[-1].timestamp, len(run)))
    return sessions


def indicator_ip7(snapshot: Snapshot, gap_s: int = 1800, window: Window = ALL_TIME,
                  include_view: bool = False,
                  now: datetime | None = None) -> dict[str, IndicatorValue]:
    """IP7: time spent searching information on each object, summed over actors."""
    if gap_s < 0:
        raise ValueError("gap_s must be non-negative")
    totals: dict[str, int] = defaultdict(int)
    for session in search_sessions(snapshot, gap_s, window, include_view):
        totals[session.object.token] += session.duration_s
    return {obj: _value(snapshot, "IP7", Scope("object", obj), window,
                        float(seconds), "seconds", now)
            for obj, seconds in totals.items()}


def indicator_ip4(snapshot: Snapshot, process_model: ObjectRef,
                  window: Window = ALL_TIME, now: datetime | None = None) -> IndicatorValue:
    """IP4: changes performed on one specific process model."""
    if process_model.kind is not ObjectKind.PROCESS_MODEL:
        raise WrongObjectKind(f"IP4 requires a PROCESS_MODEL object, got {process_model.kind.value}")
    count = sum(1 for c in _windowed(snapshot, window)
                if c.object == process_model and c.activity in MODIFICATION_ACTIVITIES)
    return _value(snapshot, "IP4", Scope("object", process_model.token), window,
                  float(count), "count", now)


def activities_by_actor(snapshot: Snapshot, window: Window = ALL_TIME) -> dict[str, int]:
    """Event totals per actor; values sum to the window's event count."""
    return dict(Counter(c.actor.id for c in _windowed(snapshot, window)))


def activity_share_by_object(snapshot: Snapshot, window: Window = ALL_TIME,
                             granularity: Granularity = Granularity.OBJECT_IDENTITY) -> dict[str, float]:
    """Percentage of window activity falling on each object; shares sum to 100."""
    events = _windowed(snapshot, window)
    if not events:
        raise EmptyWindowError("no events in window, shares undefined")
    counts = Counter(_object_label(c, granularity) for c in events)
    total = len(events)
    return {obj: n / total * 100.0 for obj, n in counts.items()}


@dataclass
class IndicatorConfig:
    catalog: EntityCatalog = field(default_factory=EntityCatalog)
    gap_s: int = 1800
    granularity: Granularity = Granularity.OBJECT_IDENTITY
    window: Window = ALL_TIME
    include_view_in_search: bool = False


# (indicator_id, scope_token, window_token) -> extra value requests, used by
# the notifier to get rule-specific windows into one consistent snapshot.
IndicatorRequest = tuple[str, Scope, Window]

INDICATOR_SCOPES: dict[str, frozenset[str]] = {
    "IP2": frozenset({"global", "object", "actor"}),
    "IP4": frozenset({"object"}),
    "IP7": frozenset({"global", "object"}),
    "IP11": frozenset({"global", "task"}),
    "ACTIVITIES_BY_ACTOR": frozenset({"global", "actor"}),
    "ACTIVITY_SHARE_BY_OBJECT": frozenset({"object"}),
}


@dataclass
class IndicatorSnapshot:
    as_of_seq: int
    computed_at: datetime
    indicators: list[IndicatorValue]
    _index: dict[tuple[str, str, str], IndicatorValue] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        for iv in self.indicators:
            self._index[(iv.indicator_id, iv.scope.token(), iv.window.token())] = iv

    def get(self, indicator_id: str, scope: Scope = GLOBAL,
            window: Window = ALL_TIME) -> IndicatorValue | None:
        return self._index.get((indicator_id, scope.token(), window.token()))

    def to_json_obj(self) -> dict:
        return {
            "as_of_seq": self.as_of_seq,
            "computed_at": format_instant(self.computed_at),
            "indicators": [iv.to_json_obj() for iv in self.indicators],
        }


def _compute_one(snapshot: Snapshot, config: IndicatorConfig, indicator_id: str,
                 scope: Scope, window: Window, now: datetime | None) -> IndicatorValue:
    allowed = INDICATOR_SCOPES.get(indicator_id)
    if allowed is None:
        raise KeyError(indicator_id)
    if scope.kind not in allowed:
        raise ValueError(f"{indicator_id} does not support {scope.kind} scope")

    if indicator_id == "IP2":
        return indicator_ip2(snapshot, window, scope, now)
    if indicator_id == "IP4":
        return indicator_ip4(snapshot, ObjectRef.from_token(scope.ident), window, now)
    if indicator_id == "IP7":
        per_object = indicator_ip7(snapshot, config.gap_s, window,
                                   config.include_view_in_search, now)
        if scope.kind == "object":
            found = per_object.get(scope.ident)
            return found if found is not None else _value(
                snapshot, "IP7", scope, window, 0.0, "seconds", now)
        total = sum(iv.value for iv in per_object.values())
        return _value(snapshot, "IP7", GLOBAL, window, total, "seconds", now)
    if indicator_id == "IP11":
        value, _ = indicator_ip11(snapshot, config.catalog, window, scope, now)
        return value
    if indicator_id == "ACTIVITIES_BY_ACTOR":
        counts = activities_by_actor(snapshot, window)
        n = counts.get(scope.ident, 0) if scope.kind == "actor" else sum(counts.values())
        return _value(snapshot, "ACTIVITIES_BY_ACTOR", scope, window, float(n), "count", now)
    if indicator_id == "ACTIVITY_SHARE_BY_OBJECT":
        try:
            shares = activity_share_by_object(snapshot, window, config.granularity)
        except EmptyWindowError:
            shares = {}
        return _value(snapshot, "ACTIVITY_SHARE_BY_OBJECT", scope, window,
                      shares.get(scope.ident, 0.0), "percent", now)
    raise KeyError(indicator_id)


def snapshot_indicators(snapshot: Snapshot, config: IndicatorConfig | None = None,
                        requests: list[IndicatorRequest] | None = None,
                        now: datetime | None = None) -> IndicatorSnapshot:
    """Compute every configured indicator at one consistent as_of_seq.

    ``requests`` adds rule-specific (indicator, scope, window) combinations on
    top of the default set. With ``now`` unset the timestamp is derived from
    the data, so two calls on the same prefix return identical snapshots.
    """
    config = config or IndicatorConfig()
    computed_at = now if now is not None else event_time(snapshot)
    window = config.window
    values: list[IndicatorValue] = []

    values.append(indicator_ip2(snapshot, window, GLOBAL, computed_at))
    ip11, _ = indicator_ip11(snapshot, config.catalog, window, GLOBAL, computed_at)
    values.append(ip11)
    per_object_ip7 = indicator_ip7(snapshot, config.gap_s, window,
                                   config.include_view_in_search, computed_at)
    values.extend(per_object_ip7.values())
    values.append(_value(snapshot, "IP7", GLOBAL, window,
                         sum(iv.value for iv in per_object_ip7.values()), "seconds", computed_at))

    process_models = sorted({c.object.token for c in _windowed(snapshot, window)
                             if c.object.kind is ObjectKind.PROCESS_MODEL})
    for token in process_models:
        values.append(indicator_ip4(snapshot, ObjectRef.from_token(token), window, computed_at))

    by_actor = activities_by_actor(snapshot, window)
    for actor_id in sorted(by_actor):
        values.append(_value(snapshot, "ACTIVITIES_BY_ACTOR", Scope("actor", actor_id),
                             window, float(by_actor[actor_id]), "count", computed_at))
    values.append(_value(snapshot, "ACTIVITIES_BY_ACTOR", GLOBAL, window,
                         float(sum(by_actor.values())), "count", computed_at))

    try:
        shares = activity_share_by_object(snapshot, window, config.granularity)
    except EmptyWindowError:
        shares = {}
    for obj in sorted(shares):
        values.append(_value(snapshot, "ACTIVITY_SHARE_BY_OBJECT", Scope("object", obj),
                             window, shares[obj], "percent", computed_at))

    seen = {(iv.indicator_id, iv.scope.token(), iv.window.token()) for iv in values}
    for indicator_id, scope, req_window in requests or []:
        key = (indicator_id, scope.token(), req_window.token())
        if key in seen:
            continue
        values.append(_compute_one(snapshot, config, indicator_id, scope, req_window, computed_at))
        seen.add(key)

    return IndicatorSnapshot(snapshot.as_of_seq, computed_at, values)
