"""Structurer: validates raw records into extraction contexts and enriches them.

Enrichment is deliberately minimal: actor affiliation from the catalog,
task start/end correlation, and gap-based sessionization. Records that fail
validation are quarantined to a sidecar file, never silently dropped.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .collector import format_record
from .model import (
    Activity,
    Actor,
    EntityCatalog,
    ExtractionContext,
    ObjectKind,
    ObjectRef,
    RawLogRecord,
    RESERVED_ATTRS,
)

logger = logging.getLogger(__name__)

UNKNOWN_ACTIVITY_CODE = "UnknownActivityCode"
UNKNOWN_OBJECT_KIND = "UnknownObjectKind"
BAD_RESERVED_ATTR = "BadReservedAttr"


@dataclass(frozen=True)
class StructureFailure:
    code: str
    token: str
    record: RawLogRecord


def to_context(record: RawLogRecord, catalog: EntityCatalog) -> ExtractionContext | StructureFailure:
    """Validate a raw record against the enumerations and resolve the actor.

    Timestamp, actor id, and object id pass through untouched; ``seq`` stays 0
    until the store assigns one.
    """
    try:
        activity = Activity(record.activity_code)
    except ValueError:
        return StructureFailure(UNKNOWN_ACTIVITY_CODE, record.activity_code, record)
    try:
        kind = ObjectKind(record.object_kind)
    except ValueError:
        return StructureFailure(UNKNOWN_OBJECT_KIND, record.object_kind, record)

    attrs = dict(record.attrs)
    for key, allowed in RESERVED_ATTRS.items():
        if key in attrs and allowed is not None and attrs[key] not in allowed:
            return StructureFailure(BAD_RESERVED_ATTR, f"{key}={attrs[key]}", record)

    return ExtractionContext(
        timestamp=record.timestamp,
        activity=activity,
        object=ObjectRef(kind, record.object_id),
        actor=Actor(record.actor_id, catalog.affiliation_of(record.actor_id)),
        attrs=attrs,
    )


class QuarantineWriter:
    """Sidecar NDJSON audit log for inputs that failed parsing or validation."""

    def __init__(self, store_path: str | Path | None):
        self.path = Path(f"{store_path}.quarantine.ndjson") if store_path else None
        self.count = 0

    def write_raw(self, line_no: int, code: str, token: str, line: str) -> None:
        self.count += 1
        if self.path is None:
            return
        entry = {"line_no": line_no, "code": code, "token": token, "line": line}
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")

    def write(self, failure: StructureFailure) -> None:
        self.write_raw(failure.record.source_line_no, failure.code, failure.token,
                       format_record(failure.record))


class TaskSpanStatus(str, Enum):
    CLOSED = "CLOSED"          # start and end both observed
    OPEN = "OPEN"              # start without an end (yet)
    ORPHAN = "ORPHAN"          # end without a start
    SUPERSEDED = "SUPERSEDED"  # start re-opened before the previous one ended


@dataclass(frozen=True)
class TaskSpan:
    task_id: str
    object: ObjectRef
    actor_id: str
    start: datetime | None
    end: datetime | None
    status: TaskSpanStatus

    @property
    def duration_s(self) -> int | None:
        if self.start is None or self.end is None:
            return None
        return int((self.end - self.start).total_seconds())


@dataclass
class TaskCorrelation:
    spans: list[TaskSpan] = field(default_factory=list)
    anomalies: list[str] = field(default_factory=list)

    def closed(self) -> list[TaskSpan]:
        return [s for s in self.spans if s.status is TaskSpanStatus.CLOSED]


def correlate_tasks(contexts: Iterable[ExtractionContext]) -> TaskCorrelation:
    """Pair phase=start and phase=end events into task spans, keyed by task id.

    The earliest start and the earliest subsequent end close a span. An end
    with no open start is an orphan; a second start on an open task supersedes
    the first (a flagged anomaly, the old span never closes). Events without
    task attributes are ignored, so interleaved unrelated activity cannot
    change the result.
    """
    result = TaskCorrelation()
    open_spans: dict[str, TaskSpan] = {}

    for ctx in contexts:
        task_id = ctx.attrs.get("task")
        phase = ctx.attrs.get("phase")
        if task_id is None or phase is None:
            continue
        if phase == "start":
            previous = open_spans.get(task_id)
            if previous is not None:
                result.spans.append(TaskSpan(
                    task_id, previous.object, previous.actor_id,
                    previous.start, None, TaskSpanStatus.SUPERSEDED))
                result.anomalies.append(
                    f"task {task_id}: start at {ctx.timestamp.isoformat()} while still open")
            open_spans[task_id] = TaskSpan(
                task_id, ctx.object, ctx.actor.id, ctx.timestamp, None, TaskSpanStatus.OPEN)
        elif phase == "end":
            started = open_spans.pop(task_id, None)
            if started is None:
                result.spans.append(TaskSpan(
                    task_id, ctx.object, ctx.actor.id, None, ctx.timestamp, TaskSpanStatus.ORPHAN))
                result.anomalies.append(
                    f"task {task_id}: end at {ctx.timestamp.isoformat()} with no start")
            else:
                result.spans.append(TaskSpan(
                    task_id, started.object, started.actor_id,
                    started.start, ctx.timestamp, TaskSpanStatus.CLOSED))

    result.spans.extend(open_spans.values())
    return result


@dataclass(frozen=True)
class Session:
    actor_id: str
    object: ObjectRef
    activity: Activity
    first: datetime
    last: datetime
    event_count: int

    @property
    def duration_s(self) -> int:
        return int((self.last - self.first).total_seconds())


def _gap_runs(stamps: Sequence[ExtractionContext], gap_s: int) -> list[list[ExtractionContext]]:
    runs: list[list[ExtractionContext]] = [[stamps[0]]]
    for ctx in stamps[1:]:
        if (ctx.timestamp - runs[-1][-1].timestamp).total_seconds() <= gap_s:
            runs[-1].append(ctx)
        else:
            runs.append([ctx])
    return runs


def sessionize(contexts: Iterable[ExtractionContext], activity: Activity, gap_s: int) -> list[Session]:
    """Group events of one activity into maximal runs per (actor, object).

    Consecutive events stay in a session while the gap is at most ``gap_s``
    seconds; equal timestamps are ordered by seq so results are deterministic
    at second precision.
    """
    partitions: dict[tuple[str, ObjectRef], list[ExtractionContext]] = {}
    for ctx in contexts:
        if ctx.activity is activity:
            partitions.setdefault((ctx.actor.id, ctx.object), []).append(ctx)

    sessions: list[Session] = []
    for (actor_id, obj), events in partitions.items():
        events.sort(key=lambda c: (c.timestamp, c.seq))
        for run in _gap_runs(events, gap_s):
            sessions.append(Session(
                actor_id=actor_id,
                object=obj,
                activity=activity,
                first=run[0].timestamp,
                last=run[-1].timestamp,
                event_count=len(run),
            ))
    return sessions
