"""Domain types shared by every stage of the observation pipeline.

The atomic trace unit is the extraction context: an (activity, object, actor)
triplet with a timestamp and free-form attributes.  Everything downstream
(measures, indicators, alerts, dashboards) is computed over sequences of these.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

logger = logging.getLogger(__name__)


class Activity(str, Enum):
    """The nine activity codes a server action can carry."""

    CREATE = "CREATE"
    UPDATE = "UPDATE"
    DELETE = "DELETE"
    LINK = "LINK"
    STATUS = "STATUS"
    LOCK = "LOCK"
    VIEW = "VIEW"
    INDEX = "INDEX"
    SEARCH = "SEARCH"


# Read/write partition: VIEW and SEARCH only observe, everything else modifies.
READ_ACTIVITIES = frozenset({Activity.VIEW, Activity.SEARCH})
MODIFICATION_ACTIVITIES = frozenset(Activity) - READ_ACTIVITIES


class ObjectKind(str, Enum):
    DOCUMENT = "DOCUMENT"
    CAD_MODEL = "CAD_MODEL"
    ASSEMBLY = "ASSEMBLY"
    FORM = "FORM"
    PART = "PART"
    PROCESS_MODEL = "PROCESS_MODEL"


class Affiliation(str, Enum):
    INTERNAL = "INTERNAL"
    EXTERNAL = "EXTERNAL"


class LogLevel(str, Enum):
    INFO = "INFO"
    WARN = "WARN"
    ERROR = "ERROR"


class Granularity(str, Enum):
    """Object slot resolution when keying triplets."""

    OBJECT_IDENTITY = "OBJECT_IDENTITY"  # kind:id
    OBJECT_KIND = "OBJECT_KIND"          # kind only


_TOKEN_RE = re.compile(r"^[A-Za-z0-9_-]+$")

# Reserved attribute keys and their admissible values (None = free token).
RESERVED_ATTRS: dict[str, frozenset[str] | None] = {
    "outcome": frozenset({"approved", "refused"}),
    "task": None,
    "phase": frozenset({"start", "end"}),
    "role": frozenset({"input", "output"}),
}


def is_token(s: str) -> bool:
    return bool(_TOKEN_RE.match(s))


def parse_instant(text: str) -> datetime:
    """Parse an ISO-8601 UTC instant ('...Z'), truncating to second precision."""
    raw = text.strip()
    if raw.endswith("Z"):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


def format_instant(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class ObjectRef:
    """Opaque reference to a PLM object. (kind, id) is the identity."""

    kind: ObjectKind
    id: str

    def __post_init__(self) -> None:
        if not is_token(self.id):
            raise ValueError(f"object id is not a token: {self.id!r}")

    @property
    def token(self) -> str:
        return f"{self.kind.value}:{self.id}"

    @classmethod
    def from_token(cls, token: str) -> "ObjectRef":
        kind, _, oid = token.partition(":")
        return cls(ObjectKind(kind), oid)


@dataclass(frozen=True)
class Actor:
    id: str
    affiliation: Affiliation = Affiliation.INTERNAL


@dataclass(frozen=True)
class RawLogRecord:
    """One parsed log line, before any semantic validation.

    Tokens are kept as-parsed; checking them against the enumerations is the
    structurer's job, not the collector's.
    """

    timestamp: datetime
    level: LogLevel
    actor_id: str
    activity_code: str
    object_kind: str
    object_id: str
    attrs: tuple[tuple[str, str], ...]  # ordered, as they appeared on the line
    source_line_no: int

    def content_key(self) -> tuple:
        """Identity for duplicate detection: every field except the line number."""
        return (self.timestamp, self.level, self.actor_id, self.activity_code,
                self.object_kind, self.object_id, self.attrs)


@dataclass(frozen=True)
class ExtractionContext:
    """The structured trace unit: triplet + timestamp + attributes.

    ``seq`` is 0 until the store assigns one at append time.
    """

    timestamp: datetime
    activity: Activity
    object: ObjectRef
    actor: Actor
    attrs: dict[str, str] = field(default_factory=dict)
    seq: int = 0

    def content_key(self) -> tuple:
        return (self.timestamp, self.activity, self.object.kind, self.object.id,
                self.actor.id, tuple(sorted(self.attrs.items())))

    def to_json_obj(self) -> dict:
        return {
            "seq": self.seq,
            "ts": format_instant(self.timestamp),
            "activity": self.activity.value,
            "kind": self.object.kind.value,
            "oid": self.object.id,
            "actor": self.actor.id,
            "affiliation": self.actor.affiliation.value,
            "attrs": dict(self.attrs),
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ExtractionContext":
        return cls(
            timestamp=parse_instant(obj["ts"]),
            activity=Activity(obj["activity"]),
            object=ObjectRef(ObjectKind(obj["kind"]), obj["oid"]),
            actor=Actor(obj["actor"], Affiliation(obj.get("affiliation", "INTERNAL"))),
            attrs=dict(obj.get("attrs", {})),
            seq=int(obj.get("seq", 0)),
        )


TripletKey = tuple[str, str, str]  # (activity, object, actor); "*" marks a collapsed slot


def triplet_key(ctx: ExtractionContext, granularity: Granularity = Granularity.OBJECT_IDENTITY) -> TripletKey:
    """Project a context onto its (activity, object, actor) key."""
    if granularity is Granularity.OBJECT_KIND:
        obj = ctx.object.kind.value
    else:
        obj = ctx.object.token
    return (ctx.activity.value, obj, ctx.actor.id)


@dataclass
class EntityCatalog:
    """Actor affiliations and per-task-type deadlines.

    Deadlines are matched by the longest task-id prefix present in
    ``task_deadlines``; tasks with no matching prefix get ``default_deadline_s``.
    """

    actors: dict[str, Affiliation] = field(default_factory=dict)
    task_deadlines: dict[str, int] = field(default_factory=dict)
    default_deadline_s: int = 3600
    _warned: set = field(default_factory=set, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.default_deadline_s <= 0:
            raise ValueError("default_deadline_s must be positive")

    def affiliation_of(self, actor_id: str) -> Affiliation:
        aff = self.actors.get(actor_id)
        if aff is None:
            if actor_id not in self._warned:
                self._warned.add(actor_id)
                logger.warning("actor %s not in catalog, defaulting to INTERNAL", actor_id)
            return Affiliation.INTERNAL
        return aff

    def deadline_for(self, task_id: str) -> int:
        best = None
        for prefix, seconds in self.task_deadlines.items():
            if task_id.startswith(prefix) and (best is None or len(prefix) > len(best[0])):
                best = (prefix, seconds)
        return best[1] if best else self.default_deadline_s

    @classmethod
    def load(cls, path: str | Path) -> "EntityCatalog":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            actors={k: Affiliation(v) for k, v in data.get("actors", {}).items()},
            task_deadlines={k: int(v) for k, v in data.get("task_deadlines", {}).items()},
            default_deadline_s=int(data.get("default_deadline_s", 3600)),
        )
