"""Deterministic synthetic PLM activity generator.

Stands in for a real PLM server during tests and demos: emits canonical
grammar log lines from a seeded scenario. The generator is Python's Mersenne
Twister (``random.Random``), which is stable across platforms and versions,
so equal scenarios produce byte-identical output. Activity-mix defaults are
uniform and purely synthetic; the real distribution of PLM actions is not
something this module claims to know.
"""

from __future__ import annotations

import json
import random
from bisect import insort
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .model import Activity, Affiliation, ObjectKind, ObjectRef, parse_instant, format_instant

DEFAULT_START = datetime(2008, 4, 28, 8, 0, 0, tzinfo=timezone.utc)

ANOMALY_KINDS = ("REFUSAL_BURST", "OVERDUE_TASK", "SEARCH_STORM")


class InvalidScenario(Exception):
    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path
        self.detail = detail


@dataclass(frozen=True)
class SimActor:
    id: str
    affiliation: Affiliation = Affiliation.INTERNAL
    weight: float = 1.0


@dataclass(frozen=True)
class Anomaly:
    kind: str
    at_s: int                      # offset from scenario start
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    seed: int
    actors: tuple[SimActor, ...]
    objects: tuple[ObjectRef, ...]
    duration_s: int
    mean_events_per_minute: float
    activity_mix: dict[str, float] = field(default_factory=dict)
    anomalies: tuple[Anomaly, ...] = ()
    start: datetime = DEFAULT_START

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise InvalidScenario("duration_s", "must be positive")
        if self.mean_events_per_minute <= 0:
            raise InvalidScenario("mean_events_per_minute", "must be positive")
        if not self.actors:
            raise InvalidScenario("actors", "at least one actor required")
        if not self.objects:
            raise InvalidScenario("objects", "at least one object required")
        for i, actor in enumerate(self.actors):
            if actor.weight < 0:
                raise InvalidScenario(f"actors[{i}].weight", "must be non-negative")
        if all(a.weight == 0 for a in self.actors):
            raise InvalidScenario("actors", "at least one positive weight required")
        for code, weight in self.activity_mix.items():
            if code not in Activity.__members__:
                raise InvalidScenario(f"activity_mix.{code}", "unknown activity code")
            if weight < 0:
                raise InvalidScenario(f"activity_mix.{code}", "must be non-negative")
        if self.activity_mix and all(w == 0 for w in self.activity_mix.values()):
            raise InvalidScenario("activity_mix", "at least one positive weight required")
        for i, anomaly in enumerate(self.anomalies):
            if anomaly.kind not in ANOMALY_KINDS:
                raise InvalidScenario(f"anomalies[{i}].kind", f"unknown kind {anomaly.kind!r}")
            if anomaly.at_s < 0:
                raise InvalidScenario(f"anomalies[{i}].at", "must be non-negative")

    @classmethod
    def from_json_obj(cls, data: dict) -> "Scenario":
        try:
            actors = tuple(
                SimActor(a["id"], Affiliation(a.get("affiliation", "INTERNAL")),
                         float(a.get("weight", 1.0)))
                for a in data.get("actors", []))
            objects = tuple(ObjectRef(ObjectKind(o["kind"]), o["id"])
                            for o in data.get("objects", []))
            anomalies = tuple(
                Anomaly(a["kind"], int(a["at"]), dict(a.get("params", {})))
                for a in data.get("anomalies", []))
            scenario = cls(
                seed=int(data["seed"]),
                actors=actors,
                objects=objects,
                duration_s=int(data["duration_s"]),
                mean_events_per_minute=float(data["mean_events_per_minute"]),
                activity_mix={k: float(v) for k, v in data.get("activity_mix", {}).items()},
                anomalies=anomalies,
                start=parse_instant(data["start"]) if "start" in data else DEFAULT_START,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScenario("scenario", f"bad field: {exc}")
        scenario.validate()
        return scenario

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_json_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def _emit(ts: datetime, actor: str, activity: str, obj: ObjectRef, attrs: dict[str, str]) -> str:
    line = f"{format_instant(ts)} INFO [{actor}] {activity} {obj.token}"
    if attrs:
        line += " " + " ".join(f"{k}={v}" for k, v in attrs.items())
    return line


def _base_stream(scenario: Scenario, rng: random.Random) -> list[tuple[datetime, str]]:
    codes = [c.value for c in Activity]
    weights = [scenario.activity_mix.get(c, 0.0) for c in codes] if scenario.activity_mix \
        else [1.0] * len(codes)
    actor_ids = [a.id for a in scenario.actors]
    actor_weights = [a.weight for a in scenario.actors]
    mean_gap_s = 60.0 / scenario.mean_events_per_minute

    lines: list[tuple[datetime, str]] = []
    t = 0.0
    while True:
        t += rng.expovariate(1.0 / mean_gap_s)
        offset = int(t)  # truncate to second precision
        if offset >= scenario.duration_s:
            break
        ts = scenario.start + timedelta(seconds=offset)
        actor = rng.choices(actor_ids, weights=actor_weights)[0]
        activity = rng.choices(codes, weights=weights)[0]
        obj = scenario.objects[rng.randrange(len(scenario.objects))]
        attrs: dict[str, str] = {}
        if activity == Activity.STATUS.value:
            attrs["outcome"] = "refused" if rng.random() < 0.2 else "approved"
        lines.append((ts, _emit(ts, actor, activity, obj, attrs)))
    return lines


def _anomaly_events(anomaly: Anomaly, start: datetime,
                    default_actor: str, default_object: ObjectRef) -> list[tuple[datetime, str]]:
    at = start + timedelta(seconds=anomaly.at_s)
    p = anomaly.params
    actor = p.get("actor", default_actor)
    obj = ObjectRef.from_token(p["object"]) if "object" in p else default_object
    events: list[tuple[datetime, str]] = []

    if anomaly.kind == "REFUSAL_BURST":
        count = int(p.get("count", 5))
        spacing = int(p.get("spacing_s", 60))
        for i in range(count):
            ts = at + timedelta(seconds=i * spacing)
            events.append((ts, _emit(ts, actor, "STATUS", obj, {"outcome": "refused"})))

    elif anomaly.kind == "SEARCH_STORM":
        n = int(p.get("n", 10))
        gap = int(p.get("gap_s", 60))
        for i in range(n):
            ts = at + timedelta(seconds=i * gap)
            events.append((ts, _emit(ts, actor, "SEARCH", obj, {})))

    elif anomaly.kind == "OVERDUE_TASK":
        task_id = p.get("task_id", f"T-overdue-{anomaly.at_s}")
        deadline_s = int(p.get("deadline_s", 3600))
        factor = float(p.get("deadline_factor", 2.0))
        end = at + timedelta(seconds=int(deadline_s * factor))
        events.append((at, _emit(at, actor, "UPDATE", obj,
                                 {"task": task_id, "phase": "start", "role": "input"})))
        events.append((end, _emit(end, actor, "STATUS", obj,
                                  {"task": task_id, "phase": "end", "role": "output"})))
    return events


def inject_anomaly(lines: list[str], anomaly: Anomaly, start: datetime = DEFAULT_START,
                   actor: str = "u1",
                   obj: ObjectRef = ObjectRef(ObjectKind.DOCUMENT, "D1")) -> list[str]:
    """Splice anomaly events into a timestamp-ordered line list; base lines unchanged."""
    stamped = [(parse_instant(line.split(" ", 1)[0]), line) for line in lines]
    for event in _anomaly_events(anomaly, start, actor, obj):
        insort(stamped, event)
    return [line for _, line in stamped]


def generate(scenario: Scenario) -> list[str]:
    """Generate the scenario's full log, timestamp-ordered and grammar-clean."""
    scenario.validate()
    rng = random.Random(scenario.seed)
    stamped = _base_stream(scenario, rng)
    stamped.sort(key=lambda pair: pair[0])

    lines = [line for _, line in stamped]
    default_actor = scenario.actors[0].id
    default_object = scenario.objects[0]
    for anomaly in scenario.anomalies:
        lines = inject_anomaly(lines, anomaly, scenario.start, default_actor, default_object)
    return lines
