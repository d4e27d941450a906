"""Notifier: evaluates regulator-defined alert rules against indicator snapshots.

Rules are edge-triggered: a rule fires when its predicate flips false->true,
and again while it stays true only after its cooldown elapses. It re-arms as
soon as the predicate goes false. Equality comparators are excluded on
purpose; they are fragile against fractional indicator values.
"""

from __future__ import annotations

import json
import logging
import operator
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from pathlib import Path

from .model import format_instant, parse_instant
from .statistics import (
    ALL_TIME,
    GLOBAL,
    INDICATOR_SCOPES,
    IndicatorSnapshot,
    Scope,
    Window,
)

logger = logging.getLogger(__name__)

COMPARATORS = {
    ">=": operator.ge,
    ">": operator.gt,
    "<=": operator.le,
    "<": operator.lt,
}


class AlertLevel(str, Enum):
    INFO = "INFO"
    WARNING = "WARNING"
    CRITICAL = "CRITICAL"


class RuleError(Exception):
    def __init__(self, code: str, detail: str, position: int | None = None):
        at = f" (rule #{position})" if position is not None else ""
        super().__init__(f"{code}: {detail}{at}")
        self.code = code
        self.detail = detail
        self.position = position


class UnknownIndicator(RuleError):
    def __init__(self, detail: str, position: int | None = None):
        super().__init__("UnknownIndicator", detail, position)


class ScopeMismatch(RuleError):
    def __init__(self, detail: str, position: int | None = None):
        super().__init__("ScopeMismatch", detail, position)


@dataclass(frozen=True)
class AlertRule:
    rule_id: str
    indicator_id: str
    comparator: str
    threshold: float
    level: AlertLevel = AlertLevel.WARNING
    scope: Scope = GLOBAL
    window_s: int | None = None      # trailing seconds; None = all time
    cooldown_s: int | None = None    # None = never re-fire while true

    def window_for(self, end: datetime) -> Window:
        """Resolve the rule's trailing window against the snapshot's end time."""
        if self.window_s is None:
            return ALL_TIME
        from datetime import timedelta
        return Window(start=end - timedelta(seconds=self.window_s), end=None)

    def to_json_obj(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "indicator_id": self.indicator_id,
            "scope": self.scope.to_json_obj(),
            "comparator": self.comparator,
            "threshold": self.threshold,
            "level": self.level.value,
            "window_s": self.window_s,
            "cooldown_s": self.cooldown_s,
        }


def parse_rule(obj: dict, position: int | None = None) -> AlertRule:
    """Validate one rule object; raises RuleError naming the position."""
    try:
        rule_id = str(obj["rule_id"])
        indicator_id = str(obj["indicator_id"]).upper()
        comparator = str(obj["comparator"])
        threshold = float(obj["threshold"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RuleError("BadRule", f"missing or invalid field: {exc}", position)

    if comparator not in COMPARATORS:
        raise RuleError("BadComparator", f"comparator {comparator!r} not in {sorted(COMPARATORS)}", position)
    allowed = INDICATOR_SCOPES.get(indicator_id)
    if allowed is None:
        raise UnknownIndicator(indicator_id, position)
    scope = Scope.from_json_obj(obj.get("scope"))
    if scope.kind not in allowed:
        raise ScopeMismatch(f"{indicator_id} does not support {scope.kind} scope", position)

    level = AlertLevel(obj.get("level", "WARNING"))
    window_s = obj.get("window_s")
    cooldown_s = obj.get("cooldown_s")
    return AlertRule(
        rule_id=rule_id,
        indicator_id=indicator_id,
        comparator=comparator,
        threshold=threshold,
        level=level,
        scope=scope,
        window_s=int(window_s) if window_s is not None else None,
        cooldown_s=int(cooldown_s) if cooldown_s is not None else None,
    )


def parse_rules(data: list) -> list[AlertRule]:
    rules: list[AlertRule] = []
    seen: set[str] = set()
    for i, obj in enumerate(data):
        rule = parse_rule(obj, position=i)
        if rule.rule_id in seen:
            raise RuleError("DuplicateRuleId", rule.rule_id, position=i)
        seen.add(rule.rule_id)
        rules.append(rule)
    return rules


def load_rules(path: str | Path) -> list[AlertRule]:
    """Load and validate a JSON rule file (an array of rule objects)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, list):
        raise RuleError("BadRule", "rules file must contain a JSON array")
    return parse_rules(data)


@dataclass(frozen=True)
class Notification:
    rule_id: str
    fired_at: datetime
    observed: float
    threshold: float
    level: AlertLevel
    scope: Scope
    as_of_seq: int
    message: str

    def to_json_obj(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "fired_at": format_instant(self.fired_at),
            "observed": self.observed,
            "threshold": self.threshold,
            "level": self.level.value,
            "scope": self.scope.to_json_obj(),
            "as_of_seq": self.as_of_seq,
            "message": self.message,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Notification":
        return cls(
            rule_id=obj["rule_id"],
            fired_at=parse_instant(obj["fired_at"]),
            observed=float(obj["observed"]),
            threshold=float(obj["threshold"]),
            level=AlertLevel(obj["level"]),
            scope=Scope.from_json_obj(obj["scope"]),
            as_of_seq=int(obj["as_of_seq"]),
            message=obj["message"],
        )


@dataclass(frozen=True)
class RuleState:
    predicate_true: bool = False
    last_fired_at: datetime | None = None


EvalState = dict[str, RuleState]  # rule_id -> state; the sole mutable carry-over


def rule_requests(rules: list[AlertRule], end: datetime):
    """The (indicator, scope, window) combinations a snapshot must cover."""
    return [(r.indicator_id, r.scope, r.window_for(end)) for r in rules]


def evaluate_rules(snapshot: IndicatorSnapshot, rules: list[AlertRule],
                   state: EvalState | None, now: datetime) -> tuple[list[Notification], EvalState]:
    """One evaluation tick of the rule state machine.

    The snapshot must cover every indicator a rule references; a gap raises
    UnknownIndicator rather than skipping silently. Returns the notifications
    fired this tick and the next state.
    """
    state = dict(state or {})
    fired: list[Notification] = []

    for rule in rules:
        window = rule.window_for(snapshot.computed_at)
        value = snapshot.get(rule.indicator_id, rule.scope, window)
        if value is None:
            raise UnknownIndicator(
                f"snapshot has no value for {rule.indicator_id} "
                f"scope={rule.scope.token()} window={window.token()} (rule {rule.rule_id})")

        true_now = COMPARATORS[rule.comparator](value.value, rule.threshold)
        prev = state.get(rule.rule_id, RuleState())

        should_fire = False
        if true_now and not prev.predicate_true:
            should_fire = True
        elif true_now and prev.predicate_true and rule.cooldown_s is not None:
            elapsed = (now - prev.last_fired_at).total_seconds() if prev.last_fired_at else None
            should_fire = elapsed is None or elapsed >= rule.cooldown_s

        if should_fire:
            fired.append(Notification(
                rule_id=rule.rule_id,
                fired_at=now,
                observed=value.value,
                threshold=rule.threshold,
                level=rule.level,
                scope=rule.scope,
                as_of_seq=snapshot.as_of_seq,
                message=(f"{rule.indicator_id} {rule.comparator} {rule.threshold:g}: "
                         f"observed {value.value:g} ({rule.scope.token()})"),
            ))
            state[rule.rule_id] = RuleState(predicate_true=True, last_fired_at=now)
        else:
            state[rule.rule_id] = replace(prev, predicate_true=true_now)

    return fired, state


class SinkUnreachable(Exception):
    pass


@dataclass
class Dispatcher:
    """Fans notifications out to the journal (always) and optional sinks."""

    journal_path: str | Path
    webhook_url: str | None = None
    echo: bool = False
    timeout_s: float = 5.0

    def dispatch(self, notification: Notification) -> dict[str, str]:
        report: dict[str, str] = {}
        line = notification.to_json_line()

        with Path(self.journal_path).open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
        report["journal"] = "ok"

        if self.webhook_url:
            try:
                import httpx

                response = httpx.post(self.webhook_url, content=line,
                                      headers={"content-type": "application/json"},
                                      timeout=self.timeout_s)
                report["webhook"] = "ok" if response.is_success else "failed"
            except Exception as exc:
                logger.warning("webhook %s unreachable: %s", self.webhook_url, exc)
                report["webhook"] = "failed"

        if self.echo:
            print(line)
            report["stdout"] = "ok"

        return report

    def dispatch_all(self, notifications: list[Notification]) -> list[dict[str, str]]:
        return [self.dispatch(n) for n in notifications]


def replay(store, rules: list[AlertRule], config=None, journal_path: str | Path | None = None,
           step: int = 1, echo: bool = False) -> list[Notification]:
    """Offline rule evaluation over store prefixes at seq = step, 2*step, ..., last.

    Deterministic for a given (store, rules, step): notification times come
    from event time, never the wall clock, so two replays of the same store
    produce byte-identical journals.
    """
    from .statistics import IndicatorConfig, event_time, snapshot_indicators

    if step <= 0:
        raise ValueError("step must be positive")
    config = config or IndicatorConfig()
    dispatcher = Dispatcher(journal_path, echo=echo) if journal_path else None

    seqs = list(range(step, store.last_seq + 1, step))
    if not seqs or seqs[-1] != store.last_seq:
        seqs.append(store.last_seq)

    state: EvalState = {}
    fired: list[Notification] = []
    for seq in seqs:
        snap = store.snapshot(seq)
        end = event_time(snap)
        indicators = snapshot_indicators(snap, config, rule_requests(rules, end))
        notifications, state = evaluate_rules(indicators, rules, state,
                                              now=indicators.computed_at)
        if dispatcher:
            dispatcher.dispatch_all(notifications)
        fired.extend(notifications)
    return fired


def read_journal(path: str | Path) -> list[Notification]:
    journal = Path(path)
    if not journal.exists():
        return []
    out = []
    for line in journal.read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(Notification.from_json_obj(json.loads(line)))
    return out
