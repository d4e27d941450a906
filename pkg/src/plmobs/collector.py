"""Collector: reads server log lines and turns them into raw records.

Canonical line grammar (single-space separated, attr values without spaces):

    <ISO-8601 UTC Z> <LEVEL> [<actor>] <ACTIVITY> <KIND>:<id> [key=value ...]

Lines that do not match (interleaved stack traces, debug chatter, truncated
writes) are skipped with a counted warning unless the grammar is strict.
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .model import LogLevel, RawLogRecord, parse_instant

logger = logging.getLogger(__name__)

MALFORMED_TIMESTAMP = "MalformedTimestamp"
MISSING_FIELD = "MissingField"
BAD_ATTR_SYNTAX = "BadAttrSyntax"

_FIELD_NAMES = ("timestamp", "level", "actor", "activity", "object")


class SourceUnavailable(Exception):
    pass


class StrictParseAbort(Exception):
    def __init__(self, failure: "ParseFailure"):
        super().__init__(f"line {failure.line_no}: {failure.code} ({failure.token})")
        self.failure = failure


@dataclass(frozen=True)
class LogGrammar:
    strict: bool = False


@dataclass(frozen=True)
class ParseFailure:
    line_no: int
    code: str   # MalformedTimestamp | MissingField | BadAttrSyntax
    token: str  # the offending token
    line: str


def parse_line(line: str, grammar: LogGrammar = LogGrammar(), line_no: int = 0) -> RawLogRecord | ParseFailure:
    """Parse one line against the canonical grammar.

    Returns the record, or a ``ParseFailure`` naming the offending token.
    """
    parts = line.split()
    if len(parts) < 5:
        missing = _FIELD_NAMES[len(parts)] if len(parts) < len(_FIELD_NAMES) else "object"
        return ParseFailure(line_no, MISSING_FIELD, missing, line)

    try:
        ts = parse_instant(parts[0])
    except ValueError:
        return ParseFailure(line_no, MALFORMED_TIMESTAMP, parts[0], line)

    try:
        level = LogLevel(parts[1])
    except ValueError:
        return ParseFailure(line_no, MISSING_FIELD, parts[1], line)

    actor_tok = parts[2]
    if not (actor_tok.startswith("[") and actor_tok.endswith("]") and len(actor_tok) > 2):
        return ParseFailure(line_no, MISSING_FIELD, actor_tok, line)
    actor_id = actor_tok[1:-1]

    activity_code = parts[3]

    obj_tok = parts[4]
    kind, sep, oid = obj_tok.partition(":")
    if not sep or not kind or not oid:
        return ParseFailure(line_no, MISSING_FIELD, obj_tok, line)

    attrs: list[tuple[str, str]] = []
    for tok in parts[5:]:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            return ParseFailure(line_no, BAD_ATTR_SYNTAX, tok, line)
        attrs.append((key, value))

    return RawLogRecord(
        timestamp=ts,
        level=level,
        actor_id=actor_id,
        activity_code=activity_code,
        object_kind=kind,
        object_id=oid,
        attrs=tuple(attrs),
        source_line_no=line_no,
    )


def format_record(record: RawLogRecord) -> str:
    """Emit a record back into its canonical line form (the simulator's emitter)."""
    from .model import format_instant

    head = (f"{format_instant(record.timestamp)} {record.level.value} [{record.actor_id}] "
            f"{record.activity_code} {record.object_kind}:{record.object_id}")
    if record.attrs:
        head += " " + " ".join(f"{k}={v}" for k, v in record.attrs)
    return head


def _sort_key(r: RawLogRecord) -> tuple:
    # Full-content tiebreak keeps the output independent of input permutation.
    return (r.timestamp, r.source_line_no, r.level.value, r.actor_id,
            r.activity_code, r.object_kind, r.object_id, r.attrs)


def clean_records(records: Iterable[RawLogRecord]) -> list[RawLogRecord]:
    """Time-order records and drop exact duplicates (line number excluded).

    Non-action lines never reach this stage: anything that fails the grammar
    is already skipped at parse time. Idempotent and permutation-insensitive.
    """
    out: list[RawLogRecord] = []
    seen: set[tuple] = set()
    for record in sorted(records, key=_sort_key):
        key = record.content_key()
        if key in seen:
            continue
        seen.add(key)
        out.append(record)
    return out


@dataclass
class CollectStats:
    parsed: int = 0
    skipped: int = 0
    failures: list[ParseFailure] = field(default_factory=list)


def collect_stream(
    source: str | Path,
    grammar: LogGrammar = LogGrammar(),
    since=None,
    follow: bool = False,
    poll_interval_s: float = 0.5,
    stats: CollectStats | None = None,
    stop: threading.Event | None = None,
) -> Iterator[RawLogRecord]:
    """Yield parsed records from a log file, optionally tailing it as it grows.

    Records older than ``since`` are filtered out. Malformed lines are skipped
    and counted in ``stats`` unless the grammar is strict, in which case the
    first one aborts the stream.
    """
    path = Path(source)
    if not path.exists():
        raise SourceUnavailable(str(path))
    if stats is None:
        stats = CollectStats()

    line_no = 0
    with path.open(encoding="utf-8") as fh:
        while True:
            pos = fh.tell() if follow else 0
            line = fh.readline()
            if not line:
                if not follow or (stop is not None and stop.is_set()):
                    break
                time.sleep(poll_interval_s)
                continue
            if follow and not line.endswith("\n"):
                # partial write at the tail; rewind and wait for the rest
                fh.seek(pos)
                time.sleep(poll_interval_s)
                continue
            line_no += 1
            if not line.strip():
                continue
            result = parse_line(line, grammar, line_no)
            if isinstance(result, ParseFailure):
                if grammar.strict:
                    raise StrictParseAbort(result)
                stats.skipped += 1
                stats.failures.append(result)
                logger.warning("skipping malformed line %d: %s (%s)", line_no, result.code, result.token)
                continue
            if since is not None and result.timestamp < since:
                continue
            stats.parsed += 1
            yield result

    if stats.skipped:
        logger.info("collection finished: %d parsed, %d skipped", stats.parsed, stats.skipped)


def collect_file(source: str | Path, grammar: LogGrammar = LogGrammar(),
                 since=None, stats: CollectStats | None = None) -> list[RawLogRecord]:
    """Parse-then-clean a static file: the batch form of ``collect_stream``."""
    return clean_records(collect_stream(source, grammar, since=since, stats=stats))


def parse_lines(lines: Sequence[str], grammar: LogGrammar = LogGrammar(),
                stats: CollectStats | None = None) -> list[RawLogRecord]:
    """Parse an in-memory batch of lines, collecting failures into ``stats``."""
    if stats is None:
        stats = CollectStats()
    records: list[RawLogRecord] = []
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        result = parse_line(line, grammar, i)
        if isinstance(result, ParseFailure):
            if grammar.strict:
                raise StrictParseAbort(result)
            stats.skipped += 1
            stats.failures.append(result)
            continue
        stats.parsed += 1
        records.append(result)
    return records
