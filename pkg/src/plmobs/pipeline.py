"""Collect -> structure -> append orchestration shared by the CLI and service."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .collector import CollectStats, LogGrammar, parse_lines
from .model import EntityCatalog, ExtractionContext, RESERVED_ATTRS
from .store import TraceStore
from .structurer import QuarantineWriter, StructureFailure, to_context


@dataclass
class IngestResult:
    accepted: int = 0
    quarantined: int = 0
    last_seq: int = 0

    def to_json_obj(self) -> dict:
        return {"accepted": self.accepted, "quarantined": self.quarantined,
                "last_seq": self.last_seq}


def _append_deduped(store: TraceStore, contexts: Iterable[ExtractionContext]) -> int:
    accepted = 0
    for ctx in contexts:
        if store.contains_equivalent(ctx):
            continue
        store.append(ctx)
        accepted += 1
    return accepted


def ingest_records(store: TraceStore, records, catalog: EntityCatalog,
                   quarantine: QuarantineWriter | None = None,
                   parse_failures=()) -> IngestResult:
    """Clean, structure, and dedup-append already-parsed records."""
    from .collector import clean_records

    if quarantine is None:
        quarantine = QuarantineWriter(None)
    for failure in parse_failures:
        quarantine.write_raw(failure.line_no, failure.code, failure.token, failure.line)

    contexts: list[ExtractionContext] = []
    quarantined = len(parse_failures)
    for record in clean_records(records):
        result = to_context(record, catalog)
        if isinstance(result, StructureFailure):
            quarantine.write(result)
            quarantined += 1
        else:
            contexts.append(result)

    accepted = _append_deduped(store, contexts)
    return IngestResult(accepted=accepted, quarantined=quarantined, last_seq=store.last_seq)


def ingest_lines(store: TraceStore, lines: Sequence[str], catalog: EntityCatalog,
                 grammar: LogGrammar = LogGrammar(),
                 quarantine: QuarantineWriter | None = None) -> IngestResult:
    """Run the full pipeline over raw lines; duplicates are skipped, not errors.

    Within the batch, cleaning removes exact duplicates and time-orders the
    records; against the store, re-ingesting an identical line accepts nothing.
    """
    stats = CollectStats()
    records = parse_lines(lines, grammar, stats)
    return ingest_records(store, records, catalog, quarantine, stats.failures)


def ingest_context_objects(store: TraceStore, objects: Sequence[dict], catalog: EntityCatalog,
                           quarantine: QuarantineWriter | None = None) -> IngestResult:
    """Ingest pre-structured context objects (the push-API alternative to lines)."""
    import json

    if quarantine is None:
        quarantine = QuarantineWriter(None)
    contexts: list[ExtractionContext] = []
    quarantined = 0
    for i, obj in enumerate(objects, 1):
        try:
            ctx = ExtractionContext.from_json_obj(obj)
            for key, allowed in RESERVED_ATTRS.items():
                if key in ctx.attrs and allowed is not None and ctx.attrs[key] not in allowed:
                    raise ValueError(f"bad reserved attr {key}={ctx.attrs[key]}")
        except (KeyError, TypeError, ValueError) as exc:
            quarantine.write_raw(i, "BadContextObject", str(exc), json.dumps(obj))
            quarantined += 1
            continue
        contexts.append(ctx)

    # Re-resolve affiliation from the catalog so pushed objects cannot spoof it.
    from .model import Actor
    from dataclasses import replace
    contexts = [replace(c, actor=Actor(c.actor.id, catalog.affiliation_of(c.actor.id)))
                for c in contexts]
    contexts.sort(key=lambda c: c.timestamp)

    accepted = _append_deduped(store, contexts)
    return IngestResult(accepted=accepted, quarantined=quarantined, last_seq=store.last_seq)
