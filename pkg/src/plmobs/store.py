"""Append-only NDJSON trace store with sequence-pinned snapshots.

One ``ExtractionContext`` per line. Records are never mutated or removed;
reloading the file reproduces the in-memory sequence exactly. A single writer
appends (serialized by a lock); readers work on immutable snapshots.
"""

from __future__ import annotations

import json
import threading
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

from .model import ExtractionContext


class Snapshot:
    """Immutable view of the store prefix up to ``as_of_seq``."""

    __slots__ = ("records", "as_of_seq")

    def __init__(self, records: tuple[ExtractionContext, ...]):
        self.records = records
        self.as_of_seq = records[-1].seq if records else 0

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


class TraceStore:
    """Single-writer append-only store, optionally persisted to an NDJSON file."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._records: list[ExtractionContext] = []
        self._content_keys: set[tuple] = set()
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        assert self.path is not None
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                ctx = ExtractionContext.from_json_obj(json.loads(line))
                self._records.append(ctx)
                self._content_keys.add(ctx.content_key())

    def append(self, ctx: ExtractionContext) -> ExtractionContext:
        """Assign the next seq, persist, and return the finalized record."""
        with self._lock:
            finalized = replace(ctx, seq=len(self._records) + 1)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(finalized.to_json_line() + "\n")
            self._records.append(finalized)
            self._content_keys.add(finalized.content_key())
            return finalized

    def append_all(self, contexts: Iterable[ExtractionContext]) -> list[ExtractionContext]:
        return [self.append(c) for c in contexts]

    def contains_equivalent(self, ctx: ExtractionContext) -> bool:
        """True if a record with the same content (ignoring seq) was appended before."""
        return ctx.content_key() in self._content_keys

    def snapshot(self, as_of_seq: int | None = None) -> Snapshot:
        with self._lock:
            records = tuple(self._records)
        if as_of_seq is not None:
            records = records[:as_of_seq]
        return Snapshot(records)

    @property
    def last_seq(self) -> int:
        return len(self._records)

    def records_after(self, seq: int, limit: int | None = None) -> Sequence[ExtractionContext]:
        with self._lock:
            out = self._records[seq:]
        return out[:limit] if limit is not None else out
