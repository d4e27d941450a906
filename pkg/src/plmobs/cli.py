"""Operator entry point: batch pipeline commands plus the service runner.

Exit codes: 0 success, 1 operational error, 2 usage error. With --json the
standard stream carries machine-readable JSON only; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from filelock import FileLock, Timeout

from .collector import CollectStats, LogGrammar, SourceUnavailable, StrictParseAbort, collect_stream
from .model import EntityCatalog, Granularity, ObjectRef, parse_instant
from .notifier import RuleError, load_rules, read_journal, replay
from .pipeline import ingest_records
from .service import ENV_ADDR, ENV_STORE, create_app
from .simulator import InvalidScenario, Scenario, generate
from .statistics import (
    GLOBAL,
    EmptyWindowError,
    IndicatorConfig,
    MeasureFunction,
    MeasureSpec,
    Scope,
    Window,
    WrongObjectKind,
    activities_by_actor,
    activity_share_by_object,
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

DEFAULT_ADDR = "127.0.0.1:8077"


class OperationalError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plmobs",
        description="Trace observation for collaborative PLM activity.")
    parser.add_argument("--store", default=os.environ.get(ENV_STORE, "trace.ndjson"),
                        help="trace store NDJSON file (env OBSERVATORY_STORE)")
    parser.add_argument("--catalog", help="entity catalog JSON file")
    parser.add_argument("--rules", help="alert rules JSON file")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--gap", type=int, default=1800, help="IP7 session gap seconds")
    parser.add_argument("--granularity", default="OBJECT_IDENTITY",
                        choices=[g.value for g in Granularity])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="collect, structure, and append log files")
    p.add_argument("logs", nargs="+", metavar="LOG")
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")
    p.add_argument("--since", help="ignore records before this instant")

    p = sub.add_parser("mine", help="frequent triplets by measure function and threshold")
    p.add_argument("--function", required=True,
                   choices=[f.value for f in MeasureFunction])
    p.add_argument("--threshold", required=True, type=float)
    p.add_argument("--from", dest="from_", help="window start (inclusive)")
    p.add_argument("--to", help="window end (exclusive)")

    p = sub.add_parser("indicators", help="compute monitoring indicators")
    p.add_argument("--id", dest="indicator_id", help="one of IP2, IP4, IP7, IP11")
    p.add_argument("--object", help="object token KIND:id for scoped indicators")
    p.add_argument("--actor")
    p.add_argument("--task")
    p.add_argument("--from", dest="from_")
    p.add_argument("--to")

    p = sub.add_parser("alerts", help="list the alert journal or replay rules offline")
    p.add_argument("--replay", action="store_true",
                   help="re-evaluate rules over store prefixes into the journal")
    p.add_argument("--step", type=int, default=1, help="replay snapshot stride in seq")
    p.add_argument("--level", help="filter listed alerts by level")
    p.add_argument("--journal", help="journal path (default <store>.alerts.ndjson)")

    p = sub.add_parser("serve", help="run the query/configuration service")
    p.add_argument("--addr", default=os.environ.get(ENV_ADDR, DEFAULT_ADDR))
    p.add_argument("--tick", type=float, default=5.0, help="rule evaluation period seconds")
    p.add_argument("--webhook", help="notification webhook URL")

    p = sub.add_parser("simulate", help="generate synthetic activity from a scenario")
    p.add_argument("scenario", metavar="SCENARIO_JSON")
    p.add_argument("-o", "--out", help="write lines here instead of stdout")

    return parser


def _window(args) -> Window:
    start = parse_instant(args.from_) if getattr(args, "from_", None) else None
    end = parse_instant(args.to) if getattr(args, "to", None) else None
    return Window(start, end)


def _catalog(args) -> EntityCatalog:
    if args.catalog:
        path = Path(args.catalog)
        if not path.exists():
            raise OperationalError(f"catalog file not found: {path}")
        return EntityCatalog.load(path)
    return EntityCatalog()


def _locked_store(args) -> tuple[TraceStore, FileLock]:
    store_path = Path(args.store)
    if not store_path.parent.exists():
        raise OperationalError(f"store directory does not exist: {store_path.parent}")
    lock = FileLock(str(store_path) + ".lock")
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise OperationalError(f"store {store_path} is in use (is the service running?)")
    return TraceStore(store_path), lock


def _emit(args, payload, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(human)


def _cmd_ingest(args) -> int:
    catalog = _catalog(args)
    grammar = LogGrammar(strict=args.strict)
    since = parse_instant(args.since) if args.since else None
    store, lock = _locked_store(args)
    try:
        quarantine = QuarantineWriter(args.store)
        total_accepted = 0
        for log in args.logs:
            stats = CollectStats()
            try:
                records = list(collect_stream(log, grammar, since=since, stats=stats))
            except SourceUnavailable:
                raise OperationalError(f"log source not readable: {log}")
            result = ingest_records(store, records, catalog, quarantine, stats.failures)
            total_accepted += result.accepted
        _emit(args,
              {"accepted": total_accepted, "quarantined": quarantine.count,
               "last_seq": store.last_seq},
              f"accepted {total_accepted}, quarantined {quarantine.count}")
        return 0
    finally:
        lock.release()


def _cmd_mine(args) -> int:
    store, lock = _locked_store(args)
    try:
        spec = MeasureSpec(MeasureFunction(args.function),
                           Granularity(args.granularity), args.threshold)
        try:
            found = sorted(frequent_triplets(store.snapshot(), spec, _window(args)),
                           key=lambda kv: (-kv[1], kv[0]))
        except EmptyWindowError as exc:
            print(f"warning: {exc}", file=sys.stderr)
            found = []
        rows = [{"activity": k[0], "object": k[1], "actor": k[2], "value": v}
                for k, v in found]
        if args.json:
            print(json.dumps(rows, indent=2))
        else:
            if not rows:
                print("(no triplets at or above threshold)")
            else:
                width = max(len(r["object"]) for r in rows)
                print(f"{'ACTIVITY':<10} {'OBJECT':<{width}} {'ACTOR':<10} VALUE")
                for r in rows:
                    print(f"{r['activity']:<10} {r['object']:<{width}} {r['actor']:<10} {r['value']:g}")
        return 0
    finally:
        lock.release()


def _cmd_indicators(args) -> int:
    catalog = _catalog(args)
    store, lock = _locked_store(args)
    try:
        snap = store.snapshot()
        window = _window(args)
        cfg = IndicatorConfig(catalog=catalog, gap_s=args.gap,
                              granularity=Granularity(args.granularity), window=window)
        if not args.indicator_id:
            payload = snapshot_indicators(snap, cfg).to_json_obj()
            human = "\n".join(
                f"{iv['indicator_id']:<26} {iv['scope'].get('id', 'global') if isinstance(iv['scope'], dict) else iv['scope']:<22} "
                f"{iv['value']:g} {iv['unit']}"
                for iv in payload["indicators"])
            _emit(args, payload, human or "(empty store)")
            return 0
        ind = args.indicator_id.upper().replace("-", "_")
        if ind == "IP2":
            scope = GLOBAL
            if args.object:
                scope = Scope("object", ObjectRef.from_token(args.object).token)
            elif args.actor:
                scope = Scope("actor", args.actor)
            value = indicator_ip2(snap, window, scope)
        elif ind == "IP4":
            if not args.object:
                raise OperationalError("IP4 needs --object PROCESS_MODEL:<id>")
            value = indicator_ip4(snap, ObjectRef.from_token(args.object), window)
        elif ind == "IP7":
            per_object = indicator_ip7(snap, args.gap, window)
            if args.object:
                token = ObjectRef.from_token(args.object).token
                found = per_object.get(token)
                payload = found.to_json_obj() if found else {
                    "indicator_id": "IP7", "scope": {"type": "object", "id": token},
                    "value": 0.0, "unit": "seconds", "as_of_seq": snap.as_of_seq}
                _emit(args, payload, f"IP7 {token}: {payload['value']:g} s")
                return 0
            payload = {obj: iv.value for obj, iv in sorted(per_object.items())}
            _emit(args, payload,
                  "\n".join(f"IP7 {obj}: {v:g} s" for obj, v in payload.items()) or "IP7: no sessions")
            return 0
        elif ind == "IP11":
            value, overdue = indicator_ip11(snap, catalog, window)
            payload = value.to_json_obj()
            payload["overdue"] = [{"task_id": s.task_id, "duration_s": s.duration_s}
                                  for s in overdue]
            _emit(args, payload,
                  f"IP11: {int(value.value)} overdue"
                  + "".join(f"\n  {s.task_id}: {s.duration_s} s" for s in overdue))
            return 0
        else:
            raise OperationalError(f"unknown indicator id: {args.indicator_id}")
        payload = value.to_json_obj()
        _emit(args, payload, f"{payload['indicator_id']}: {payload['value']:g} {payload['unit']}")
        return 0
    finally:
        lock.release()


def _cmd_alerts(args) -> int:
    journal = args.journal or f"{args.store}.alerts.ndjson"
    if args.replay:
        if not args.rules:
            raise OperationalError("--rules is required for --replay")
        rules = load_rules(args.rules)
        catalog = _catalog(args)
        store, lock = _locked_store(args)
        try:
            Path(journal).unlink(missing_ok=True)
            cfg = IndicatorConfig(catalog=catalog, gap_s=args.gap,
                                  granularity=Granularity(args.granularity))
            fired = replay(store, rules, cfg, journal, step=args.step)
            _emit(args, [n.to_json_obj() for n in fired],
                  f"replayed {store.last_seq} records, {len(fired)} notifications -> {journal}")
            return 0
        finally:
            lock.release()
    entries = read_journal(journal)
    if args.level:
        entries = [n for n in entries if n.level.value == args.level.upper()]
    payload = [n.to_json_obj() for n in entries]
    _emit(args, payload,
          "\n".join(f"{e['fired_at']} {e['level']:<8} {e['rule_id']}: {e['message']}"
                    for e in payload) or "(no alerts)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    host, _, port = args.addr.rpartition(":")
    if not host or not port.isdigit():
        raise OperationalError(f"bad --addr {args.addr!r}, expected HOST:PORT")
    app = create_app(args.store, catalog_path=args.catalog, rules_path=args.rules,
                     webhook_url=args.webhook, tick_s=args.tick)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return 0


def _cmd_simulate(args) -> int:
    path = Path(args.scenario)
    if not path.exists():
        raise OperationalError(f"scenario file not found: {path}")
    try:
        scenario = Scenario.load(path)
        lines = generate(scenario)
    except InvalidScenario as exc:
        raise OperationalError(f"invalid scenario: {exc}")
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {len(lines)} lines to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "mine": _cmd_mine,
    "indicators": _cmd_indicators,
    "alerts": _cmd_alerts,
    "serve": _cmd_serve,
    "simulate": _cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OperationalError, StrictParseAbort, RuleError, WrongObjectKind) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
