import random
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from plmobs.model import (
    Activity,
    Actor,
    EntityCatalog,
    ExtractionContext,
    Granularity,
    ObjectKind,
    ObjectRef,
)
from plmobs.statistics import (
    ALL_TIME,
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
    compute_measure,
    frequent_triplets,
    indicator_ip2,
    indicator_ip4,
    indicator_ip7,
    indicator_ip11,
    snapshot_indicators,
)
from plmobs.store import TraceStore

T0 = datetime(2008, 4, 28, 9, 0, 0, tzinfo=timezone.utc)
OCC = MeasureSpec(MeasureFunction.OCCURRENCE_COUNT)


def ctx(offset_s, activity=Activity.VIEW, kind=ObjectKind.DOCUMENT, oid="D1",
        actor="u1", attrs=None):
    return ExtractionContext(T0 + timedelta(seconds=offset_s), activity,
                             ObjectRef(kind, oid), Actor(actor), attrs or {})


def store_of(*contexts) -> TraceStore:
    store = TraceStore()
    store.append_all(contexts)
    return store


class TestComputeMeasure:
    def test_occurrence_count_mini(self, mini_store):
        counts = compute_measure(mini_store.snapshot(), OCC)
        assert counts == {
            ("SEARCH", "DOCUMENT:D1", "u2"): 3,
            ("CREATE", "DOCUMENT:D1", "u1"): 1,
            ("UPDATE", "DOCUMENT:D1", "u1"): 1,
            ("STATUS", "PROCESS_MODEL:P1", "u3"): 1,
            ("UPDATE", "PROCESS_MODEL:P1", "u1"): 1,
            ("INDEX", "PROCESS_MODEL:P1", "u1"): 1,
        }

    def test_frequency_mini(self, mini_store):
        freqs = compute_measure(mini_store.snapshot(), MeasureSpec(MeasureFunction.FREQUENCY))
        assert freqs[("SEARCH", "DOCUMENT:D1", "u2")] == pytest.approx(0.375)

    def test_frequency_sums_to_one(self, mini_store):
        freqs = compute_measure(mini_store.snapshot(), MeasureSpec(MeasureFunction.FREQUENCY))
        assert sum(freqs.values()) == pytest.approx(1.0)

    def test_empty_store_empty_map(self):
        assert compute_measure(store_of().snapshot(), OCC) == {}

    def test_frequency_on_empty_window_is_an_error(self):
        with pytest.raises(EmptyWindowError):
            compute_measure(store_of().snapshot(), MeasureSpec(MeasureFunction.FREQUENCY))

    def test_distinct_actors_collapses_actor_slot(self):
        snap = store_of(
            ctx(0, actor="u1"), ctx(10, actor="u2"), ctx(20, actor="u3"),
            ctx(30, actor="u1", oid="D2"),
        ).snapshot()
        values = compute_measure(snap, MeasureSpec(MeasureFunction.DISTINCT_ACTORS))
        assert values == {("VIEW", "DOCUMENT:D1", "*"): 3.0, ("VIEW", "DOCUMENT:D2", "*"): 1.0}

    def test_modification_count_mini(self, mini_store):
        values = compute_measure(mini_store.snapshot(),
                                 MeasureSpec(MeasureFunction.MODIFICATION_COUNT))
        assert values == {("*", "DOCUMENT:D1", "*"): 2.0, ("*", "PROCESS_MODEL:P1", "*"): 3.0}

    def test_task_output_count_tasks_fixture(self, tasks_store):
        values = compute_measure(tasks_store.snapshot(),
                                 MeasureSpec(MeasureFunction.TASK_OUTPUT_COUNT))
        assert values == {("*", "FORM:F1", "*"): 1.0, ("*", "FORM:F2", "*"): 1.0}

    def test_span_duration_mini(self, mini_store):
        values = compute_measure(mini_store.snapshot(),
                                 MeasureSpec(MeasureFunction.SPAN_DURATION))
        assert values[("SEARCH", "DOCUMENT:D1", "u2")] == 4800.0
        assert all(v == 0.0 for k, v in values.items()
                   if k != ("SEARCH", "DOCUMENT:D1", "u2"))

    def test_object_kind_granularity_rolls_up(self, mini_store):
        spec = MeasureSpec(MeasureFunction.OCCURRENCE_COUNT, Granularity.OBJECT_KIND)
        counts = compute_measure(mini_store.snapshot(), spec)
        assert counts[("SEARCH", "DOCUMENT", "u2")] == 3

    def test_occurrence_count_matches_naive_group_by(self):
        rng = random.Random(7)
        contexts = [
            ctx(rng.randrange(10_000),
                activity=rng.choice(list(Activity)),
                oid=f"D{rng.randrange(4)}",
                actor=f"u{rng.randrange(5)}")
            for _ in range(400)
        ]
        snap = store_of(*contexts).snapshot()
        naive: dict = {}
        for c in contexts:
            key = (c.activity.value, f"{c.object.kind.value}:{c.object.id}", c.actor.id)
            naive[key] = naive.get(key, 0) + 1
        assert compute_measure(snap, OCC) == naive


class TestFrequentTriplets:
    def test_threshold_two(self, mini_store):
        found = frequent_triplets(mini_store.snapshot(),
                                  MeasureSpec(MeasureFunction.OCCURRENCE_COUNT, threshold=2))
        assert found == {(("SEARCH", "DOCUMENT:D1", "u2"), 3)}

    def test_threshold_one_returns_all_six(self, mini_store):
        found = frequent_triplets(mini_store.snapshot(),
                                  MeasureSpec(MeasureFunction.OCCURRENCE_COUNT, threshold=1))
        assert len(found) == 6

    def test_threshold_four_empty(self, mini_store):
        found = frequent_triplets(mini_store.snapshot(),
                                  MeasureSpec(MeasureFunction.OCCURRENCE_COUNT, threshold=4))
        assert found == set()

    @given(st.integers(min_value=0, max_value=5), st.integers(min_value=0, max_value=5),
           st.randoms())
    @settings(max_examples=30)
    def test_threshold_anti_monotonicity(self, a, b, rnd):
        lo, hi = sorted((a, b))
        contexts = [ctx(i * 10, activity=rnd.choice(list(Activity)),
                        oid=f"D{rnd.randrange(3)}", actor=f"u{rnd.randrange(3)}")
                    for i in range(rnd.randrange(1, 40))]
        snap = store_of(*contexts).snapshot()
        loose = frequent_triplets(snap, MeasureSpec(MeasureFunction.OCCURRENCE_COUNT, threshold=lo))
        tight = frequent_triplets(snap, MeasureSpec(MeasureFunction.OCCURRENCE_COUNT, threshold=hi))
        assert tight <= loose


class TestIndicators:
    def test_ip2_mini(self, mini_store):
        assert indicator_ip2(mini_store.snapshot()).value == 1.0

    def test_ip2_empty(self):
        assert indicator_ip2(store_of().snapshot()).value == 0.0

    def test_ip2_scoped_to_d1_is_zero(self, mini_store):
        scoped = indicator_ip2(mini_store.snapshot(), scope=Scope("object", "DOCUMENT:D1"))
        assert scoped.value == 0.0

    def test_ip11_tasks_fixture(self, tasks_store):
        value, overdue = indicator_ip11(tasks_store.snapshot(), EntityCatalog())
        assert value.value == 1.0
        assert [(s.task_id, s.duration_s) for s in overdue] == [("T1", 9000)]

    def test_ip11_generous_deadline(self, tasks_store):
        catalog = EntityCatalog(default_deadline_s=10_000)
        value, overdue = indicator_ip11(tasks_store.snapshot(), catalog)
        assert value.value == 0.0 and overdue == []

    def test_ip11_no_task_events(self, mini_store):
        value, overdue = indicator_ip11(mini_store.snapshot(), EntityCatalog())
        assert value.value == 0.0

    def test_ip7_mini_gap_1800(self, mini_store):
        values = indicator_ip7(mini_store.snapshot(), gap_s=1800)
        assert {k: v.value for k, v in values.items()} == {"DOCUMENT:D1": 600.0}

    def test_ip7_gap_zero(self, mini_store):
        values = indicator_ip7(mini_store.snapshot(), gap_s=0)
        assert all(v.value == 0.0 for v in values.values())

    def test_ip7_gap_4800_merges_sessions(self, mini_store):
        values = indicator_ip7(mini_store.snapshot(), gap_s=4800)
        assert values["DOCUMENT:D1"].value == 4800.0

    def test_ip7_view_inclusion_flag(self):
        # SEARCH at 0 and 1200 with a VIEW at 600 between them: at gap 700 the
        # SEARCH-only runs split (1200 s apart), but the VIEW bridges them.
        snap = store_of(
            ctx(0, Activity.SEARCH), ctx(600, Activity.VIEW), ctx(1200, Activity.SEARCH),
        ).snapshot()
        search_only = indicator_ip7(snap, gap_s=700)
        assert search_only["DOCUMENT:D1"].value == 0.0
        with_view = indicator_ip7(snap, gap_s=700, include_view=True)
        assert with_view["DOCUMENT:D1"].value == 1200.0
        merged = indicator_ip7(snap, gap_s=1200)
        assert merged["DOCUMENT:D1"].value == 1200.0

    def test_ip4_mini(self, mini_store):
        value = indicator_ip4(mini_store.snapshot(), ObjectRef(ObjectKind.PROCESS_MODEL, "P1"))
        assert value.value == 3.0

    def test_ip4_unknown_model_zero(self, mini_store):
        value = indicator_ip4(mini_store.snapshot(), ObjectRef(ObjectKind.PROCESS_MODEL, "P999"))
        assert value.value == 0.0

    def test_ip4_window_excluding_late_changes(self, mini_store):
        window = Window(end=T0 + timedelta(minutes=40))  # excludes 09:40 onward
        value = indicator_ip4(mini_store.snapshot(),
                              ObjectRef(ObjectKind.PROCESS_MODEL, "P1"), window)
        assert value.value == 1.0

    def test_ip4_rejects_wrong_kind(self, mini_store):
        with pytest.raises(WrongObjectKind):
            indicator_ip4(mini_store.snapshot(), ObjectRef(ObjectKind.DOCUMENT, "D1"))

    def test_activities_by_actor_mini(self, mini_store):
        assert activities_by_actor(mini_store.snapshot()) == {"u1": 4, "u2": 3, "u3": 1}

    def test_activities_by_actor_empty(self):
        assert activities_by_actor(store_of().snapshot()) == {}

    def test_activities_sum_to_total(self, mini_store):
        snap = mini_store.snapshot()
        assert sum(activities_by_actor(snap).values()) == len(snap)

    def test_share_by_object_mini(self, mini_store):
        shares = activity_share_by_object(mini_store.snapshot())
        assert shares["DOCUMENT:D1"] == pytest.approx(62.5, abs=1e-6)
        assert shares["PROCESS_MODEL:P1"] == pytest.approx(37.5, abs=1e-6)
        assert sum(shares.values()) == pytest.approx(100.0, abs=1e-6)

    def test_share_by_kind_mini(self, mini_store):
        shares = activity_share_by_object(mini_store.snapshot(),
                                          granularity=Granularity.OBJECT_KIND)
        assert shares == {"DOCUMENT": pytest.approx(62.5), "PROCESS_MODEL": pytest.approx(37.5)}

    def test_share_single_object_is_100(self):
        shares = activity_share_by_object(store_of(ctx(0), ctx(10)).snapshot())
        assert shares == {"DOCUMENT:D1": pytest.approx(100.0)}

    def test_share_empty_window_is_an_error(self, mini_store):
        with pytest.raises(EmptyWindowError):
            activity_share_by_object(mini_store.snapshot(),
                                     Window(start=T0 + timedelta(days=10)))


class TestWindows:
    @given(st.lists(st.integers(min_value=0, max_value=1000), min_size=1, max_size=50),
           st.integers(min_value=0, max_value=1000), st.integers(min_value=0, max_value=1000))
    @settings(max_examples=40)
    def test_count_additivity_over_split(self, offsets, cut1, cut2):
        a, b = sorted((cut1, cut2))
        contexts = [ctx(o, Activity.STATUS, kind=ObjectKind.PROCESS_MODEL, oid="P1",
                        attrs={"outcome": "refused"}) for o in offsets]
        snap = store_of(*contexts).snapshot()
        t = lambda s: T0 + timedelta(seconds=s)
        whole = Window(t(0), t(1001))
        left, right = Window(t(0), t(a)), Window(t(a), t(1001))
        assert (indicator_ip2(snap, left).value + indicator_ip2(snap, right).value
                == indicator_ip2(snap, whole).value)
        sum_left = sum(activities_by_actor(snap, left).values())
        sum_right = sum(activities_by_actor(snap, right).values())
        assert sum_left + sum_right == sum(activities_by_actor(snap, whole).values())

    def test_window_is_half_open(self):
        snap = store_of(ctx(0), ctx(60)).snapshot()
        window = Window(T0, T0 + timedelta(seconds=60))
        assert sum(activities_by_actor(snap, window).values()) == 1


class TestSnapshotIndicators:
    def test_mini_default_config(self, mini_store):
        snap = snapshot_indicators(mini_store.snapshot())
        assert snap.get("IP2").value == 1.0
        assert snap.get("IP4", Scope("object", "PROCESS_MODEL:P1")).value == 3.0
        assert snap.get("IP7", Scope("object", "DOCUMENT:D1")).value == 600.0
        assert snap.as_of_seq == 8

    def test_empty_store_zeros(self):
        snap = snapshot_indicators(store_of().snapshot())
        assert snap.get("IP2").value == 0.0
        assert snap.get("IP11").value == 0.0
        assert snap.get("ACTIVITIES_BY_ACTOR").value == 0.0
        assert snap.as_of_seq == 0

    def test_same_prefix_identical_snapshots(self, mini_store):
        first = snapshot_indicators(mini_store.snapshot())
        second = snapshot_indicators(mini_store.snapshot())
        assert first.to_json_obj() == second.to_json_obj()

    def test_extra_requests_are_covered(self, mini_store):
        window = Window(T0, T0 + timedelta(minutes=31))
        snap = snapshot_indicators(mini_store.snapshot(),
                                   requests=[("IP2", GLOBAL, window)])
        assert snap.get("IP2", GLOBAL, window).value == 1.0

    def test_export_shape(self, mini_store):
        body = snapshot_indicators(mini_store.snapshot()).to_json_obj()
        assert set(body) == {"as_of_seq", "computed_at", "indicators"}
        for entry in body["indicators"]:
            assert set(entry) == {"indicator_id", "scope", "window", "value",
                                  "unit", "computed_at", "as_of_seq"}
            assert entry["as_of_seq"] == body["as_of_seq"]
