import numpy as np
import pytest

from nsb.cnn import TumorClass
from nsb.dsis import (
    Cohort,
    DuplicateRatingError,
    RaterProfile,
    RatingRangeError,
    RatingStore,
    Stimulus,
    UnknownStimulusError,
    build_plan,
    compute_mos,
    decoy_sensitivity,
    export_csv,
    import_csv,
    load_stimulus_pool,
    save_stimulus_pool,
)
from nsb.dsis.engine import PLAN_SIZE, STIMULI_PER_CLASS, InsufficientPoolError


def make_pool(per_class=14, decoys=2):
    pool = []
    k = 0
    for cls in TumorClass:
        for i in range(per_class):
            pool.append(
                Stimulus(
                    stimulus_id=f"stim{k:04d}",
                    reference_path=f"stim{k:04d}_ref.pgm",
                    processed_path=f"stim{k:04d}_proc.pgm",
                    tumor_class=cls,
                    is_decoy=i < decoys,
                )
            )
            k += 1
    return pool


RATER = RaterProfile("r0001", Cohort.NEUROLOGIST)


# -------------------------------------------------------------------- plans


def test_plan_composition():
    plan = build_plan(make_pool(), RATER, seed=1)
    assert len(plan.stimuli) == PLAN_SIZE == 24
    per_class = {cls: 0 for cls in TumorClass}
    for s in plan.stimuli:
        per_class[s.tumor_class] += 1
    assert all(v == STIMULI_PER_CLASS for v in per_class.values())


def test_plan_deterministic():
    pool = make_pool()
    a = build_plan(pool, RATER, seed=9)
    b = build_plan(pool, RATER, seed=9)
    assert [s.stimulus_id for s in a.stimuli] == [s.stimulus_id for s in b.stimuli]
    c = build_plan(pool, RATER, seed=10)
    assert [s.stimulus_id for s in a.stimuli] != [s.stimulus_id for s in c.stimuli]


def test_plan_has_decoy_per_class_over_100_seeds():
    pool = make_pool(per_class=16, decoys=1)
    for seed in range(100):
        plan = build_plan(pool, RATER, seed=seed)
        for cls in TumorClass:
            assert any(
                s.is_decoy and s.tumor_class is cls for s in plan.stimuli
            ), f"seed {seed} lacks a {cls.value} decoy"


def test_plan_is_permutation_of_selection():
    plan = build_plan(make_pool(), RATER, seed=4)
    ids = [s.stimulus_id for s in plan.stimuli]
    assert len(set(ids)) == len(ids)


def test_plan_insufficient_pool():
    with pytest.raises(InsufficientPoolError):
        build_plan(make_pool(per_class=11), RATER, seed=0)
    with pytest.raises(InsufficientPoolError):
        build_plan(make_pool(per_class=14, decoys=0), RATER, seed=0)


# ------------------------------------------------------------------ ratings


@pytest.fixture
def store_and_plan(tmp_path):
    store = RatingStore(tmp_path / "store")
    plan = store.create_session(make_pool(), Cohort.MEDICAL_OFFICER, seed=3)
    return store, plan


def test_submit_rating_accepts_valid(store_and_plan):
    store, plan = store_and_plan
    sid = plan.stimuli[0].stimulus_id
    rec = store.submit_rating(plan, sid, scale=5, percent=95)
    assert rec.scale == 5 and rec.percent == 95
    assert store.records() == [rec]


@pytest.mark.parametrize("scale,percent", [(0, 50), (6, 50), (3, -1), (3, 101)])
def test_submit_rating_range_errors(store_and_plan, scale, percent):
    store, plan = store_and_plan
    sid = plan.stimuli[0].stimulus_id
    with pytest.raises(RatingRangeError):
        store.submit_rating(plan, sid, scale, percent)
    assert store.records() == []


def test_submit_rating_duplicate_leaves_store_unchanged(store_and_plan, tmp_path):
    store, plan = store_and_plan
    sid = plan.stimuli[0].stimulus_id
    store.submit_rating(plan, sid, 4, 80, timestamp="2026-08-09T10:00:00Z")
    ratings_file = store.root / "ratings.jsonl"
    before = ratings_file.read_bytes()
    with pytest.raises(DuplicateRatingError):
        store.submit_rating(plan, sid, 2, 10)
    assert ratings_file.read_bytes() == before


def test_submit_rating_unknown_stimulus(store_and_plan):
    store, plan = store_and_plan
    with pytest.raises(UnknownStimulusError):
        store.submit_rating(plan, "stim9999", 3, 50)


def test_store_replays_from_disk(tmp_path):
    store = RatingStore(tmp_path / "s")
    plan = store.create_session(make_pool(), Cohort.NEUROLOGIST, seed=1)
    store.submit_rating(plan, plan.stimuli[0].stimulus_id, 5, 90)
    reopened = RatingStore(tmp_path / "s")
    assert len(reopened.plans()) == 1
    assert len(reopened.records()) == 1
    assert reopened.next_unrated(reopened.plan(plan.session_id)).stimulus_id == \
        plan.stimuli[1].stimulus_id


def test_store_append_only_across_operations(tmp_path):
    store = RatingStore(tmp_path / "s")
    plan = store.create_session(make_pool(), Cohort.NEUROLOGIST, seed=1)
    ratings_file = store.root / "ratings.jsonl"
    seen = b""
    for i, stim in enumerate(plan.stimuli[:5]):
        store.submit_rating(plan, stim.stimulus_id, 1 + i % 5, 10 * i)
        data = ratings_file.read_bytes()
        assert data.startswith(seen)  # strictly grows, never rewritten
        seen = data


# ---------------------------------------------------------------------- MOS


def ratings_fixture(store, cohorts=(Cohort.NEUROLOGIST, Cohort.MEDICAL_OFFICER)):
    pool = make_pool()
    plans = []
    records = []
    for k, cohort in enumerate(cohorts):
        plan = store.create_session(pool, cohort, seed=k)
        plans.append(plan)
        for i, stim in enumerate(plan.stimuli):
            rec = store.submit_rating(
                plan, stim.stimulus_id, 1 + (i + k) % 5, (3 * i + 10 * k) % 101,
                timestamp="2026-08-09T09:00:00Z",
            )
            records.append(rec)
    return plans, records


def test_mos_simple_group():
    scales = [5, 4, 5]
    mean = sum(scales) / 3
    assert mean == pytest.approx(4.667, abs=1e-3)


def test_mos_matches_hand_grouping(tmp_path):
    store = RatingStore(tmp_path / "s")
    plans, records = ratings_fixture(store)
    summary = compute_mos(store.records(), store.plans())
    # independent regrouping
    stim_of = {
        (p.session_id, s.stimulus_id): (p.rater.cohort, s.tumor_class)
        for p in plans
        for s in p.stimuli
    }
    groups = {}
    for r in records:
        key = stim_of[(r.session_id, r.stimulus_id)]
        groups.setdefault(key, []).append(r)
    assert summary.total_ratings == len(records)
    for g in summary.groups:
        recs = groups[(g.cohort, g.tumor_class)]
        assert g.count == len(recs)
        assert g.mos == pytest.approx(np.mean([r.scale for r in recs]), abs=1e-12)
        assert g.mean_percent == pytest.approx(
            np.mean([r.percent for r in recs]), abs=1e-12
        )
        assert 1.0 <= g.mos <= 5.0
        assert 0.0 <= g.mean_percent <= 100.0


def test_mos_single_cohort_all_fives(tmp_path):
    store = RatingStore(tmp_path / "s")
    plan = store.create_session(make_pool(), Cohort.NEUROLOGIST, seed=0)
    for stim in plan.stimuli:
        store.submit_rating(plan, stim.stimulus_id, 5, 100)
    summary = compute_mos(store.records(), store.plans())
    for g in summary.groups:
        assert g.mos == 5.0
        assert g.mos_half_width == 0.0


def test_mos_invariant_under_record_reordering(tmp_path):
    store = RatingStore(tmp_path / "s")
    ratings_fixture(store)
    records = store.records()
    a = compute_mos(records, store.plans())
    b = compute_mos(list(reversed(records)), store.plans())
    assert a == b


# ------------------------------------------------------------------- decoys


def test_decoy_sensitivity_extremes(tmp_path):
    store = RatingStore(tmp_path / "s")
    plan = store.create_session(make_pool(), Cohort.NEUROLOGIST, seed=0)
    for stim in plan.stimuli:
        scale = 1 if stim.is_decoy else 5
        store.submit_rating(plan, stim.stimulus_id, scale, 50)
    result = decoy_sensitivity(store.records(), store.plans())
    on_decoys, on_genuine, diff = result[Cohort.NEUROLOGIST]
    assert (on_decoys, on_genuine, diff) == (1.0, 5.0, 4.0)


def test_decoy_sensitivity_flat_ratings(tmp_path):
    store = RatingStore(tmp_path / "s")
    plan = store.create_session(make_pool(), Cohort.MEDICAL_OFFICER, seed=0)
    for stim in plan.stimuli:
        store.submit_rating(plan, stim.stimulus_id, 3, 50)
    result = decoy_sensitivity(store.records(), store.plans())
    assert result[Cohort.MEDICAL_OFFICER][2] == 0.0


def test_decoy_sensitivity_matches_partition_oracle(tmp_path):
    store = RatingStore(tmp_path / "s")
    plans, records = ratings_fixture(store)
    result = decoy_sensitivity(store.records(), store.plans())
    for cohort, (d_mean, g_mean, diff) in result.items():
        decoys, genuine = [], []
        for p in plans:
            if p.rater.cohort is not cohort:
                continue
            rated = store.ratings_for_session(p.session_id)
            for s in p.stimuli:
                target = decoys if s.is_decoy else genuine
                target.append(rated[s.stimulus_id].scale)
        assert d_mean == pytest.approx(np.mean(decoys))
        assert g_mean == pytest.approx(np.mean(genuine))
        assert diff == pytest.approx(g_mean - d_mean)


# ---------------------------------------------------------------------- CSV


def test_export_empty_store(tmp_path):
    out = tmp_path / "r.csv"
    export_csv([], out)
    assert out.read_text() == "session_id,stimulus_id,scale,percent,timestamp\n"


def test_export_import_export_byte_stable(tmp_path):
    store = RatingStore(tmp_path / "s")
    ratings_fixture(store)
    first = tmp_path / "first.csv"
    second = tmp_path / "second.csv"
    export_csv(store.records(), first)
    export_csv(import_csv(first), second)
    assert first.read_bytes() == second.read_bytes()
    assert len(first.read_text().splitlines()) == len(store.records()) + 1


def test_import_rejects_foreign_header(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b,c\n")
    with pytest.raises(ValueError, match="header"):
        import_csv(bad)


# ------------------------------------------------------------ stimulus pool


def test_stimulus_pool_roundtrip(tmp_path):
    pool = make_pool()
    path = tmp_path / "stimuli.tsv"
    save_stimulus_pool(pool, path)
    assert load_stimulus_pool(path) == pool
