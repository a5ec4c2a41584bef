"""Double-stimulus rating sessions: plans, capture, persistence, analytics.

A session shows 24 stimuli (12 per tumor class, decoys included) in a
seeded random order. Ratings are a 1-5 impairment scale plus a 0-100
percent judgment, stored append-only as line-delimited JSON so a crash
can never corrupt accepted records. Decoy flags and class labels stay
server-side; raters only ever see opaque stimulus ids and image
references.
"""

from __future__ import annotations

import csv
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from nsb.cnn import TumorClass
from nsb.metrics import mean_confidence_interval
from nsb.rng import DeterministicRng

STIMULI_PER_CLASS = 12
PLAN_SIZE = 2 * STIMULI_PER_CLASS

SCALE_LABELS = {
    5: "Accurately localized and segmented",
    4: "Perceptible, but not erroneous",
    3: "Slightly erroneous",
    2: "Erroneous",
    1: "Very fallacious",
}


class Cohort(Enum):
    NEUROLOGIST = "neurologist"
    MEDICAL_OFFICER = "medical_officer"
    INTERN_HOUSE_OFFICER = "intern_house_officer"


class RatingRangeError(ValueError):
    """Scale outside 1-5 or percent outside 0-100."""


class DuplicateRatingError(ValueError):
    """The stimulus already has a rating in this session."""


class UnknownStimulusError(KeyError):
    """Stimulus id not part of the session plan."""


class InsufficientPoolError(ValueError):
    """Pool cannot fill a 12+12 plan with a decoy per class."""


@dataclass(frozen=True)
class Stimulus:
    stimulus_id: str
    reference_path: str
    processed_path: str
    tumor_class: TumorClass
    is_decoy: bool


@dataclass(frozen=True)
class RaterProfile:
    rater_id: str
    cohort: Cohort


@dataclass(frozen=True)
class SessionPlan:
    session_id: str
    rater: RaterProfile
    seed: int
    stimuli: tuple[Stimulus, ...]

    def stimulus(self, stimulus_id: str) -> Stimulus:
        for s in self.stimuli:
            if s.stimulus_id == stimulus_id:
                return s
        raise UnknownStimulusError(stimulus_id)


@dataclass(frozen=True)
class RatingRecord:
    session_id: str
    stimulus_id: str
    scale: int
    percent: int
    timestamp: str  # ISO-8601 UTC


def build_plan(
    pool: list[Stimulus], rater: RaterProfile, seed: int, session_id: str = "s0000"
) -> SessionPlan:
    """Select 12 stimuli per class (at least one decoy each) and shuffle.

    Selection is a seeded per-class shuffle taking the first 12; if no
    decoy made the cut, the first decoy in shuffle order replaces the
    last pick. Deterministic given (pool order, seed).
    """
    rng = DeterministicRng(seed).derive(0xD5)
    chosen: list[Stimulus] = []
    for cls in TumorClass:
        members = [s for s in pool if s.tumor_class is cls]
        decoys = [s for s in members if s.is_decoy]
        if len(members) < STIMULI_PER_CLASS or not decoys:
            raise InsufficientPoolError(
                f"need >= {STIMULI_PER_CLASS} stimuli with a decoy for {cls.value}, "
                f"got {len(members)} with {len(decoys)} decoys"
            )
        shuffled = rng.shuffle(members)
        picked = shuffled[:STIMULI_PER_CLASS]
        if not any(s.is_decoy for s in picked):
            first_decoy = next(s for s in shuffled if s.is_decoy)
            picked[-1] = first_decoy
        chosen.extend(picked)
    ordered = rng.shuffle(chosen)
    return SessionPlan(session_id, rater, seed, tuple(ordered))


def validate_rating(scale: int, percent: int) -> None:
    if not isinstance(scale, int) or not 1 <= scale <= 5:
        raise RatingRangeError(f"scale {scale!r} outside 1..5")
    if not isinstance(percent, int) or not 0 <= percent <= 100:
        raise RatingRangeError(f"percent {percent!r} outside 0..100")


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class RatingStore:
    """Append-only session/rating persistence rooted at a directory.

    ``plans.jsonl`` holds one line per created session, ``ratings.jsonl``
    one line per accepted rating. Both files are replayed on open, so the
    store state is exactly what reached disk.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._plans_file = self.root / "plans.jsonl"
        self._ratings_file = self.root / "ratings.jsonl"
        self._lock = threading.Lock()
        self._plans: dict[str, SessionPlan] = {}
        self._ratings: dict[tuple[str, str], RatingRecord] = {}
        self._replay()

    def _replay(self):
        if self._plans_file.exists():
            for line in self._plans_file.read_text().splitlines():
                plan = _plan_from_json(json.loads(line))
                self._plans[plan.session_id] = plan
        if self._ratings_file.exists():
            for line in self._ratings_file.read_text().splitlines():
                rec = RatingRecord(**json.loads(line))
                self._ratings[(rec.session_id, rec.stimulus_id)] = rec

    # -- sessions

    def create_session(
        self, pool: list[Stimulus], cohort: Cohort, seed: int
    ) -> SessionPlan:
        with self._lock:
            n = len(self._plans)
            plan = build_plan(
                pool,
                RaterProfile(rater_id=f"r{n:04d}", cohort=cohort),
                seed,
                session_id=f"s{n:04d}",
            )
            with open(self._plans_file, "a") as fh:
                fh.write(json.dumps(_plan_to_json(plan)) + "\n")
            self._plans[plan.session_id] = plan
            return plan

    def plan(self, session_id: str) -> SessionPlan:
        try:
            return self._plans[session_id]
        except KeyError:
            raise KeyError(f"unknown session {session_id!r}") from None

    def plans(self) -> list[SessionPlan]:
        return list(self._plans.values())

    # -- ratings

    def submit_rating(
        self,
        plan: SessionPlan,
        stimulus_id: str,
        scale: int,
        percent: int,
        timestamp: str | None = None,
    ) -> RatingRecord:
        """Validate and persist one rating; accepted records are immutable."""
        plan.stimulus(stimulus_id)  # raises UnknownStimulusError
        validate_rating(scale, percent)
        key = (plan.session_id, stimulus_id)
        with self._lock:
            if key in self._ratings:
                raise DuplicateRatingError(
                    f"stimulus {stimulus_id!r} already rated in {plan.session_id!r}"
                )
            rec = RatingRecord(
                session_id=plan.session_id,
                stimulus_id=stimulus_id,
                scale=scale,
                percent=percent,
                timestamp=timestamp or _utc_now(),
            )
            with open(self._ratings_file, "a") as fh:
                fh.write(json.dumps(rec.__dict__) + "\n")
            self._ratings[key] = rec
            return rec

    def records(self) -> list[RatingRecord]:
        """Snapshot in (session, stimulus) order."""
        return sorted(
            self._ratings.values(), key=lambda r: (r.session_id, r.stimulus_id)
        )

    def ratings_for_session(self, session_id: str) -> dict[str, RatingRecord]:
        return {
            sid: rec
            for (s, sid), rec in self._ratings.items()
            if s == session_id
        }

    def next_unrated(self, plan: SessionPlan) -> Stimulus | None:
        rated = self.ratings_for_session(plan.session_id)
        for stim in plan.stimuli:
            if stim.stimulus_id not in rated:
                return stim
        return None


def _plan_to_json(plan: SessionPlan) -> dict:
    return {
        "session_id": plan.session_id,
        "rater_id": plan.rater.rater_id,
        "cohort": plan.rater.cohort.value,
        "seed": plan.seed,
        "stimuli": [
            {
                "stimulus_id": s.stimulus_id,
                "reference_path": s.reference_path,
                "processed_path": s.processed_path,
                "tumor_class": s.tumor_class.value,
                "is_decoy": s.is_decoy,
            }
            for s in plan.stimuli
        ],
    }


def _plan_from_json(data: dict) -> SessionPlan:
    return SessionPlan(
        session_id=data["session_id"],
        rater=RaterProfile(data["rater_id"], Cohort(data["cohort"])),
        seed=data["seed"],
        stimuli=tuple(
            Stimulus(
                s["stimulus_id"], s["reference_path"], s["processed_path"],
                TumorClass(s["tumor_class"]), s["is_decoy"],
            )
            for s in data["stimuli"]
        ),
    )


# ------------------------------------------------------------- analytics


@dataclass(frozen=True)
class GroupStats:
    cohort: Cohort
    tumor_class: TumorClass
    mos: float
    mean_percent: float
    count: int
    mos_half_width: float | None  # None when count < 2


@dataclass(frozen=True)
class CohortSummary:
    groups: tuple[GroupStats, ...]

    @property
    def total_ratings(self) -> int:
        return sum(g.count for g in self.groups)


def _stimulus_index(plans: list[SessionPlan]):
    by_session = {}
    for plan in plans:
        for s in plan.stimuli:
            by_session[(plan.session_id, s.stimulus_id)] = (plan, s)
    return by_session


def compute_mos(records: list[RatingRecord], plans: list[SessionPlan]) -> CohortSummary:
    """Mean opinion score and mean percent per cohort x tumor class."""
    if not records:
        raise ValueError("no rating records")
    index = _stimulus_index(plans)
    buckets: dict[tuple[Cohort, TumorClass], list[RatingRecord]] = {}
    for rec in records:
        plan, stim = index[(rec.session_id, rec.stimulus_id)]
        buckets.setdefault((plan.rater.cohort, stim.tumor_class), []).append(rec)
    groups = []
    for cohort in Cohort:
        for cls in TumorClass:
            recs = buckets.get((cohort, cls))
            if not recs:
                continue
            scales = [r.scale for r in recs]
            if len(scales) >= 2:
                mos, half = mean_confidence_interval(scales)
            else:
                mos, half = float(scales[0]), None
            groups.append(GroupStats(
                cohort=cohort,
                tumor_class=cls,
                mos=mos,
                mean_percent=sum(r.percent for r in recs) / len(recs),
                count=len(recs),
                mos_half_width=half,
            ))
    return CohortSummary(tuple(groups))


def decoy_sensitivity(
    records: list[RatingRecord], plans: list[SessionPlan]
) -> dict[Cohort, tuple[float, float, float]]:
    """Per cohort: (mean scale on decoys, on genuine, their difference).

    A cohort rating decoys as high as genuine output signals an invalid
    session. Raises if the plans contain no decoys.
    """
    index = _stimulus_index(plans)
    if not any(s.is_decoy for plan in plans for s in plan.stimuli):
        raise ValueError("plans contain no decoy stimuli")
    split: dict[Cohort, dict[bool, list[int]]] = {}
    for rec in records:
        plan, stim = index[(rec.session_id, rec.stimulus_id)]
        split.setdefault(plan.rater.cohort, {True: [], False: []})[
            stim.is_decoy
        ].append(rec.scale)
    out = {}
    for cohort, groups in split.items():
        if not groups[True] or not groups[False]:
            continue
        on_decoys = sum(groups[True]) / len(groups[True])
        on_genuine = sum(groups[False]) / len(groups[False])
        out[cohort] = (on_decoys, on_genuine, on_genuine - on_decoys)
    return out


# ------------------------------------------------------------ CSV export

RATINGS_CSV_HEADER = ["session_id", "stimulus_id", "scale", "percent", "timestamp"]


def export_csv(records: list[RatingRecord], path) -> None:
    """Rows ordered by (session, stimulus); export-import-export is stable."""
    ordered = sorted(records, key=lambda r: (r.session_id, r.stimulus_id))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RATINGS_CSV_HEADER)
        for r in ordered:
            writer.writerow([r.session_id, r.stimulus_id, r.scale, r.percent, r.timestamp])


def import_csv(path) -> list[RatingRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RATINGS_CSV_HEADER:
            raise ValueError(f"unexpected ratings CSV header {header}")
        return [
            RatingRecord(row[0], row[1], int(row[2]), int(row[3]), row[4])
            for row in reader
        ]


# -------------------------------------------------------- stimulus pools

POOL_VERSION = "nsb-stimuli/1"


def save_stimulus_pool(pool: list[Stimulus], path) -> None:
    lines = [POOL_VERSION]
    for s in pool:
        lines.append("\t".join([
            s.stimulus_id, s.reference_path, s.processed_path,
            s.tumor_class.value, "1" if s.is_decoy else "0",
        ]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_stimulus_pool(path) -> list[Stimulus]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != POOL_VERSION:
        raise ValueError(f"{path}: unsupported stimulus pool version")
    pool = []
    for line in lines[1:]:
        if not line.strip():
            continue
        sid, ref, proc, cls, decoy = line.split("\t")
        pool.append(Stimulus(sid, ref, proc, TumorClass(cls), decoy == "1"))
    return pool
