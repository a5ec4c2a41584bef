"""HTTP wire API serving rating sessions to the browser UI.

Session-facing responses never include tumor class or decoy flags; the
client sees only opaque stimulus ids, image URLs, and progress. Analyst
endpoints (/results/*) do expose per-class grouping, since they are for
the experimenter, not the raters.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from nsb.dsis import engine

MEDIA_TYPES = {".pgm": "image/x-portable-graymap", ".png": "image/png"}


class CreateSessionBody(BaseModel):
    cohort: engine.Cohort
    seed: int = 0


class RatingBody(BaseModel):
    stimulus_id: str
    scale: int = Field(description="impairment scale, 1-5")
    percent: int = Field(description="accuracy judgment, 0-100")


def _error(status: int, kind: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": kind, "message": message})


def create_app(
    store: engine.RatingStore,
    pool: list[engine.Stimulus],
    stimuli_dir,
    ui_dir=None,
) -> FastAPI:
    app = FastAPI(title="nsb rating service")
    stimuli_dir = Path(stimuli_dir)

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        try:
            plan = store.create_session(pool, body.cohort, body.seed)
        except engine.InsufficientPoolError as exc:
            return _error(409, "insufficient_pool", str(exc))
        return {"session_id": plan.session_id, "total": len(plan.stimuli)}

    @app.get("/sessions/{session_id}/next")
    def next_stimulus(session_id: str):
        try:
            plan = store.plan(session_id)
        except KeyError as exc:
            return _error(404, "unknown_session", str(exc))
        rated = len(store.ratings_for_session(session_id))
        total = len(plan.stimuli)
        stim = store.next_unrated(plan)
        if stim is None:
            return {"done": True, "rated": rated, "total": total}
        return {
            "done": False,
            "stimulus_id": stim.stimulus_id,
            "reference_url": f"/stimuli/{stim.reference_path}",
            "processed_url": f"/stimuli/{stim.processed_path}",
            "rated": rated,
            "total": total,
        }

    @app.post("/sessions/{session_id}/ratings", status_code=201)
    def submit_rating(session_id: str, body: RatingBody):
        try:
            plan = store.plan(session_id)
        except KeyError as exc:
            return _error(404, "unknown_session", str(exc))
        try:
            rec = store.submit_rating(plan, body.stimulus_id, body.scale, body.percent)
        except engine.UnknownStimulusError:
            return _error(404, "unknown_stimulus", f"{body.stimulus_id!r} not in plan")
        except engine.RatingRangeError as exc:
            return _error(400, "range", str(exc))
        except engine.DuplicateRatingError as exc:
            return _error(409, "duplicate", str(exc))
        return {
            "session_id": rec.session_id,
            "stimulus_id": rec.stimulus_id,
            "scale": rec.scale,
            "percent": rec.percent,
            "timestamp": rec.timestamp,
        }

    @app.get("/results/summary")
    def results_summary():
        records = store.records()
        if not records:
            return {"groups": [], "total_ratings": 0}
        summary = engine.compute_mos(records, store.plans())
        return {
            "total_ratings": summary.total_ratings,
            "groups": [
                {
                    "cohort": g.cohort.value,
                    "tumor_class": g.tumor_class.value,
                    "mos": g.mos,
                    "mean_percent": g.mean_percent,
                    "count": g.count,
                    "mos_half_width": g.mos_half_width,
                }
                for g in summary.groups
            ],
        }

    @app.get("/results/export")
    def results_export():
        import io

        buf = io.StringIO()
        import csv as _csv

        writer = _csv.writer(buf, lineterminator="\n")
        writer.writerow(engine.RATINGS_CSV_HEADER)
        for r in store.records():
            writer.writerow([r.session_id, r.stimulus_id, r.scale, r.percent, r.timestamp])
        return PlainTextResponse(buf.getvalue(), media_type="text/csv")

    @app.get("/stimuli/{name}")
    def stimulus_file(name: str):
        target = (stimuli_dir / name).resolve()
        if stimuli_dir.resolve() not in target.parents or not target.is_file():
            return _error(404, "unknown_file", f"no stimulus file {name!r}")
        media = MEDIA_TYPES.get(target.suffix, "application/octet-stream")
        return FileResponse(target, media_type=media)

    @app.get("/instructions")
    def instructions():
        return {
            "protocol": "double-stimulus impairment rating",
            "scale": [
                {"value": v, "label": label}
                for v, label in sorted(engine.SCALE_LABELS.items(), reverse=True)
            ],
            "percent": "rate the prediction accuracy out of 100 at your discretion",
            "total_stimuli": engine.PLAN_SIZE,
        }

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def serve(store, pool, stimuli_dir, port: int, ui_dir=None, host: str = "127.0.0.1"):
    import uvicorn

    app = create_app(store, pool, stimuli_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
