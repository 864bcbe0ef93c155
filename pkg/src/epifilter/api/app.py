"""HTTP service around the filter.

Runs are submitted as JSON (configuration overrides plus the observation CSV
text), executed in the background, and their summaries fetched as JSON rows
or as the same CSV the command-line tool writes.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field, replace

from fastapi import BackgroundTasks, FastAPI, HTTPException
from fastapi.responses import PlainTextResponse

from .. import __version__
from ..assimilation import FilterDivergenceError
from ..config import load_config, parse_value
from ..epimodel import compute_rt
from ..experiment import AlignmentError, ConfigError, DailySummary, ExperimentConfig, forecast_analysis_divergence, run
from ..observations import ObservationError, parse_observations
from ..reporting import summaries_csv, summary_columns, summary_rows
from .schemas import (
    DivergencePoint,
    Health,
    RtRequest,
    RtResponse,
    RunRequest,
    RunStatus,
    ValidateRequest,
    ValidateResponse,
)

app = FastAPI(title="epifilter", version=__version__)


@dataclass
class Job:
    config: ExperimentConfig
    status: str = "queued"
    error: str | None = None
    error_kind: str | None = None
    summaries: list[DailySummary] = field(default_factory=list)


_jobs: dict[str, Job] = {}
_lock = threading.Lock()


def _job(run_id: str) -> Job:
    with _lock:
        job = _jobs.get(run_id)
    if job is None:
        raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
    return job


def _execute(job: Job, obs, threads: int) -> None:
    job.status = "running"
    try:
        job.summaries = run(job.config, obs, threads=threads)
        job.status = "done"
    except FilterDivergenceError as exc:
        job.status, job.error, job.error_kind = "failed", str(exc), "divergence"
    except Exception as exc:  # reported through the status endpoint
        job.status, job.error, job.error_kind = "failed", str(exc), type(exc).__name__


def _status(run_id: str, job: Job) -> RunStatus:
    analysis = [s for s in job.summaries if s.phase == "analysis"]
    return RunStatus(
        run_id=run_id, status=job.status, error=job.error, error_kind=job.error_kind,
        days=len({s.day_index for s in job.summaries}),
        resamplings=sum(s.resampled for s in analysis) if job.status == "done" else None,
    )


@app.get("/health", response_model=Health)
def health():
    return Health(version=__version__)


@app.post("/model/rt", response_model=RtResponse)
def model_rt(req: RtRequest):
    cfg = ExperimentConfig(n_particles=1)
    fixed = cfg.fixed
    try:
        if req.k is not None:
            fixed = replace(fixed, k=req.k)
        if req.p_as is not None:
            fixed = replace(fixed, p_as=req.p_as)
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return RtResponse(r_t=req.r_t, rt=float(compute_rt(req.r_t, fixed)))


@app.post("/observations/validate", response_model=ValidateResponse)
def validate_observations(req: ValidateRequest):
    try:
        obs = parse_observations(req.csv.splitlines(), req.sim_start_date, req.first_obs_day_index,
                                 req.lax_columns)
    except ObservationError as exc:
        return ValidateResponse(valid=False, error=str(exc), row=exc.row)
    return ValidateResponse(
        valid=True, records=len(obs), first_day=obs.first_day,
        last_day=obs.records[-1].day_index if obs.records else None,
    )


@app.post("/runs", response_model=RunStatus, status_code=202)
def submit_run(req: RunRequest, background: BackgroundTasks):
    try:
        overrides = {k: parse_value(k, str(v)) for k, v in req.config.items()}
        cfg = load_config(None, overrides)
    except ConfigError as exc:
        raise HTTPException(status_code=422, detail=f"configuration error: {exc}")
    try:
        obs = parse_observations(req.observations_csv.splitlines(), cfg.sim_start_date,
                                 cfg.free_run_days, req.lax_columns)
    except (ObservationError, AlignmentError) as exc:
        raise HTTPException(status_code=422, detail=f"observation error: {exc}")
    run_id = uuid.uuid4().hex
    job = Job(cfg)
    with _lock:
        _jobs[run_id] = job
    background.add_task(_execute, job, obs, req.threads)
    return _status(run_id, job)


@app.get("/runs/{run_id}", response_model=RunStatus)
def run_status(run_id: str):
    return _status(run_id, _job(run_id))


def _finished(run_id: str) -> Job:
    job = _job(run_id)
    if job.status != "done":
        raise HTTPException(status_code=409, detail=f"run {run_id} is {job.status}")
    return job


@app.get("/runs/{run_id}/summaries")
def run_summaries(run_id: str, format: str = "json"):
    job = _finished(run_id)
    levels = job.config.ci_levels
    if format == "csv":
        return PlainTextResponse(summaries_csv(job.summaries, job.config.sim_start_date, levels),
                                 media_type="text/csv")
    if format != "json":
        raise HTTPException(status_code=422, detail="format must be json or csv")
    cols = summary_columns(levels)
    rows = summary_rows(job.summaries, job.config.sim_start_date, levels)
    text_cols = {"date", "phase"}
    out = []
    for row in rows:
        rec = {}
        for c, v in zip(cols, row):
            rec[c] = v if c in text_cols else (int(v) if c in ("day_index", "resampled") else float(v))
        out.append(rec)
    return out


@app.get("/runs/{run_id}/divergence", response_model=list[DivergencePoint])
def run_divergence(run_id: str):
    job = _finished(run_id)
    return [DivergencePoint(day_index=d, relative_difference=v)
            for d, v in forecast_analysis_divergence(job.summaries)]
