from __future__ import annotations

import datetime as dt
from typing import Literal

from pydantic import BaseModel, Field


class Health(BaseModel):
    status: str = "ok"
    version: str


class RtRequest(BaseModel):
    r_t: float = Field(ge=0, le=1)
    k: float | None = Field(default=None, ge=0, le=1)
    p_as: float | None = Field(default=None, ge=0, le=1)


class RtResponse(BaseModel):
    r_t: float
    rt: float


class ValidateRequest(BaseModel):
    csv: str
    sim_start_date: dt.date = dt.date(2020, 1, 17)
    first_obs_day_index: int | None = None
    lax_columns: bool = False


class ValidateResponse(BaseModel):
    valid: bool
    records: int = 0
    first_day: int | None = None
    last_day: int | None = None
    error: str | None = None
    row: int | None = None


class RunRequest(BaseModel):
    observations_csv: str
    config: dict[str, str | int | float | bool] = Field(
        default_factory=dict, description="dotted configuration keys, e.g. {'model.k': 0.58}")
    lax_columns: bool = False
    threads: int = Field(default=1, ge=1)


class RunStatus(BaseModel):
    run_id: str
    status: Literal["queued", "running", "done", "failed"]
    error: str | None = None
    error_kind: str | None = None
    days: int = 0
    resamplings: int | None = None


class DivergencePoint(BaseModel):
    day_index: int
    relative_difference: float
