import os
from contextlib import asynccontextmanager
from typing import List, Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from config.config import get_parameter
from src.common.logger import get_logger
from src.services.checkpoint import load_checkpoint
from src.services.commands import normalized_series
from src.services.evaluation import ScoreSeries, select_threshold
from src.services.model import FmuadModel
from src.services.trainer import score_series

logger = get_logger("app")


class ScoreRequest(BaseModel):
    series: List[List[float]]


class EvaluateRequest(BaseModel):
    scores: List[float]
    labels: List[int]


class ServiceState:
    model: Optional[FmuadModel] = None


state = ServiceState()


def load_model_from_env() -> Optional[FmuadModel]:
    path = os.getenv("FMUAD_CHECKPOINT")
    if not path:
        logger.warn("FMUAD_CHECKPOINT is not set! /score will be unavailable")
        return None
    try:
        return load_checkpoint(path)
    except ValueError as e:
        logger.error(f"Failed to load checkpoint {path}", e)
        return None


@asynccontextmanager
async def lifespan(_: FastAPI):
    if state.model is None:
        state.model = load_model_from_env()
    yield


# Get ALLOWED_ORIGINS from environment variables
origins_env = os.getenv("ALLOWED_ORIGINS", "")
allowed_origins = [o.strip() for o in origins_env.split(",") if o.strip()]
if not allowed_origins:
    logger.warn("ALLOWED_ORIGINS is empty! CORS will be very restrictive")

app = FastAPI(lifespan=lifespan)

app.add_middleware(
    CORSMiddleware,
    allow_origins=allowed_origins,
    allow_credentials=True,
    allow_methods=["GET", "POST"],
    allow_headers=["Content-Type", "Authorization"],
)


@app.post("/score", response_class=JSONResponse)
def score(request: ScoreRequest) -> JSONResponse:
    if state.model is None:
        raise HTTPException(status_code=503, detail="No checkpoint loaded")
    try:
        raw = np.asarray(request.series, dtype=np.float64)
        if raw.ndim != 2 or raw.shape[0] == 0:
            raise ValueError("'series' must be a non-empty list of rows with one value per feature")
        series = normalized_series(state.model, raw.T)
        logger.info(f"Scoring series of {raw.shape[0]} steps x {raw.shape[1]} features")
        result, _ = score_series(state.model, series)
    except ValueError as e:
        logger.error("Rejected scoring request", e)
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.exception("Error occurred while scoring")
        raise HTTPException(status_code=500, detail=f"Internal server error: {str(e)}")

    return JSONResponse(
        status_code=200,
        content={
            "status": "ok",
            "timestamps": [int(t) for t in result.timestamps],
            "scores": [float(s) for s in result.scores],
        },
    )


@app.post("/evaluate", response_class=JSONResponse)
def evaluate(request: EvaluateRequest) -> JSONResponse:
    try:
        if len(request.scores) != len(request.labels):
            raise ValueError(f"{len(request.scores)} scores for {len(request.labels)} labels")
        if any(label not in (0, 1) for label in request.labels):
            raise ValueError("labels must be 0 or 1")
        scores = ScoreSeries(np.arange(len(request.scores)), np.asarray(request.scores, dtype=np.float64))
        _, report = select_threshold(scores, request.labels)
    except ValueError as e:
        logger.error("Rejected evaluation request", e)
        raise HTTPException(status_code=400, detail=str(e))

    return JSONResponse(status_code=200, content={"status": "ok", "report": report.to_dict()})


@app.get("/health_check")
async def health_check():
    return JSONResponse(content={"status": "ok", "checkpoint_loaded": state.model is not None})


if __name__ == "__main__":
    uvicorn.run("app:app", host=get_parameter("service.host"), port=int(get_parameter("service.port")))
