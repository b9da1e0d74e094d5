# backend/main.py

import logging
import traceback
from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from backend.config import OUTPUT_DIR, setup_logging
from backend.scenarios import SCENARIOS, build_config, list_scenarios, run_scenario
from data.io import to_plain

setup_logging()

app = FastAPI(title="Conveyor Spin-Qubit Simulator")

# In-memory snapshot of the last scenario run.
LAST_RUN = {
    "scenario": None,
    "seed": None,
    "status": "idle",
    "out_dir": None,
    "files": [],
    "error": None,
}


class RunRequest(BaseModel):
    seed: int = 0
    config_path: Optional[str] = None
    out_dir: Optional[str] = None


class ValidateRequest(BaseModel):
    scenario: str
    config_path: Optional[str] = None


def _fail(name, e):
    """Map library errors onto HTTP status codes."""
    if isinstance(e, FileNotFoundError):
        logging.error(f"File not found: {e}")
        return HTTPException(status_code=404, detail=str(e))
    if isinstance(e, ValueError):
        logging.error(f"Validation error in {name}: {e}")
        return HTTPException(status_code=400, detail=str(e))
    logging.error(f"Scenario error in {name}: {e}")
    logging.error(traceback.format_exc())
    return HTTPException(status_code=500, detail=f"Internal error: {str(e)}")


@app.get("/scenarios")
def scenarios():
    return {"scenarios": list_scenarios()}


@app.post("/run/{name}")
def run(name: str, request: Optional[RunRequest] = None):
    """
    Run one scenario and return its JSON reports.

    The outputs land in `<out_dir>/<name>/` exactly as with the command line.
    """
    global LAST_RUN
    request = request or RunRequest()
    if name not in SCENARIOS:
        raise HTTPException(status_code=404, detail=f"Unknown scenario: {name}")

    LAST_RUN = {"scenario": name, "seed": request.seed, "status": "running",
                "out_dir": None, "files": [], "error": None}
    try:
        result = run_scenario(name, request.config_path, request.seed, request.out_dir or OUTPUT_DIR)
    except Exception as e:
        LAST_RUN = dict(LAST_RUN, status="failed", error=str(e))
        raise _fail(name, e)

    LAST_RUN = {"scenario": name, "seed": request.seed, "status": result["status"],
                "out_dir": result["out_dir"], "files": result["files"], "error": None}
    logging.info(f"scenario={name} | seed={request.seed} | status={result['status']} | out={result['out_dir']}")
    return result


@app.get("/last_run")
def last_run():
    """Read-only snapshot of the last run; never starts a simulation."""
    return LAST_RUN


@app.post("/validate")
def validate(request: ValidateRequest):
    try:
        cfg = build_config(request.scenario, request.config_path)
    except Exception as e:
        raise _fail(request.scenario, e)
    return {"scenario": request.scenario, "valid": True, "config": to_plain(cfg.model_dump(mode="json"))}


@app.get("/health")
def health():
    return {"status": "ok"}
