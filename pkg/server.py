"""
SignHDG Server (FastAPI)
========================
HTTP access to the experiment drivers.
Auto-generated Swagger docs at /docs
"""
from dotenv import load_dotenv
load_dotenv()  # Load .env file

import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
import uvicorn

BASE_DIR = Path(__file__).parent.absolute()
sys.path.insert(0, str(BASE_DIR))

from errors import SignHdgError  # noqa: E402
from experiments.study import list_experiments, run_convergence_study, run_field_output  # noqa: E402
from utils.run_config import RunConfig  # noqa: E402

logger = logging.getLogger(__name__)

RESULTS_DIR = Path(os.getenv("SIGNHDG_RESULTS_DIR", str(BASE_DIR / "results" / "server")))
MAX_LEVEL = int(os.getenv("SIGNHDG_MAX_LEVEL", "64"))

app = FastAPI(
    title="SignHDG API",
    description="HDG with sign-changing stabilization: convergence studies and slices",
    version="1.0.0"
)


class RunRequest(BaseModel):
    experiment: str = "cavity"
    methods: List[str] = ["hdg"]
    sigma_plus: float = 1.0
    kappa: float = -1.001
    gamma: float = 1.0
    pattern: str = "mirrored"
    quadrature_degree: Optional[int] = None


class StudyRequest(RunRequest):
    k: int = Field(default=1, ge=0)
    levels: List[int] = [4, 8]


class SliceRequest(RunRequest):
    k: int = Field(default=1, ge=0)
    n: int = Field(default=8, ge=1)
    slice_x2: Optional[float] = None
    slice_points: int = Field(default=101, ge=2)


def _error_response(error: SignHdgError) -> JSONResponse:
    return JSONResponse(status_code=400, content={"error": f"{error.module}: {error}"})


def _clean(value):
    """NaN -> None so rows serialize as JSON."""
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _records(frame) -> list:
    return [{key: _clean(value) for key, value in row.items()} for row in frame.to_dict(orient="records")]


@app.get("/health", tags=["Status"])
def health():
    return {"status": "ok"}


@app.get("/experiments", tags=["Metadata"])
def experiments():
    """Experiments with their domains and preset files."""
    return {"experiments": list_experiments(BASE_DIR / "config")}


@app.post("/study", tags=["Studies"])
def study(request: StudyRequest):
    """Run a refinement study and return one table per method."""
    if any(n > MAX_LEVEL for n in request.levels):
        return JSONResponse(status_code=400, content={"error": f"cli: levels above {MAX_LEVEL} are not served"})
    try:
        config = RunConfig(
            experiment=request.experiment, methods=tuple(request.methods), k=(request.k,),
            levels=tuple(request.levels), sigma_plus=request.sigma_plus, kappa=request.kappa,
            gamma=request.gamma, pattern=request.pattern, quadrature_degree=request.quadrature_degree,
            output_dir=str(RESULTS_DIR),
        )
        results = run_convergence_study(config)
    except SignHdgError as e:
        logger.error(f"Study request failed: {e}")
        return _error_response(e)
    return {
        "tables": [
            {
                "method": result.method,
                "k": result.degree,
                "rows": _records(result.table.to_frame()),
                "failure": result.failure,
            }
            for result in results
        ]
    }


@app.post("/slice", tags=["Fields"])
def slice_line(request: SliceRequest):
    """Solve one mesh and return u_h sampled along a horizontal line."""
    if request.n > MAX_LEVEL:
        return JSONResponse(status_code=400, content={"error": f"cli: levels above {MAX_LEVEL} are not served"})
    try:
        config = RunConfig(
            experiment=request.experiment, methods=tuple(request.methods), k=(request.k,),
            levels=(request.n,), sigma_plus=request.sigma_plus, kappa=request.kappa,
            gamma=request.gamma, pattern=request.pattern, quadrature_degree=request.quadrature_degree,
            slice_x2=request.slice_x2, slice_points=request.slice_points, output_dir=str(RESULTS_DIR),
        )
        output = run_field_output(config)
    except SignHdgError as e:
        logger.error(f"Slice request failed: {e}")
        return _error_response(e)
    return {
        "slice_x2": config.slice_height,
        "rows": _records(output.slice_frame),
        "discrepancy": output.discrepancy,
    }


if __name__ == '__main__':
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    print(f"\n{'='*50}")
    print(f"  SignHDG Server (FastAPI)")
    print(f"  Port: 8000")
    print(f"  Results: {RESULTS_DIR}")
    print(f"{'='*50}")
    print(f"  API Docs: http://localhost:8000/docs")
    print(f"{'='*50}\n")
    uvicorn.run("server:app", host='127.0.0.1', port=8000, reload=True)
