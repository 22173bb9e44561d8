"""
FastAPI server for functional factor covariance estimation.

Provides endpoints to:
1. Choose between the two functional factor models for a panel
2. Fit DIGIT or FPOET and return the estimate summary
3. Compute the adaptive thresholding level
4. Health check

Usage:
    uvicorn api.server:app --reload --port 8000

Or run via:
    python -m api.server
"""

from typing import Literal, Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field, model_validator

from core.basis import kernel_norm, make_basis, project
from core.config import BASIS_CONFIG, SCHEMA_VERSION, SELECTION_CONFIG, THRESHOLD_CONFIG
from core.covariance import center
from core.errors import FFMError, InvalidArgumentError, SchemaError
from core.log import configure_logging
from core.models import FunctionalPanel
from estimators.aft import ThresholdRule, functional_sparsity, threshold_level
from estimators.digit import digit_estimator
from estimators.fpoet import fpoet_estimator
from graph.workflow import run_selection

configure_logging()

app = FastAPI(
    title="Functional Factor Covariance API",
    description="""
    Estimate large covariance matrix functions of functional time series.

    ## Endpoints
    - **/select**: ratio-estimated factor numbers and PC/IC model choice
    - **/fit**: DIGIT (functional factors) or FPOET (functional loadings) estimate
    - **/threshold-level**: the adaptive functional thresholding level
    """,
    version="0.1.0",
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


# Request/Response models
class BasisPayload(BaseModel):
    """Estimation basis on an equispaced grid of G points."""
    kind: Literal["fourier", "bspline"] = BASIS_CONFIG["kind"]
    K: int = Field(BASIS_CONFIG["K"], ge=1)
    G: int = Field(BASIS_CONFIG["G"], ge=3)


class PanelPayload(BaseModel):
    """A panel given either as (n, p, K) coefficients or as (n, p, G) grid samples."""
    coeffs: Optional[list[list[list[float]]]] = None
    samples: Optional[list[list[list[float]]]] = None
    basis: BasisPayload = Field(default_factory=BasisPayload)
    center: bool = Field(True, description="Subtract the sample mean before estimation")

    @model_validator(mode="after")
    def one_source(self):
        if (self.coeffs is None) == (self.samples is None):
            raise ValueError("give exactly one of 'coeffs' or 'samples'")
        return self


class ThresholdPayload(BaseModel):
    family: Literal["hard", "soft", "scad", "alasso", "adaptive-lasso"] = THRESHOLD_CONFIG["family"]
    C_dot: float = Field(THRESHOLD_CONFIG["C_dot"], ge=0)
    adaptive: bool = THRESHOLD_CONFIG["adaptive"]
    threshold_diagonal: bool = THRESHOLD_CONFIG["threshold_diagonal"]

    def rule(self) -> ThresholdRule:
        return ThresholdRule(family=self.family, C_dot=self.C_dot, adaptive=self.adaptive)


class SelectRequest(BaseModel):
    """Request for model selection."""
    panel: PanelPayload
    c_r: float = Field(SELECTION_CONFIG["c_r"], gt=0, le=1)
    eps0: float = Field(SELECTION_CONFIG["eps0"], ge=0)
    r0: Optional[int] = Field(None, ge=1)


class SelectResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    report: dict
    omega_eigenvalues: list[float]
    tau_eigenvalues: list[float]


class FitRequest(BaseModel):
    """Request for a single estimator fit."""
    panel: PanelPayload
    method: Literal["digit", "fpoet"]
    r: int = Field(..., ge=0)
    threshold: ThresholdPayload = Field(default_factory=ThresholdPayload)
    include_matrix: bool = Field(False, description="Return the pK x pK flattening of the estimate")


class FitResponse(BaseModel):
    schema_version: str = SCHEMA_VERSION
    method: str
    r: int
    p: int
    K: int
    n: int
    norm_SF: float
    norm_L: float
    sparsity: float
    spectrum: list[float]
    matrix: Optional[list[list[float]]] = None


class ThresholdLevelRequest(BaseModel):
    C_dot: float = Field(THRESHOLD_CONFIG["C_dot"], ge=0)
    n: int = Field(..., ge=2)
    p: int = Field(..., ge=2)


class HealthResponse(BaseModel):
    status: str
    schema_version: str


def build_panel(payload: PanelPayload) -> FunctionalPanel:
    """Turn a request payload into a (centered) FunctionalPanel."""
    basis = make_basis(payload.basis.kind, payload.basis.K, payload.basis.G)
    if payload.samples is not None:
        panel = project(np.asarray(payload.samples, dtype=float), basis)
    else:
        panel = FunctionalPanel(np.asarray(payload.coeffs, dtype=float), basis)
    return center(panel) if payload.center else panel


def raise_http(exc: FFMError):
    """Map toolkit errors to HTTP status codes."""
    status = 422 if isinstance(exc, (InvalidArgumentError, SchemaError)) else 500
    raise HTTPException(status_code=status, detail={"code": exc.code, "message": str(exc)})


# Endpoints
@app.get("/", tags=["Info"])
async def root():
    """Welcome message with available endpoints."""
    return {
        "message": "Functional Factor Covariance API",
        "docs": "/docs",
        "endpoints": {
            "POST /select": "Factor numbers and model choice (DIGIT vs FPOET)",
            "POST /fit": "Fit one estimator at a given rank",
            "POST /threshold-level": "Adaptive thresholding level",
            "GET /health": "Health check",
        },
    }


@app.get("/health", response_model=HealthResponse, tags=["Health"])
async def health_check():
    return HealthResponse(status="healthy", schema_version=SCHEMA_VERSION)


@app.post("/select", response_model=SelectResponse, tags=["Selection"])
def select_endpoint(request: SelectRequest):
    """
    Run the selection workflow on a panel.

    Both ratio estimators run in parallel; the information criteria then vote
    between the functional-factor (ffm1) and functional-loading (ffm2) models.
    """
    try:
        panel = build_panel(request.panel)
        state = run_selection(panel, {"c_r": request.c_r, "eps0": request.eps0, "r0": request.r0})
    except FFMError as exc:
        raise_http(exc)

    if state.get("errors"):
        raise HTTPException(status_code=422, detail={"errors": state["errors"]})
    return SelectResponse(
        report=state["report"].to_dict(),
        omega_eigenvalues=np.asarray(state["omega_eigenvalues"]).tolist(),
        tau_eigenvalues=np.asarray(state["tau_eigenvalues"]).tolist(),
    )


@app.post("/fit", response_model=FitResponse, tags=["Estimation"])
def fit_endpoint(request: FitRequest):
    """Fit DIGIT or FPOET at rank ``r`` and summarize the estimate."""
    try:
        panel = build_panel(request.panel)
        rule = request.threshold.rule()
        td = request.threshold.threshold_diagonal
        if request.method == "digit":
            estimate, fit = digit_estimator(panel, request.r, rule, td)
            spectrum = fit.omega_eigenvalues
            idiosyncratic = fit.Sigma_eps_thresholded
        else:
            estimate, fit = fpoet_estimator(panel, request.r, rule, threshold_diagonal=td)
            spectrum = fit.tau_hat
            idiosyncratic = fit.R_thresholded
    except FFMError as exc:
        raise_http(exc)

    return FitResponse(
        method=request.method,
        r=request.r,
        p=panel.p,
        K=panel.K,
        n=panel.n,
        norm_SF=float(kernel_norm(estimate, "SF")),
        norm_L=float(kernel_norm(estimate, "L")),
        sparsity=functional_sparsity(idiosyncratic, 0.0),
        spectrum=np.asarray(spectrum, dtype=float).tolist(),
        matrix=estimate.flat().tolist() if request.include_matrix else None,
    )


@app.post("/threshold-level", tags=["Estimation"])
async def threshold_level_endpoint(request: ThresholdLevelRequest):
    """lambda = C_dot * (sqrt(log(p) / n) + 1 / sqrt(p))."""
    try:
        lam = threshold_level(ThresholdRule(C_dot=request.C_dot), request.n, request.p)
    except FFMError as exc:
        raise_http(exc)
    return {"lambda": lam, "C_dot": request.C_dot, "n": request.n, "p": request.p}


# Run server directly
if __name__ == "__main__":
    print("\n" + "=" * 60)
    print("🚀 Starting Functional Factor Covariance API Server")
    print("=" * 60)
    print("\n📍 Endpoints:")
    print("   POST /select          - Model selection")
    print("   POST /fit             - DIGIT / FPOET fit")
    print("   POST /threshold-level - Thresholding level")
    print("\n📚 Docs: http://localhost:8000/docs")
    print("=" * 60 + "\n")

    uvicorn.run(
        "api.server:app",
        host="0.0.0.0",
        port=8000,
        reload=True
    )
