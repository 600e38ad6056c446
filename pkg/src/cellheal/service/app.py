"""HTTP facade over the experiment harness.

Each endpoint accepts the experiment configuration inline, runs the
corresponding harness operation synchronously, and returns the results;
artefact CSVs are written server-side when the request names an output
directory. Domain errors map to 400 with a machine-parsable category.
"""

import math
import os

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, harness
from ..config import config_from_dict
from ..errors import CellhealError
from .schemas import (
    EpisodeRow,
    FitRequest,
    FitResponse,
    HealResponse,
    HealthResponse,
    MatrixRequest,
    MatrixResponse,
    OracleHealRequest,
    OracleHealResponse,
    SimulateRequest,
    SimulateResponse,
    SweepRequest,
    SweepResponse,
    SweepRow,
    TraceIteration,
    ZoneRowModel,
)

app = FastAPI(title="cellheal", version=__version__)


@app.exception_handler(CellhealError)
async def domain_error(request: Request, exc: CellhealError):
    return JSONResponse(status_code=400,
                        content={"category": exc.category, "message": str(exc)})


def _load(req):
    cfg = config_from_dict(req.config)
    if req.seed is not None:
        cfg = cfg.model_copy(deep=True)
        cfg.seeds.root = req.seed
    return cfg


def _none_if_nan(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return None
    return value


def _trace(state):
    return [
        TraceIteration(
            k=rec.k,
            phase=rec.phase,
            pivot_alpha=rec.pivot_alpha,
            alphas=rec.alphas,
            predicted_cost=_none_if_nan(rec.predicted_cost),
            measured_cost=_none_if_nan(rec.measured_cost),
            feasible=rec.feasible,
        )
        for rec in state.history
    ]


@app.get("/health", response_model=HealthResponse)
def health():
    return HealthResponse(status="ok", version=__version__)


@app.get("/config/default")
def default_config():
    from ..config import ExperimentConfig

    return ExperimentConfig().model_dump()


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest):
    cfg = _load(req)
    alphas = None
    if req.alpha is not None:
        alphas = [req.alpha] * cfg.build_layout().n_enbs
    layout, report, matrix = harness.simulate(
        cfg, duration=req.duration, warmup=req.warmup, alphas=alphas)
    rows = [
        EpisodeRow(episode_id="simulate", enb_id=e.id, alpha=e.alpha,
                   arrivals=report.arrivals[e.id], blocks=report.blocks[e.id],
                   completions=report.completions[e.id],
                   bcr_pct=report.bcr_pct[e.id], ftt_s=report.ftt_s[e.id])
        for e in layout.enbs
    ]
    files = {}
    if req.out:
        files["kpis"] = os.path.join(req.out, "kpis.csv")
        harness.write_episode_csv(files["kpis"], "simulate", layout, report)
        files["matrix"] = os.path.join(req.out, "matrix.csv")
        harness.write_matrix_csv(files["matrix"], matrix)
    return SimulateResponse(rows=rows, mean_bcr=report.mean_bcr(),
                            mean_ftt=report.mean_ftt(), files=files)


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest):
    cfg = _load(req)
    rows = harness.sweep(cfg, alpha_min=req.alpha_min, alpha_max=req.alpha_max,
                         step=req.alpha_step)
    try:
        reference = harness.pick_reference(rows, cfg.sweep.reference_band_pct)
    except CellhealError:
        reference = None
    files = {}
    if req.out:
        files["sweep"] = os.path.join(req.out, "sweep.csv")
        harness.write_csv(files["sweep"], ("alpha", "mean_bcr", "mean_ftt"), rows)
    return SweepResponse(
        rows=[SweepRow(alpha=a, mean_bcr=b, mean_ftt=f) for a, b, f in rows],
        reference_alpha=reference, files=files)


@app.post("/matrix", response_model=MatrixResponse)
def matrix(req: MatrixRequest):
    cfg = _load(req)
    m = harness.estimate_reference_matrix(cfg, duration=req.duration)
    files = {}
    if req.out:
        files["matrix"] = os.path.join(req.out, "matrix.csv")
        harness.write_matrix_csv(files["matrix"], m)
    return MatrixResponse(ids=list(m.ids), values_mw=m.values.tolist(), files=files)


@app.post("/fit", response_model=FitResponse)
def fit_endpoint(req: FitRequest):
    from ..statlearn import fit

    model = fit(req.x, req.y)
    files = {}
    if req.out:
        files["model"] = os.path.join(req.out, "model.toml")
        harness.write_model_toml(files["model"], model)
    return FitResponse(beta0=model.beta0, beta1=model.beta1, y_lo=model.y_lo,
                       y_hi=model.y_hi, n_samples=model.n_samples,
                       residual_rms=model.residual_rms, files=files)


@app.post("/heal", response_model=HealResponse)
def heal(req: SimulateRequest):
    cfg = _load(req)
    outcome = harness.heal(cfg)
    files = harness.persist_heal(req.out, cfg, outcome) if req.out else {}
    return HealResponse(
        faulty_enb=outcome.faulty,
        tier1=outcome.tier1,
        tier2=outcome.tier2,
        converged=outcome.state.converged,
        converged_alpha=outcome.converged_alpha,
        iterations=outcome.state.iteration,
        measured_reference_cost=outcome.measured_reference_cost,
        measured_optimized_cost=outcome.measured_optimized_cost,
        trace=_trace(outcome.state),
        zone_rows=[ZoneRowModel(**row.__dict__) for row in outcome.zone_report.rows],
        files=files,
    )


@app.post("/oracle-heal", response_model=OracleHealResponse)
def oracle_heal(req: OracleHealRequest):
    cfg = _load(req)
    outcome = harness.oracle_heal(cfg)
    files = {}
    if req.out:
        files["trace"] = os.path.join(req.out, "oracle_trace.csv")
        harness.write_trace_csv(files["trace"], outcome.state)
        files.update(harness.emit_plot_data(req.out, outcome.state))
    return OracleHealResponse(
        converged=outcome.state.converged,
        converged_alpha=outcome.converged_alpha,
        true_alpha=outcome.true_alpha,
        true_cost=outcome.true_cost,
        iterations=outcome.state.iteration,
        trace=_trace(outcome.state),
        files=files,
    )
