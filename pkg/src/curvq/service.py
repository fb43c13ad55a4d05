"""FastAPI service exposing the computation cores.

Each endpoint mirrors a CLI subcommand and returns the same flat records.
Metrics are passed by value (preset name or inline TOML text); the service
holds no state between requests.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__, runs
from .expressions import ParseError
from .geodesics import ChartError, GeodesicError
from .geometry import MetricEvaluationError
from .grid_ops import GridError, build_grid
from .jets import EvaluationError
from .metrics import MetricConfigError, MetricSpec, parse_metric_config, resolve_preset
from .schemas import (
    CoefficientRequest,
    EvolveRequest,
    GeometryRequest,
    GridSpec,
    MetricRef,
    PathintRequest,
    PotentialRequest,
    RecordsResponse,
    SpectrumRequest,
)

app = FastAPI(
    title="curvq",
    version=__version__,
    description="operator-ordering quantization laboratory on curved configuration spaces",
)

_CONFIG_ERRORS = (MetricConfigError, ParseError, GridError, ValueError)
_NUMERIC_ERRORS = (MetricEvaluationError, EvaluationError, ChartError, GeodesicError,
                   ArithmeticError)


def _metric(ref: MetricRef) -> MetricSpec:
    try:
        if ref.preset is not None:
            return resolve_preset(ref.preset)
        return parse_metric_config(ref.config)
    except (MetricConfigError, ParseError) as err:
        raise HTTPException(status_code=400, detail=str(err))


def _grid(spec: MetricSpec, gs: GridSpec):
    try:
        return build_grid(spec, tuple(gs.points_per_dim),
                          boundary=tuple(gs.boundary) if gs.boundary else None,
                          ranges=gs.ranges)
    except GridError as err:
        raise HTTPException(status_code=400, detail=str(err))


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except HTTPException:
        raise
    except _NUMERIC_ERRORS as err:
        raise HTTPException(status_code=422, detail=str(err))
    except _CONFIG_ERRORS as err:
        raise HTTPException(status_code=400, detail=str(err))


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/geometry", response_model=RecordsResponse)
def geometry(req: GeometryRequest) -> RecordsResponse:
    spec = _metric(req.metric)
    return RecordsResponse(records=_guard(runs.run_geometry, spec, req.points))


@app.post("/potential", response_model=RecordsResponse)
def potential(req: PotentialRequest) -> RecordsResponse:
    spec = _metric(req.metric)
    return RecordsResponse(
        records=_guard(runs.run_potential, spec, req.rules, req.points,
                       hbar=req.hbar, mass=req.mass)
    )


@app.post("/coefficient", response_model=RecordsResponse)
def coefficient(req: CoefficientRequest) -> RecordsResponse:
    spec = _metric(req.metric)
    return RecordsResponse(
        records=_guard(runs.run_coefficient, spec, req.rules, req.points,
                       fd_step=req.fd_step)
    )


@app.post("/spectrum", response_model=RecordsResponse)
def spectrum(req: SpectrumRequest) -> RecordsResponse:
    spec = _metric(req.metric)
    grid = _grid(spec, req.grid)
    return RecordsResponse(
        records=_guard(runs.run_spectrum, spec, grid, req.count, rule=req.rule,
                       vq_mode=req.vq_mode, hbar=req.hbar, mass=req.mass)
    )


@app.post("/evolve", response_model=RecordsResponse)
def evolve(req: EvolveRequest) -> RecordsResponse:
    spec = _metric(req.metric)
    grid = _grid(spec, req.grid)
    return RecordsResponse(
        records=_guard(runs.run_evolve, spec, grid, req.rule, req.time, req.steps,
                       psi0=req.psi0, vq_mode=req.vq_mode, hbar=req.hbar,
                       mass=req.mass, report_every=req.report_every)
    )


@app.post("/pathint", response_model=RecordsResponse)
def pathint(req: PathintRequest) -> RecordsResponse:
    spec = _metric(req.metric)
    grid = _grid(spec, req.grid)
    return RecordsResponse(
        records=_guard(runs.run_pathint, spec, grid, req.rule, req.time, req.slices,
                       hbar=req.hbar, mass=req.mass)
    )
