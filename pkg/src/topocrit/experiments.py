"""Experiment configs (strict JSON) and their runners."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, field_validator, model_validator

from . import __version__, adiabatic, edgetheory, invariants, metrology, models, spectra
from .fitting import ScalingFit, fit_power_law


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Common(_Strict):
    name: Optional[str] = None
    workers: Optional[int] = Field(default=None, ge=1)
    out: Optional[str] = None
    plot: bool = True


def _sizes_ok(v):
    if len(v) == 0:
        raise ValueError("sizes must not be empty")
    if any(L < 1 for L in v):
        raise ValueError("sizes must be positive")
    if len(set(v)) != len(v):
        raise ValueError("sizes must be distinct")
    return sorted(v)


class BandConfig(Common):
    experiment: Literal["BAND"]
    couplings: List[float] = Field(min_length=1)
    n_k: int = Field(default=1024, ge=2)

    @model_validator(mode="after")
    def _grid(self):
        R = len(self.couplings) - 1
        if self.n_k < 2 * R + 2:
            raise ValueError(f"n_k must be >= 2R+2 = {2 * R + 2}")
        return self


class Axis(_Strict):
    parameter: Union[int, str]
    start: float
    stop: float
    num: int = Field(ge=1)

    def values(self):
        return np.linspace(self.start, self.stop, self.num)


class PhaseDiagramConfig(Common):
    experiment: Literal["PHASE_DIAGRAM"]
    model: Literal["ESSH", "CI", "HOTI"]
    couplings: Optional[List[float]] = None
    axis1: Axis
    axis2: Axis
    n_k: Optional[int] = Field(default=None, ge=8)
    L: int = Field(default=10, ge=2)

    @model_validator(mode="after")
    def _axes(self):
        if self.model == "CI":
            if {self.axis1.parameter, self.axis2.parameter} != {"m0", "lambda0"}:
                raise ValueError("CI axes must be 'm0' and 'lambda0'")
        else:
            if self.couplings is None:
                raise ValueError("couplings are required for ESSH/HOTI diagrams")
            n = len(self.couplings)
            if self.model == "HOTI" and n != 3:
                raise ValueError("HOTI couplings must have 3 entries")
            for ax in (self.axis1, self.axis2):
                if not isinstance(ax.parameter, int) or not 0 <= ax.parameter < n:
                    raise ValueError(f"axis parameter must be a coupling index in 0..{n - 1}")
            if self.axis1.parameter == self.axis2.parameter:
                raise ValueError("the two axes must vary different couplings")
        return self


class _ScalingBase(Common):
    sizes: List[int]
    reference_exponent: Optional[float] = None
    tolerance: float = Field(default=0.2, gt=0)

    @field_validator("sizes")
    @classmethod
    def _sizes(cls, v):
        return _sizes_ok(v)


class QfiScalingConfig(_ScalingBase):
    experiment: Literal["QFI_SCALING"]
    couplings: List[float] = Field(min_length=2)
    driving: Optional[int] = None
    probe: metrology.Probe = metrology.Probe.LOWEST_POSITIVE
    boundary: models.Boundary = models.Boundary.OPEN
    degeneracy_cut: Optional[float] = Field(default=None, gt=0)


class GapScalingConfig(_ScalingBase):
    experiment: Literal["GAP_SCALING"]
    couplings: List[float] = Field(min_length=2)
    tolerance: float = Field(default=0.1, gt=0)


class HotiScalingConfig(_ScalingBase):
    experiment: Literal["HOTI_SCALING"]
    couplings: List[float] = Field(default=[1.0, -2.0, 1.0], min_length=3, max_length=3)
    driving: int = Field(default=2, ge=0, le=2)
    probe: metrology.Probe = metrology.Probe.CLUSTER
    boundary: models.Boundary = models.Boundary.OPEN
    degeneracy_cut: Optional[float] = Field(default=None, gt=0)
    tolerance: float = Field(default=0.4, gt=0)


class ChernScalingConfig(_ScalingBase):
    experiment: Literal["CHERN_SCALING"]
    m0: float = 1.0
    lambda0: float = -0.5
    driving: Literal["m0", "lambda0"] = "lambda0"
    probe: metrology.Probe = metrology.Probe.CLUSTER
    boundary: models.Boundary = models.Boundary.OPEN
    degeneracy_cut: Optional[float] = Field(default=None, gt=0)
    tolerance: float = Field(default=0.4, gt=0)


class GhzSurfaceConfig(Common):
    experiment: Literal["GHZ_SURFACE"]
    couplings: List[float] = Field(default=[1.0, 2.0, 2.0], min_length=2)
    index: int = 2
    start: float = 2.0
    end: float = 1.0
    sizes: List[int]
    Ns: List[int] = Field(default=[1, 2, 4, 8])
    ramp_constant: Optional[float] = Field(default=None, gt=0)
    order_p: Optional[int] = Field(default=None, ge=1)
    shape: adiabatic.RampShape = adiabatic.RampShape.LINEAR
    steps_per_norm_time: float = Field(default=0.25, gt=0)
    reference_n_exponent: float = 2.0
    reference_l_exponent: Optional[float] = None
    tolerance_n: float = Field(default=0.1, gt=0)
    tolerance_l: float = Field(default=0.4, gt=0)

    @field_validator("sizes")
    @classmethod
    def _sizes(cls, v):
        return _sizes_ok(v)

    @field_validator("Ns")
    @classmethod
    def _ns(cls, v):
        if not v or any(n < 1 for n in v):
            raise ValueError("Ns must be a non-empty list of positive integers")
        return sorted(set(v))

    @model_validator(mode="after")
    def _idx(self):
        if not 0 <= self.index < len(self.couplings):
            raise ValueError("index must address one of the couplings")
        if self.start == self.end:
            raise ValueError("start and end must differ")
        return self


class EdgeAnalysisConfig(Common):
    experiment: Literal["EDGE_ANALYSIS"]
    couplings: List[float] = Field(min_length=2)
    index: int
    deltas: List[float] = Field(min_length=3)
    sign: Literal[1, -1] = 1
    reference_exponent: Optional[float] = None
    tolerance: float = Field(default=0.05, gt=0)

    @field_validator("deltas")
    @classmethod
    def _pos(cls, v):
        if any(d <= 0 for d in v):
            raise ValueError("deltas must be positive")
        if len(set(v)) != len(v):
            raise ValueError("deltas must be distinct")
        return sorted(v)

    @model_validator(mode="after")
    def _idx(self):
        if not 0 <= self.index < len(self.couplings):
            raise ValueError("index must address one of the couplings")
        return self


ExperimentConfig = Annotated[
    Union[BandConfig, PhaseDiagramConfig, QfiScalingConfig, GapScalingConfig, GhzSurfaceConfig,
          EdgeAnalysisConfig, HotiScalingConfig, ChernScalingConfig],
    Field(discriminator="experiment"),
]
_ADAPTER = TypeAdapter(ExperimentConfig)

EXPERIMENTS = {
    "BAND": "upper band E+(k) of an eSSH coupling vector",
    "PHASE_DIAGRAM": "winding / Chern / multipole chiral number on a 2-parameter grid",
    "QFI_SCALING": "eSSH probe QFI versus L at criticality, exponent vs 2p",
    "GAP_SCALING": "eSSH bulk-edge gap versus L at criticality, exponent vs -p",
    "GHZ_SURFACE": "adiabatic GHZ edge-mode protocol, joint fit of F_Q in (N, L)",
    "EDGE_ANALYSIS": "localisation length versus distance from criticality, exponent vs -1/p",
    "HOTI_SCALING": "HOTI probe QFI versus L at the multicritical point",
    "CHERN_SCALING": "Chern-insulator probe QFI versus L at the quadratic touching",
}


class ConfigError(ValueError):
    pass


def parse_config(text: str):
    """Parse and validate a JSON config; raises ConfigError with line/field diagnostics."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from None
    try:
        return _ADAPTER.validate_python(raw)
    except Exception as e:  # pydantic.ValidationError
        errs = getattr(e, "errors", None)
        if errs is None:
            raise ConfigError(str(e)) from None
        lines = []
        for err in errs():
            loc = ".".join(str(p) for p in err["loc"])
            lines.append(f"{loc or '<root>'}: {err['msg']}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from None


def load_config(path):
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# results

@dataclass
class FitReport:
    label: str
    fit: ScalingFit
    reference: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.fit.exponent - self.reference) <= self.tolerance

    def as_dict(self):
        return {
            "label": self.label,
            "exponent": self.fit.exponent,
            "prefactor": self.fit.prefactor,
            "r_squared": self.fit.r_squared,
            "xs": list(self.fit.xs),
            "ys": list(self.fit.ys),
            "residuals": list(self.fit.residuals),
            "reference_exponent": self.reference,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


@dataclass
class ExperimentResult:
    header: list
    rows: list
    fits: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    plot: Optional[dict] = None

    @property
    def passed(self):
        return all(f.passed for f in self.fits)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def csv_text(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.header)
    for row in result.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# runners

def _touching(couplings):
    tp = spectra.locate_band_touching(couplings)
    if tp.E_min > 1e-8:
        raise spectra.NotCriticalError(f"couplings {tuple(couplings)} are not critical (min |h| = {tp.E_min:.3g})")
    return spectra.touching_order(couplings, tp.k_c)


def run_band(cfg: BandConfig, workers):
    k, E = spectra.band_energies_1d(cfg.couplings, cfg.n_k)
    i = int(np.argmin(E))
    return ExperimentResult(["k", "E_plus"], list(zip(k, E)),
                            extra={"argmin_k": float(k[i]), "min_E": float(E[i])},
                            plot={"kind": "band", "x": k, "y": E})


def run_phase_diagram(cfg: PhaseDiagramConfig, workers):
    a1, a2 = cfg.axis1, cfg.axis2
    if cfg.model == "ESSH":
        ev = invariants.EsshWinding(tuple(cfg.couplings), a1.parameter, a2.parameter, cfg.n_k)
    elif cfg.model == "CI":
        ev = invariants.CIChern(cfg.n_k or 64)
        if a1.parameter == "lambda0":
            ev = _Swap(ev)
    else:
        ev = invariants.HotiMCN(tuple(cfg.couplings), a1.parameter, a2.parameter, cfg.L)
    pd = invariants.phase_diagram(ev, (str(a1.parameter), a1.values()), (str(a2.parameter), a2.values()), workers)
    rows = []
    for i, x in enumerate(pd.values1):
        for j, y in enumerate(pd.values2):
            rows.append((x, y, pd.cells[i * len(pd.values2) + j]))
    if cfg.model == "CI":
        names = [str(a1.parameter), str(a2.parameter)]
    else:
        names = [f"lambda{a1.parameter}", f"lambda{a2.parameter}"]
    return ExperimentResult(names + ["invariant"], rows,
                            extra={"cells": list(pd.cells),
                                   "rejected": [{"i": i, "j": j, "reason": m} for i, j, m in pd.rejected],
                                   "distinct_values": sorted({c for c in pd.cells if c is not None})},
                            plot={"kind": "phase", "x": pd.values1, "y": pd.values2, "grid": pd.grid(),
                                  "xlabel": names[0], "ylabel": names[1]})


@dataclass(frozen=True)
class _Swap:
    inner: object

    def __call__(self, a, b):
        return self.inner(b, a)


def _scaling_result(label, sizes, values, fit, reference, tol, colname="F_Q"):
    rep = FitReport(label, fit, reference, tol)
    return ExperimentResult(["L", colname], list(zip(sizes, values)), [rep],
                            plot={"kind": "scaling", "x": sizes, "y": values, "fit": fit, "ylabel": colname})


def run_qfi_scaling(cfg: QfiScalingConfig, workers):
    tp = _touching(cfg.couplings)
    r = len(cfg.couplings) - 1 if cfg.driving is None else cfg.driving
    fam = metrology.spec_family(models.Family.ESSH_1D, tuple(cfg.couplings), cfg.boundary)
    sc = metrology.qfi_scaling(fam, cfg.sizes, r, cfg.probe, cfg.degeneracy_cut, workers)
    ref = 2 * tp.order_p if cfg.reference_exponent is None else cfg.reference_exponent
    res = _scaling_result("beta", cfg.sizes, sc.values, sc.fit, ref, cfg.tolerance)
    res.extra.update(order_p=tp.order_p, k_c=tp.k_c, driving=r)
    return res


def run_gap_scaling(cfg: GapScalingConfig, workers):
    tp = _touching(cfg.couplings)
    fam = metrology.spec_family(models.Family.ESSH_1D, tuple(cfg.couplings))
    gaps = spectra.gap_values(fam, cfg.sizes, workers)
    fit = fit_power_law(cfg.sizes, gaps)
    ref = -tp.order_p if cfg.reference_exponent is None else cfg.reference_exponent
    res = _scaling_result("gap_exponent", cfg.sizes, gaps, fit, ref, cfg.tolerance, "gap")
    res.extra.update(order_p=tp.order_p)
    return res


def run_hoti_scaling(cfg: HotiScalingConfig, workers):
    fam = metrology.spec_family(models.Family.HOTI_2D, tuple(cfg.couplings), cfg.boundary)
    sc = metrology.qfi_scaling(fam, cfg.sizes, cfg.driving, cfg.probe, cfg.degeneracy_cut, workers)
    if cfg.reference_exponent is None:
        p = _touching(cfg.couplings).order_p
        ref = 2 * p
    else:
        ref = cfg.reference_exponent
    return _scaling_result("hoti_exponent", cfg.sizes, sc.values, sc.fit, ref, cfg.tolerance)


def run_chern_scaling(cfg: ChernScalingConfig, workers):
    if not invariants.ci_gap_closes(models.CIParams(cfg.m0, cfg.lambda0)):
        raise spectra.NotCriticalError(f"(m0, lambda0) = ({cfg.m0}, {cfg.lambda0}) is not on a phase boundary")
    fam = metrology.spec_family(models.Family.CI_2D, models.CIParams(cfg.m0, cfg.lambda0), cfg.boundary)
    sc = metrology.qfi_scaling(fam, cfg.sizes, cfg.driving, cfg.probe, cfg.degeneracy_cut, workers)
    # quadratic touching at k = 0 on the m0 = -2 lambda0 line
    ref = 4.0 if cfg.reference_exponent is None else cfg.reference_exponent
    return _scaling_result("chern_exponent", cfg.sizes, sc.values, sc.fit, ref, cfg.tolerance)


def run_ghz_surface(cfg: GhzSurfaceConfig, workers):
    proto = adiabatic.GhzProtocol(tuple(cfg.couplings), cfg.index, cfg.start, cfg.end, cfg.ramp_constant,
                                  cfg.order_p, cfg.shape, cfg.steps_per_norm_time)
    p = proto.order()
    surf = adiabatic.ghz_scaling_surface(proto, cfg.sizes, cfg.Ns, workers)
    rows = []
    for L, c in zip(cfg.sizes, surf.coefficients):
        for N in cfg.Ns:
            g = adiabatic.ghz_qfi(c, N)
            rows.append((L, N, c.schedule.total_time, c.schedule.steps, c.a1.imag, c.a2.imag, c.b1, c.b2,
                         g.value, g.interference_part, g.eigenstate_part))
    ref_l = 2 * p if cfg.reference_l_exponent is None else cfg.reference_l_exponent
    xs = tuple(sorted(set(r[0] for r in rows)))
    fn = ScalingFit((), (), surf.n_exponent, float(np.exp(surf.log_prefactor)), surf.r_squared)
    fl = ScalingFit(xs, (), surf.l_exponent, float(np.exp(surf.log_prefactor)), surf.r_squared)
    fits = [FitReport("N_exponent", fn, cfg.reference_n_exponent, cfg.tolerance_n),
            FitReport("L_exponent", fl, ref_l, cfg.tolerance_l)]
    header = ["L", "N", "T", "steps", "a1_imag", "a2_imag", "b1", "b2", "F_Q", "interference", "eigenstate"]
    return ExperimentResult(header, rows, fits,
                            extra={"order_p": p, "ramp_constant": proto.constant(),
                                   "per_N_L_exponent": {str(N): f.exponent for N, f in surf.per_n.items()}},
                            plot={"kind": "ghz", "rows": rows})


def run_edge_analysis(cfg: EdgeAnalysisConfig, workers):
    tp = _touching(cfg.couplings)
    base = list(cfg.couplings)

    def fam(d):
        lam = list(base)
        lam[cfg.index] += cfg.sign * d
        return lam
    rows = []
    for d in cfg.deltas:
        res = edgetheory.localization_length(edgetheory.edge_roots(fam(d)))
        rows.append((d, res.xi, res.kappa))
    fit = edgetheory.xi_exponent(fam, cfg.deltas)
    ref = -1.0 / tp.order_p if cfg.reference_exponent is None else cfg.reference_exponent
    rep = FitReport("xi_exponent", fit, ref, cfg.tolerance)
    return ExperimentResult(["delta", "xi", "kappa"], rows, [rep], extra={"order_p": tp.order_p},
                            plot={"kind": "scaling", "x": [r[0] for r in rows], "y": [r[1] for r in rows],
                                  "fit": fit, "ylabel": "xi", "xlabel": "delta"})


RUNNERS = {
    "BAND": run_band,
    "PHASE_DIAGRAM": run_phase_diagram,
    "QFI_SCALING": run_qfi_scaling,
    "GAP_SCALING": run_gap_scaling,
    "GHZ_SURFACE": run_ghz_surface,
    "EDGE_ANALYSIS": run_edge_analysis,
    "HOTI_SCALING": run_hoti_scaling,
    "CHERN_SCALING": run_chern_scaling,
}


def _jsonable(x):
    if isinstance(x, Enum):
        return x.value
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def run_experiment(cfg, out_dir=None, workers=1, plot=None):
    """Run ``cfg`` and write ``<name>.csv`` and ``<name>.json`` (and optionally a PNG).

    Returns ``(result, paths)``.
    """
    t0 = time.perf_counter()
    started = datetime.now(timezone.utc).isoformat()
    result = RUNNERS[cfg.experiment](cfg, workers)
    wall = time.perf_counter() - t0
    out = Path(out_dir or cfg.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.name or cfg.experiment.lower()
    paths = {"csv": out / f"{stem}.csv", "json": out / f"{stem}.json"}
    paths["csv"].write_text(csv_text(result))
    meta = {
        "config": json.loads(cfg.model_dump_json()),
        "library_version": __version__,
        "started_at": started,
        "wall_time_s": wall,
        "workers": workers,
        "fit_reports": [f.as_dict() for f in result.fits],
        "pass": result.passed,
        "extra": _jsonable(result.extra),
    }
    paths["json"].write_text(json.dumps(_jsonable(meta), indent=2) + "\n")
    if (cfg.plot if plot is None else plot) and result.plot is not None:
        try:
            from .plotting import render
        except ImportError:
            render = None
        if render is not None:
            paths["png"] = out / f"{stem}.png"
            render(result.plot, paths["png"], title=stem)
    return result, paths
