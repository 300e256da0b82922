"""Scenario configuration: one strict JSON document per run.

Unknown keys anywhere are rejected, so a misspelt tolerance name can never
silently fall back to a default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import ConfigError

MODES = ("curvature", "flow", "verify", "sweep")

EQUATIONS = (
    "metric_base",
    "metric_fiber",
    "metric_base_hgf",
    "warp_rf",
    "warp_hgf",
    "ricci_base",
    "ricci_fiber",
    "ricci_fiber_einstein",
    "f_evolution",
    "f_evolution_complete",
    "f_consistency",
    "f_proportionality",
    "rf_char",
    "rf_char_hess",
    "hgf_char",
    "hgf_char_offdiag",
)
# equations that need the fiber declared Einstein
EINSTEIN_ONLY = {
    "warp_rf",
    "warp_hgf",
    "ricci_fiber_einstein",
    "f_evolution",
    "f_evolution_complete",
    "f_consistency",
    "f_proportionality",
}
CURVATURE_RESIDUALS = ("ricci", "scalar", "riemann", "cross_ricci")
DEFAULT_TOL = 1e-3


@dataclass
class FlowConfig:
    alpha: float = 0.0
    beta: float = 1.0
    gamma: float = 0.0
    N: int = 41
    domain: Optional[list] = None
    boundary: Optional[str] = None
    dt: Optional[float] = None
    snapshot_dt: Optional[float] = None
    t_end: float = 0.1
    scheme: str = "rk4"
    lam_min: float = 1e-6
    K_max: float = 1e8
    lam: Optional[Union[str, float]] = None
    mu: Union[str, float] = 1.0
    lam_vel: Union[str, float] = 0.0
    mu_vel: Union[str, float] = 0.0


@dataclass
class CurvatureConfig:
    samples: int = 5
    h: Optional[float] = None
    finite_differences: bool = False


@dataclass
class VerifyConfig:
    equations: list = field(default_factory=lambda: ["metric_base", "metric_fiber", "warp_rf"])
    time_scheme: str = "central"
    spatial_order: int = 4
    margin: float = 0.0
    perturb: Optional[dict] = None


@dataclass
class SweepConfig:
    target: str = "flow"
    param: str = "dt"
    values: list = field(default_factory=list)
    reference: str = "exact"


@dataclass
class OutputConfig:
    csv: Optional[str] = None
    json: str = "summary.json"
    snapshots: bool = False


@dataclass
class ScenarioConfig:
    mode: str
    spec: Union[str, dict]
    flow: FlowConfig = field(default_factory=FlowConfig)
    curvature: CurvatureConfig = field(default_factory=CurvatureConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    tolerances: dict = field(default_factory=dict)
    output: OutputConfig = field(default_factory=OutputConfig)

    def tolerance(self, name: str, default: float = DEFAULT_TOL) -> float:
        return float(self.tolerances.get(name, default))


def _section(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = set(cls.__dataclass_fields__)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {unknown}; allowed: {sorted(allowed)}")
    return cls(**data)


def _positive(value, name, allow_none=False):
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


def parse_config(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    top = {"mode", "spec", "flow", "curvature", "verify", "sweep", "tolerances", "output"}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {unknown}")
    if data.get("mode") not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {data.get('mode')!r}")
    if "spec" not in data:
        raise ConfigError("config needs a 'spec' (catalog name or inline definition)")
    spec = data["spec"]
    if not isinstance(spec, (str, dict)):
        raise ConfigError("spec must be a catalog name or an object")
    try:
        cfg = ScenarioConfig(
            mode=data["mode"],
            spec=spec,
            flow=_section(FlowConfig, data.get("flow"), "flow"),
            curvature=_section(CurvatureConfig, data.get("curvature"), "curvature"),
            verify=_section(VerifyConfig, data.get("verify"), "verify"),
            sweep=_section(SweepConfig, data.get("sweep"), "sweep"),
            tolerances=dict(data.get("tolerances") or {}),
            output=_section(OutputConfig, data.get("output"), "output"),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig) -> None:
    f = cfg.flow
    if isinstance(f.N, bool) or not isinstance(f.N, int) or f.N < 5:
        raise ConfigError("flow.N must be an integer >= 5")
    for name in ("dt", "snapshot_dt"):
        _positive(getattr(f, name), f"flow.{name}", allow_none=True)
    _positive(f.t_end, "flow.t_end")
    _positive(f.lam_min, "flow.lam_min")
    _positive(f.K_max, "flow.K_max")
    if f.scheme not in ("rk4", "euler"):
        raise ConfigError(f"flow.scheme must be rk4 or euler, got {f.scheme!r}")
    if f.boundary not in (None, "neumann", "periodic"):
        raise ConfigError(f"flow.boundary must be neumann or periodic, got {f.boundary!r}")
    if f.domain is not None and (len(f.domain) != 2 or not f.domain[1] > f.domain[0]):
        raise ConfigError("flow.domain must be [lo, hi] with hi > lo")

    c = cfg.curvature
    if isinstance(c.samples, bool) or not isinstance(c.samples, int) or c.samples < 1:
        raise ConfigError("curvature.samples must be a positive integer")
    _positive(c.h, "curvature.h", allow_none=True)

    v = cfg.verify
    bad = [e for e in v.equations if e not in EQUATIONS]
    if bad:
        raise ConfigError(f"unknown equation name(s) {bad}; known: {list(EQUATIONS)}")
    if v.time_scheme not in ("central", "central4"):
        raise ConfigError("verify.time_scheme must be central or central4")
    if v.spatial_order not in (2, 4):
        raise ConfigError("verify.spatial_order must be 2 or 4")
    if v.margin < 0:
        raise ConfigError("verify.margin must be >= 0")
    if v.perturb is not None:
        extra = set(v.perturb) - {"snapshot", "lam_scale"}
        if extra or "snapshot" not in v.perturb or "lam_scale" not in v.perturb:
            raise ConfigError("verify.perturb needs exactly 'snapshot' and 'lam_scale'")

    s = cfg.sweep
    if cfg.mode == "sweep":
        if s.target not in ("flow", "curvature", "verify"):
            raise ConfigError("sweep.target must be flow, curvature or verify")
        allowed = {"flow": ("dt", "N"), "curvature": ("h",), "verify": ("N",)}[s.target]
        if s.param not in allowed:
            raise ConfigError(f"sweep.param for target {s.target!r} must be one of {allowed}")
        if not s.values:
            raise ConfigError("sweep.values must be a non-empty list")
        for val in s.values:
            _positive(val, "sweep.values entry")
        if s.reference not in ("exact", "finest"):
            raise ConfigError("sweep.reference must be exact or finest")

    known = set(EQUATIONS) | set(CURVATURE_RESIDUALS) | {"einstein_base", "einstein_fiber"}
    bad = sorted(set(cfg.tolerances) - known)
    if bad:
        raise ConfigError(f"unknown tolerance name(s) {bad}")
    for k, val in cfg.tolerances.items():
        _positive(val, f"tolerances.{k}")


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(data)
