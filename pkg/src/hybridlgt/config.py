"""Experiment configuration: schema, loading with line-precise errors, manifests.

Configs are YAML (JSON is accepted, being a YAML subset). Every run records a
manifest holding the resolved config, its hash, the code version and the seed,
so a manifest can itself be fed back to ``run``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__

OUTPUT_ROOT_ENV = "HYBRIDLGT_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "runs"
MANIFEST_VERSION = 1
EXPERIMENTS_DIR = Path(__file__).with_name("experiments")


class ConfigError(ValueError):
    """Unreadable, unparsable or schema-violating configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ----------------------------------------------------------------------------
# sections
# ----------------------------------------------------------------------------

class ModelConfig(_Strict):
    name: Literal["z2", "u1"] = "z2"
    L: int = Field(3, ge=2, le=8)
    g: float = 1.0
    U: float = 1.0
    J: float = 1.0
    B: float = 0.0
    N: Optional[int] = Field(None, ge=0)
    cutoff: Optional[int] = Field(None, ge=1)
    tau: float = 0.0
    M: float = 0.0
    S: float = Field(1.0, gt=0)

    @field_validator("g", "U", "J", "B", "tau", "M", "S")
    @classmethod
    def _finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v

    def params(self):
        from . import models as M
        if self.name == "z2":
            return M.Z2Params(L=self.L, g=self.g, U=self.U, J=self.J, B=self.B, N=self.N, cutoff=self.cutoff)
        return M.U1Params(L=self.L, g=self.g, tau=self.tau, J=self.J, M=self.M, S=self.S)


class NoiseConfig(_Strict):
    enabled: bool = False
    T1: float = Field(200e-6, gt=0, description="seconds")
    T2: float = Field(200e-6, gt=0, description="seconds")
    idle: bool = True
    trajectories: int = Field(2000, ge=1)
    circuit_time: Optional[float] = Field(None, gt=0, description="seconds; default: nominal layer estimate")

    @model_validator(mode="after")
    def _t2_bound(self):
        if self.T2 > 2 * self.T1:
            raise ValueError("T2 must not exceed 2*T1")
        return self

    def model(self):
        from . import noise as NZ
        return NZ.NoiseModel(T1=self.T1, T2=self.T2, enabled=self.enabled, idle=self.idle)


class DynamicsConfig(_Strict):
    initial: list[int]
    dt: float = Field(0.1, gt=0, description="units of 1/J")
    steps: int = Field(85, ge=1)
    order: Literal[1, 2] = 1
    compare_exact: bool = True


class VQEConfig(_Strict):
    layers: int = Field(1, ge=1)
    mode: Literal["deterministic", "spsa"] = "deterministic"
    max_iter: int = Field(2000, ge=1)
    restarts: int = Field(1, ge=1)
    init_scale: float = Field(0.1, ge=0)
    shots0: int = Field(10, ge=1)
    shot_growth: int = Field(10, ge=1)
    shot_period: int = Field(1500, ge=1)
    c: float = Field(0.1, gt=0)
    first_step: float = Field(0.1, gt=0)
    avg_every: int = Field(15, ge=1)
    avg_window: int = Field(7, ge=1)
    postselect: bool = False


class TauSweepConfig(_Strict):
    points: int = Field(21, ge=2)
    tau_max: float = Field(2.1 * math.pi, gt=0)
    layers: int = Field(4, ge=1)


class QSPConfig(_Strict):
    eta: float = Field(0.05, gt=0, lt=math.pi / 2)
    infidelity: float = Field(2e-2, gt=0, lt=1)
    gamma: Optional[float] = Field(None, gt=0, lt=1)
    max_repetitions: int = Field(100, ge=1)
    vqe_iterations: int = Field(0, ge=0, description="SPSA iterations for the comparison curve; 0 skips it")
    layers: int = Field(4, ge=1)
    curve_shots: int = Field(200, ge=1)


class ResourcesConfig(_Strict):
    cutoffs: list[int] = Field(default_factory=lambda: list(range(1, 17)))
    fidelities: list[float] = Field(default_factory=lambda: [0.99, 0.995, 0.999, 0.9995, 0.9999, 1.0])
    newton: int = Field(2, ge=0)

    @field_validator("cutoffs")
    @classmethod
    def _cut(cls, v):
        if not v or min(v) < 1:
            raise ValueError("cutoffs must be a non-empty list of integers >= 1")
        return v

    @field_validator("fidelities")
    @classmethod
    def _fid(cls, v):
        if not v or any(not 0 <= f <= 1 for f in v):
            raise ValueError("fidelities must lie in [0, 1]")
        return v


class DecayConfig(_Strict):
    N_values: list[int] = Field(default_factory=lambda: list(range(1, 17)))
    rate: float = Field(1.0, gt=0)
    trajectories: int = Field(0, ge=0, description="0 keeps the closed forms only")
    t_max: float = Field(2.0, gt=0)
    grid: int = Field(41, ge=2)

    @field_validator("N_values")
    @classmethod
    def _n(cls, v):
        if not v or min(v) < 1:
            raise ValueError("N_values must be a non-empty list of integers >= 1")
        return v


class ObservablesConfig(_Strict):
    theta: float = Field(0.1, gt=0)
    pairs: list[tuple[int, int]] = Field(default_factory=lambda: [(0, 1)])
    stiffness: bool = False


class VerifyConfig(_Strict):
    suites: list[str] = Field(default_factory=lambda: ["native-gates", "composite-gates", "invariants"])
    draws: int = Field(20, ge=1)


KINDS = ("dynamics", "vqe", "tau-sweep", "qsp", "resources", "decay", "observables", "gate-verify")
SECTION_OF = {"dynamics": "dynamics", "vqe": "vqe", "tau-sweep": "tau_sweep", "qsp": "qsp",
              "resources": "resources", "decay": "decay", "observables": "observables",
              "gate-verify": "verify"}


class ExperimentConfig(_Strict):
    name: str = Field(..., min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    kind: Literal["dynamics", "vqe", "tau-sweep", "qsp", "resources", "decay", "observables", "gate-verify"]
    description: str = ""
    seed: int = Field(0, ge=0)
    shots: Optional[int] = Field(None, description="None evaluates expectation values exactly")
    workers: Optional[int] = Field(None, ge=1)
    output_dir: Optional[str] = None
    model: ModelConfig = ModelConfig()
    noise: NoiseConfig = NoiseConfig()
    dynamics: Optional[DynamicsConfig] = None
    vqe: Optional[VQEConfig] = None
    tau_sweep: Optional[TauSweepConfig] = None
    qsp: Optional[QSPConfig] = None
    resources: Optional[ResourcesConfig] = None
    decay: Optional[DecayConfig] = None
    observables: Optional[ObservablesConfig] = None
    verify: Optional[VerifyConfig] = None

    @field_validator("shots")
    @classmethod
    def _shots(cls, v):
        if v is not None and v < 1:
            raise ValueError("shots must be a positive integer (omit it for exact evaluation)")
        return v

    @model_validator(mode="after")
    def _section(self):
        sec = SECTION_OF[self.kind]
        if self.kind == "dynamics" and self.dynamics is None:
            raise ValueError("dynamics experiments need a 'dynamics' section with 'initial'")
        if self.kind == "dynamics" and len(self.dynamics.initial) != self.model.L:
            raise ValueError(f"dynamics.initial has {len(self.dynamics.initial)} sites, model.L = {self.model.L}")
        if self.kind in ("tau-sweep",) and self.model.name != "u1":
            raise ValueError("tau-sweep needs model.name = u1")
        if self.kind in ("qsp", "observables") and self.model.name != "z2":
            raise ValueError(f"{self.kind} is defined for model.name = z2")
        if self.kind == "observables" and self.observables is not None and self.observables.stiffness:
            n = self.model.L if self.model.N is None else self.model.N
            if n % 2:
                raise ValueError("stiffness needs an even boson number (the ring has no all-(+1) sector for odd N)")
        defaults = {"vqe": VQEConfig, "tau_sweep": TauSweepConfig, "qsp": QSPConfig,
                    "resources": ResourcesConfig, "decay": DecayConfig,
                    "observables": ObservablesConfig, "verify": VerifyConfig}
        if getattr(self, sec) is None and sec in defaults:
            object.__setattr__(self, sec, defaults[sec]())
        return self

    @property
    def section(self):
        return getattr(self, SECTION_OF[self.kind])

    def canonical(self) -> dict:
        return self.model_dump(mode="json")

    def sha256(self) -> str:
        return hashlib.sha256(canonical_json(self.canonical()).encode()).hexdigest()

    def override(self, **kw) -> "ExperimentConfig":
        data = self.canonical()
        for k, v in kw.items():
            if v is not None:
                data[k] = v
        return ExperimentConfig.model_validate(data)


# ----------------------------------------------------------------------------
# loading
# ----------------------------------------------------------------------------

def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _node_line(node: yaml.Node | None, loc: tuple) -> int | None:
    """1-based source line of the value at ``loc`` (falls back to the deepest parent found)."""
    line = None if node is None else node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == str(key):
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
        if node is None:
            break
    return line


def _format_errors(err: ValidationError, root, source: str) -> str:
    lines = []
    for e in err.errors():
        loc = tuple(e["loc"])
        ln = _node_line(root, loc)
        where = ".".join(str(x) for x in loc) or "<root>"
        at = f"{source}:{ln}" if ln else source
        lines.append(f"{at}: {where}: {e['msg']}")
    return "\n".join(lines)


def resolve_config_path(ref: str | os.PathLike) -> Path:
    """A file path, or the name of a shipped experiment."""
    p = Path(ref)
    if p.exists():
        return p
    for ext in (".yaml", ".yml", ".json"):
        cand = EXPERIMENTS_DIR / f"{ref}{ext}"
        if cand.exists():
            return cand
    raise ConfigError(f"config {str(ref)!r} not found (not a file or a shipped experiment)")


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: cannot parse: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping")
    if "manifest_version" in data:
        if "config" not in data:
            raise ConfigError(f"{source}: manifest has no 'config' entry")
        data = data["config"]
        root = _node_line_child(root, "config")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc, root, source)) from None


def _node_line_child(node, key):
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            if k.value == key:
                return v
    return None


def load_config(ref: str | os.PathLike) -> ExperimentConfig:
    path = resolve_config_path(ref)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: unreadable: {exc}") from None
    return parse_config(text, str(path))


def shipped_experiments() -> list[tuple[str, ExperimentConfig]]:
    out = []
    for p in sorted(EXPERIMENTS_DIR.glob("*.yaml")):
        out.append((p.stem, load_config(p)))
    return out


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, DEFAULT_OUTPUT_ROOT))


# ----------------------------------------------------------------------------
# manifest
# ----------------------------------------------------------------------------

def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_manifest(cfg: ExperimentConfig, outputs: dict[str, Path], backend: str) -> dict:
    return {
        "manifest_version": MANIFEST_VERSION,
        "experiment": cfg.name,
        "kind": cfg.kind,
        "code_version": __version__,
        "kernel_backend": backend,
        "seed": cfg.seed,
        "config_sha256": cfg.sha256(),
        "config": cfg.canonical(),
        "outputs": {name: file_sha256(p) for name, p in sorted(outputs.items())},
    }


def dump_json(obj: Any, path: Path) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n")
