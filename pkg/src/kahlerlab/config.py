"""Run configuration (validated JSON) and the run manifest."""

from __future__ import annotations

import hashlib
import json
import os
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .geodesic import SolveOptions

from . import __version__ as VERSION


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class GridConfig(_Section):
    N: int = Field(32, strict=True)

    @field_validator("N")
    @classmethod
    def _even(cls, v):
        if v < 8 or v % 2:
            raise ValueError("N must be an even integer >= 8")
        return v


class PathConfig(_Section):
    M: Optional[int] = Field(None, ge=2)
    eps_start: float = Field(1.0, gt=0)
    eps_target: float = Field(1e-3, gt=0)
    newton_tol: float = Field(1e-9, gt=0)
    max_newton: int = Field(50, ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.eps_target > self.eps_start:
            raise ValueError("eps_target must not exceed eps_start")
        return self


class FlowConfig(_Section):
    ds: float = Field(1e-5, gt=0)
    steps: int = Field(100, ge=0)
    sample_every: int = Field(10, ge=1)
    flow_mono_tol: float = Field(1e-9, ge=0)


class ExperimentConfig(_Section):
    seeds: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    amplitudes: list[float] = Field(default_factory=lambda: [0.01])
    lambdas: list[float] = Field(default_factory=lambda: [0.25, 0.5, 0.75])
    perturbation_scales: list[float] = Field(default_factory=lambda: [1e-3, 1e-2])
    max_wavenumber: int = Field(2, ge=1)
    cat0_tol: float = Field(5e-4, gt=0)
    jacobi_rel_tol: float = Field(1e-6, gt=0)
    derivcheck_rel_tol: float = Field(1e-2, gt=0)
    delta_s: float = Field(1e-3, gt=0)

    @field_validator("lambdas")
    @classmethod
    def _unit(cls, v):
        if any(not 0.0 <= x <= 1.0 for x in v):
            raise ValueError("every lambda must lie in [0, 1]")
        return v

    @field_validator("amplitudes", "perturbation_scales")
    @classmethod
    def _nonneg(cls, v):
        if any(x < 0 for x in v):
            raise ValueError("values must be >= 0")
        return v


class IOConfig(_Section):
    out_dir: str = "mnpl_out"
    dump_fields: bool = False


class Config(_Section):
    grid: GridConfig = Field(default_factory=GridConfig)
    path: PathConfig = Field(default_factory=PathConfig)
    flow: FlowConfig = Field(default_factory=FlowConfig)
    experiment: ExperimentConfig = Field(default_factory=ExperimentConfig)
    io: IOConfig = Field(default_factory=IOConfig)

    @model_validator(mode="after")
    def _wavenumber(self):
        if self.experiment.max_wavenumber > self.grid.N // 4:
            raise ValueError(f"experiment.max_wavenumber must be <= grid.N/4 = {self.grid.N // 4}")
        return self

    def solve_options(self) -> SolveOptions:
        p = self.path
        return SolveOptions(newton_tol=p.newton_tol, max_newton=p.max_newton, eps_start=p.eps_start,
                            eps_target=p.eps_target, M=p.M)

    def output_dir(self) -> Path:
        return Path(os.environ.get("MNPL_OUT") or self.io.out_dir)


def _problems(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        out.append(f"{loc}: {e['msg']}")
    return out


def config_from_dict(data) -> Config:
    if not isinstance(data, dict):
        raise ConfigError(["<root>: expected a JSON object"])
    try:
        return Config.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_problems(err)) from None


def load_config(path) -> Config:
    """Read and validate a JSON config; every offending key is listed in the error."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc.strerror}"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<file>: invalid JSON at line {exc.lineno}: {exc.msg}"]) from None
    return config_from_dict(data)


def config_schema() -> str:
    return json.dumps(Config.model_json_schema(), indent=2)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    """Config snapshot, version, per-stage wall clock and digests of emitted files."""

    def __init__(self, config: Config, command: str):
        self.config = config
        self.command = command
        self.stages: dict[str, float] = {}
        self.files: list[dict] = []

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0

    def add_file(self, path) -> None:
        self.files.append({"path": Path(path).name, "sha256": sha256_file(path)})

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "version": VERSION,
            "config": self.config.model_dump(),
            "files": sorted(self.files, key=lambda f: f["path"]),
            "timing": self.stages,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
