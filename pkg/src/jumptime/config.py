"""Experiment configuration, content hashing, run manifests and output locking."""

from __future__ import annotations

import hashlib
import json
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from .dissipators import DissipatorConfigError, dissipator_from_dict, dissipator_to_dict
from .models import model_from_dict

KINDS = ("trajectories", "jumptime-map", "walltime", "topology", "steady-state", "fig2", "verify")

SCHEMAS = {
    "transport": "transport/1",
    "observables": "observables/1",
    "histogram": "histogram/1",
    "skewness": "skewness/1",
    "walltime": "walltime/1",
    "jumptime_map": "jumptime-map/1",
    "phase_diagram": "phase-diagram/1",
    "crossover": "crossover/1",
    "kernel": "kernel/1",
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    kind: str = "trajectories"
    model: dict = field(default_factory=lambda: {"builtin": "ssh", "v": 0.2, "w": 0.5})
    dissipator: dict = field(default_factory=lambda: {"type": "collective", "gamma": 1.0})
    N: int = 700
    n_max: int = 4
    L: int = 64
    N_p: int = 512
    base_seed: int = 20240101
    init_cell: list = field(default_factory=lambda: [0])
    init_sublattice: str = "A"
    times: list = field(default_factory=list)
    sweep: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: str = "runs/default"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.N < 1 or self.n_max < 0 or self.L < 2 or self.N_p < 4:
            raise ConfigError("N >= 1, n_max >= 0, L >= 2 and N_p >= 4 are required")
        if self.init_sublattice not in ("A", "B"):
            raise ConfigError("init_sublattice must be 'A' or 'B'")
        self.init_cell = [int(c) for c in self.init_cell]

    # parsing --------------------------------------------------------------
    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**dict(data))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

    def canonical(self) -> dict:
        """Normalized dict: model and dissipator re-emitted by their parsers."""
        out = asdict(self)
        out["model"] = self.build_model().to_dict()
        out["dissipator"] = dissipator_to_dict(self.build_dissipator())
        return out

    def to_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, indent=2)

    def content_hash(self) -> str:
        """sha256 of the canonical config; the output location is not content."""
        data = {k: v for k, v in self.canonical().items() if k != "output"}
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def build_model(self):
        return model_from_dict(self.model)

    def build_dissipator(self):
        try:
            return dissipator_from_dict(self.dissipator)
        except (KeyError, TypeError) as exc:
            raise DissipatorConfigError(f"malformed dissipator: {exc}") from exc

    def grid_shape(self) -> tuple:
        return (self.L,) * self.build_model().dimension

    def cell(self) -> tuple:
        d = self.build_model().dimension
        c = list(self.init_cell) + [0] * d
        return tuple(c[:d])


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str = __version__
    command: str = ""
    status: str = "running"
    exit_code: int | None = None
    error: str | None = None
    wall_seconds: float = 0.0
    dark_trapped: int = 0
    rng: str | None = None
    convergence: list = field(default_factory=list)
    files: list = field(default_factory=list)
    schemas: dict = field(default_factory=dict)
    units: str = "hbar = 1, lattice constant = 1, times in 1/gamma when gamma = 1"
    notes: list = field(default_factory=list)

    def add_file(self, path: Path, schema: str | None = None) -> None:
        self.files.append(str(path.name))
        if schema:
            self.schemas[path.name] = schema

    def write(self, directory: Path) -> Path:
        path = Path(directory) / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n")
        return path


class LockError(ConfigError):
    pass


@contextmanager
def output_lock(directory: Path):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise LockError(f"output directory {directory} is in use (remove {lock} if stale)") from exc
    try:
        os.write(fd, f"{os.getpid()} {time.time()}\n".encode())
        os.close(fd)
        yield directory
    finally:
        lock.unlink(missing_ok=True)
