"""Pipeline configuration: defaults, INI round-trip, validation.

The defaults reproduce the reference problem setup exactly (grid spacing
0.4 over (0, 100), time step 0.0125, 20-step slabs, horizon t = 12,
3 x 3 anchor grid on [3, 9] x [0.02, 0.075]), so running the offline
stage with an empty configuration file builds the standard store.  Files
use INI sections with key = value pairs; unknown sections or keys are
rejected so typos cannot silently fall back to defaults.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields, replace

from .basis import GS_TOL
from .errors import ConfigError
from .hfm import Grid1D, ParamPoint, SOURCE_COEFF
from .param_space import TimePartition
from .pod import POD_THRESHOLD, SWEEP_SAMPLES
from .rom import SOURCE_TERMS
from .transport import DERIVATIVE_TOL, QUANTILE_LEVELS


@dataclass(frozen=True)
class PipelineConfig:
    """Every knob of the offline/online/UQ pipeline, with paper defaults."""

    # [grid]
    n_cells: int = 250
    x_lo: float = 0.0
    x_hi: float = 100.0
    # [time]
    dt: float = 0.0125
    t_final: float = 12.0
    steps_per_slab: int = 20
    # [parameters]
    mu1_lo: float = 3.0
    mu1_hi: float = 9.0
    mu2_lo: float = 0.02
    mu2_hi: float = 0.075
    anchors_mu1: tuple = (3.0, 6.0, 9.0)
    anchors_mu2: tuple = (0.02, 0.05, 0.075)
    # [sampling]
    p_t: int = 3
    p1: int = 9
    p2: int = 9
    quantile_levels: int = QUANTILE_LEVELS
    extra_stride: int = 5
    # [basis]
    gs_tol: float = GS_TOL
    derivative_tol: float = DERIVATIVE_TOL
    # [rom]
    source_terms: int = SOURCE_TERMS
    source_coeff: float = SOURCE_COEFF
    # [pod]
    pod_threshold: float = POD_THRESHOLD
    sweep_samples: int = SWEEP_SAMPLES
    sweep_seed: int = 7
    # [uq]
    uq_samples: int = 10_000
    uq_seed: int = 0
    qoi_time: float = 12.0

    _SECTIONS = {
        "grid": ("n_cells", "x_lo", "x_hi"),
        "time": ("dt", "t_final", "steps_per_slab"),
        "parameters": ("mu1_lo", "mu1_hi", "mu2_lo", "mu2_hi",
                       "anchors_mu1", "anchors_mu2"),
        "sampling": ("p_t", "p1", "p2", "quantile_levels", "extra_stride"),
        "basis": ("gs_tol", "derivative_tol"),
        "rom": ("source_terms", "source_coeff"),
        "pod": ("pod_threshold", "sweep_samples", "sweep_seed"),
        "uq": ("uq_samples", "uq_seed", "qoi_time"),
    }

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_cells < 2:
            raise ConfigError(f"n_cells must be >= 2, got {self.n_cells}")
        if not self.x_hi > self.x_lo:
            raise ConfigError("x_hi must exceed x_lo")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if self.steps_per_slab < 1:
            raise ConfigError("steps_per_slab must be >= 1")
        if not (self.mu1_hi > self.mu1_lo and self.mu2_hi > self.mu2_lo):
            raise ConfigError("parameter ranges must be nondegenerate")
        for name, values, lo, hi in (
                ("anchors_mu1", self.anchors_mu1, self.mu1_lo, self.mu1_hi),
                ("anchors_mu2", self.anchors_mu2, self.mu2_lo, self.mu2_hi)):
            vals = tuple(float(v) for v in values)
            object.__setattr__(self, name, vals)
            if len(vals) < 2:
                raise ConfigError(f"{name} needs at least 2 values")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
            if vals[0] != lo or vals[-1] != hi:
                raise ConfigError(
                    f"{name} must span its parameter range [{lo}, {hi}] "
                    f"exactly, got {vals}")
        if min(self.p_t, self.p1, self.p2) < 2:
            raise ConfigError("need at least 2 samples per element axis")
        if self.quantile_levels < 2:
            raise ConfigError("quantile_levels must be >= 2")
        if self.extra_stride < 1:
            raise ConfigError("extra_stride must be >= 1")
        if not 0 < self.gs_tol < 1:
            raise ConfigError("gs_tol must lie in (0, 1)")
        if not 0 < self.derivative_tol < 1:
            raise ConfigError("derivative_tol must lie in (0, 1)")
        if self.source_terms < 1:
            raise ConfigError("source_terms must be >= 1")
        if not 0 < self.pod_threshold < 1:
            raise ConfigError("pod_threshold must lie in (0, 1)")
        if self.sweep_samples < 1 or self.uq_samples < 1:
            raise ConfigError("sample counts must be >= 1")
        if not 0 < self.qoi_time <= self.t_final:
            raise ConfigError("qoi_time must lie in (0, t_final]")

    # -- derived objects -------------------------------------------------
    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / self.n_cells

    def grid(self) -> Grid1D:
        return Grid1D(n_cells=self.n_cells, dx=self.dx, x_lo=self.x_lo)

    def partition(self) -> TimePartition:
        return TimePartition(dt=self.dt, steps_per_slab=self.steps_per_slab)

    @property
    def param_box(self):
        return ((self.mu1_lo, self.mu1_hi), (self.mu2_lo, self.mu2_hi))

    def anchor_points(self) -> list[ParamPoint]:
        """Anchor grid in deterministic lexicographic (mu1-major) order."""
        return [ParamPoint(m1, m2)
                for m1 in self.anchors_mu1 for m2 in self.anchors_mu2]

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_final / self.dt)))

    @property
    def n_slabs(self) -> int:
        return self.partition().n_slabs(self.n_steps)

    # -- serialization ---------------------------------------------------
    @classmethod
    def from_ini(cls, path) -> "PipelineConfig":
        parser = configparser.ConfigParser()
        try:
            read = parser.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not read:
            raise ConfigError(f"config file not found: {path}")
        return cls.from_parser(parser, source=str(path))

    @classmethod
    def from_text(cls, text: str) -> "PipelineConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        return cls.from_parser(parser, source="<string>")

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser,
                    source: str = "<config>") -> "PipelineConfig":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for section in parser.sections():
            if section not in cls._SECTIONS:
                raise ConfigError(f"{source}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in cls._SECTIONS[section]:
                    raise ConfigError(
                        f"{source}: unknown key '{key}' in [{section}]")
                if types[key] == "tuple":
                    caster = (lambda s: tuple(
                        float(part) for part in s.split(",") if part.strip()))
                else:
                    caster = int if types[key] == "int" else float
                try:
                    kwargs[key] = caster(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"{source}: bad value for {key}: {raw!r}") from exc
        try:
            return cls(**kwargs)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    def to_ini(self) -> str:
        """Canonical INI text (fixed section/key order, repr-exact floats)."""
        out = io.StringIO()
        for section, keys in self._SECTIONS.items():
            out.write(f"[{section}]\n")
            for key in keys:
                value = getattr(self, key)
                if isinstance(value, tuple):
                    text = ", ".join(repr(v) for v in value)
                else:
                    text = repr(value)
                out.write(f"{key} = {text}\n")
            out.write("\n")
        return out.getvalue()

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)
