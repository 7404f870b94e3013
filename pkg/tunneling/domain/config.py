#################################################
# How is an experiment described and recorded? #
#################################################

# - One flat record of dotted keys ("packet.sigma", "analysis.widths", ...)
# | Persisted as JSON, defaults reproduce the unique initial packet
# - Barrier heights are written in units of the packet mean energy
# | The absolute BarrierSpec is derived, never stored

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from tunneling.domain.model import BarrierSpec, Grid, PacketSpec, PotentialSampling
from tunneling.utils import ConfigError, ExtendedEnum, print_message, tuplization

DEFAULT_SUBSTEPS = 16


class Boundary(ExtendedEnum):
    HARD_WALL   = "hard-wall"


class Stencil(ExtendedEnum):
    THREE_POINT = "three-point"
    COMPACT     = "compact"


class MomentumWeighting(ExtendedEnum):
    SQUARED     = "squared"
    AMPLITUDE   = "amplitude"


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float = 0.01
    t_max: float = 100.0
    boundary: Boundary = Boundary.HARD_WALL
    snapshot_times: tuple[float, ...] = (0.0, 25.0, 50.0, 75.0)
    probes: tuple[float, ...] = (50.0,)
    stencil: Stencil = Stencil.COMPACT
    sampling: PotentialSampling = PotentialSampling.CELL_AVERAGE

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in tuplization(self.snapshot_times)))
        object.__setattr__(self, "probes", tuple(float(x) for x in tuplization(self.probes)))
        if not self.dt > 0:
            print_message(f"Time step must be positive (got dt={self.dt})", "error", ConfigError)
        if self.t_max < 0:
            print_message(f"Evolution end time must be non-negative (got t_max={self.t_max})", "error", ConfigError)
        if any(t < 0 or t > self.t_max for t in self.snapshot_times):
            print_message(f"Snapshot times {self.snapshot_times} fall outside [0, {self.t_max}]", "error", ConfigError)

    @property
    def n_steps(this) -> int:
        return int(round(this.t_max / this.dt))

    def with_probes(self, *probes: float) -> 'EvolutionConfig':
        return replace(self, probes=tuple(probes))


@dataclass(frozen=True)
class AnalysisConfig:
    probe: float = 50.0
    tunnel_height_ratio: float = 2.0
    tunnel_width: float = 4.0
    profile_width: float = 4.0
    profile_probes: tuple[float, ...] = (10.0, 20.0, 30.0, 40.0, 50.0)
    height_ratios: tuple[float, ...] = (0.5, 1.1, 2.0)
    widths: tuple[float, ...] = tuple(0.25 * i for i in range(1, 41))
    weighting: MomentumWeighting = MomentumWeighting.SQUARED

    def __post_init__(self):
        object.__setattr__(self, "profile_probes", tuple(float(x) for x in tuplization(self.profile_probes)))
        object.__setattr__(self, "height_ratios", tuple(float(h) for h in tuplization(self.height_ratios)))
        object.__setattr__(self, "widths", tuple(float(d) for d in tuplization(self.widths)))
        if any(h < 0 for h in self.height_ratios) or any(d < 0 for d in self.widths):
            print_message("Sweep heights and widths must be non-negative", "error", ConfigError)


@dataclass(frozen=True)
class NelsonConfig:
    n_paths: int = 100_000
    seed: int = 20000
    bin_width: float = 0.5
    probe: float = 50.0
    height_ratio: float = 2.0
    widths: tuple[float, ...] = (0.5, 1.0)
    clamp: Optional[float] = None
    substeps: int = DEFAULT_SUBSTEPS
    record_stride: int = 100
    dump_paths: int = 20
    histogram_times: tuple[float, ...] = (25.0, 50.0, 75.0)
    histogram_bin: float = 1.0

    def __post_init__(self):
        if self.n_paths < 1:
            print_message(f"An ensemble needs at least one path (got {self.n_paths})", "error", ConfigError)
        if not self.bin_width > 0 or not self.histogram_bin > 0:
            print_message("Detector and histogram bins must be positive", "error", ConfigError)
        if self.record_stride < 1:
            print_message(f"Record stride must be at least 1 (got {self.record_stride})", "error", ConfigError)
        if self.substeps < 1:
            print_message(f"Drift substeps must be at least 1 (got {self.substeps})", "error", ConfigError)
        object.__setattr__(self, "widths", tuple(float(d) for d in tuplization(self.widths)))
        object.__setattr__(self, "histogram_times", tuple(float(t) for t in tuplization(self.histogram_times)))


SECTIONS: dict[str, type] = {
    "packet": PacketSpec,
    "grid": Grid,
    "evolution": EvolutionConfig,
    "analysis": AnalysisConfig,
    "nelson": NelsonConfig,
}

OPTIONAL_SECTION = "nelson"


@dataclass(frozen=True)
class ExperimentConfig:
    packet: PacketSpec = field(default_factory=PacketSpec)
    grid: Grid = field(default_factory=Grid)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    barrier_height_ratio: float = 1.1
    barrier_width: float = 1.5
    barrier_left_edge: float = 0.0
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    nelson: Optional[NelsonConfig] = field(default_factory=NelsonConfig)
    output_dir: str = "results"

    def __post_init__(self):
        for x in self.evolution.probes + self.analysis.profile_probes + (self.analysis.probe,):
            if not self.grid.contains(x):
                print_message(f"Probe X={x} lies outside the grid [{self.grid.x_min}, {self.grid.x_max}]", "error", ConfigError)

    @property
    def barrier(this) -> BarrierSpec:
        return this.barrier_for(this.barrier_height_ratio, this.barrier_width)

    def barrier_for(self, height_ratio: float, width: float) -> BarrierSpec:
        return BarrierSpec.relative_to(self.packet, height_ratio, width, left_edge=self.barrier_left_edge)

    # FLAT RECORD ------------------------------------------------------------------------------------------------- #

    def to_flat(self) -> dict[str, Any]:
        flat: dict[str, Any] = {}
        for section in SECTIONS:
            record = getattr(self, section)
            if record is None:
                flat[section] = None
                continue
            for f in fields(record):
                flat[f"{section}.{f.name}"] = _to_plain(getattr(record, f.name))

        flat["barrier.height_ratio"] = self.barrier_height_ratio
        flat["barrier.width"] = self.barrier_width
        flat["barrier.left_edge"] = self.barrier_left_edge
        flat["output_dir"] = self.output_dir
        return dict(sorted(flat.items()))

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> 'ExperimentConfig':
        known = {f"{s}.{f.name}" for s, record in SECTIONS.items() for f in fields(record)}
        known |= {OPTIONAL_SECTION, "barrier.height_ratio", "barrier.width", "barrier.left_edge", "output_dir"}
        if unknown := sorted(set(flat) - known):
            print_message(f"Unknown configuration keys: {', '.join(unknown)}", "error", ConfigError)

        sections: dict[str, Any] = {}
        for section, record in SECTIONS.items():
            if section == OPTIONAL_SECTION and section in flat and flat[section] is None:
                sections[section] = None
                continue
            defaults = record()
            values = {
                f.name: _from_plain(flat[f"{section}.{f.name}"], getattr(defaults, f.name), f"{section}.{f.name}")
                for f in fields(record) if f"{section}.{f.name}" in flat
            }
            try:
                sections[section] = replace(defaults, **values)
            except TypeError as e:
                print_message(f"Invalid '{section}' section: {e}", "error", ConfigError)

        defaults = cls()
        return cls(
            **sections,
            barrier_height_ratio=float(flat.get("barrier.height_ratio", defaults.barrier_height_ratio)),
            barrier_width=float(flat.get("barrier.width", defaults.barrier_width)),
            barrier_left_edge=float(flat.get("barrier.left_edge", defaults.barrier_left_edge)),
            output_dir=str(flat.get("output_dir", defaults.output_dir)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_flat(), indent=4, sort_keys=True)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_flat(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def save(self, save_file: Path):
        with Path(save_file).open('w') as fp:
            fp.write(self.to_json() + "\n")

    @classmethod
    def load(cls, saved_file: Path) -> 'ExperimentConfig':
        try:
            with Path(saved_file).open('r') as fp:
                json_data = json.load(fp)
        except json.JSONDecodeError as e:
            print_message(f"Configuration file '{saved_file}' is not valid JSON: {e}", "error", ConfigError)

        if not isinstance(json_data, dict):
            print_message(f"Configuration file '{saved_file}' must hold a JSON object", "error", ConfigError)
        return cls.from_flat(json_data)


def _to_plain(value: Any) -> Any:
    if isinstance(value, ExtendedEnum):
        return str(value)
    if isinstance(value, tuple):
        return list(value)
    return value


def _from_plain(value: Any, default: Any, key: str) -> Any:
    try:
        if isinstance(default, ExtendedEnum):
            return type(default).from_str(value)
        if isinstance(default, tuple):
            return tuple(float(v) for v in tuplization(value))
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int):
            if float(value) != int(value):
                raise ValueError(f"{value} is not an integer")
            return int(value)
        if isinstance(default, float) or default is None:
            return None if value is None else float(value)
    except (TypeError, ValueError) as e:
        print_message(f"Invalid value for '{key}': {e}", "error", ConfigError)
    return value
