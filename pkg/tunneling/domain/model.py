####################################################
# What does the packet travel through, and where? #
####################################################

# - Natural units m = hbar = 1 everywhere
# | With k0 = 2 the length unit 2/k0 and time unit 4/k0^2 are both 1
# - All records are immutable values: safe to share between runs and threads
# | WaveField freezes its amplitude array on construction

from dataclasses import dataclass, field
try:
    from typing import Self
except ImportError:  # Python < 3.11
    from typing_extensions import Self

import numpy as np

from tunneling.utils import ConfigError, ExtendedEnum, GridTooNarrowError, print_message

EDGE_AMPLITUDE_THRESHOLD = 1e-12


class PotentialSampling(ExtendedEnum):
    POINTWISE       = "pointwise"
    CELL_AVERAGE    = "cell-average"


@dataclass(frozen=True)
class Grid:
    x_min: float = -300.0
    x_max: float = 200.0
    n_points: int = 5001

    def __post_init__(self):
        if self.n_points < 3:
            print_message(f"A grid needs at least 3 points (got {self.n_points})", "error", ConfigError)
        if not self.x_min < self.x_max:
            print_message(f"Grid bounds must satisfy x_min < x_max (got {self.x_min}, {self.x_max})", "error", ConfigError)

    @property
    def dx(this) -> float:
        return (this.x_max - this.x_min) / (this.n_points - 1)

    @property
    def x(this) -> np.ndarray:
        return np.linspace(this.x_min, this.x_max, this.n_points)

    def contains(self, position: float) -> bool:
        return self.x_min <= position <= self.x_max

    def nearest_index(self, position: float) -> int:
        return int(np.clip(np.rint((position - self.x_min) / self.dx), 0, self.n_points - 1))

    def aligned_to(self, position: float) -> Self:
        """Same spacing and size, shifted by less than dx so that `position` is a node."""
        offset = position - (self.x_min + self.nearest_index(position) * self.dx)
        if offset == 0.0:
            return self
        return Grid(self.x_min + offset, self.x_max + offset, self.n_points)

    def to_json(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points}


@dataclass(frozen=True)
class PacketSpec:
    sigma: float = 10.0
    k0: float = 2.0
    x0: float = -50.0

    def __post_init__(self):
        if not self.sigma > 0:
            print_message(f"Packet width sigma must be positive (got {self.sigma})", "error", ConfigError)

    @property
    def mean_energy(this) -> float:
        return mean_energy(this)

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "k0": self.k0, "x0": self.x0}


@dataclass(frozen=True)
class BarrierSpec:
    height: float = 0.0
    width: float = 0.0
    left_edge: float = 0.0

    def __post_init__(self):
        if self.height < 0 or self.width < 0:
            print_message(f"Barrier height and width must be non-negative (got h={self.height}, d={self.width})", "error", ConfigError)

    @property
    def right_edge(this) -> float:
        return this.left_edge + this.width

    @property
    def is_free(this) -> bool:
        return this.height == 0.0 or this.width == 0.0

    @classmethod
    def relative_to(cls, packet: PacketSpec, height_ratio: float, width: float, left_edge: float = 0.0) -> 'BarrierSpec':
        return cls(height=height_ratio * mean_energy(packet), width=width, left_edge=left_edge)

    def to_json(self) -> dict:
        return {"height": self.height, "width": self.width, "left_edge": self.left_edge}


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: Grid
    t: float
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=np.complex128)
        if amplitudes.shape != (self.grid.n_points,):
            print_message(
                f"Wave field has {amplitudes.size} amplitudes for a grid of {self.grid.n_points} points",
                "error", ConfigError
            )
        if not np.isfinite(amplitudes).all():
            print_message(f"Wave field at t={self.t} holds non-finite amplitudes", "error", ConfigError)
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def density(this) -> np.ndarray:
        return np.abs(this.amplitudes) ** 2

    def norm(self) -> float:
        return float(self.grid.dx * np.sum(self.density))

    def norm_between(self, lower: float, upper: float = np.inf) -> float:
        x = self.grid.x
        return float(self.grid.dx * np.sum(self.density[(x >= lower) & (x <= upper)]))

    def expectation_energy(self, barrier: 'BarrierSpec | None' = None) -> float:
        """<psi|H|psi> with the three-point Laplacian and the pointwise potential."""
        psi = self.amplitudes
        laplacian = np.zeros_like(psi)
        laplacian[1:-1] = (psi[2:] - 2.0 * psi[1:-1] + psi[:-2]) / self.grid.dx ** 2
        h_psi = -0.5 * laplacian
        if barrier is not None:
            h_psi = h_psi + potential_at(barrier, self.grid.x) * psi
        return float(np.real(self.grid.dx * np.vdot(psi, h_psi)) / self.norm())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, WaveField) and self.grid == other.grid \
            and self.t == other.t and np.array_equal(self.amplitudes, other.amplitudes)

    __hash__ = None


def mean_energy(spec: PacketSpec) -> float:
    return spec.k0 ** 2 / 2.0 + 1.0 / (4.0 * spec.sigma ** 2)


def potential_at(barrier: BarrierSpec, x: float | np.ndarray) -> float | np.ndarray:
    if barrier.is_free:
        return np.zeros_like(x, dtype=float) if isinstance(x, np.ndarray) else 0.0

    inside = (x >= barrier.left_edge) & (x <= barrier.right_edge)
    if isinstance(x, np.ndarray):
        return np.where(inside, barrier.height, 0.0)
    return barrier.height if inside else 0.0


def sample_potential(barrier: BarrierSpec, grid: Grid,
                     sampling: PotentialSampling = PotentialSampling.CELL_AVERAGE) -> np.ndarray:
    x = grid.x
    if barrier.is_free:
        return np.zeros_like(x)

    match sampling:
        case PotentialSampling.POINTWISE:
            return potential_at(barrier, x)
        case PotentialSampling.CELL_AVERAGE:
            half = grid.dx / 2.0
            covered = np.clip(np.minimum(x + half, barrier.right_edge) - np.maximum(x - half, barrier.left_edge), 0.0, None)
            return barrier.height * covered / grid.dx


def gaussian_packet(spec: PacketSpec, grid: Grid) -> WaveField:
    x = grid.x
    envelope = np.exp(-(x - spec.x0) ** 2 / (2.0 * spec.sigma ** 2))

    edge = max(envelope[0], envelope[-1])
    if edge >= EDGE_AMPLITUDE_THRESHOLD * envelope.max():
        print_message(
            f"Grid [{grid.x_min}, {grid.x_max}] is too narrow for a packet at x0={spec.x0} with sigma={spec.sigma} "
            f"(edge amplitude {edge:.3e} of peak)",
            "error", GridTooNarrowError
        )

    psi = (1.0 / (np.pi * spec.sigma ** 2)) ** 0.25 * envelope * np.exp(1j * spec.k0 * (x - spec.x0))
    psi /= np.sqrt(grid.dx * np.sum(np.abs(psi) ** 2))
    return WaveField(grid=grid, t=0.0, amplitudes=psi)
