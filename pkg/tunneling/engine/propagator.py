#################################################
# How does the wave field move forward in time? #
#################################################

# - Crank-Nicolson for i dpsi/dt = [-(1/2) d^2/dx^2 + V(x)] psi, hard walls at both grid ends
# | (M + i dt/2 Hm) psi' = (M - i dt/2 Hm) psi on the interior nodes, Hm = -(1/2) D + M V
# - M is the identity for THREE_POINT and tridiag(1/12, 10/12, 1/12) for COMPACT
# | Both are Cayley transforms of a real symmetric Hamiltonian: unitary up to solver roundoff

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from tunneling.domain.config import EvolutionConfig, Stencil
from tunneling.domain.model import BarrierSpec, Grid, PacketSpec, PotentialSampling, WaveField, sample_potential
from tunneling.engine.tridiag import factorize_tridiag, solve_factorized, tridiag_matvec
from tunneling.utils import ConfigError, ProbeError, SolverBreakdownError, print_message

logger = logging.getLogger(__name__)

COMPACT_WEIGHT = 1.0 / 12.0


@dataclass(frozen=True, eq=False)
class ProbeRecord:
    X: float
    times: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    current: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("times", "density", "current"):
            values = np.array(getattr(self, name), dtype=float)
            values.flags.writeable = False
            object.__setattr__(self, name, values)
        if not (self.times.shape == self.density.shape == self.current.shape):
            print_message(f"Probe record at X={self.X} has sequences of different lengths", "error", ProbeError)


class EvolutionResult(NamedTuple):
    final: WaveField
    snapshots: dict[float, WaveField]
    records: dict[float, ProbeRecord]


class CrankNicolsonPropagator:

    def __init__(self,
            grid: Grid,
            barrier: BarrierSpec,
            dt: float,
            stencil: Stencil = Stencil.COMPACT,
            sampling: PotentialSampling = PotentialSampling.CELL_AVERAGE
        ):
        if not dt > 0:
            print_message(f"Time step must be positive (got dt={dt})", "error", ConfigError)

        self._grid = grid
        self._barrier = barrier
        self._dt = dt

        weight = COMPACT_WEIGHT if stencil is Stencil.COMPACT else 0.0
        v = sample_potential(barrier, grid, sampling)[1:-1]
        inv_dx2 = 1.0 / grid.dx ** 2

        lower = np.zeros(v.size)
        upper = np.zeros(v.size)
        lower[1:] = -0.5 * inv_dx2 + weight * v[:-1]
        upper[:-1] = -0.5 * inv_dx2 + weight * v[1:]
        diag = inv_dx2 + (1.0 - 2.0 * weight) * v

        tau = 0.5j * dt
        self._a = (weight + tau * lower, (1.0 - 2.0 * weight) + tau * diag, weight + tau * upper)
        self._b = (weight - tau * lower, (1.0 - 2.0 * weight) - tau * diag, weight - tau * upper)

        try:
            self._c_prime, self._inv_pivot = factorize_tridiag(*self._a)
        except ZeroDivisionError:
            self._inv_pivot = np.array([np.inf])
        if not np.isfinite(self._inv_pivot).all():
            print_message(
                f"Tridiagonal elimination broke down for dt={dt}, dx={grid.dx}",
                "error", SolverBreakdownError
            )

        self._rhs = np.empty(v.size, dtype=np.complex128)
        self._interior = np.empty(v.size, dtype=np.complex128)

    @property
    def grid(this) -> Grid:
        return this._grid

    @property
    def dt(this) -> float:
        return this._dt

    def advance(self, psi: np.ndarray) -> np.ndarray:
        """One step on a raw amplitude array; the wall nodes come back as zero."""
        tridiag_matvec(*self._b, psi[1:-1], self._rhs)
        solve_factorized(self._a[0], self._c_prime, self._inv_pivot, self._rhs, self._interior)

        out = np.zeros_like(psi, dtype=np.complex128)
        out[1:-1] = self._interior
        return out

    def step(self, field: WaveField) -> WaveField:
        return WaveField(grid=field.grid, t=field.t + self._dt, amplitudes=self.advance(field.amplitudes))


def step(field: WaveField, barrier: BarrierSpec, dt: float,
         stencil: Stencil = Stencil.COMPACT,
         sampling: PotentialSampling = PotentialSampling.CELL_AVERAGE) -> WaveField:
    return CrankNicolsonPropagator(field.grid, barrier, dt, stencil, sampling).step(field)


def probe_indices(grid: Grid, probes: tuple[float, ...]) -> np.ndarray:
    indices = []
    for X in probes:
        index = grid.nearest_index(X)
        if not grid.contains(X) or not 0 < index < grid.n_points - 1:
            print_message(
                f"Probe X={X} is off the interior of the grid [{grid.x_min}, {grid.x_max}]",
                "error", ProbeError
            )
        indices.append(index)
    return np.array(indices, dtype=np.int64)


def probability_current(psi: np.ndarray, indices: np.ndarray, dx: float) -> np.ndarray:
    derivative = (psi[indices + 1] - psi[indices - 1]) / (2.0 * dx)
    return np.imag(np.conj(psi[indices]) * derivative)


def evolve(field: WaveField, barrier: BarrierSpec, config: EvolutionConfig,
           on_step: Optional[Callable[[int, np.ndarray], None]] = None) -> EvolutionResult:
    """`on_step(n, psi)` sees the amplitudes of every step, the initial one included."""
    grid = field.grid
    propagator = CrankNicolsonPropagator(grid, barrier, config.dt, config.stencil, config.sampling)
    indices = probe_indices(grid, config.probes)

    n_steps = config.n_steps
    times = field.t + config.dt * np.arange(n_steps + 1)
    density = np.empty((n_steps + 1, indices.size))
    current = np.empty((n_steps + 1, indices.size))

    snapshot_steps: dict[int, list[float]] = {}
    for t in config.snapshot_times:
        snapshot_steps.setdefault(int(round(t / config.dt)), []).append(t)
    snapshots: dict[float, WaveField] = {t: field for t in snapshot_steps.pop(0, [])}

    logger.debug("Evolving %d steps of dt=%g over %d points (h=%g, d=%g)",
                 n_steps, config.dt, grid.n_points, barrier.height, barrier.width)

    psi = np.array(field.amplitudes)
    density[0] = np.abs(psi[indices]) ** 2
    current[0] = probability_current(psi, indices, grid.dx)
    if on_step is not None:
        on_step(0, psi)
    for n in range(1, n_steps + 1):
        psi = propagator.advance(psi)
        density[n] = np.abs(psi[indices]) ** 2
        current[n] = probability_current(psi, indices, grid.dx)

        if n in snapshot_steps:
            snapshot = WaveField(grid=grid, t=times[n], amplitudes=psi)
            snapshots.update({t: snapshot for t in snapshot_steps[n]})
        if on_step is not None:
            on_step(n, psi)

    records = {
        X: ProbeRecord(X=X, times=times, density=density[:, i], current=current[:, i])
        for i, X in enumerate(config.probes)
    }
    final = WaveField(grid=grid, t=times[-1], amplitudes=psi)
    return EvolutionResult(final=final, snapshots=dict(sorted(snapshots.items())), records=records)


def free_gaussian_reference(spec: PacketSpec, x: float | np.ndarray, t: float) -> complex | np.ndarray:
    """Closed-form free evolution of the Gaussian packet (complex width sigma^2 + i t)."""
    width = spec.sigma ** 2 + 1j * t
    shifted = x - spec.x0
    return (spec.sigma ** 2 / np.pi) ** 0.25 / np.sqrt(width) * np.exp(
        -(shifted - spec.k0 * t) ** 2 / (2.0 * width)
        + 1j * spec.k0 * shifted
        - 0.5j * spec.k0 ** 2 * t
    )
