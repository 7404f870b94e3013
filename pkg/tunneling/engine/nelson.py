#####################################################
# How do sample paths reproduce the quantum flow?  #
#####################################################

# - Each path obeys the Ito equation dx = b(x,t) dt + dw, <dw^2> = dt (m = hbar = 1)
# | b = d/dx (Re + Im) ln psi is read off a cubic spline of the solver state at every step
# - A path whose drift would carry it past one cell takes `substeps` smaller steps
# - Paths live in fixed blocks of 1024 with one Philox stream per block
# | A path's noise never depends on the ensemble size or on how blocks are scheduled
# - Detectors run online at every step: occupancy of [X, X + bin) and first crossings
# | Full positions are only kept every `record_stride` steps

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from rich.progress import BarColumn, Progress, TextColumn, TimeRemainingColumn
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from tunneling.domain.config import DEFAULT_SUBSTEPS, EvolutionConfig
from tunneling.domain.model import BarrierSpec, Grid, PacketSpec, WaveField, gaussian_packet
from tunneling.engine.arrival import ArrivalDistribution, DistributionKind, mean_arrival_time, normalized_distribution
from tunneling.engine.propagator import EvolutionResult, evolve
from tunneling.utils import DistributionError, EnsembleError, ExtendedEnum, ProbeError, console, print_message

logger = logging.getLogger(__name__)

BLOCK_SIZE = 1024
DENSITY_FLOOR = 1e-30
DETECTOR_MATCH_TOLERANCE = 1e-9
FIRST_PASSAGE_TIME_BIN = 0.5


class CountingScheme(ExtendedEnum):
    MULTIPLE_COUNTING   = "multiple-counting"
    FIRST_PASSAGE       = "first-passage"


def _frozen(values, dtype=float) -> np.ndarray:
    array = np.array(values, dtype=dtype)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class DriftField:
    grid: Grid
    t: float
    b: np.ndarray = field(repr=False)
    clamp: float

    def __post_init__(self):
        object.__setattr__(self, "b", _frozen(self.b))
        if self.b.shape != (self.grid.n_points,) or not np.isfinite(self.b).all():
            print_message(f"Drift field at t={self.t} is not a finite value per grid point", "error", EnsembleError)

    def at(self, x: float | np.ndarray) -> float | np.ndarray:
        return np.interp(x, self.grid.x, self.b)


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    n_paths: int
    dt: float
    seed: int
    grid: Grid
    barrier: BarrierSpec
    times: np.ndarray = field(repr=False)
    positions: np.ndarray = field(repr=False)
    clamp: float = np.inf
    bin_width: float = 0.5
    detectors: tuple[float, ...] = ()
    step_times: np.ndarray = field(default=None, repr=False)
    occupancy: np.ndarray = field(default=None, repr=False)
    first_crossings: np.ndarray = field(default=None, repr=False)
    drifts: tuple[DriftField, ...] = field(default=(), repr=False)
    noise_mean: float = np.nan
    noise_var: float = np.nan
    wave: Optional[EvolutionResult] = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_paths < 1:
            print_message(f"An ensemble needs at least one path (got {self.n_paths})", "error", EnsembleError)
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "positions", _frozen(self.positions))
        if self.positions.shape != (self.times.size, self.n_paths):
            print_message(
                f"Positions of shape {self.positions.shape} do not match {self.times.size} records of {self.n_paths} paths",
                "error", EnsembleError
            )
        if not np.isfinite(self.positions).all():
            print_message("Ensemble holds non-finite positions", "error", EnsembleError)

        object.__setattr__(self, "detectors", tuple(float(x) for x in self.detectors))
        n_detectors = len(self.detectors)
        step_times = self.times if self.step_times is None else self.step_times
        occupancy = np.zeros((step_times.size, n_detectors)) if self.occupancy is None else self.occupancy
        crossings = np.full((self.n_paths, n_detectors), np.nan) if self.first_crossings is None else self.first_crossings
        object.__setattr__(self, "step_times", _frozen(step_times))
        object.__setattr__(self, "occupancy", _frozen(occupancy))
        object.__setattr__(self, "first_crossings", _frozen(crossings))

    @property
    def final_positions(this) -> np.ndarray:
        return this.positions[-1]

    @property
    def transmitted_flags(this) -> np.ndarray:
        return this.final_positions > this.barrier.right_edge

    @property
    def transmitted_fraction(this) -> float:
        return float(np.count_nonzero(this.transmitted_flags)) / this.n_paths

    def detector_index(self, X: float) -> Optional[int]:
        for i, position in enumerate(self.detectors):
            if abs(position - X) <= DETECTOR_MATCH_TOLERANCE:
                return i
        return None

    def record_index(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 0.5 * self.dt:
            print_message(f"No stored positions at t={t} (records every {self.times[1] - self.times[0]:g})", "error", EnsembleError)
        return i


@dataclass(frozen=True, eq=False)
class CountingResult:
    X: float
    bin_width: float
    times: np.ndarray = field(repr=False)
    rho_N: np.ndarray = field(repr=False)
    scheme: CountingScheme = CountingScheme.MULTIPLE_COUNTING

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "rho_N", _frozen(self.rho_N))
        if np.any(self.rho_N < 0):
            print_message(f"Counting result at X={self.X} has negative entries", "error", DistributionError)


@dataclass(frozen=True)
class EntranceStatistics:
    mean_entrance_time: float
    max_entrance_time: float
    n_transmitted: int
    free_mean_crossing: float


# DRIFT AND STEPPING ----------------------------------------------------------------------------------------------- #

def _drift_values(psi: np.ndarray, dx: float, clamp: float) -> np.ndarray:
    density = np.abs(psi) ** 2
    log_abs = 0.5 * np.log(np.maximum(density, DENSITY_FLOOR))
    phase = np.unwrap(np.angle(psi))
    b = np.gradient(log_abs, dx) + np.gradient(phase, dx)

    saturated = (density < DENSITY_FLOOR) | ~np.isfinite(b) | (np.abs(b) > clamp)
    return np.where(saturated, np.sign(np.nan_to_num(b)) * clamp, b)


def drift_field(field: WaveField, clamp: float) -> DriftField:
    if not clamp > 0:
        print_message(f"Drift clamp must be positive (got {clamp})", "error", EnsembleError)
    return DriftField(grid=field.grid, t=field.t, b=_drift_values(field.amplitudes, field.grid.dx, clamp), clamp=clamp)


def path_drift(psi: np.ndarray, grid: Grid, clamp: float) -> Callable[[np.ndarray], np.ndarray]:
    """Drift at arbitrary positions, psi'/psi taken from a complex cubic spline of psi.

    Resolves interference minima narrower than one cell, which node-wise values of b smear out.
    """
    spline = CubicSpline(grid.x, psi)

    def at(x: np.ndarray) -> np.ndarray:
        value, slope = spline(x), spline(x, 1)
        occupied = np.abs(value) ** 2 >= DENSITY_FLOOR
        ratio = np.divide(slope, value, out=np.zeros_like(value), where=occupied)
        return np.clip(ratio.real + ratio.imag, -clamp, clamp)

    return at


def _reflect(x: np.ndarray, lower: float, upper: float) -> np.ndarray:
    x = np.where(x < lower, 2.0 * lower - x, x)
    x = np.where(x > upper, 2.0 * upper - x, x)
    return np.clip(x, lower, upper)


def _advance_paths(x: np.ndarray, drift: Callable[[np.ndarray], np.ndarray], dt: float, dw: np.ndarray,
                   bounds: tuple[float, float], max_step: float = np.inf, substeps: int = 1) -> np.ndarray:
    """Euler-Maruyama step; paths whose drift would carry them past `max_step` split it into substeps."""
    b = drift(x)
    moved = x + b * dt + dw
    fast = np.abs(b) * dt > max_step
    if substeps > 1 and fast.any():
        # noise spread evenly over the substeps keeps one draw per path and step
        xf, dwf, h = x[fast], dw[fast] / substeps, dt / substeps
        for _ in range(substeps):
            xf = _reflect(xf + drift(xf) * h + dwf, *bounds)
        moved[fast] = xf
    return _reflect(moved, *bounds)


def sde_step(x: float | np.ndarray, bfield: DriftField, dt: float, noise: float | np.ndarray,
             substeps: int = 1) -> float | np.ndarray:
    """One Euler-Maruyama step; `noise` holds standard normal draws, scaled here to variance dt.

    With `substeps` > 1 a path whose drift moves it more than one cell is advanced in that many substeps.
    """
    grid = bfield.grid
    moved = _advance_paths(np.atleast_1d(np.asarray(x, dtype=float)), bfield.at, dt,
                           np.sqrt(dt) * np.atleast_1d(np.asarray(noise, dtype=float)),
                           (grid.x_min, grid.x_max), grid.dx, substeps)
    return float(moved[0]) if np.ndim(x) == 0 else moved


# ENSEMBLE --------------------------------------------------------------------------------------------------------- #

def block_generators(seed: int, n_paths: int) -> list[np.random.Generator]:
    n_blocks = -(-n_paths // BLOCK_SIZE)
    return [
        np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))
        for block in range(n_blocks)
    ]


def _block_draw(generators: list[np.random.Generator], n_paths: int, uniform: bool = False) -> np.ndarray:
    if uniform:
        draws = [g.random(BLOCK_SIZE) for g in generators]
    else:
        draws = [g.standard_normal(BLOCK_SIZE) for g in generators]
    return np.concatenate(draws)[:n_paths]


def sample_initial_positions(field: WaveField, uniforms: np.ndarray) -> np.ndarray:
    """Inverse CDF over node cells [x_i - dx/2, x_i + dx/2), uniform inside the chosen cell."""
    grid = field.grid
    mass = field.density * grid.dx
    cdf = np.cumsum(mass)
    target = uniforms * cdf[-1]

    cell = np.minimum(np.searchsorted(cdf, target, side="right"), grid.n_points - 1)
    below = np.where(cell > 0, cdf[cell - 1], 0.0)
    fraction = np.clip((target - below) / np.where(mass[cell] > 0, mass[cell], 1.0), 0.0, 1.0)
    x = grid.x[cell] + (fraction - 0.5) * grid.dx
    return np.clip(x, grid.x_min, grid.x_max)


def _detectors(probes: tuple[float, ...], barrier: BarrierSpec) -> tuple[float, ...]:
    return tuple(sorted({*probes, barrier.left_edge, barrier.right_edge}))


def simulate_ensemble(spec: PacketSpec,
                      barrier: BarrierSpec,
                      n_paths: int,
                      seed: int,
                      config: EvolutionConfig,
                      *,
                      grid: Optional[Grid] = None,
                      clamp: Optional[float] = None,
                      substeps: int = DEFAULT_SUBSTEPS,
                      bin_width: float = 0.5,
                      detectors: Optional[tuple[float, ...]] = None,
                      record_stride: int = 100,
                      progress: bool = False) -> PathEnsemble:
    """Drive the paths with the same solver run that fills the probe records and snapshots of `config`.

    `detectors` defaults to the configured probes; the barrier edges are always tracked.
    """
    if n_paths < 1:
        print_message(f"An ensemble needs at least one path (got {n_paths})", "error", EnsembleError)
    if record_stride < 1 or substeps < 1 or not bin_width > 0:
        print_message("Record stride, substeps and detector bin width must be positive", "error", EnsembleError)

    grid = grid or Grid()
    dt, n_steps = config.dt, config.n_steps
    clamp = substeps * grid.dx / dt if clamp is None else clamp
    bounds = (grid.x_min, grid.x_max)

    packet = gaussian_packet(spec, grid)
    generators = block_generators(seed, n_paths)
    x = sample_initial_positions(packet, _block_draw(generators, n_paths, uniform=True))

    detectors = _detectors(config.probes if detectors is None else tuple(detectors), barrier)
    marks = np.array(detectors)
    start_side = x[:, None] >= marks[None, :]
    crossings = np.full((n_paths, marks.size), np.nan)
    occupancy = np.empty((n_steps + 1, marks.size))
    step_times = dt * np.arange(n_steps + 1)

    record_steps = sorted(set(range(0, n_steps + 1, record_stride)) | {n_steps})
    slots = {n: i for i, n in enumerate(record_steps)}
    positions = np.empty((len(record_steps), n_paths))
    drifts: list[DriftField] = []
    noise = np.zeros(2)

    def occupied(x: np.ndarray) -> np.ndarray:
        return np.array([np.count_nonzero((x >= X) & (x < X + bin_width)) for X in detectors], dtype=float)

    def move_paths(n: int, psi: np.ndarray):
        nonlocal x
        if n in slots:
            positions[slots[n]] = x
            drifts.append(drift_field(WaveField(grid=grid, t=step_times[n], amplitudes=psi), clamp))
        if n == n_steps:
            return

        dw = np.sqrt(dt) * _block_draw(generators, n_paths)
        noise[:] += (dw.sum(), np.dot(dw, dw))
        x_new = _advance_paths(x, path_drift(psi, grid, clamp), dt, dw, bounds, grid.dx, substeps)

        crossed = ((x_new[:, None] >= marks[None, :]) != start_side) & np.isnan(crossings)
        if crossed.any():
            path, mark = np.nonzero(crossed)
            step = x_new[path] - x[path]
            fraction = np.where(step != 0.0, (marks[mark] - x[path]) / np.where(step != 0.0, step, 1.0), 1.0)
            crossings[path, mark] = step_times[n] + dt * np.clip(fraction, 0.0, 1.0)

        x = x_new
        occupancy[n + 1] = occupied(x)
        bar.advance(task)

    logger.info("Simulating %d paths over %d steps (h=%g, d=%g, seed=%d)", n_paths, n_steps, barrier.height, barrier.width, seed)
    occupancy[0] = occupied(x)
    columns = (TextColumn("[progress.description]{task.description}"), BarColumn(), TimeRemainingColumn())
    with Progress(*columns, console=console, transient=True, disable=not progress) as bar:
        task = bar.add_task(f"{n_paths} paths", total=n_steps)
        wave = evolve(packet, barrier, config, on_step=move_paths)

    count = n_paths * n_steps
    noise_mean = noise[0] / count if count else np.nan
    noise_var = noise[1] / count - noise_mean ** 2 if count else np.nan

    ensemble = PathEnsemble(
        n_paths=n_paths, dt=dt, seed=seed, grid=grid, barrier=barrier,
        times=step_times[record_steps], positions=positions, clamp=clamp, bin_width=bin_width,
        detectors=detectors, step_times=step_times, occupancy=occupancy, first_crossings=crossings,
        drifts=tuple(drifts), noise_mean=noise_mean, noise_var=noise_var, wave=wave,
    )
    logger.info("Ensemble done: transmitted fraction %.4f", ensemble.transmitted_fraction)
    return ensemble


# COUNTING SCHEMES ------------------------------------------------------------------------------------------------- #

def _window(ensemble: PathEnsemble, window: Optional[tuple[float, float]]) -> tuple[float, float]:
    return (float(ensemble.step_times[0]), float(ensemble.step_times[-1])) if window is None else window


def occupation_distribution(ensemble: PathEnsemble, X: float,
                            bin_width: Optional[float] = None,
                            window: Optional[tuple[float, float]] = None
                            ) -> tuple[CountingResult, ArrivalDistribution, float]:
    """Multiple counting: every path inside [X, X + bin) is counted at every time it is there."""
    bin_width = ensemble.bin_width if bin_width is None else bin_width
    grid = ensemble.grid
    if not bin_width > 0 or X < grid.x_min or X + bin_width > grid.x_max:
        print_message(f"Detector bin [{X}, {X + bin_width}] does not fit in the grid", "error", ProbeError)

    index = ensemble.detector_index(X)
    if index is not None and bin_width == ensemble.bin_width:
        times, counts = ensemble.step_times, ensemble.occupancy[:, index]
    else:
        logger.debug("Detector X=%g with bin %g was not tracked online; counting stored positions", X, bin_width)
        inside = (ensemble.positions >= X) & (ensemble.positions < X + bin_width)
        times, counts = ensemble.times, np.count_nonzero(inside, axis=1).astype(float)

    window = _window(ensemble, window)
    selected = (times >= window[0]) & (times <= window[1])
    if not counts[selected].any():
        print_message(f"No path ever occupies [{X}, {X + bin_width}) inside the window {window}", "error", DistributionError)

    counting = CountingResult(X=X, bin_width=bin_width, times=times, rho_N=counts / (ensemble.n_paths * bin_width))
    dist = normalized_distribution(X, times, counting.rho_N, window, DistributionKind.OCCUPATION)
    return counting, dist, mean_arrival_time(dist)


def _crossings_from_records(ensemble: PathEnsemble, X: float) -> np.ndarray:
    positions, times = ensemble.positions, ensemble.times
    side = positions >= X
    changed = side != side[0]
    first = np.where(changed.any(axis=0), np.argmax(changed, axis=0), -1)

    result = np.full(ensemble.n_paths, np.nan)
    for path in np.nonzero(first > 0)[0]:
        i = first[path]
        x0, x1 = positions[i - 1, path], positions[i, path]
        fraction = (X - x0) / (x1 - x0) if x1 != x0 else 1.0
        result[path] = times[i - 1] + (times[i] - times[i - 1]) * np.clip(fraction, 0.0, 1.0)
    return result


def first_passage_times(ensemble: PathEnsemble, X: float) -> np.ndarray:
    """First crossing time of X per path, NaN for paths that never cross."""
    if (index := ensemble.detector_index(X)) is not None:
        return np.array(ensemble.first_crossings[:, index])
    logger.debug("Detector X=%g was not tracked online; crossings resolved from stored positions only", X)
    return _crossings_from_records(ensemble, X)


def first_passage_counting(ensemble: PathEnsemble, X: float,
                           window: Optional[tuple[float, float]] = None,
                           time_bin: float = FIRST_PASSAGE_TIME_BIN) -> CountingResult:
    """First crossings of the point X per path and unit time, histogrammed in `time_bin` bins."""
    window = _window(ensemble, window)
    crossings = first_passage_times(ensemble, X)
    crossings = crossings[np.isfinite(crossings) & (crossings >= window[0]) & (crossings <= window[1])]
    if crossings.size == 0:
        print_message(f"No path crosses X={X} inside the window {window}", "error", DistributionError)

    n_bins = max(1, int(np.ceil((window[1] - window[0]) / time_bin)))
    counts, edges = np.histogram(crossings, bins=n_bins, range=window)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return CountingResult(
        X=X, bin_width=0.0,
        times=np.concatenate(([window[0]], centers, [window[1]])),
        rho_N=np.concatenate(([0.0], counts / (ensemble.n_paths * time_bin), [0.0])),
        scheme=CountingScheme.FIRST_PASSAGE,
    )


def first_passage_distribution(ensemble: PathEnsemble, X: float,
                               window: Optional[tuple[float, float]] = None,
                               time_bin: float = FIRST_PASSAGE_TIME_BIN) -> ArrivalDistribution:
    window = _window(ensemble, window)
    counting = first_passage_counting(ensemble, X, window, time_bin)
    return normalized_distribution(X, counting.times, counting.rho_N, window, DistributionKind.FIRST_PASSAGE)


def entrance_statistics(ensemble: PathEnsemble, free_ensemble: PathEnsemble) -> EntranceStatistics:
    entrance = ensemble.barrier.left_edge
    transmitted = ensemble.transmitted_flags
    if not transmitted.any():
        print_message(
            f"No transmitted paths for h={ensemble.barrier.height}, d={ensemble.barrier.width}",
            "error", EnsembleError
        )

    entered = first_passage_times(ensemble, entrance)[transmitted]
    entered = entered[np.isfinite(entered)]
    free = first_passage_times(free_ensemble, entrance)
    free = free[np.isfinite(free)]
    if entered.size == 0 or free.size == 0:
        print_message(f"No recorded crossings of the barrier entrance x={entrance}", "error", EnsembleError)

    return EntranceStatistics(
        mean_entrance_time=float(entered.mean()),
        max_entrance_time=float(entered.max()),
        n_transmitted=int(np.count_nonzero(transmitted)),
        free_mean_crossing=float(free.mean()),
    )


# DIAGNOSTICS ------------------------------------------------------------------------------------------------------ #

def mean_path(ensemble: PathEnsemble, subset: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    positions = ensemble.positions if subset is None else ensemble.positions[:, subset]
    if positions.shape[1] == 0:
        print_message("Cannot average an empty set of paths", "error", EnsembleError)
    return np.array(ensemble.times), positions.mean(axis=1)


def position_histogram(ensemble: PathEnsemble, t: float, edges: np.ndarray) -> np.ndarray:
    """Probability mass of the ensemble per bin, at the stored record nearest to t."""
    counts, _ = np.histogram(ensemble.positions[ensemble.record_index(t)], bins=edges)
    return counts / ensemble.n_paths


def density_l1(ensemble: PathEnsemble, field: WaveField, bin_width: float = 1.0) -> float:
    """Sum over bins of |ensemble mass - grid mass| at the time of `field`."""
    grid = field.grid
    n_bins = max(1, int(round((grid.x_max - grid.x_min) / bin_width)))
    edges = np.linspace(grid.x_min, grid.x_max, n_bins + 1)

    cumulative = cumulative_trapezoid(field.density, grid.x, initial=0.0)
    grid_mass = np.diff(np.interp(edges, grid.x, cumulative)) / cumulative[-1]
    return float(np.abs(position_histogram(ensemble, field.t, edges) - grid_mass).sum())


def drift_history(ensemble: PathEnsemble, t_range: Optional[tuple[float, float]] = None) -> tuple[DriftField, ...]:
    if t_range is None:
        return ensemble.drifts
    return tuple(d for d in ensemble.drifts if t_range[0] <= d.t <= t_range[1])
