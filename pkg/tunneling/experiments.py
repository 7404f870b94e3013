##################################################
# Run an experiment and write its tables to disk #
##################################################

# - One runner per command: evolve, analyse, write under the configured output directory
# | Independent solver runs go to a thread pool; results keep the submission order

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, TypeVar

import numpy as np
from scipy.integrate import trapezoid

from tunneling.domain.config import ExperimentConfig, MomentumWeighting, NelsonConfig
from tunneling.domain.model import BarrierSpec, Grid, gaussian_packet
from tunneling.engine.arrival import (
    arrival_distribution, crossover_point, current_arrival_distribution, delta_T, distribution_peak,
    fit_arrival_line, l1_distance, mean_arrival_time, normalized_distribution,
)
from tunneling.engine.nelson import (
    density_l1, drift_history, entrance_statistics, first_passage_counting, first_passage_distribution, mean_path,
    occupation_distribution, position_histogram, simulate_ensemble,
)
from tunneling.engine.propagator import EvolutionResult, evolve
from tunneling.engine.scattering import (
    transmission_probability, transmission_table, transmitted_momentum, transmitted_stats,
)
from tunneling.storage.load import Loader, OutputKind

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

DRIFT_DUMP_MARGIN = 30.0


@dataclass
class RunSummary:
    title: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


# HELPER FUNCTIONS ----------------------------------------------------------------------------------------------- #

def _parallel(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _free_barrier(config: ExperimentConfig) -> BarrierSpec:
    return BarrierSpec(height=0.0, width=0.0, left_edge=config.barrier_left_edge)


def _evolve(config: ExperimentConfig, barrier: BarrierSpec, grid: Grid,
            probes: Iterable[float], snapshot_times: tuple[float, ...] = ()) -> EvolutionResult:
    evolution = replace(config.evolution, probes=tuple(probes), snapshot_times=snapshot_times)
    return evolve(gaussian_packet(config.packet, grid), barrier, evolution)


def _window(config: ExperimentConfig) -> tuple[float, float]:
    return (0.0, config.evolution.t_max)


def _run_name(kind: str, ratio: float, width: float) -> str:
    return f"{kind}-h{ratio:g}-d{width:g}"


def _sign_changes(values: np.ndarray) -> int:
    signs = np.sign(values[values != 0.0])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _start(config: ExperimentConfig) -> tuple[Path, str]:
    out_dir = Path(config.output_dir)
    Loader.load_config_to_fs(out_dir, config)
    return out_dir, config.config_hash()


# SNAPSHOTS ------------------------------------------------------------------------------------------------------ #

def run_snapshots(config: ExperimentConfig, threads: int = 1) -> RunSummary:
    out_dir, config_hash = _start(config)
    summary = RunSummary("Snapshots", ["run", "h", "d", "t", "norm", "transmitted norm"])
    runs = {"free": _free_barrier(config), "barrier": config.barrier}
    grid = config.grid.aligned_to(config.barrier.right_edge)

    results = _parallel(
        lambda barrier: _evolve(config, barrier, grid, config.evolution.probes, config.evolution.snapshot_times),
        runs.values(), threads
    )
    for (run, barrier), result in zip(runs.items(), results):
        for t, snapshot in result.snapshots.items():
            name = f"{run}-t{t:g}"
            summary.files.append(Loader.load_snapshot_to_fs(out_dir, snapshot, name, config_hash))
            summary.files.append(Loader.load_amplitudes_to_fs(out_dir, snapshot, name, config_hash))
            summary.rows.append([run, barrier.height, barrier.width, t, snapshot.norm(),
                                 snapshot.norm_between(barrier.right_edge)])
    return summary


# ANALYSIS 1: DETECTION AT ONE POINT ----------------------------------------------------------------------------- #

def run_analysis1(config: ExperimentConfig, threads: int = 1) -> RunSummary:
    out_dir, config_hash = _start(config)
    analysis = config.analysis
    X, window = analysis.probe, _window(config)
    runs = {
        "free": _free_barrier(config),
        "tunnel": config.barrier_for(analysis.tunnel_height_ratio, analysis.tunnel_width),
    }
    grid = config.grid.aligned_to(X)

    summary = RunSummary("Analysis 1", ["run", "h", "d", "X", "<T>", "peak", "<T> (current)", "transmitted"])
    results = _parallel(lambda barrier: _evolve(config, barrier, grid, (X,)), runs.values(), threads)
    for (run, barrier), result in zip(runs.items(), results):
        dist = arrival_distribution(result.records[X], window)
        current = current_arrival_distribution(result.records[X], window)
        summary.files.append(Loader.load_columns_to_fs(
            out_dir, OutputKind.DISTRIBUTIONS, f"analysis1-{run}",
            {"T": dist.times, "P": dist.p, "P_current": current.p}, config_hash
        ))
        summary.rows.append([run, barrier.height, barrier.width, X, mean_arrival_time(dist),
                             distribution_peak(dist), mean_arrival_time(current), result.final.norm_between(barrier.right_edge)])

    summary.files.append(Loader.load_table_to_fs(
        out_dir, OutputKind.STATISTICS, "analysis1", ["h", "d", "X", "mean", "peak", "mean_current", "transmitted"],
        [row[1:] for row in summary.rows], config_hash
    ))
    return summary


# ANALYSIS 2: DETECTION AT VARIOUS POINTS ------------------------------------------------------------------------ #

def run_analysis2(config: ExperimentConfig, threads: int = 1) -> RunSummary:
    out_dir, config_hash = _start(config)
    analysis = config.analysis
    d, window = analysis.profile_width, _window(config)
    probes = tuple(sorted({config.barrier_left_edge + d, *analysis.profile_probes}))
    grid = config.grid.aligned_to(config.barrier_left_edge + d)

    barriers = [_free_barrier(config)] + [config.barrier_for(ratio, d) for ratio in analysis.height_ratios]
    results = _parallel(lambda barrier: _evolve(config, barrier, grid, probes), barriers, threads)
    means = [np.array([mean_arrival_time(arrival_distribution(r.records[X], window)) for X in probes]) for r in results]
    free_means = means[0]
    profile = [probes.index(X) for X in analysis.profile_probes]
    free_fit = fit_arrival_line(np.array(probes)[profile], free_means[profile])

    profile_rows, summary = [], RunSummary(
        "Analysis 2", ["h/<E>", "h", "d", "slope", "free slope", "max residual", "crossover X", "k_m"]
    )
    for ratio, barrier, tunnel_means in zip(analysis.height_ratios, barriers[1:], means[1:]):
        profile_rows += [[ratio, barrier.height, d, X, tm, fm, tm - fm] for X, tm, fm in zip(probes, tunnel_means, free_means)]
        fit = fit_arrival_line(np.array(probes)[profile], tunnel_means[profile])
        crossover = crossover_point(probes, tunnel_means, free_means)
        if crossover is None:
            logger.info("h=%g<E>: tunneling arrivals stay on one side of the free ones (gap %.4f at X=%g, %.4f at X=%g)",
                        ratio, tunnel_means[0] - free_means[0], probes[0], tunnel_means[-1] - free_means[-1], probes[-1])
        k_m = transmitted_momentum(config.packet, barrier, analysis.weighting)
        summary.rows.append([ratio, barrier.height, d, fit.slope, free_fit.slope, fit.max_residual,
                             np.nan if crossover is None else crossover, k_m])

    summary.files.append(Loader.load_table_to_fs(
        out_dir, OutputKind.PROFILES, "analysis2", ["h_ratio", "h", "d", "X", "mean", "free_mean", "difference"],
        profile_rows, config_hash
    ))
    summary.files.append(Loader.load_table_to_fs(
        out_dir, OutputKind.STATISTICS, "analysis2",
        ["h_ratio", "h", "d", "slope", "free_slope", "max_residual", "crossover", "k_m"], summary.rows, config_hash
    ))

    def momentum_row(point: tuple[float, float]) -> list[float]:
        ratio, width = point
        k_m = transmitted_momentum(config.packet, config.barrier_for(ratio, width), analysis.weighting)
        return [ratio, ratio * config.packet.mean_energy, width, k_m, 0.5 * k_m ** 2]

    points = [(ratio, width) for ratio in analysis.height_ratios for width in analysis.widths]
    summary.files.append(Loader.load_table_to_fs(
        out_dir, OutputKind.MOMENTA, "analysis2", ["h_ratio", "h", "d", "k_m", "omega_m"],
        _parallel(momentum_row, points, threads), config_hash
    ))
    return summary


# ANALYSIS 3: ARRIVAL DIFFERENCE AT THE BARRIER EXIT ------------------------------------------------------------- #

def run_analysis3(config: ExperimentConfig, threads: int = 1) -> RunSummary:
    out_dir, config_hash = _start(config)
    analysis, window = config.analysis, _window(config)

    def width_rows(width: float) -> list[list[float]]:
        X = config.barrier_left_edge + width
        grid = config.grid.aligned_to(X)
        free = arrival_distribution(_evolve(config, _free_barrier(config), grid, (X,)).records[X], window)

        rows = []
        for ratio in analysis.height_ratios:
            barrier = config.barrier_for(ratio, width)
            tunnel = arrival_distribution(_evolve(config, barrier, grid, (X,)).records[X], window)
            stats = transmitted_stats(config.packet, barrier, analysis.weighting)
            rows.append([ratio, barrier.height, width, X, mean_arrival_time(free), mean_arrival_time(tunnel),
                         delta_T(tunnel, free), stats.k_m, stats.tau_phi, stats.delta_T_phi])
        logger.info("Barrier exit X=%g done", X)
        return rows

    rows = sorted((row for block in _parallel(width_rows, analysis.widths, threads) for row in block),
                  key=lambda row: (row[0], row[2]))
    file = Loader.load_table_to_fs(
        out_dir, OutputKind.DELTAS, "analysis3",
        ["h_ratio", "h", "d", "X", "free_mean", "tunnel_mean", "delta_T", "k_m", "tau_phi", "delta_T_phi"],
        rows, config_hash
    )

    summary = RunSummary("Analysis 3", ["h/<E>", "widths", "min dT", "max dT", "sign changes", "max |dT_phi - dT| (d<=0.5)"], files=[file])
    table = np.array(rows, dtype=float)
    for ratio in analysis.height_ratios:
        block = table[table[:, 0] == ratio]
        small = block[block[:, 2] <= 0.5]
        gap = np.abs(small[:, 9] - small[:, 6]).max() if small.size else np.nan
        summary.rows.append([ratio, block.shape[0], block[:, 6].min(), block[:, 6].max(), _sign_changes(block[:, 6]), gap])
    return summary


# NELSON ENSEMBLES ----------------------------------------------------------------------------------------------- #

def _bin_averaged_distribution(result: EvolutionResult, bin_probes: np.ndarray, X: float, window: tuple[float, float]):
    densities = np.stack([result.records[p].density for p in bin_probes], axis=1)
    averaged = trapezoid(densities, bin_probes, axis=1) / (bin_probes[-1] - bin_probes[0])
    return normalized_distribution(X, result.records[X].times, averaged, window)


def run_nelson(config: ExperimentConfig, threads: int = 1, progress: bool = False) -> RunSummary:
    out_dir, config_hash = _start(config)
    nelson = config.nelson or NelsonConfig()
    X, window = nelson.probe, _window(config)

    runs = {"free": _free_barrier(config)}
    runs |= {_run_name("nelson", nelson.height_ratio, d): config.barrier_for(nelson.height_ratio, d) for d in nelson.widths}

    summary = RunSummary("Nelson", ["run", "h", "d", "<T> grid", "<T> grid (bin)", "<T>^N", "<T> first passage",
                                    "L1", "L1 (bin)", "transmitted N", "transmitted grid"])
    entrance_rows, histogram_rows = [], []
    grid = config.grid.aligned_to(X)
    n_bin = max(1, int(round(nelson.bin_width / grid.dx)))
    bin_probes = X + grid.dx * np.arange(n_bin + 1)

    evolution = replace(config.evolution, probes=tuple(bin_probes), snapshot_times=nelson.histogram_times)

    def simulate(barrier: BarrierSpec):
        return simulate_ensemble(
            config.packet, barrier, nelson.n_paths, nelson.seed, evolution, grid=grid, clamp=nelson.clamp,
            substeps=nelson.substeps, bin_width=nelson.bin_width, detectors=(X,), record_stride=nelson.record_stride,
            progress=progress and threads <= 1,
        )

    ensembles = _parallel(simulate, runs.values(), threads)
    for (run, barrier), ensemble in zip(runs.items(), ensembles):
        result = ensemble.wave
        grid_dist = arrival_distribution(result.records[X], window)
        bin_dist = _bin_averaged_distribution(result, bin_probes, X, window)
        counting, occupation, mean_N = occupation_distribution(ensemble, X, window=window)
        first = first_passage_distribution(ensemble, X, window)
        summary.rows.append([
            run, barrier.height, barrier.width, mean_arrival_time(grid_dist), mean_arrival_time(bin_dist), mean_N,
            mean_arrival_time(first), l1_distance(occupation, grid_dist), l1_distance(occupation, bin_dist),
            ensemble.transmitted_fraction, result.final.norm_between(barrier.right_edge),
        ])

        summary.files.append(Loader.load_columns_to_fs(
            out_dir, OutputKind.COUNTING, run,
            {"T": counting.times, "rho_N": counting.rho_N, "P_N": occupation.p, "P_grid": grid_dist.p, "P_grid_bin": bin_dist.p},
            config_hash
        ))
        first_counting = first_passage_counting(ensemble, X, window)
        summary.files.append(Loader.load_columns_to_fs(
            out_dir, OutputKind.COUNTING, f"{run}-first-passage",
            {"T": first_counting.times, "rate": first_counting.rho_N, "P": first.p}, config_hash
        ))

        times, mean = mean_path(ensemble)
        transmitted = ensemble.transmitted_flags
        columns = {"t": times, "mean": mean}
        if transmitted.any():
            columns["mean_transmitted"] = mean_path(ensemble, transmitted)[1]
        columns |= {f"path_{i}": ensemble.positions[:, i] for i in range(min(nelson.dump_paths, ensemble.n_paths))}
        summary.files.append(Loader.load_columns_to_fs(out_dir, OutputKind.PATHS, run, columns, config_hash))

        lower, upper = barrier.left_edge - DRIFT_DUMP_MARGIN, barrier.right_edge + DRIFT_DUMP_MARGIN
        inside = (grid.x >= lower) & (grid.x <= upper)
        summary.files.append(Loader.load_table_to_fs(
            out_dir, OutputKind.DRIFT, run, ["x", "t", "b"],
            ([x, drift.t, b] for drift in drift_history(ensemble) for x, b in zip(grid.x[inside], drift.b[inside])),
            config_hash
        ))

        n_bins = int(round((grid.x_max - grid.x_min) / nelson.histogram_bin))
        edges = np.linspace(grid.x_min, grid.x_max, n_bins + 1)
        for t, snapshot in result.snapshots.items():
            mass = position_histogram(ensemble, t, edges)
            centers = 0.5 * (edges[:-1] + edges[1:])
            grid_mass = np.interp(centers, grid.x, snapshot.density) * nelson.histogram_bin
            summary.files.append(Loader.load_columns_to_fs(
                out_dir, OutputKind.HISTOGRAMS, f"{run}-t{t:g}", {"x": centers, "ensemble": mass, "grid": grid_mass}, config_hash
            ))
            histogram_rows.append([barrier.height, barrier.width, t, density_l1(ensemble, snapshot, nelson.histogram_bin)])

    for ensemble in ensembles[1:]:
        if not ensemble.transmitted_flags.any():
            continue
        stats = entrance_statistics(ensemble, ensembles[0])
        entrance_rows.append([ensemble.barrier.height, ensemble.barrier.width, stats.mean_entrance_time,
                              stats.max_entrance_time, stats.n_transmitted, stats.free_mean_crossing])

    summary.files.append(Loader.load_table_to_fs(
        out_dir, OutputKind.STATISTICS, "nelson",
        ["h", "d", "mean_grid", "mean_grid_bin", "mean_N", "mean_first_passage", "l1", "l1_bin", "transmitted_N", "transmitted_grid"],
        [row[1:] for row in summary.rows], config_hash
    ))
    summary.files.append(Loader.load_table_to_fs(
        out_dir, OutputKind.STATISTICS, "nelson-entrance",
        ["h", "d", "mean_entrance", "max_entrance", "n_transmitted", "free_mean_crossing"], entrance_rows, config_hash
    ))
    summary.files.append(Loader.load_table_to_fs(
        out_dir, OutputKind.STATISTICS, "nelson-density", ["h", "d", "t", "l1"], histogram_rows, config_hash
    ))
    return summary


# ANALYTIC SWEEP ------------------------------------------------------------------------------------------------- #

def run_sweep(config: ExperimentConfig, threads: int = 1) -> RunSummary:
    out_dir, config_hash = _start(config)
    analysis, spec = config.analysis, config.packet
    summary = RunSummary("Sweep", ["weighting", "h/<E>", "widths", "k_m range", "dT_phi range"])

    def sweep_row(point: tuple[MomentumWeighting, float, float]) -> list[float]:
        weighting, ratio, width = point
        barrier = config.barrier_for(ratio, width)
        stats = transmitted_stats(spec, barrier, weighting)
        return [ratio, barrier.height, width, stats.k_m, stats.omega_m, stats.tau_phi, stats.delta_T_phi,
                transmission_probability(spec, barrier)]

    for weighting in MomentumWeighting:
        points = [(weighting, ratio, width) for ratio in analysis.height_ratios for width in analysis.widths]
        rows = _parallel(sweep_row, points, threads)
        summary.files.append(Loader.load_table_to_fs(
            out_dir, OutputKind.MOMENTA, f"sweep-{weighting}",
            ["h_ratio", "h", "d", "k_m", "omega_m", "tau_phi", "delta_T_phi", "transmission"], rows, config_hash
        ))

        table = np.array(rows, dtype=float)
        for ratio in analysis.height_ratios:
            block = table[table[:, 0] == ratio]
            summary.rows.append([str(weighting), ratio, block.shape[0],
                                 f"{block[:, 3].min():.4f} .. {block[:, 3].max():.4f}",
                                 f"{block[:, 6].min():.4f} .. {block[:, 6].max():.4f}"])

    k_start = max(spec.k0 - 8.0 / spec.sigma, 1e-3)
    k_stop = spec.k0 + 8.0 / spec.sigma
    for ratio in analysis.height_ratios:
        barrier = config.barrier_for(ratio, analysis.profile_width)
        table = transmission_table(barrier, k_start, k_stop)
        summary.files.append(Loader.load_columns_to_fs(
            out_dir, OutputKind.TRANSMISSION, _run_name("sweep", ratio, analysis.profile_width),
            {"k": table.k, "magnitude": table.magnitude, "phase": table.phase}, config_hash
        ))
    return summary


COMMANDS: dict[str, Callable[..., RunSummary]] = {
    "snapshots": run_snapshots,
    "analysis1": run_analysis1,
    "analysis2": run_analysis2,
    "analysis3": run_analysis3,
    "nelson": run_nelson,
    "sweep": run_sweep,
}
