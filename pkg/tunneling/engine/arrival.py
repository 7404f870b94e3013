##############################################
# When does the packet arrive at a detector? #
##############################################

# - A distribution is the density (or current) recorded at X over a finite time window
# | Normalized with the trapezoidal rule on the recorded samples

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import trapezoid

from tunneling.engine.propagator import ProbeRecord
from tunneling.utils import DistributionError, ExtendedEnum, ProbeError, print_message

logger = logging.getLogger(__name__)

NEGATIVE_CURRENT_TOLERANCE = 1e-6
ZERO_TOTAL_TOLERANCE = 1e-12
PROBE_MATCH_TOLERANCE = 1e-9


class DistributionKind(ExtendedEnum):
    DENSITY         = "density"
    CURRENT         = "current"
    OCCUPATION      = "occupation"
    FIRST_PASSAGE   = "first-passage"


@dataclass(frozen=True, eq=False)
class ArrivalDistribution:
    X: float
    times: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    window: tuple[float, float]
    kind: DistributionKind = DistributionKind.DENSITY
    non_probabilistic: bool = False

    def __post_init__(self):
        for name in ("times", "p"):
            values = np.array(getattr(self, name), dtype=float)
            values.flags.writeable = False
            object.__setattr__(self, name, values)
        if self.times.shape != self.p.shape or self.times.ndim != 1:
            print_message(f"Distribution at X={self.X} has mismatched time and value samples", "error", DistributionError)
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            print_message(f"Distribution at X={self.X} has non-increasing times", "error", DistributionError)

    @property
    def total(this) -> float:
        return float(trapezoid(this.p, this.times))


class LineFit(NamedTuple):
    slope: float
    intercept: float
    max_residual: float


def normalized_distribution(X: float, times: np.ndarray, values: np.ndarray,
                            window: Optional[tuple[float, float]] = None,
                            kind: DistributionKind = DistributionKind.DENSITY) -> ArrivalDistribution:
    """Restrict samples to the window and divide by their trapezoidal integral."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size == 0:
        print_message(f"No samples recorded at X={X}", "error", DistributionError)

    if window is None:
        window = (float(times[0]), float(times[-1]))
    lower, upper = window
    slack = 1e-9 * max(1.0, abs(upper))
    inside = (times >= lower - slack) & (times <= upper + slack)
    if np.count_nonzero(inside) < 2:
        print_message(f"Window [{lower}, {upper}] holds fewer than two samples at X={X}", "error", DistributionError)

    times, values = times[inside], values[inside]
    total = trapezoid(values, times)
    if not abs(total) > ZERO_TOTAL_TOLERANCE * trapezoid(np.abs(values), times):
        what = "current" if kind is DistributionKind.CURRENT else "density"
        print_message(f"Total {what} at X={X} over [{lower}, {upper}] vanishes; nothing to normalize", "error", DistributionError)

    # a negative total (left-moving flux) normalizes to a positive distribution
    p = values / total
    non_probabilistic = bool(p.min() < -NEGATIVE_CURRENT_TOLERANCE * np.abs(p).max())
    return ArrivalDistribution(
        X=X, times=times, p=p, window=(float(lower), float(upper)),
        kind=kind, non_probabilistic=non_probabilistic
    )


def arrival_distribution(record: ProbeRecord, window: Optional[tuple[float, float]] = None) -> ArrivalDistribution:
    return normalized_distribution(record.X, record.times, record.density, window, DistributionKind.DENSITY)


def current_arrival_distribution(record: ProbeRecord, window: Optional[tuple[float, float]] = None) -> ArrivalDistribution:
    dist = normalized_distribution(record.X, record.times, record.current, window, DistributionKind.CURRENT)
    if dist.non_probabilistic:
        print_message(f"Current at X={record.X} turns negative inside the window; P^c is not a probability", "warning")
    return dist


def mean_arrival_time(dist: ArrivalDistribution) -> float:
    return float(trapezoid(dist.times * dist.p, dist.times))


def distribution_peak(dist: ArrivalDistribution) -> float:
    """Discrete maximum (earliest on ties) refined by a parabola through its two neighbours."""
    i = int(np.argmax(dist.p))
    if i == 0 or i == dist.p.size - 1:
        print_message(
            f"Maximum of the distribution at X={dist.X} sits on the window edge T={dist.times[i]}",
            "error", DistributionError
        )

    y0, y1, y2 = dist.p[i - 1], dist.p[i], dist.p[i + 1]
    curvature = y0 - 2.0 * y1 + y2
    if curvature == 0.0:
        return float(dist.times[i])

    h = 0.5 * (dist.times[i + 1] - dist.times[i - 1])
    return float(dist.times[i] + 0.5 * h * (y0 - y2) / curvature)


def delta_T(tunnel_dist: ArrivalDistribution, free_dist: ArrivalDistribution) -> float:
    if abs(tunnel_dist.X - free_dist.X) > PROBE_MATCH_TOLERANCE:
        print_message(
            f"Cannot compare arrivals at different probes (X={tunnel_dist.X} vs X={free_dist.X})",
            "error", ProbeError
        )
    return mean_arrival_time(tunnel_dist) - mean_arrival_time(free_dist)


def l1_distance(a: ArrivalDistribution, b: ArrivalDistribution) -> float:
    """Integral of |a - b| on the samples of `a`, with `b` interpolated there when the samples differ."""
    if a.times.shape == b.times.shape and np.allclose(a.times, b.times):
        other = b.p
    else:
        other = np.interp(a.times, b.times, b.p, left=0.0, right=0.0)
    return float(trapezoid(np.abs(a.p - other), a.times))


def fit_arrival_line(X: np.ndarray, means: np.ndarray) -> LineFit:
    X = np.asarray(X, dtype=float)
    means = np.asarray(means, dtype=float)
    if X.size < 2:
        print_message("A line fit needs at least two probes", "error", DistributionError)

    slope, intercept = np.polyfit(X, means, 1)
    residual = np.abs(means - (slope * X + intercept)).max()
    return LineFit(slope=float(slope), intercept=float(intercept), max_residual=float(residual))


def crossover_point(X: np.ndarray, tunnel: np.ndarray, free: np.ndarray) -> Optional[float]:
    """First probe position where the tunneling arrival overtakes the free one, linearly interpolated."""
    X = np.asarray(X, dtype=float)
    diff = np.asarray(tunnel, dtype=float) - np.asarray(free, dtype=float)

    for i in range(diff.size - 1):
        if diff[i] == 0.0:
            return float(X[i])
        if np.sign(diff[i]) != np.sign(diff[i + 1]) and diff[i + 1] != 0.0:
            return float(X[i] - diff[i] * (X[i + 1] - X[i]) / (diff[i + 1] - diff[i]))
    if diff.size and diff[-1] == 0.0:
        return float(X[-1])

    logger.debug("No crossover between tunneling and free arrivals over X in [%g, %g]", X.min(), X.max())
    return None
