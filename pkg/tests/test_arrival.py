import numpy as np
import pytest
from scipy.integrate import trapezoid

from tunneling.engine.arrival import (
    ArrivalDistribution, DistributionKind, arrival_distribution, crossover_point, current_arrival_distribution,
    delta_T, distribution_peak, fit_arrival_line, l1_distance, mean_arrival_time,
)
from tunneling.engine.propagator import ProbeRecord
from tunneling.utils import DistributionError, ProbeError

TIMES = np.linspace(0.0, 100.0, 10_001)


def record(density, current=None, X=50.0, times=TIMES) -> ProbeRecord:
    density = np.asarray(density, dtype=float)
    return ProbeRecord(X=X, times=times, density=density, current=density if current is None else current)


def bump(center: float, width: float, times=TIMES) -> np.ndarray:
    return np.exp(-((times - center) / width) ** 2)


def test_constant_density_gives_uniform_distribution():
    dist = arrival_distribution(record(np.full(TIMES.size, 0.3)), (0.0, 100.0))
    np.testing.assert_allclose(dist.p, 0.01, rtol=1e-12)
    assert mean_arrival_time(dist) == pytest.approx(50.0, abs=1e-9)
    assert dist.kind is DistributionKind.DENSITY


def test_distribution_is_normalized_and_scale_invariant():
    density = bump(40.0, 6.0) + 0.2 * bump(70.0, 10.0)
    dist = arrival_distribution(record(density))
    scaled = arrival_distribution(record(1e-7 * density))
    assert trapezoid(dist.p, dist.times) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(scaled.p, dist.p, rtol=1e-12)


def test_window_restricts_samples():
    dist = arrival_distribution(record(bump(40.0, 6.0)), (10.0, 60.0))
    assert dist.times[0] == pytest.approx(10.0)
    assert dist.times[-1] == pytest.approx(60.0)
    assert dist.window == (10.0, 60.0)
    assert dist.total == pytest.approx(1.0, abs=1e-9)


def test_zero_density_is_rejected():
    with pytest.raises(DistributionError):
        arrival_distribution(record(np.zeros(TIMES.size)))


def test_right_skewed_distribution_peaks_before_its_mean():
    t = TIMES
    density = np.where(t > 0, (t / 40.0) ** 6 * np.exp(-6.0 * t / 40.0 + 6.0), 0.0)
    dist = arrival_distribution(record(density))
    assert distribution_peak(dist) == pytest.approx(40.0, abs=1e-3)
    assert distribution_peak(dist) <= mean_arrival_time(dist)


def test_peak_of_symmetric_triangle():
    times = np.linspace(0.0, 2.0, 201)
    dist = arrival_distribution(record(1.0 - np.abs(times - 1.0), X=0.0, times=times))
    assert distribution_peak(dist) == pytest.approx(1.0, abs=1e-12)


def test_peak_refinement_between_samples():
    times = np.linspace(0.0, 10.0, 101)
    dist = arrival_distribution(record(1.0 - (times - 4.33) ** 2 / 50.0, X=0.0, times=times))
    assert distribution_peak(dist) == pytest.approx(4.33, abs=1e-9)


def test_peak_on_window_edge_is_reported():
    with pytest.raises(DistributionError, match="window edge"):
        distribution_peak(arrival_distribution(record(np.exp(-TIMES / 10.0))))


def test_current_distribution_of_plane_wave_matches_density():
    density = bump(50.0, 8.0)
    dist = arrival_distribution(record(density, current=2.0 * density))
    current = current_arrival_distribution(record(density, current=2.0 * density))
    np.testing.assert_allclose(current.p, dist.p, rtol=1e-12)
    assert not current.non_probabilistic
    assert current.kind is DistributionKind.CURRENT


def test_negative_current_is_flagged():
    density = bump(30.0, 5.0) + bump(60.0, 5.0)
    current = bump(30.0, 5.0) - 0.3 * bump(60.0, 5.0)
    dist = current_arrival_distribution(record(density, current=current))
    assert dist.non_probabilistic
    assert dist.total == pytest.approx(1.0, abs=1e-9)


def test_left_moving_current_is_normalized_by_its_signed_total():
    density = bump(30.0, 5.0)
    dist = current_arrival_distribution(record(density, current=-2.0 * density))
    np.testing.assert_allclose(dist.p, arrival_distribution(record(density)).p, rtol=1e-12)
    assert not dist.non_probabilistic
    assert mean_arrival_time(dist) == pytest.approx(30.0, abs=1e-6)


def test_vanishing_total_current_is_rejected():
    current = bump(40.0, 5.0) - bump(60.0, 5.0)
    with pytest.raises(DistributionError, match="vanishes"):
        current_arrival_distribution(record(bump(40.0, 5.0), current=current))


def test_delta_T():
    free = arrival_distribution(record(bump(50.0, 8.0), X=0.5))
    tunnel = arrival_distribution(record(bump(49.5, 8.0), X=0.5))
    assert delta_T(free, free) == 0.0
    assert delta_T(tunnel, free) == pytest.approx(-0.5, abs=1e-6)


def test_delta_T_requires_the_same_probe():
    with pytest.raises(ProbeError):
        delta_T(arrival_distribution(record(bump(50.0, 8.0), X=0.5)), arrival_distribution(record(bump(50.0, 8.0), X=1.0)))


def test_l1_distance():
    a = arrival_distribution(record(bump(20.0, 3.0)))
    b = arrival_distribution(record(bump(80.0, 3.0)))
    assert l1_distance(a, a) == 0.0
    assert l1_distance(a, b) == pytest.approx(2.0, abs=1e-6)


def test_l1_distance_interpolates_other_samples():
    a = arrival_distribution(record(bump(50.0, 8.0)))
    coarse_times = np.linspace(0.0, 100.0, 2001)
    b = arrival_distribution(record(bump(50.0, 8.0, coarse_times), times=coarse_times))
    assert l1_distance(a, b) < 1e-4


def test_line_fit_and_crossover():
    X = np.array([4.0, 10.0, 20.0, 30.0, 40.0, 50.0])
    free = 27.0 + 0.5 * X
    tunnel = 29.0 + 0.45 * X
    fit = fit_arrival_line(X, tunnel)
    assert fit.slope == pytest.approx(0.45)
    assert fit.intercept == pytest.approx(29.0)
    assert fit.max_residual < 1e-9
    assert crossover_point(X, tunnel, free) == pytest.approx(40.0)
    assert crossover_point(X, free + 1.0, free) is None


def test_distribution_rejects_unordered_times():
    with pytest.raises(DistributionError):
        ArrivalDistribution(X=0.0, times=[0.0, 2.0, 1.0], p=[0.0, 1.0, 0.0], window=(0.0, 2.0))
