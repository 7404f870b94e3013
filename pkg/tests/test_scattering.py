import numpy as np
import pytest
from scipy.integrate import solve_ivp

from tunneling.domain.config import EvolutionConfig, MomentumWeighting
from tunneling.domain.model import BarrierSpec, Grid, PacketSpec, gaussian_packet
from tunneling.engine.propagator import evolve, free_gaussian_reference
from tunneling.engine.scattering import (
    phase_time, transmission, transmission_probability, transmission_table, transmitted_momentum,
    transmitted_packet, transmitted_stats,
)
from tunneling.utils import ScatteringError


def incident_amplitude(k: float, barrier: BarrierSpec) -> complex:
    """Integrate the stationary equation leftwards from T e^{ikx} and read off the incident coefficient."""
    amplitude = transmission(k, barrier).amplitude
    h, a, b = barrier.height, barrier.left_edge, barrier.right_edge

    def rhs(x, y):
        return [y[1], 2.0 * (h - 0.5 * k ** 2) * y[0]]

    start = [amplitude * np.exp(1j * k * b), 1j * k * amplitude * np.exp(1j * k * b)]
    solution = solve_ivp(rhs, (b, a), np.array(start, dtype=complex), rtol=1e-11, atol=1e-13)
    psi, dpsi = solution.y[:, -1]
    return 0.5 * (psi + dpsi / (1j * k)) * np.exp(-1j * k * a)


def test_free_barrier_is_transparent():
    result = transmission(np.linspace(0.1, 5.0, 50), BarrierSpec(height=3.0, width=0.0))
    np.testing.assert_array_equal(result.magnitude, 1.0)
    np.testing.assert_array_equal(result.phase, 0.0)
    np.testing.assert_array_equal(result.reflection_magnitude, 0.0)


def test_threshold_transmission():
    result = transmission(2.0, BarrierSpec(height=2.0, width=1.0))
    assert result.probability == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("k", [0.7, 1.2, np.sqrt(2.0), 1.9, 3.5])
@pytest.mark.parametrize("barrier", [BarrierSpec(height=1.0, width=2.0), BarrierSpec(height=1.0, width=1.3, left_edge=-4.0)])
def test_amplitude_solves_the_stationary_equation(k, barrier):
    assert abs(incident_amplitude(k, barrier) - 1.0) < 1e-7


def test_flux_conservation():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        k, h, d = rng.uniform(0.05, 5.0), rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)
        result = transmission(k, BarrierSpec(height=h, width=d))
        assert result.probability + result.reflection_magnitude ** 2 == pytest.approx(1.0, abs=1e-12)


def test_continuity_across_the_barrier_top():
    barrier = BarrierSpec(height=2.0, width=1.7)
    below, at, above = transmission(np.array([2.0 - 1e-10, 2.0, 2.0 + 1e-10]), barrier).amplitude
    assert abs(below - at) < 1e-8
    assert abs(above - at) < 1e-8


def test_phase_is_continuous_over_many_resonances():
    barrier = BarrierSpec(height=1.0, width=25.0)
    table = transmission_table(barrier, 0.2, 6.0, dk=1e-4)
    assert np.abs(np.diff(table.phase)).max() < np.pi
    np.testing.assert_allclose(table.phase, transmission(table.k, barrier).phase, atol=1e-6)


def test_table_matches_closed_form():
    barrier = BarrierSpec(height=4.0, width=1.0)
    table = transmission_table(barrier, 0.5, 4.0)
    closed = transmission(table.k, barrier)
    np.testing.assert_allclose(table.magnitude, closed.magnitude, rtol=1e-14)
    assert table.k[0] == pytest.approx(0.5) and table.k[-1] == pytest.approx(4.0)


def test_opaque_barrier_does_not_overflow():
    result = transmission(1.0, BarrierSpec(height=50.0, width=200.0))
    assert np.isfinite(result.phase)
    assert 0.0 <= result.magnitude < 1e-300


def test_transmission_decreases_with_width():
    widths = np.linspace(0.1, 5.0, 30)
    magnitudes = [transmission(2.0, BarrierSpec(height=4.0, width=d)).magnitude for d in widths]
    assert np.all(np.diff(magnitudes) < 0.0)


@pytest.mark.parametrize("k", [0.0, -1.0, np.nan])
def test_non_positive_wavenumber(k):
    with pytest.raises(ScatteringError):
        transmission(k, BarrierSpec(height=1.0, width=1.0))


def test_free_momentum_is_the_packet_momentum(default_packet, free_barrier):
    assert transmitted_momentum(default_packet, free_barrier) == pytest.approx(default_packet.k0, abs=1e-8)
    stats = transmitted_stats(default_packet, free_barrier)
    assert stats.tau_phi == 0.0 and stats.delta_T_phi == 0.0


def test_tunneling_filters_towards_higher_momenta(default_packet):
    k_m = [
        transmitted_momentum(default_packet, BarrierSpec.relative_to(default_packet, 2.0, d))
        for d in np.arange(0.25, 4.01, 0.25)
    ]
    assert k_m[0] > default_packet.k0
    assert np.all(np.diff(k_m) > 0.0)


def test_weightings_agree_for_a_narrow_spectrum(default_packet):
    barrier = BarrierSpec.relative_to(default_packet, 2.0, 2.0)
    squared = transmitted_momentum(default_packet, barrier, MomentumWeighting.SQUARED)
    amplitude = transmitted_momentum(default_packet, barrier, MomentumWeighting.AMPLITUDE)
    assert squared > default_packet.k0 and amplitude > default_packet.k0
    assert amplitude == pytest.approx(squared, rel=1e-4)
    assert amplitude != squared


def test_vanishing_weight_is_reported():
    with pytest.raises(ScatteringError, match="Vanishing"):
        transmitted_momentum(PacketSpec(sigma=10.0, k0=0.5, x0=-50.0), BarrierSpec(height=1000.0, width=60.0))


def test_phase_time_of_free_barrier(default_packet, free_barrier):
    assert phase_time(default_packet, free_barrier) == 0.0


def test_phase_time_converges_with_step(default_packet):
    barrier = BarrierSpec.relative_to(default_packet, 2.0, 1.0)
    coarse = phase_time(default_packet, barrier, dk=1e-3)
    fine = phase_time(default_packet, barrier, dk=1e-5)
    assert coarse == pytest.approx(fine, rel=1e-5)


def test_phase_delay_saturates_with_width():
    k, h = 2.0, 4.005
    delays = []
    for d in (4.0, 6.0, 8.0, 10.0):
        below, above = transmission(np.array([k - 1e-5, k + 1e-5]), BarrierSpec(height=h, width=d)).phase
        delays.append((above - below) / 2e-5 + d)
    assert np.ptp(delays) < 1e-4


def test_packet_phase_time_stays_bounded_for_wide_barriers(default_packet):
    for d in (4.0, 6.0, 8.0, 10.0):
        barrier = BarrierSpec.relative_to(default_packet, 2.0, d)
        stats = transmitted_stats(default_packet, barrier)
        assert 0.0 < stats.tau_phi + d / stats.k_m < 1.0


def test_transmission_probability(default_packet, free_barrier):
    assert transmission_probability(default_packet, free_barrier) == pytest.approx(1.0, abs=1e-9)
    thin = transmission_probability(default_packet, BarrierSpec.relative_to(default_packet, 2.0, 0.5))
    thick = transmission_probability(default_packet, BarrierSpec.relative_to(default_packet, 2.0, 1.0))
    assert 0.0 < thick < thin < 1.0


@pytest.mark.parametrize("x, t", [(0.0, 0.0), (10.0, 25.0), (60.0, 50.0)])
def test_transmitted_packet_without_barrier_is_the_free_packet(default_packet, free_barrier, x, t):
    expected = free_gaussian_reference(default_packet, x, t)
    assert abs(transmitted_packet(default_packet, free_barrier, x, t) - expected) < 1e-7


def test_transmitted_packet_inside_the_barrier(default_packet):
    with pytest.raises(ScatteringError):
        transmitted_packet(default_packet, BarrierSpec(height=1.0, width=2.0), 1.0, 10.0)


@pytest.mark.slow
def test_transmitted_packet_matches_grid_evolution(default_packet):
    barrier = BarrierSpec.relative_to(default_packet, 2.0, 4.0)
    config = EvolutionConfig(snapshot_times=(), probes=(50.0,))
    record = evolve(gaussian_packet(default_packet, Grid()), barrier, config).records[50.0]

    peak = int(np.argmax(record.density))
    analytic = abs(transmitted_packet(default_packet, barrier, 50.0, float(record.times[peak]))) ** 2
    assert analytic == pytest.approx(record.density[peak], rel=0.02)
