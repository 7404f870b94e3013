import numpy as np
import pytest

from tunneling.domain.model import (
    BarrierSpec, Grid, PacketSpec, PotentialSampling, WaveField, gaussian_packet, mean_energy, potential_at,
    sample_potential,
)
from tunneling.utils import ConfigError, GridTooNarrowError, TunnelingError


def test_default_packet_is_normalized(default_packet):
    field = gaussian_packet(default_packet, Grid())
    assert field.norm() == pytest.approx(1.0, abs=1e-12)
    assert field.t == 0.0


def test_mean_energy_of_default_packet(default_packet):
    assert mean_energy(default_packet) == pytest.approx(2.0025, abs=1e-15)
    assert default_packet.mean_energy == mean_energy(default_packet)


def test_mean_energy_plane_wave_limit():
    assert mean_energy(PacketSpec(sigma=1e8, k0=2.0)) == pytest.approx(2.0, abs=1e-12)


def test_mean_energy_monotonicity():
    assert mean_energy(PacketSpec(sigma=10.0, k0=3.0)) > mean_energy(PacketSpec(sigma=10.0, k0=2.0))
    assert mean_energy(PacketSpec(sigma=20.0, k0=2.0)) < mean_energy(PacketSpec(sigma=10.0, k0=2.0))


def test_mean_energy_matches_fine_grid_expectation(default_packet):
    field = gaussian_packet(default_packet, Grid(x_min=-130.0, x_max=30.0, n_points=320_001))
    assert field.expectation_energy() == pytest.approx(mean_energy(default_packet), abs=1e-6)


def test_packet_at_rest_is_real_and_even():
    field = gaussian_packet(PacketSpec(sigma=10.0, k0=0.0, x0=0.0), Grid(x_min=-150.0, x_max=150.0, n_points=3001))
    assert np.all(field.amplitudes.imag == 0.0)
    np.testing.assert_allclose(field.amplitudes, field.amplitudes[::-1], rtol=0, atol=1e-14)


def test_narrow_grid_is_rejected(default_packet):
    with pytest.raises(GridTooNarrowError):
        gaussian_packet(default_packet, Grid(x_min=-100.0, x_max=100.0, n_points=2001))


@pytest.mark.parametrize("x, expected", [(2.0, 4.0), (-1.0, 0.0), (0.0, 4.0), (4.0, 4.0), (4.01, 0.0)])
def test_potential_at_closed_interval(x, expected):
    assert potential_at(BarrierSpec(height=4.0, width=4.0), x) == expected


def test_potential_vanishes_without_width_or_height():
    x = np.linspace(-5.0, 5.0, 101)
    assert not potential_at(BarrierSpec(height=4.0, width=0.0), x).any()
    assert not potential_at(BarrierSpec(height=0.0, width=4.0), x).any()
    assert potential_at(BarrierSpec(height=4.0, width=0.0), 0.0) == 0.0


def test_cell_average_keeps_barrier_area():
    grid = Grid(x_min=-10.0, x_max=10.0, n_points=201)
    barrier = BarrierSpec(height=3.0, width=0.25, left_edge=0.03)
    v = sample_potential(barrier, grid)
    assert v.sum() * grid.dx == pytest.approx(barrier.height * barrier.width, rel=1e-12)
    assert v.max() <= barrier.height


def test_pointwise_sampling_matches_potential_at():
    grid = Grid(x_min=-10.0, x_max=10.0, n_points=201)
    barrier = BarrierSpec(height=3.0, width=1.0)
    np.testing.assert_array_equal(
        sample_potential(barrier, grid, PotentialSampling.POINTWISE), potential_at(barrier, grid.x)
    )


def test_grid_alignment_puts_position_on_a_node():
    grid = Grid().aligned_to(0.25)
    assert grid.dx == pytest.approx(Grid().dx)
    assert grid.x[grid.nearest_index(0.25)] == pytest.approx(0.25, abs=1e-9)
    assert Grid().aligned_to(50.0).x_min == pytest.approx(-300.0, abs=1e-9)


def test_relative_barrier(default_packet):
    barrier = BarrierSpec.relative_to(default_packet, 2.0, 4.0)
    assert barrier.height == pytest.approx(4.005)
    assert barrier.right_edge == 4.0
    assert not barrier.is_free


@pytest.mark.parametrize("kwargs", [
    {"x_min": 0.0, "x_max": 1.0, "n_points": 2},
    {"x_min": 1.0, "x_max": 0.0, "n_points": 11},
])
def test_invalid_grids(kwargs):
    with pytest.raises(ConfigError):
        Grid(**kwargs)


def test_invalid_packet_and_barrier():
    with pytest.raises(ConfigError):
        PacketSpec(sigma=0.0)
    with pytest.raises(ConfigError):
        BarrierSpec(height=-1.0)
    with pytest.raises(TunnelingError):
        BarrierSpec(width=-1.0)


def test_wave_field_is_frozen(small_field):
    with pytest.raises(ValueError):
        small_field.amplitudes[0] = 1.0


def test_wave_field_validation(small_grid):
    with pytest.raises(ConfigError):
        WaveField(grid=small_grid, t=0.0, amplitudes=np.zeros(10))
    bad = np.zeros(small_grid.n_points, dtype=complex)
    bad[3] = np.nan
    with pytest.raises(ConfigError):
        WaveField(grid=small_grid, t=0.0, amplitudes=bad)
