import pytest

from tunneling.domain.config import AnalysisConfig, EvolutionConfig, ExperimentConfig, NelsonConfig
from tunneling.domain.model import BarrierSpec, Grid, PacketSpec, gaussian_packet


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-resolution reproduction runs (deselect with -m 'not slow')")


@pytest.fixture
def small_grid() -> Grid:
    return Grid(x_min=-40.0, x_max=40.0, n_points=801)


@pytest.fixture
def small_packet() -> PacketSpec:
    return PacketSpec(sigma=2.0, k0=2.0, x0=-20.0)


@pytest.fixture
def small_field(small_packet, small_grid):
    return gaussian_packet(small_packet, small_grid)


@pytest.fixture
def default_packet() -> PacketSpec:
    return PacketSpec()


@pytest.fixture
def free_barrier() -> BarrierSpec:
    return BarrierSpec()


@pytest.fixture
def small_config(tmp_path, small_packet, small_grid) -> ExperimentConfig:
    return ExperimentConfig(
        packet=small_packet,
        grid=small_grid,
        evolution=EvolutionConfig(dt=0.01, t_max=20.0, snapshot_times=(0.0, 5.0, 10.0, 15.0), probes=(10.0,)),
        barrier_height_ratio=1.1,
        barrier_width=1.5,
        analysis=AnalysisConfig(
            probe=10.0, tunnel_height_ratio=2.0, tunnel_width=1.0, profile_width=1.0,
            profile_probes=(4.0, 6.0, 8.0, 10.0), height_ratios=(0.5, 2.0), widths=(0.0, 0.5),
        ),
        nelson=NelsonConfig(
            n_paths=2000, seed=7, probe=10.0, height_ratio=0.5, widths=(0.5,),
            record_stride=100, dump_paths=5, histogram_times=(5.0, 10.0),
        ),
        output_dir=str(tmp_path / "results"),
    )
