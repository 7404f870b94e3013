from tunneling.domain.model import BarrierSpec, Grid, PacketSpec, PotentialSampling, WaveField, gaussian_packet, mean_energy, potential_at, sample_potential
from tunneling.domain.config import AnalysisConfig, Boundary, EvolutionConfig, ExperimentConfig, MomentumWeighting, NelsonConfig, Stencil
