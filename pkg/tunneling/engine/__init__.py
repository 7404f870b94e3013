from tunneling.engine.propagator import CrankNicolsonPropagator, EvolutionResult, ProbeRecord, evolve, free_gaussian_reference, probability_current, step
from tunneling.engine.arrival import ArrivalDistribution, DistributionKind, LineFit, arrival_distribution, crossover_point, current_arrival_distribution, delta_T, distribution_peak, fit_arrival_line, l1_distance, mean_arrival_time
from tunneling.engine.scattering import TransmissionResult, TransmissionTable, TransmittedStats, phase_time, stationary_phase_delta, transmission, transmission_probability, transmission_table, transmitted_momentum, transmitted_packet, transmitted_stats
from tunneling.engine.nelson import CountingResult, CountingScheme, DriftField, EntranceStatistics, PathEnsemble, density_l1, drift_field, drift_history, entrance_statistics, first_passage_counting, first_passage_distribution, first_passage_times, mean_path, occupation_distribution, path_drift, position_histogram, sde_step, simulate_ensemble
