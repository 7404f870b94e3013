#######################################################
# How much of each plane wave gets through, and when? #
#######################################################

# - The transmitted wave is T_k e^{ikx} beyond the barrier, T_k = e^{-ikd} / D(k)
# | D = C + i (q^2 - k^2) / (2k) S with q^2 = 2h - k^2
# - Below the top C = cosh(kappa d), S = sinh(kappa d)/kappa; above it cos and sin of k'd
# | Below the top everything is scaled by cosh(kappa d): opaque barriers neither overflow nor lose the phase

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import quad

from tunneling.domain.config import MomentumWeighting
from tunneling.domain.model import BarrierSpec, PacketSpec
from tunneling.utils import ScatteringError, print_message

logger = logging.getLogger(__name__)

LOG_WEIGHT_FLOOR = -700.0
MOMENTUM_SPAN = 12.0
PACKET_SPAN = 8.0
TAIL_TOLERANCE = 1e-8
PHASE_STEP = 1e-4
QUAD_LIMIT = 400


@dataclass(frozen=True)
class TransmissionResult:
    k: float | np.ndarray
    magnitude: float | np.ndarray
    phase: float | np.ndarray
    reflection_magnitude: float | np.ndarray

    @property
    def amplitude(this) -> complex | np.ndarray:
        return this.magnitude * np.exp(1j * this.phase)

    @property
    def probability(this) -> float | np.ndarray:
        return this.magnitude ** 2


@dataclass(frozen=True)
class TransmittedStats:
    k_m: float
    omega_m: float
    tau_phi: float
    delta_T_phi: float
    weighting: MomentumWeighting = MomentumWeighting.SQUARED


class TransmissionTable(NamedTuple):
    k: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray


def _tan_ratio(r: np.ndarray) -> np.ndarray:
    small = np.abs(r) < 1e-8
    safe = np.where(small, 1.0, r)
    return np.where(small, 1.0 + r ** 2 / 3.0, np.tan(safe) / safe)


def _tanh_ratio(z: np.ndarray) -> np.ndarray:
    small = z < 1e-4
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z ** 2 / 3.0, np.tanh(safe) / safe)


def _scattering(k: np.ndarray, barrier: BarrierSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """log|T_k|, continuous arg T_k and |R_k| on an array of positive wavenumbers."""
    if barrier.is_free:
        return np.zeros_like(k), np.zeros_like(k), np.zeros_like(k)

    h, d = barrier.height, barrier.width
    q2 = 2.0 * h - k ** 2
    alpha = (q2 - k ** 2) / (2.0 * k)
    tunneling = q2 > 0.0

    # below the top: D / cosh(kappa d) = 1 + i alpha tanh(kappa d) / kappa
    kappa = np.sqrt(np.where(tunneling, q2, 0.0))
    z = kappa * d
    s_scaled = d * _tanh_ratio(z)
    log_cosh = z + np.log1p(np.exp(-2.0 * z)) - np.log(2.0)
    log_mag_below = -log_cosh - 0.5 * np.log1p((alpha * s_scaled) ** 2)
    arg_below = np.arctan(alpha * s_scaled)
    refl_below = np.abs(h * s_scaled / k) / np.hypot(1.0, alpha * s_scaled)

    # above the top (threshold included): phi = k'd = n pi + r with |r| <= pi/2
    k_prime = np.sqrt(np.where(tunneling, 0.0, -q2))
    phi = k_prime * d
    n = np.rint(phi / np.pi)
    r = phi - n * np.pi
    s = d * np.sinc(phi / np.pi)
    d_abs = np.hypot(np.cos(phi), alpha * s)
    tan_over = np.where(n == 0, d * _tan_ratio(r), np.tan(r) / np.where(k_prime > 0.0, k_prime, 1.0))
    log_mag_above = -np.log(d_abs)
    arg_above = -n * np.pi + np.arctan(alpha * tan_over)
    refl_above = np.abs(h * s / k) / d_abs

    log_mag = np.where(tunneling, log_mag_below, log_mag_above)
    phase = -k * d - np.where(tunneling, arg_below, arg_above)
    reflection = np.where(tunneling, refl_below, refl_above)
    return log_mag, phase, reflection


def _positive_wavenumbers(k: float | np.ndarray) -> np.ndarray:
    values = np.asarray(k, dtype=float)
    if np.any(~(values > 0.0)):
        print_message(f"Transmission needs positive wavenumbers (got k={k})", "error", ScatteringError)
    return values


def transmission(k: float | np.ndarray, barrier: BarrierSpec) -> TransmissionResult:
    values = _positive_wavenumbers(k)
    log_mag, phase, reflection = _scattering(np.atleast_1d(values), barrier)
    if values.ndim == 0:
        return TransmissionResult(
            k=float(values), magnitude=float(np.exp(log_mag[0])),
            phase=float(phase[0]), reflection_magnitude=float(reflection[0])
        )
    return TransmissionResult(k=values, magnitude=np.exp(log_mag), phase=phase, reflection_magnitude=reflection)


def transmission_table(barrier: BarrierSpec, k_start: float, k_stop: float, dk: float = 1e-3) -> TransmissionTable:
    """Mesh of (k, |T_k|, theta), the phase unwrapped by accumulating jumps larger than pi."""
    if not 0.0 < k_start < k_stop or not dk > 0:
        print_message(f"Invalid wavenumber mesh [{k_start}, {k_stop}] with dk={dk}", "error", ScatteringError)

    k = np.arange(k_start, k_stop + 0.5 * dk, dk)
    result = transmission(k, barrier)
    raw = np.angle(result.amplitude)
    unwrapped = np.unwrap(raw)
    unwrapped += 2.0 * np.pi * np.rint((result.phase[0] - unwrapped[0]) / (2.0 * np.pi))

    if (gap := np.abs(unwrapped - result.phase).max()) > 1e-6:
        logger.warning("Mesh-unwrapped phase departs from the closed-form branch by %.3e (dk=%g too coarse)", gap, dk)
    return TransmissionTable(k=k, magnitude=result.magnitude, phase=unwrapped)


# MOMENTUM STATISTICS ---------------------------------------------------------------------------------------------- #

def _momentum_range(spec: PacketSpec, barrier: BarrierSpec) -> tuple[float, float]:
    span = MOMENTUM_SPAN / spec.sigma
    top = np.sqrt(2.0 * barrier.height)
    lower = max(spec.k0 - span, 1e-3 * span)
    upper = max(spec.k0, top) + span
    return lower, upper


def _log_weight(k: np.ndarray, spec: PacketSpec, barrier: BarrierSpec, weighting: MomentumWeighting) -> np.ndarray:
    log_mag, _, _ = _scattering(k, barrier)
    log_amplitude = -0.5 * spec.sigma ** 2 * (k - spec.k0) ** 2 + log_mag
    return 2.0 * log_amplitude if weighting is MomentumWeighting.SQUARED else log_amplitude


def _breakpoints(spec: PacketSpec, barrier: BarrierSpec, lower: float, upper: float, *extra: float) -> list[float] | None:
    points = [spec.k0, np.sqrt(2.0 * barrier.height), *extra]
    return sorted({float(p) for p in points if lower < p < upper}) or None


def transmitted_momentum(spec: PacketSpec, barrier: BarrierSpec,
                         weighting: MomentumWeighting = MomentumWeighting.SQUARED) -> float:
    lower, upper = _momentum_range(spec, barrier)
    mesh = np.linspace(lower, upper, 4001)
    log_w = _log_weight(mesh, spec, barrier, weighting)
    peak = float(log_w.max())
    if peak < LOG_WEIGHT_FLOOR:
        print_message(
            f"Vanishing transmitted weight for h={barrier.height}, d={barrier.width} (log-weight peak {peak:.1f})",
            "error", ScatteringError
        )

    def weight(k: float) -> float:
        return float(np.exp(_log_weight(np.array([k]), spec, barrier, weighting)[0] - peak))

    points = _breakpoints(spec, barrier, lower, upper, float(mesh[np.argmax(log_w)]))
    norm, _ = quad(weight, lower, upper, points=points, epsrel=1e-10, limit=QUAD_LIMIT)
    first, _ = quad(lambda k: k * weight(k), lower, upper, points=points, epsrel=1e-10, limit=QUAD_LIMIT)
    return first / norm


def transmission_probability(spec: PacketSpec, barrier: BarrierSpec) -> float:
    """Analytic transmitted norm: sigma/sqrt(pi) times the integral of e^{-sigma^2 (k-k0)^2} |T_k|^2."""
    span = MOMENTUM_SPAN / spec.sigma
    lower, upper = max(spec.k0 - span, 1e-3 * span), spec.k0 + span

    def integrand(k: float) -> float:
        log_mag, _, _ = _scattering(np.array([k]), barrier)
        return float(np.exp(-spec.sigma ** 2 * (k - spec.k0) ** 2 + 2.0 * log_mag[0]))

    value, _ = quad(integrand, lower, upper, points=_breakpoints(spec, barrier, lower, upper),
                    epsabs=1e-14, epsrel=1e-10, limit=QUAD_LIMIT)
    return spec.sigma / np.sqrt(np.pi) * value


def phase_time(spec: PacketSpec, barrier: BarrierSpec,
               weighting: MomentumWeighting = MomentumWeighting.SQUARED,
               dk: float = PHASE_STEP) -> float:
    """d theta / d omega at omega_m = k_m^2 / 2, i.e. (d theta / dk) / k_m by central difference."""
    if barrier.is_free:
        return 0.0

    k_m = transmitted_momentum(spec, barrier, weighting)
    below, above = transmission(np.array([k_m - dk, k_m + dk]), barrier).phase
    if abs(above - below) > np.pi:
        print_message(
            f"Transmission phase jumps by {above - below:.3f} around k_m={k_m}: no continuous branch",
            "error", ScatteringError
        )
    return float((above - below) / (2.0 * dk) / k_m)


def transmitted_stats(spec: PacketSpec, barrier: BarrierSpec,
                      weighting: MomentumWeighting = MomentumWeighting.SQUARED) -> TransmittedStats:
    k_m = spec.k0 if barrier.is_free else transmitted_momentum(spec, barrier, weighting)
    tau_phi = phase_time(spec, barrier, weighting)
    delta = (1.0 / k_m - 1.0 / spec.k0) * (barrier.right_edge - spec.x0) + tau_phi
    return TransmittedStats(k_m=k_m, omega_m=0.5 * k_m ** 2, tau_phi=tau_phi, delta_T_phi=delta, weighting=weighting)


def stationary_phase_delta(spec: PacketSpec, barrier: BarrierSpec,
                           weighting: MomentumWeighting = MomentumWeighting.SQUARED) -> float:
    return transmitted_stats(spec, barrier, weighting).delta_T_phi


# TRANSMITTED PACKET ----------------------------------------------------------------------------------------------- #

def transmitted_packet(spec: PacketSpec, barrier: BarrierSpec, x: float, t: float) -> complex:
    """Fourier superposition of transmitted plane waves, valid beyond the barrier."""
    if not barrier.is_free and not x > barrier.right_edge:
        print_message(
            f"Transmitted packet is only defined beyond the barrier (x={x}, right edge {barrier.right_edge})",
            "error", ScatteringError
        )

    def amplitude(k: float) -> complex:
        log_mag, phase, _ = _scattering(np.array([k]), barrier)
        return np.exp(
            -0.5 * spec.sigma ** 2 * (k - spec.k0) ** 2 + log_mag[0]
            + 1j * (phase[0] + k * (x - spec.x0) - 0.5 * k ** 2 * t)
        )

    def integrate(lower: float, upper: float) -> complex:
        re, _ = quad(lambda k: amplitude(k).real, lower, upper, epsabs=1e-13, limit=QUAD_LIMIT)
        im, _ = quad(lambda k: amplitude(k).imag, lower, upper, epsabs=1e-13, limit=QUAD_LIMIT)
        return complex(re, im)

    span, slab = PACKET_SPAN / spec.sigma, 2.0 / spec.sigma
    floor = 1e-6 * slab
    lower, upper = max(spec.k0 - span, floor), spec.k0 + span
    total = integrate(lower, upper)

    for _ in range(32):
        tail = integrate(upper, upper + slab)
        upper += slab
        if lower > floor:
            tail += integrate(max(lower - slab, floor), lower)
            lower = max(lower - slab, floor)
        total += tail
        if abs(tail) < TAIL_TOLERANCE * max(abs(total), np.finfo(float).tiny):
            break
    else:
        logger.warning("Transmitted packet quadrature at x=%g, t=%g did not settle its tails", x, t)

    return complex((4.0 * np.pi * spec.sigma ** 2) ** 0.25 / (2.0 * np.pi) * total)
