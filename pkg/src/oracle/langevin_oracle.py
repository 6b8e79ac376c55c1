# src/oracle/langevin_oracle.py
# Classical time-domain integrator of the damped, driven SNAIL mode.
#
# Two frames are supported. "lab" integrates the mode amplitude with the
# truncated SNAIL nonlinearity sum_n g_n (a + a*)^n at the carrier
# frequency; the pump, signal and Stark drives are real forces there, and
# gain, period doubling, basin and Stark checks all run in it. "pump"
# integrates the effective envelope model in the frame rotating at half the
# pump frequency and only serves as a fast cross-check of that model.

import cmath
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import get_window

from circuit.mode_solver import nonlinear_coefficient, snail_phase_scale
from dynamics.pump_dynamics import classify_stability, effective_params, period_doubling_amplitudes
from errors import DegenerateKerr, InvalidSpec, OscillatorEscape
from models import CircuitSpec, Drive, EffectiveModel, ModeParams, OracleConfig, StabilityRegion
from utils.units import TWO_PI

logger = logging.getLogger("LangevinOracle")

MIN_STEPS_PER_PERIOD = 50
SETTLE_DECAY_TIMES = 20.0
MIN_BEAT_PERIODS = 50
ESCAPE_FACTOR = 10.0
PUMP_QUADRATURE = 2.0 / 3.0
HARMONIC_WINDOW_DECAY_TIMES = 20.0
STARK_WINDOW_DECAY_TIMES = 10.0
STARK_SETTLE_DECAY_TIMES = 60.0


def _force_coefficients(mode: ModeParams, circuit: Optional[CircuitSpec], truncation: int) -> List[float]:
    """[n*g_n for n = 3..truncation]"""
    coefficients = []
    for order in range(3, truncation + 1):
        if order <= 4:
            g_n = mode.g3 if order == 3 else mode.g4
        else:
            if circuit is None:
                raise InvalidSpec(f"truncation {truncation} needs the circuit for g{order}")
            try:
                g_n = nonlinear_coefficient(mode, circuit, order)
            except KeyError:
                raise InvalidSpec(f"mode was solved without c{order}; use solve_mode(..., higher=True)")
        coefficients.append(order * g_n)
    return coefficients


def lab_energy(a, mode: ModeParams, circuit: Optional[CircuitSpec] = None, truncation: int = 4):
    """omega_a |a|^2 + sum_n g_n x^n with x = a + a* (rad/s units)"""
    a = np.asarray(a)
    x = 2.0 * a.real
    energy = mode.omega_a * np.abs(a) ** 2
    for order, n_g in zip(range(3, truncation + 1), _force_coefficients(mode, circuit, truncation)):
        energy = energy + (n_g / order) * x ** order
    return energy


def characteristic_frequency(config: OracleConfig, mode: ModeParams,
                             model: Optional[EffectiveModel] = None) -> float:
    """Fastest rate (rad/s) the integrator has to resolve"""
    rates = [abs(d.frequency) for d in config.drives]
    if config.frame == "lab":
        rates.append(mode.omega_a)
    else:
        if model is None:
            raise InvalidSpec("pump-frame integration needs an EffectiveModel")
        r2 = abs(config.initial) ** 2
        rates.extend([abs(model.delta_b), abs(model.pump_coupling), model.kappa, abs(model.K) * r2])
        try:
            rates.extend(abs(model.K) * n for n, _ in period_doubling_amplitudes(model))
        except DegenerateKerr:
            pass
    return max(rates)


def default_escape_radius(config: OracleConfig, mode: ModeParams, circuit: Optional[CircuitSpec],
                          model: Optional[EffectiveModel]) -> float:
    """Smaller of ten times the high-amplitude state and |phi| = pi per SNAIL"""
    limits = []
    if circuit is not None:
        limits.append(math.pi / (2.0 * snail_phase_scale(mode, circuit)))
    if config.frame == "pump" and model is not None:
        try:
            states = period_doubling_amplitudes(model)
        except DegenerateKerr:
            states = []
        scale = max([n for n, _ in states] + [model.kappa / abs(model.K) if model.K else 0.0])
        if scale > 0:
            limits.append(ESCAPE_FACTOR * math.sqrt(scale))
    return min(limits) if limits else math.inf


def _validate(config: OracleConfig, kappa: float, f_max: float):
    if config.step > 1.0 / (MIN_STEPS_PER_PERIOD * f_max / TWO_PI) * (1 + 1e-9):
        raise InvalidSpec(
            f"step {config.step:.3e} s exceeds 1/(50 f_max) with f_max={f_max / TWO_PI:.4e} Hz")
    if kappa > 0 and config.total_time < SETTLE_DECAY_TIMES / kappa * (1 - 1e-9):
        raise InvalidSpec(f"total time {config.total_time:.3e} s shorter than 20/kappa")
    beat = config.slowest_beat()
    if beat and config.total_time < MIN_BEAT_PERIODS * TWO_PI / beat * (1 - 1e-9):
        raise InvalidSpec(f"total time shorter than {MIN_BEAT_PERIODS} periods of the slowest beat")


def _drive_samples(config: OracleConfig, n_steps: int, real_force: bool) -> Optional[list]:
    """Drive evaluated on the half-step grid, as Python scalars"""
    if not config.drives:
        return None
    t = np.arange(2 * n_steps + 1) * (0.5 * config.step)
    total = np.zeros_like(t, dtype=complex)
    for drive in config.drives:
        total += drive.amplitude * np.exp(-1j * (drive.frequency * t + drive.phase))
    return total.real.tolist() if real_force else total.tolist()


def _make_rhs(config: OracleConfig, mode: ModeParams, kappa: float,
              circuit: Optional[CircuitSpec], model: Optional[EffectiveModel]):
    half_kappa = 0.5 * kappa
    if config.frame == "lab":
        omega_a = mode.omega_a
        coefficients = _force_coefficients(mode, circuit, config.truncation)[::-1]

        def rhs(a, f):
            x = 2.0 * a.real
            force = 0.0
            for c in coefficients:
                force = force * x + c
            force *= x * x
            return -1j * (omega_a * a + force + f) - half_kappa * a
        return rhs

    if model is None:
        raise InvalidSpec("pump-frame integration needs an EffectiveModel")
    rotation = 1j * model.delta_b - half_kappa
    coupling = -1j * model.pump_coupling
    kerr = -1j * model.K

    def rhs(b, u):
        return rotation * b + coupling * b.conjugate() + kerr * (b.real * b.real + b.imag * b.imag) * b - 1j * u
    return rhs


def integrate(config: OracleConfig, mode: ModeParams, kappa: float,
              circuit: Optional[CircuitSpec] = None,
              model: Optional[EffectiveModel] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 trajectory; returns (times, complex amplitudes)"""
    f_max = characteristic_frequency(config, mode, model)
    _validate(config, kappa, f_max)
    radius = config.escape_radius or default_escape_radius(config, mode, circuit, model)
    rhs = _make_rhs(config, mode, kappa, circuit, model)
    n_steps = config.n_steps
    drive = _drive_samples(config, n_steps, real_force=config.frame == "lab")
    dt = config.step
    half = 0.5 * dt
    sixth = dt / 6.0

    y = complex(config.initial)
    out = [y]
    zero = 0.0 if config.frame == "lab" else 0j
    for k in range(n_steps):
        if drive is None:
            d0 = d1 = d2 = zero
        else:
            d0, d1, d2 = drive[2 * k], drive[2 * k + 1], drive[2 * k + 2]
        k1 = rhs(y, d0)
        k2 = rhs(y + half * k1, d1)
        k3 = rhs(y + half * k2, d1)
        k4 = rhs(y + dt * k3, d2)
        y = y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if abs(y) > radius or y != y:
            raise OscillatorEscape(f"|amplitude| left radius {radius:.4g} at t={(k + 1) * dt:.4e} s")
        out.append(y)
    times = np.arange(n_steps + 1) * dt
    return times, np.asarray(out, dtype=complex)


def extract_tone(series: Sequence[complex], times: Sequence[float], frequency: float,
                 window: Optional[float] = None, kind: str = "boxcar") -> complex:
    """Complex amplitude of the e^{-i omega t} component over the final window"""
    series = np.asarray(series, dtype=complex)
    times = np.asarray(times, dtype=float)
    if window is not None and window > 0:
        dt = times[1] - times[0]
        count = min(len(series), int(round(window / dt)))
        series, times = series[-count:], times[-count:]
    weights = get_window(kind, len(series), fftbins=True)
    return complex(np.sum(weights * series * np.exp(1j * frequency * times)) / np.sum(weights))


def _max_step(omega_max: float) -> float:
    return TWO_PI / (MIN_STEPS_PER_PERIOD * omega_max)


def _amplitude_scale(mode: ModeParams) -> float:
    """sqrt(kappa/|K|), the photon amplitude at which Kerr shifts reach a linewidth"""
    kerr = abs(12.0 * mode.g4_star)
    return math.sqrt(mode.kappa / kerr) if kerr else 1.0


def pump_frequency(mode: ModeParams, delta: float) -> float:
    return 2.0 * (mode.omega_a + delta)


def linear_response(mode: ModeParams, omega: float) -> Tuple[complex, complex]:
    """(A+, A-) with a = A+ e^{-i omega t} + A- e^{i omega t} for the force cos(omega t)"""
    plus = -0.5j / (0.5 * mode.kappa + 1j * (mode.omega_a - omega))
    minus = -0.5j / (0.5 * mode.kappa + 1j * (mode.omega_a + omega))
    return plus, minus


def quadrature_response(mode: ModeParams, omega: float) -> complex:
    """Amplitude of the e^{-i omega t} part of x = a + a* per unit force cos(omega t)"""
    plus, minus = linear_response(mode, omega)
    return plus + minus.conjugate()


def tone_drive(mode: ModeParams, omega: float, nbar: float) -> Drive:
    """Real force at omega whose linear x-quadrature amplitude is sqrt(nbar)"""
    return Drive(frequency=omega, amplitude=complex(math.sqrt(nbar) / abs(quadrature_response(mode, omega))))


def pump_drive(mode: ModeParams, delta: float, n_p: float) -> Drive:
    """Pump force at 2(omega_a + delta) holding n_p pump photons.

    The pump quadrature of an off-resonant drive at twice the mode frequency
    is two thirds of sqrt(n_p); this is the normalisation under which the
    three-wave coupling is 2 g3 sqrt(n_p) and the pump shift is S n_p.
    """
    omega_p = pump_frequency(mode, delta)
    force = PUMP_QUADRATURE * math.sqrt(n_p) / abs(quadrature_response(mode, omega_p))
    return Drive(frequency=omega_p, amplitude=complex(force))


def linear_start(mode: ModeParams, drive: Drive) -> complex:
    """Steady linear response to a drive at t = 0"""
    plus, minus = linear_response(mode, drive.frequency)
    rotation = cmath.exp(-1j * drive.phase)
    return drive.amplitude * rotation * plus + (drive.amplitude * rotation).conjugate() * minus


def _slowest_decay(model: EffectiveModel) -> float:
    """Slowest linear relaxation rate around the origin below threshold"""
    excess = 4.0 * model.g ** 2 - model.delta_b ** 2
    rate = 0.5 * model.kappa - (math.sqrt(excess) if excess > 0 else 0.0)
    return max(rate, 1e-3 * model.kappa)


def oracle_gain(mode: ModeParams, delta: float, n_p: float, omega: float,
                circuit: Optional[CircuitSpec] = None, truncation: int = 4,
                drive_fraction: float = 1e-3) -> float:
    """Signal power gain of the lab-frame oscillator pumped at 2(omega_a + delta).

    A weak signal at omega_p/2 + omega rides on the pump; the Hann window spans
    one period of omega so the idler sits two bins away from the signal.
    """
    model = effective_params(mode.flux, delta, n_p, mode)
    pump = pump_drive(mode, delta, n_p)
    omega_s = 0.5 * pump.frequency + omega
    epsilon = 2.0 * drive_fraction * mode.kappa * _amplitude_scale(mode)
    window = TWO_PI / abs(omega)
    per_window = int(math.ceil(window / _max_step(pump.frequency)))
    dt = window / per_window
    settle_steps = int(math.ceil(SETTLE_DECAY_TIMES / _slowest_decay(model) / dt))
    config = OracleConfig(truncation=truncation, step=dt, total_time=(settle_steps + per_window) * dt,
                          drives=(pump, Drive(frequency=omega_s, amplitude=complex(epsilon))),
                          initial=linear_start(mode, pump), window=window, frame="lab")
    logger.info(f"lab gain run at flux {mode.flux:.4f}: {config.n_steps} steps")
    times, series = integrate(config, mode, mode.kappa, circuit)
    alpha_s = extract_tone(series, times, omega_s, config.window, kind="hann")
    return abs(1.0 - 2j * mode.kappa * alpha_s / epsilon) ** 2


def _pump_frame_step(model: EffectiveModel, extra_rates: Sequence[float] = ()) -> float:
    rates = [abs(model.delta_b), abs(model.pump_coupling), model.kappa, *extra_rates]
    try:
        rates.extend(abs(model.K) * n for n, _ in period_doubling_amplitudes(model))
    except DegenerateKerr:
        pass
    return TWO_PI / (MIN_STEPS_PER_PERIOD * max(rates))


def pump_frame_gain(model: EffectiveModel, mode: ModeParams, omega: float,
                    drive_fraction: float = 1e-3) -> float:
    """Gain from integrating the effective model itself; a fast cross-check only"""
    scale = math.sqrt(model.kappa / abs(model.K)) if model.K else 1.0
    u_s = drive_fraction * model.kappa * scale
    period = TWO_PI / abs(omega)
    per_period = int(math.ceil(period / _pump_frame_step(model, [abs(omega)])))
    dt = period / per_period
    settle_periods = int(math.ceil(SETTLE_DECAY_TIMES / _slowest_decay(model) / period))
    total_periods = settle_periods + MIN_BEAT_PERIODS
    config = OracleConfig(truncation=4, step=dt, total_time=total_periods * period,
                          drives=(Drive(frequency=omega, amplitude=complex(u_s)),),
                          window=MIN_BEAT_PERIODS * period, frame="pump")
    times, series = integrate(config, mode, model.kappa, None, model)
    alpha_s = extract_tone(series, times, omega, config.window)
    return abs(1.0 - 1j * model.kappa * alpha_s / u_s) ** 2


def oracle_period_doubling(mode: ModeParams, delta: float, n_p: float,
                           circuit: Optional[CircuitSpec] = None, truncation: int = 4,
                           decay_times: float = 600.0, seed_fraction: float = 1e-3) -> Tuple[float, float]:
    """(|alpha_h|^2, effective n_p) reached from a small seed with the pump alone.

    The harmonic pulls the off-resonant pump response, so the pump quadrature
    is measured in the same window. The 2 omega_h tone the harmonic itself
    drives through g3 is removed first; it belongs to the Kerr constant.
    """
    pump = pump_drive(mode, delta, n_p)
    omega_h = 0.5 * pump.frequency
    period = TWO_PI / omega_h
    per_period = int(math.ceil(period / _max_step(pump.frequency)))
    dt = period / per_period
    window_periods = int(math.ceil(HARMONIC_WINDOW_DECAY_TIMES / mode.kappa / period))
    total_periods = max(int(math.ceil(decay_times / mode.kappa / period)), 2 * window_periods)
    seed = seed_fraction * _amplitude_scale(mode) * cmath.exp(0.25j * math.pi)
    config = OracleConfig(truncation=truncation, step=dt, total_time=total_periods * period,
                          drives=(pump,), initial=linear_start(mode, pump) + seed,
                          window=window_periods * period, frame="lab")
    logger.info(f"lab period-doubling run at flux {mode.flux:.4f}: {config.n_steps} steps")
    times, series = integrate(config, mode, mode.kappa, circuit)
    alpha_h = extract_tone(series, times, omega_h, config.window, kind="hann")
    quadrature = (extract_tone(series, times, pump.frequency, config.window, kind="hann")
                  + extract_tone(series, times, -pump.frequency, config.window, kind="hann").conjugate())
    quadrature -= 6.0 * mode.g3 * alpha_h ** 2 * quadrature_response(mode, pump.frequency)
    return abs(alpha_h) ** 2, abs(quadrature / PUMP_QUADRATURE) ** 2


def _lab_batch(mode: ModeParams, omega_p: np.ndarray, force: np.ndarray, initial: np.ndarray,
               dt: float, n_steps: int, window_steps: int, radius: np.ndarray,
               circuit: Optional[CircuitSpec] = None, truncation: int = 4) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised lab-frame RK4 over pumped rows.

    Returns the Hann-weighted omega_p/2 amplitude over the final window of
    each row and the escape flags.
    """
    coefficients = _force_coefficients(mode, circuit, truncation)[::-1]
    omega_a, half_kappa = mode.omega_a, 0.5 * mode.kappa
    omega_h = 0.5 * omega_p
    y = initial.astype(complex).copy()
    escaped = np.zeros(y.shape, dtype=bool)
    projection = np.zeros(y.shape, dtype=complex)
    weight_sum = 0.0
    first = n_steps - window_steps

    def rhs(a, f):
        x = 2.0 * a.real
        total = np.zeros_like(x)
        for c in coefficients:
            total = total * x + c
        return -1j * (omega_a * a + total * x * x + f) - half_kappa * a

    f_start = force.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            t = k * dt
            f_mid = force * np.cos(omega_p * (t + 0.5 * dt))
            f_end = force * np.cos(omega_p * (t + dt))
            k1 = rhs(y, f_start)
            k2 = rhs(y + 0.5 * dt * k1, f_mid)
            k3 = rhs(y + 0.5 * dt * k2, f_mid)
            k4 = rhs(y + dt * k3, f_end)
            y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            f_start = f_end
            if k % 64 == 63 or k == n_steps - 1:
                out = ~np.isfinite(y) | (np.abs(y) > radius)
                if out.any():
                    escaped |= out
                    y[out] = 0.0
            if k >= first:
                w = 0.5 - 0.5 * math.cos(TWO_PI * (k - first) / window_steps)
                projection += w * y * np.exp(1j * omega_h * (t + dt))
                weight_sum += w
    return projection / weight_sum, escaped


def basin_labels(points: Sequence[Tuple[float, float]], flux: float, mode: ModeParams,
                 decay_times: float = 200.0, perturbation: float = 1e-3,
                 circuit: Optional[CircuitSpec] = None, truncation: int = 4) -> List[StabilityRegion]:
    """Region labels from lab-frame basin tests at (delta, n_p) points.

    Every point is pumped as a real drive at 2(omega_a + delta). The origin
    is perturbed by a small kick; a departure marks region II. Otherwise a
    perturbed start on each self-oscillating state (or on a ring of
    large-amplitude seeds when none exists) that stays away from the origin
    marks region III.
    """
    kappa = mode.kappa
    scale = _amplitude_scale(mode)
    kick = perturbation * scale
    owner, levels, starts, omegas, forces, radii = [], [], [], [], [], []
    for i, (delta, n_p) in enumerate(points):
        model = effective_params(flux, delta, n_p, mode)
        pump = pump_drive(mode, delta, n_p)
        origin = linear_start(mode, pump)
        coupling = 6.0 * mode.g3 * pump.amplitude * quadrature_response(mode, pump.frequency)
        try:
            states = [n for n, _ in period_doubling_amplitudes(model)]
        except DegenerateKerr:
            states = []
        seeds = [(kick * cmath.exp(0.25j * math.pi), 0.0)]
        if states:
            for n_h in states:
                theta = 0.5 * cmath.phase(coupling / (model.delta_b - model.K * n_h + 0.5j * kappa))
                for sign in (1.0, -1.0):
                    seeds.append((sign * 1.01 * math.sqrt(n_h) * cmath.exp(1j * theta), n_h))
        else:
            r = math.sqrt(max(abs(model.delta_b), kappa) / abs(model.K)) if model.K else scale
            for j in range(4):
                seeds.append((r * cmath.exp(0.5j * math.pi * j + 0.1j), r * r))
        radius = ESCAPE_FACTOR * math.sqrt(max(max(n for _, n in seeds), scale ** 2)) + 2.0 * math.sqrt(n_p)
        for seed, level in seeds:
            owner.append(i)
            levels.append(level)
            starts.append(origin + seed)
            omegas.append(pump.frequency)
            forces.append(pump.amplitude.real)
            radii.append(radius)

    omega_p = np.array(omegas)
    dt = _max_step(float(omega_p.max()))
    n_steps = int(math.ceil(decay_times / kappa / dt))
    window_steps = min(n_steps, int(math.ceil(HARMONIC_WINDOW_DECAY_TIMES / kappa / dt)))
    logger.info(f"basin test: {len(points)} points, {len(owner)} rows, {n_steps} lab-frame steps")
    alpha_h, escaped = _lab_batch(mode, omega_p, np.array(forces), np.array(starts), dt, n_steps,
                                  window_steps, np.array(radii), circuit, truncation)

    labels = []
    for i in range(len(points)):
        rows = [r for r, o in enumerate(owner) if o == i]
        origin = rows[0]
        if escaped[origin] or abs(alpha_h[origin]) > 10.0 * kick:
            labels.append(StabilityRegion.REGION_II)
            continue
        held = [abs(alpha_h[r]) ** 2 > 0.25 * levels[r] and not escaped[r] for r in rows[1:]]
        labels.append(StabilityRegion.REGION_III if any(held) else StabilityRegion.REGION_I)
    return labels


def self_kerr_pull(mode: ModeParams, circuit: Optional[CircuitSpec], nbar: float,
                   truncation: int = 4, periods: int = 200, steps_per_period: int = 64,
                   reference_nbar: float = 1e-4) -> float:
    """Free-oscillation frequency shift (rad/s) at amplitude nbar relative to a tiny amplitude"""
    if nbar <= 0:
        return 0.0
    period = TWO_PI / mode.omega_a
    dt = period / steps_per_period

    def frequency(n):
        config = OracleConfig(truncation=truncation, step=dt, total_time=periods * period,
                              initial=complex(math.sqrt(n)), frame="lab",
                              escape_radius=math.inf)
        times, series = integrate(config, mode, 0.0, circuit)
        phase = np.unwrap(np.angle(series))
        return -np.polyfit(times, phase, 1)[0]

    return float(frequency(nbar) - frequency(reference_nbar))


def drive_stark_shift(mode: ModeParams, circuit: Optional[CircuitSpec], nbar: float, omega_d: float,
                      truncation: int = 6, probe_fraction: float = 2e-2, max_rounds: int = 4,
                      tolerance: float = 1e-3) -> float:
    """Resonance shift (rad/s) of a weak probe at omega_a while a drive at omega_d holds nbar.

    nbar counts photons in the drive's x-quadrature and is reached by
    rescaling the drive force between runs. The undriven probe run is the
    reference, so integrator dispersion cancels.
    """
    if nbar <= 0:
        return 0.0
    detuning = abs(omega_d - mode.omega_a)
    if detuning == 0:
        raise InvalidSpec("the Stark drive must be detuned from the mode")
    beat = TWO_PI / detuning
    per_beat = int(math.ceil(beat / _max_step(max(omega_d, mode.omega_a))))
    dt = beat / per_beat
    window_beats = max(2, int(math.ceil(STARK_WINDOW_DECAY_TIMES / mode.kappa / beat)))
    settle_beats = max(MIN_BEAT_PERIODS, int(math.ceil(STARK_SETTLE_DECAY_TIMES / mode.kappa / beat)))
    probe = Drive(frequency=mode.omega_a, amplitude=complex(probe_fraction * mode.kappa))

    def measure(drive: Optional[Drive]) -> Tuple[float, float]:
        drives = (probe,) if drive is None else (probe, drive)
        start = linear_start(mode, probe) + (0j if drive is None else linear_start(mode, drive))
        config = OracleConfig(truncation=truncation, step=dt,
                              total_time=(settle_beats + window_beats) * beat, drives=drives,
                              initial=start, window=window_beats * beat, frame="lab")
        times, series = integrate(config, mode, mode.kappa, circuit)
        alpha = extract_tone(series, times, mode.omega_a, config.window, kind="hann")
        shift = (-0.5j * probe.amplitude / alpha).imag
        if drive is None:
            return shift, 0.0
        quadrature = (extract_tone(series, times, omega_d, config.window, kind="hann")
                      + extract_tone(series, times, -omega_d, config.window, kind="hann").conjugate())
        return shift, abs(quadrature) ** 2

    reference, _ = measure(None)
    drive = tone_drive(mode, omega_d, nbar)
    for _ in range(max_rounds):
        shift, measured = measure(drive)
        if abs(measured / nbar - 1.0) <= tolerance:
            break
        drive = Drive(frequency=omega_d, amplitude=drive.amplitude * math.sqrt(nbar / measured))
    else:
        logger.warning(f"drive photon number {measured:.2f} after {max_rounds} rounds, target {nbar:.2f}")
    return float(shift - reference)


def oracle_region(delta: float, n_p: float, flux: float, mode: ModeParams) -> Tuple[StabilityRegion, StabilityRegion]:
    """(analytic label, basin-test label) at one point"""
    analytic = classify_stability(delta, n_p, flux, mode).region
    return analytic, basin_labels([(delta, n_p)], flux, mode)[0]
