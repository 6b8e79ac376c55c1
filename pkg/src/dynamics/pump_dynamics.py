# src/dynamics/pump_dynamics.py
# Pumped Kerr-oscillator model: dressed parameters, gain, threshold and
# stability regions in the (detuning, pump photon number) plane

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from errors import AboveThreshold, DegenerateKerr, GainUnreachable, NoConvergence
from models import EffectiveModel, ModeParams, StabilityClass, StabilityRegion

logger = logging.getLogger("PumpDynamics")

DEGENERATE_KERR_RATIO = 1e-6
THRESHOLD_RTOL = 1e-10
GAIN_SCAN_POINTS = 4000


def stark_coefficient(mode: ModeParams) -> float:
    """Pump-induced detuning per pump photon, 32 g4/3 - 28 g3^2/omega_a"""
    return 32.0 * mode.g4 / 3.0 - 28.0 * mode.g3 ** 2 / mode.omega_a


def dressed_detuning(delta, n_p, mode: ModeParams, dressed: bool = True):
    stark = stark_coefficient(mode) if dressed else 0.0
    return delta - stark * n_p


def effective_params(flux: float, delta: float, n_p: float, mode: ModeParams,
                     dressed: bool = True) -> EffectiveModel:
    """Lowest-order pumped-frame parameters; K is 12 g4* without pump dressing"""
    if abs(flux - mode.flux) > 1e-12:
        logger.warning(f"effective_params flux {flux} differs from mode flux {mode.flux}")
    return EffectiveModel(
        flux=float(flux),
        delta=float(delta),
        n_p=float(n_p),
        delta_b=float(dressed_detuning(delta, n_p, mode, dressed)),
        g=2.0 * abs(mode.g3) * math.sqrt(n_p),
        K=12.0 * mode.g4_star,
        kappa=mode.kappa,
        omega_a=mode.omega_a,
        g3=mode.g3,
    )


def _gain_denominator(model: EffectiveModel) -> float:
    return model.delta_b ** 2 + model.kappa ** 2 / 4.0 - 4.0 * model.g ** 2


def small_signal_gain(model: EffectiveModel) -> float:
    den = _gain_denominator(model)
    if den <= 0:
        raise AboveThreshold(
            f"4g^2={4 * model.g ** 2:.4e} exceeds delta_b^2 + kappa^2/4 by {-den:.4e} (rad/s)^2")
    return 1.0 + 4.0 * model.kappa ** 2 * model.g ** 2 / den ** 2


def gain(model: EffectiveModel, n_s: float, n_i: float) -> float:
    """Semiclassical gain with signal and idler Stark shifts"""
    kappa2 = model.kappa ** 2 / 4.0
    delta_s = model.delta_b - model.K * (n_s + 2.0 * n_i)
    delta_i = model.delta_b - model.K * (n_i + 2.0 * n_s)
    den = (kappa2 + delta_i * delta_s - 4.0 * model.g ** 2) ** 2 + kappa2 * (delta_i - delta_s) ** 2
    if den == 0:
        return math.inf
    return 1.0 + (2.0 * model.g * model.kappa) ** 2 / den


def _threshold_map(n, delta, kappa, g3, stark):
    delta_b = delta - stark * n
    return (kappa ** 2 + 4.0 * delta_b ** 2) / (8.0 * g3) ** 2


def threshold_np(flux: float, delta: float, mode: ModeParams, dressed: bool = True,
                 damping: float = 0.5, max_iter: int = 10_000) -> float:
    """Pump photon number at the parametric instability threshold"""
    g3, kappa = mode.g3, mode.kappa
    if g3 == 0:
        return math.inf
    stark = stark_coefficient(mode) if dressed else 0.0
    if stark == 0:
        return (kappa ** 2 + 4.0 * delta ** 2) / (8.0 * g3) ** 2

    n = _threshold_map(0.0, delta, kappa, g3, stark)
    converged = False
    for _ in range(max_iter):
        n_next = (1.0 - damping) * n + damping * _threshold_map(n, delta, kappa, g3, stark)
        if not math.isfinite(n_next):
            break
        if abs(n_next - n) <= THRESHOLD_RTOL * max(n_next, 1.0):
            n = n_next
            converged = True
            break
        n = n_next

    # the threshold is the smallest root of f(n) - n; confirm by bracketing
    bracket = _first_sign_change(lambda x: _threshold_map(x, delta, kappa, g3, stark) - x,
                                 upper=max(4.0 * n, 1.0) if converged and n > 0 else 1e9)
    if bracket is None:
        if converged:
            return n
        raise NoConvergence(f"threshold iteration failed at flux {flux}, delta {delta:.4e}", last_iterate=n)
    root = brentq(lambda x: _threshold_map(x, delta, kappa, g3, stark) - x, *bracket,
                  xtol=1e-12, rtol=1e-14)
    if converged and abs(root - n) > 1e-8 * root:
        logger.debug(f"fixed point {n:.6e} is not the smallest threshold root {root:.6e}")
    return float(root)


def _first_sign_change(func, upper: float, points: int = 20000) -> Optional[Tuple[float, float]]:
    grid = np.concatenate(([0.0], np.geomspace(1e-9 * upper, upper, points)))
    values = func(grid)
    idx = np.flatnonzero(np.sign(values[1:]) != np.sign(values[:-1]))
    if idx.size == 0:
        return None
    i = int(idx[0])
    return float(grid[i]), float(grid[i + 1])


def np_for_gain(target_G0: float, flux: float, delta: float, mode: ModeParams,
                n_max: float = 2e4, dressed: bool = True) -> float:
    """Smallest pump photon number reaching small-signal gain target_G0"""
    if target_G0 < 1:
        raise ValueError(f"target gain must be >= 1, got {target_G0}")
    if target_G0 == 1:
        return 0.0
    g3, kappa = mode.g3, mode.kappa
    stark = stark_coefficient(mode) if dressed else 0.0
    root_gain = math.sqrt(target_G0 - 1.0)

    # G0 = target  <=>  sqrt(target - 1) * den = 2 kappa g  with den > 0
    def crossing(n):
        delta_b = delta - stark * n
        den = delta_b ** 2 + kappa ** 2 / 4.0 - 16.0 * g3 ** 2 * n
        return root_gain * den - 4.0 * kappa * abs(g3) * np.sqrt(n)

    if g3 == 0:
        raise GainUnreachable(f"g3 = 0 at flux {flux}; no parametric gain")
    grid = np.concatenate(([0.0], np.geomspace(1e-8 * n_max, n_max, GAIN_SCAN_POINTS)))
    values = crossing(grid)
    below = np.flatnonzero(values <= 0)
    if below.size == 0:
        raise GainUnreachable(
            f"G0={target_G0:.3g} not reachable at flux {flux:.4f}, "
            f"delta/2pi={delta / 2 / math.pi / 1e6:.2f} MHz with n_p <= {n_max:.3g}")
    i = int(below[0])
    if values[i] == 0:
        return float(grid[i])
    return float(brentq(crossing, grid[i - 1], grid[i], xtol=1e-15, rtol=1e-14))


def period_doubling_amplitudes(model: EffectiveModel) -> List[Tuple[float, str]]:
    """Real non-negative |alpha_h|^2 of the self-oscillating states with sign tags"""
    if abs(model.K) < DEGENERATE_KERR_RATIO * model.kappa:
        raise DegenerateKerr(f"|K|={abs(model.K):.3e} below {DEGENERATE_KERR_RATIO:g} kappa")
    excess = 4.0 * model.g ** 2 - model.kappa ** 2 / 4.0
    if excess < 0:
        return []
    root = math.sqrt(excess)
    solutions = []
    for tag, sign in (("-", -1.0), ("+", 1.0)):
        value = (model.delta_b + sign * root) / model.K
        if value >= 0 and not any(abs(value - v) <= 1e-14 * max(value, 1.0) for v, _ in solutions):
            solutions.append((value, tag))
    return solutions


def _region(delta_b: float, excess: float, K: float) -> StabilityRegion:
    if excess > delta_b ** 2:
        return StabilityRegion.REGION_II
    if excess > 0 and K != 0 and delta_b / K > 0:
        return StabilityRegion.REGION_III
    return StabilityRegion.REGION_I


def classify_stability(delta: float, n_p: float, flux: float, mode: ModeParams,
                       dressed: bool = True) -> StabilityClass:
    """Region label from the analytic boundary conditions with dressed delta_b"""
    model = effective_params(flux, delta, n_p, mode, dressed)
    excess = 4.0 * model.g ** 2 - model.kappa ** 2 / 4.0
    return StabilityClass(
        region=_region(model.delta_b, excess, model.K),
        delta=float(delta),
        n_p=float(n_p),
        delta_b=model.delta_b,
        drive_excess=excess - model.delta_b ** 2,
    )


def boundary_polylines(delta_grid: Sequence[float], flux: float, mode: ModeParams,
                       n_max: float, dressed: bool = True) -> Dict[str, List[Tuple[float, float]]]:
    """Sampled region boundaries as (delta, n_p) polylines"""
    lines: Dict[str, List[Tuple[float, float]]] = {"I/II": [], "II/III": [], "I/III": []}
    if mode.g3 == 0:
        return lines
    K = 12.0 * mode.g4_star
    n_onset = mode.kappa ** 2 / (8.0 * mode.g3) ** 2
    for delta in delta_grid:
        try:
            n_th = threshold_np(flux, delta, mode, dressed)
        except NoConvergence:
            n_th = math.inf
        if n_th <= n_max:
            delta_b = float(dressed_detuning(delta, n_th, mode, dressed))
            tristable_side = K != 0 and delta_b / K > 0
            lines["II/III" if tristable_side else "I/II"].append((float(delta), float(n_th)))
        if n_onset <= min(n_th, n_max):
            delta_b = float(dressed_detuning(delta, n_onset, mode, dressed))
            if K != 0 and delta_b / K > 0:
                lines["I/III"].append((float(delta), float(n_onset)))
    return lines


def out_of_band_link(omega: float, omega_a: float) -> float:
    """Ratio linking the negative-frequency component at -omega to a_omega"""
    return (omega_a - omega) / (omega_a + omega)
