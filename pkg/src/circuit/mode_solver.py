# src/circuit/mode_solver.py
# Fundamental mode of the SNAIL-loaded half-wave resonator and its
# Hamiltonian coefficients versus flux

import dataclasses
import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq, least_squares

from errors import RootNotBracketed
from models import CircuitSpec, ModeParams, TaylorCoeffs
from snail.snail_core import taylor_coeffs
from utils.units import HBAR, PHI0_REDUCED, R_Q, TWO_PI

logger = logging.getLogger("ModeSolver")

BRACKET_FRACTION = 1e-6
DISPERSION_RTOL = 1e-10
Z1_WARN_RATIO = 0.1


def _loading(circuit: CircuitSpec, c2: float) -> float:
    """Right-hand side 2 Z_c / (M L_s) of the dispersion relation"""
    L_s = circuit.snail.L_J / c2
    return 2.0 * circuit.Z_c / (circuit.snail.M * L_s)


def dispersion_residual(omega, circuit: CircuitSpec, c2: float):
    """omega*tan(pi*omega/2omega0) - 2Z_c/(M L_s); zero at a mode"""
    return omega * np.tan(np.pi * omega / (2 * circuit.omega0)) - _loading(circuit, c2)


def _pole_free(omega, omega0: float, load: float):
    theta = np.pi * omega / (2 * omega0)
    return omega * np.sin(theta) - load * np.cos(theta)


def _root_on_branch(lo: float, hi: float, omega0: float, load: float) -> float:
    f_lo = _pole_free(lo, omega0, load)
    f_hi = _pole_free(hi, omega0, load)
    if np.sign(f_lo) == np.sign(f_hi):
        raise RootNotBracketed(
            f"no dispersion root in ({lo:.6e}, {hi:.6e}) rad/s for load {load:.6e}")
    return brentq(_pole_free, lo, hi, args=(omega0, load),
                  xtol=1e-14 * omega0, rtol=4 * np.finfo(float).eps, maxiter=500)


def fundamental_root(circuit: CircuitSpec, c2: float) -> float:
    omega0 = circuit.omega0
    load = _loading(circuit, c2)
    delta = BRACKET_FRACTION * omega0
    root = _root_on_branch(delta, omega0 - delta, omega0, load)
    residual = abs(dispersion_residual(root, circuit, c2)) / load
    if residual > DISPERSION_RTOL:
        # tan is steep near the pole; one Newton step on the tan form
        theta = math.pi * root / (2 * omega0)
        slope = math.tan(theta) + root * (math.pi / (2 * omega0)) / math.cos(theta) ** 2
        polished = root - dispersion_residual(root, circuit, c2) / slope
        # the polished root must stay on the fundamental branch
        if (delta < polished < omega0 - delta
                and abs(dispersion_residual(polished, circuit, c2)) < residual * load):
            root = polished
        else:
            logger.debug(f"Newton polish to {polished:.6e} rad/s rejected; keeping bracketed root")
    return float(root)


def mode_frequency(flux: float, circuit: CircuitSpec, coeffs: Optional[TaylorCoeffs] = None) -> float:
    """Fundamental mode angular frequency at flux (in units of the flux quantum)"""
    if coeffs is None:
        coeffs = taylor_coeffs(TWO_PI * flux, circuit.snail)
    return fundamental_root(circuit, coeffs.c2)


def higher_mode_roots(flux: float, circuit: CircuitSpec, count: int = 3,
                      coeffs: Optional[TaylorCoeffs] = None) -> List[float]:
    """Diagnostic dispersion roots above the fundamental; unused by the physics"""
    if coeffs is None:
        coeffs = taylor_coeffs(TWO_PI * flux, circuit.snail)
    omega0 = circuit.omega0
    load = _loading(circuit, coeffs.c2)
    delta = BRACKET_FRACTION * omega0
    roots = []
    for n in range(1, count + 1):
        roots.append(float(_root_on_branch(2 * n * omega0 + delta, (2 * n + 1) * omega0 - delta,
                                           omega0, load)))
    return roots


def mode_lc(omega_a: float, circuit: CircuitSpec) -> Tuple[float, float, float, float]:
    """Lumped (C1, L1, Z1, phi_zpf) of the fundamental mode"""
    x = omega_a / circuit.omega0
    s = math.pi * x + math.sin(math.pi * x)
    C1 = s / (2 * omega_a * circuit.Z_c)
    L1 = 2 * circuit.Z_c / (omega_a * s)
    Z1 = math.sqrt(L1 / C1)
    phi_zpf = math.sqrt(HBAR * Z1 / 2)
    return C1, L1, Z1, phi_zpf


def g3_coefficient(mode: ModeParams, circuit: CircuitSpec) -> float:
    """Three-wave mixing coefficient g3 (rad/s)"""
    snail = circuit.snail
    x = mode.omega_a / circuit.omega0
    s = math.pi * x + math.sin(math.pi * x)
    shape = (math.cos(math.pi * x / 2) ** 2 / s) ** 1.5
    return (4 * circuit.Z_c * mode.coeffs.c3 / (3 * snail.M ** 2 * snail.L_J)
            * shape * math.sqrt(circuit.Z_c / R_Q))


def g4_star_coefficient(mode: ModeParams, circuit: CircuitSpec) -> Tuple[float, float]:
    """Effective quartic coefficient g4* and the bare g4 = g4* + 5 g3^2/omega_a.

    Returns (g4_star, g4); g3 is taken from mode.g3.
    """
    snail = circuit.snail
    c = mode.coeffs
    omega_a = mode.omega_a
    x = omega_a / circuit.omega0
    s = math.pi * x + math.sin(math.pi * x)
    L_s = snail.L_J / c.c2
    y2 = (omega_a * snail.M * L_s / (2 * circuit.Z_c)) ** 2
    bracket = c.c4 - (c.c3 ** 2 / c.c2) * (3 + 5 * y2) / (1 + 3 * y2)
    prefactor = (omega_a * math.sin(math.pi * x) ** 2
                 / (12 * c.c2 * snail.M ** 2 * math.tan(math.pi * x / 2) * s ** 2))
    g4_star = prefactor * (circuit.Z_c / R_Q) * bracket
    return g4_star, g4_star + 5 * mode.g3 ** 2 / omega_a


def snail_phase_scale(mode: ModeParams, circuit: CircuitSpec) -> float:
    """Phase across one SNAIL per unit of the mode quadrature a + a^dagger"""
    x = mode.omega_a / circuit.omega0
    return 2 * math.cos(math.pi * x / 2) * mode.phi_zpf / (circuit.snail.M * PHI0_REDUCED)


def nonlinear_coefficient(mode: ModeParams, circuit: CircuitSpec, order: int) -> float:
    """Coefficient g_n of (a + a^dagger)^n projected from c_n.

    The quartic term is always the dressed-consistent mode.g4; the
    projection is used for orders 3, 5 and 6.
    """
    if order == 3:
        return mode.g3
    if order == 4:
        return mode.g4
    c_n = mode.coeffs.coefficient(order)
    snail = circuit.snail
    return (snail.M * snail.E_J * c_n / (math.factorial(order) * HBAR)
            * snail_phase_scale(mode, circuit) ** order)


def solve_mode(flux: float, circuit: CircuitSpec, prev_phi_min: Optional[float] = None,
               higher: bool = False) -> ModeParams:
    """All linear and nonlinear mode parameters at one flux point"""
    coeffs = taylor_coeffs(TWO_PI * flux, circuit.snail, prev=prev_phi_min, higher=higher)
    omega_a = mode_frequency(flux, circuit, coeffs)
    C1, L1, Z1, phi_zpf = mode_lc(omega_a, circuit)
    if Z1 / R_Q > Z1_WARN_RATIO:
        logger.warning(f"Z1/R_Q = {Z1 / R_Q:.3f} at flux {flux:.4f}; perturbative expansion is marginal")
    mode = ModeParams(
        flux=float(flux),
        omega_a=omega_a,
        L_s=circuit.snail.L_J / coeffs.c2,
        C1=C1,
        L1=L1,
        Z1=Z1,
        phi_zpf=phi_zpf,
        g3=0.0,
        g4=0.0,
        g4_star=0.0,
        kappa=circuit.kappa_at(flux),
        coeffs=coeffs,
    )
    mode = dataclasses.replace(mode, g3=g3_coefficient(mode, circuit))
    g4_star, g4 = g4_star_coefficient(mode, circuit)
    return dataclasses.replace(mode, g4_star=g4_star, g4=g4)


def sweep_modes(flux_grid: Iterable[float], circuit: CircuitSpec, higher: bool = False) -> List[ModeParams]:
    """solve_mode along a monotone flux grid with warm-started minimum tracking"""
    modes = []
    prev = None
    for flux in flux_grid:
        mode = solve_mode(float(flux), circuit, prev_phi_min=prev, higher=higher)
        prev = mode.coeffs.phi_min
        modes.append(mode)
    return modes


def fit_omega0_alpha(flux_data: Iterable[float], freq_data: Iterable[float],
                     circuit: CircuitSpec) -> Tuple[float, float, float]:
    """Least-squares fit of (omega0, alpha) to measured mode frequencies.

    freq_data in rad/s. Returns (omega0, alpha, rms residual in rad/s).
    """
    fluxes = np.asarray(list(flux_data), dtype=float)
    measured = np.asarray(list(freq_data), dtype=float)
    scale = circuit.omega0

    def residuals(params):
        omega0 = params[0] * scale
        snail = dataclasses.replace(circuit.snail, alpha=float(params[1]))
        trial = dataclasses.replace(circuit, omega0=omega0, snail=snail)
        prev = None
        out = []
        for flux, target in zip(fluxes, measured):
            coeffs = taylor_coeffs(TWO_PI * flux, snail, prev=prev)
            prev = coeffs.phi_min
            out.append((fundamental_root(trial, coeffs.c2) - target) / scale)
        return np.asarray(out)

    start = np.array([1.0, circuit.snail.alpha])
    result = least_squares(residuals, start, bounds=([0.5, 1e-4], [2.0, 1.0 / 3.0 - 1e-6]),
                           x_scale=[1.0, 0.01], xtol=1e-12, ftol=1e-12)
    rms = float(np.sqrt(np.mean(result.fun ** 2))) * scale
    logger.info(f"omega0/2pi={result.x[0] * scale / TWO_PI / 1e9:.4f} GHz, "
                f"alpha={result.x[1]:.5f}, rms={rms / TWO_PI / 1e6:.3f} MHz")
    return float(result.x[0] * scale), float(result.x[1]), rms
