# src/snail/snail_core.py
# SNAIL potential, minimum tracking and Taylor coefficients

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from errors import NoMinimumFound
from models import SnailSpec, TaylorCoeffs

logger = logging.getLogger("SnailCore")

MAX_ORDER = 6
SCAN_POINTS_PER_HALF = 1000
RESIDUAL_TOL = 1e-12
NEWTON_MAX_ITER = 50


def _cos_derivative(x, k: int):
    """k-th derivative of cos evaluated at x (exact zeros at symmetric points)"""
    r = k % 4
    if r == 0:
        return np.cos(x)
    if r == 1:
        return -np.sin(x)
    if r == 2:
        return -np.cos(x)
    return np.sin(x)


def reduced_derivative(phi, phi_ext, alpha: float, order: int):
    """d^k/dphi^k of U_S/E_J = -alpha*cos(phi) - 3*cos((phi_ext - phi)/3)"""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"derivative order must be in [0, {MAX_ORDER}], got {order}")
    u = (phi_ext - phi) / 3.0
    return -alpha * _cos_derivative(phi, order) - 3.0 * (-1.0 / 3.0) ** order * _cos_derivative(u, order)


def potential(phi, phi_ext: float, spec: SnailSpec):
    """SNAIL potential energy in joules"""
    return spec.E_J * reduced_derivative(phi, phi_ext, spec.alpha, 0)


def potential_derivative(phi, phi_ext: float, spec: SnailSpec, order: int):
    """Analytic d^k U_S / d phi^k in joules, k = 0..6"""
    return spec.E_J * reduced_derivative(phi, phi_ext, spec.alpha, order)


def _newton(phi0: float, phi_ext: float, alpha: float, max_step: float) -> Optional[float]:
    phi = phi0
    for _ in range(NEWTON_MAX_ITER):
        d1 = reduced_derivative(phi, phi_ext, alpha, 1)
        if abs(d1) < RESIDUAL_TOL * 1e-2:
            break
        d2 = reduced_derivative(phi, phi_ext, alpha, 2)
        if d2 <= 0:
            return None
        step = d1 / d2
        if abs(step) > max_step:
            return None
        phi -= step
    else:
        return None
    if abs(reduced_derivative(phi, phi_ext, alpha, 1)) >= RESIDUAL_TOL:
        return None
    return float(phi)


def _bracketed(lo: float, hi: float, phi_ext: float, alpha: float) -> Optional[float]:
    f_lo = reduced_derivative(lo, phi_ext, alpha, 1)
    f_hi = reduced_derivative(hi, phi_ext, alpha, 1)
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if f_lo > 0 or f_hi < 0:
        return None
    root = brentq(lambda p: reduced_derivative(p, phi_ext, alpha, 1), lo, hi,
                  xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if reduced_derivative(root, phi_ext, alpha, 2) <= 0:
        return None
    return float(root)


def _scan_minimum(center: float, half_width: float, phi_ext: float, alpha: float,
                  near: Optional[float] = None) -> float:
    n = SCAN_POINTS_PER_HALF
    step = half_width / n
    grid = center + np.arange(-n, n + 1) * step
    u = reduced_derivative(grid, phi_ext, alpha, 0)
    interior = np.flatnonzero((u[1:-1] <= u[:-2]) & (u[1:-1] <= u[2:])) + 1
    if interior.size == 0:
        raise NoMinimumFound(
            f"no interior minimum of U_S in [{grid[0]:.4f}, {grid[-1]:.4f}] "
            f"for phi_ext={phi_ext:.6f}, alpha={alpha}")
    if near is None:
        idx = interior[np.argmin(u[interior])]
    else:
        idx = interior[np.argmin(np.abs(grid[interior] - near))]
    candidate = _newton(float(grid[idx]), phi_ext, alpha, max_step=2 * step)
    if candidate is None:
        candidate = _bracketed(float(grid[idx] - step), float(grid[idx] + step), phi_ext, alpha)
    if candidate is None:
        raise NoMinimumFound(
            f"minimum near phi={grid[idx]:.6f} did not converge for phi_ext={phi_ext:.6f}")
    return candidate


def find_minimum(phi_ext: float, spec: SnailSpec, prev: Optional[float] = None) -> float:
    """Location of the potential minimum.

    Without prev the global minimum in [phi_ext - pi, phi_ext + pi] is
    returned. With prev the minimum continuously connected to prev is
    followed (no phase slips).
    """
    alpha = spec.alpha
    if prev is not None:
        phi = _newton(float(prev), phi_ext, alpha, max_step=0.5)
        if phi is not None:
            return phi
        logger.debug(f"warm start from {prev:.6f} failed at phi_ext={phi_ext:.6f}, rescanning locally")
        return _scan_minimum(float(prev), 1.0, phi_ext, alpha, near=float(prev))
    return _scan_minimum(float(phi_ext), math.pi, phi_ext, alpha)


def taylor_coeffs(phi_ext: float, spec: SnailSpec, prev: Optional[float] = None,
                  higher: bool = False) -> TaylorCoeffs:
    """Dimensionless c_k = (1/E_J) d^k U_S/d phi^k at the tracked minimum"""
    phi_min = find_minimum(phi_ext, spec, prev=prev)
    c = {k: float(reduced_derivative(phi_min, phi_ext, spec.alpha, k)) for k in range(2, 7)}
    if c[2] <= 0:
        raise NoMinimumFound(f"c2={c[2]:.3e} is not positive at phi_ext={phi_ext:.6f}")
    return TaylorCoeffs(
        phi_ext=float(phi_ext),
        phi_min=phi_min,
        c2=c[2],
        c3=c[3],
        c4=c[4],
        c5=c[5] if higher else None,
        c6=c[6] if higher else None,
    )


def track_minimum(phi_ext_grid: Sequence[float], spec: SnailSpec) -> List[float]:
    """Warm-started minimum positions along a monotone flux grid"""
    result = []
    prev = None
    for phi_ext in phi_ext_grid:
        prev = find_minimum(float(phi_ext), spec, prev=prev)
        result.append(prev)
    return result
