# tests/test_snail_core.py
# Unit tests for the SNAIL potential, minimum tracking and Taylor coefficients

import math
import unittest
import sys
import os

import numpy as np

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from errors import InvalidSpec
from models import SnailSpec
from snail.snail_core import (find_minimum, potential, potential_derivative, reduced_derivative,
                              taylor_coeffs, track_minimum)


class TestSnailCore(unittest.TestCase):

    def setUp(self):
        """Set up test fixtures"""
        self.spec = SnailSpec.create(L_J_pH=38.0, alpha=0.065, M=20)
        self.flux_grid = np.linspace(0.0, 0.5, 100)

    def test_zero_flux_minimum_is_symmetric(self):
        """At zero flux the minimum sits at zero and odd coefficients vanish"""
        coeffs = taylor_coeffs(0.0, self.spec, higher=True)
        self.assertEqual(coeffs.phi_min, 0.0)
        self.assertAlmostEqual(coeffs.c3, 0.0, places=14)
        self.assertAlmostEqual(coeffs.c5, 0.0, places=14)
        self.assertGreater(coeffs.c2, 0.0)

    def test_minimum_is_stationary_and_stable(self):
        """First derivative vanishes and curvature is positive along the flux grid"""
        for flux in self.flux_grid:
            phi_ext = 2 * math.pi * flux
            phi_min = find_minimum(phi_ext, self.spec)
            self.assertLess(abs(reduced_derivative(phi_min, phi_ext, self.spec.alpha, 1)), 1e-12)
            self.assertGreater(reduced_derivative(phi_min, phi_ext, self.spec.alpha, 2), 0.0)

    def test_coefficients_match_finite_differences(self):
        """c_k equals the central difference of c_(k-1) at fixed external flux"""
        h = 1e-5
        for flux in self.flux_grid:
            phi_ext = 2 * math.pi * flux
            coeffs = taylor_coeffs(phi_ext, self.spec, higher=True)
            phi = coeffs.phi_min
            for order in range(2, 7):
                lower = order - 1
                numeric = (reduced_derivative(phi + h, phi_ext, self.spec.alpha, lower)
                           - reduced_derivative(phi - h, phi_ext, self.spec.alpha, lower)) / (2 * h)
                expected = coeffs.coefficient(order)
                self.assertAlmostEqual(numeric, expected, delta=1e-6 * max(abs(expected), 1.0))

    def test_warm_start_tracking_matches_global_search(self):
        """Tracking along a monotone grid follows the single well without slips"""
        phi_ext_grid = 2 * math.pi * self.flux_grid
        tracked = track_minimum(phi_ext_grid, self.spec)
        for phi_ext, phi in zip(phi_ext_grid, tracked):
            self.assertAlmostEqual(phi, find_minimum(phi_ext, self.spec), delta=1e-10)
        steps = np.abs(np.diff(tracked))
        self.assertLess(steps.max(), 0.1)

    def test_potential_units(self):
        """Potential and its derivatives scale with E_J"""
        phi, phi_ext = 0.3, 1.2
        self.assertAlmostEqual(potential(phi, phi_ext, self.spec) / self.spec.E_J,
                               reduced_derivative(phi, phi_ext, self.spec.alpha, 0), places=12)
        self.assertAlmostEqual(potential_derivative(phi, phi_ext, self.spec, 4) / self.spec.E_J,
                               reduced_derivative(phi, phi_ext, self.spec.alpha, 4), places=12)

    def test_derivative_order_bounds(self):
        """Orders beyond six are rejected"""
        with self.assertRaises(ValueError):
            reduced_derivative(0.0, 0.0, 0.065, 7)

    def test_higher_coefficients_optional(self):
        """c5 and c6 are only filled in on request"""
        coeffs = taylor_coeffs(1.0, self.spec)
        self.assertIsNone(coeffs.c5)
        with self.assertRaises(KeyError):
            coeffs.coefficient(6)

    def test_alpha_window_validation(self):
        """alpha outside (0, 1/3) needs an explicit override"""
        with self.assertRaises(InvalidSpec):
            SnailSpec.create(38.0, 0.5, 20)
        spec = SnailSpec.create(38.0, 0.5, 20, allow_alpha_override=True)
        self.assertEqual(spec.alpha, 0.5)
        with self.assertRaises(InvalidSpec):
            SnailSpec.create(-1.0, 0.1, 20)
        with self.assertRaises(InvalidSpec):
            SnailSpec.create(38.0, 0.1, 0)


if __name__ == '__main__':
    unittest.main()
