# src/sweep/sweeps.py
# Sweep orchestration: flux sweep, stability map, saturation map,
# drive Stark-shift column and the dressed Kerr-free point search.
#
# Grid cells are dispatched to a thread pool and gathered in submission
# order; rows are sorted by key before they are handed to the emitter.

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from amplifier.amplifier_metrics import (ONE_DB, drive_photon_number, imd_result,
                                         input_power_for_gain_undressed, p1db, power_efficiency,
                                         saturation_curve, stark_shift_curve)
from circuit.mode_solver import solve_mode
from config import Config
from dynamics.pump_dynamics import (boundary_polylines, classify_stability, effective_params,
                                    np_for_gain, small_signal_gain)
from errors import GainUnreachable, NoSolution, SearchFailed, SpaError, Unbounded
from models import ModeParams, StabilityRegion, SweepResult
from utils.metrics import MetricsCollector
from utils.units import dbm_to_watts, linear_to_db, mhz_to_rad, rad_to_ghz, rad_to_mhz, watts_to_dbm

FLUX_COLUMNS = [
    "flux", "omega_a_GHz", "kappa_MHz", "g3_MHz", "g4_MHz", "g4_star_MHz", "K_MHz",
    "Z1_ohm", "phi_min", "c2", "c3", "c4", "n_p", "G0_dB", "p1db_W", "p1db_dBm",
    "iip3_W", "iip3_dBm", "p1db_status", "error", "config_hash",
]
STABILITY_COLUMNS = [
    "flux", "delta_MHz", "n_p", "delta_b_MHz", "region", "G0_dB", "error", "config_hash",
]
SATURATION_COLUMNS = [
    "flux", "delta_MHz", "p_in_dBm", "p_in_W", "n_p", "G0_dB", "branch_count",
    "gain_low_dB", "gain_mid_dB", "gain_high_dB", "p1db_W", "p1db_dBm", "p1db_exact_dBm", "p1db_curve_dBm",
    "p1db_undressed_dBm", "iip3_W", "iip3_dBm", "eta_p", "shark_fin", "fold_dBm",
    "status", "error", "config_hash",
]
STARK_COLUMNS = [
    "flux", "nbar", "p_in_W", "p_in_dBm", "stark_MHz", "stark_oracle_MHz", "error", "config_hash",
]
TRACE_COLUMNS = ["step", "stage", "flux", "delta_MHz", "p1db_dBm", "n_p", "config_hash"]

REFINE_ROUNDS = 3
PENALTY_DBM = 1e3


def _error_text(e: Exception) -> str:
    return f"{type(e).__name__}: {e}"


class SweepRunner:
    """Runs one CLI command against a validated Config"""

    def __init__(self, config: Config, command: str = "sweep",
                 metrics: Optional[MetricsCollector] = None, warm_start: bool = True):
        self.config = config
        self.command = command
        self.warm_start = warm_start
        self.circuit = config.circuit_spec()
        self.config_hash = config.config_hash()
        self.metrics = metrics or MetricsCollector(command)
        self.logger = logging.getLogger(f"SweepRunner-{command}")

    def _map(self, func, items):
        items = list(items)
        workers = max(1, int(self.config.worker_count))
        if workers == 1 or len(items) < 2:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))

    def _delta(self, delta_MHz: float) -> float:
        """Physical detuning of a grid value, including the calibration offset"""
        return mhz_to_rad(delta_MHz + self.config.frequency_offset_MHz)

    def _finish(self, result: SweepResult) -> SweepResult:
        result.sort_rows()
        for row in result.rows:
            self.metrics.record_row(result.name, row.get("error"))
        self.logger.info(f"{result.name}: {len(result.rows)} rows, {result.flagged_rows} flagged")
        return result

    # ---- flux sweep ------------------------------------------------------

    def _modes_along(self, flux_grid) -> List[Tuple[float, Optional[ModeParams], Optional[str]]]:
        out = []
        prev = None
        for flux in flux_grid:
            try:
                mode = solve_mode(float(flux), self.circuit, prev_phi_min=prev)
                prev = mode.coeffs.phi_min if self.warm_start else None
                out.append((float(flux), mode, None))
            except SpaError as e:
                self.logger.error(f"mode at flux {flux}: {e}")
                out.append((float(flux), None, _error_text(e)))
        return out

    def _operating_point(self, flux: float, delta: float, mode: ModeParams):
        n_p = np_for_gain(self.config.target_gain, flux, delta, mode, self.config.max_pump_photons)
        return effective_params(flux, delta, n_p, mode)

    def _flux_row(self, entry) -> Dict[str, object]:
        flux, mode, error = entry
        row: Dict[str, object] = {"flux": flux, "error": error or "", "config_hash": self.config_hash}
        if mode is None:
            return row
        c = mode.coeffs
        row.update({
            "omega_a_GHz": rad_to_ghz(mode.omega_a),
            "kappa_MHz": rad_to_mhz(mode.kappa),
            "g3_MHz": rad_to_mhz(mode.g3),
            "g4_MHz": rad_to_mhz(mode.g4),
            "g4_star_MHz": rad_to_mhz(mode.g4_star),
            "K_MHz": rad_to_mhz(12.0 * mode.g4_star),
            "Z1_ohm": mode.Z1,
            "phi_min": c.phi_min,
            "c2": c.c2, "c3": c.c3, "c4": c.c4,
        })
        try:
            model = self._operating_point(flux, self._delta(0.0), mode)
            G0 = small_signal_gain(model)
            compression = p1db(model)
            imd = imd_result(G0, model)
            row.update({
                "n_p": model.n_p,
                "G0_dB": linear_to_db(G0),
                "p1db_W": compression,
                "p1db_dBm": watts_to_dbm(compression),
                "iip3_W": imd.iip3,
                "iip3_dBm": imd.iip3_dbm,
                "p1db_status": "ok",
            })
        except (GainUnreachable, NoSolution, Unbounded) as e:
            row["p1db_status"] = _error_text(e)
        except SpaError as e:
            self.logger.error(f"operating point at flux {flux}: {e}")
            row["error"] = _error_text(e)
        return row

    def flux_sweep(self) -> SweepResult:
        with self.metrics.phase("flux_sweep"):
            entries = self._modes_along(self.config.flux_grid)
            rows = self._map(self._flux_row, entries)
        result = SweepResult(name="flux_sweep", columns=FLUX_COLUMNS, rows=rows,
                             config_hash=self.config_hash, key_columns=("flux",))
        crossing = g4_star_zero_crossing(rows)
        if crossing is not None:
            result.extra["g4_star_zero_flux"] = crossing
        return self._finish(result)

    # ---- stability map ---------------------------------------------------

    def _mode_at(self, flux: float, higher: bool = False) -> ModeParams:
        return solve_mode(float(flux), self.circuit, higher=higher)

    def _stability_column(self, args) -> List[Dict[str, object]]:
        flux, mode, delta_MHz = args
        delta = self._delta(delta_MHz)
        rows = []
        for n_p in self.config.np_grid:
            row: Dict[str, object] = {"flux": flux, "delta_MHz": float(delta_MHz), "n_p": float(n_p),
                                      "error": "", "config_hash": self.config_hash}
            try:
                label = classify_stability(delta, n_p, flux, mode)
                row["delta_b_MHz"] = rad_to_mhz(label.delta_b)
                row["region"] = label.label
                if label.region is not StabilityRegion.REGION_II:
                    model = effective_params(flux, delta, n_p, mode)
                    row["G0_dB"] = linear_to_db(small_signal_gain(model))
            except SpaError as e:
                # beyond threshold the origin has no finite gain; label stands
                if "region" not in row:
                    row["error"] = _error_text(e)
            rows.append(row)
        return rows

    def _gain_locus_point(self, args) -> Optional[Tuple[float, float]]:
        flux, mode, delta_MHz = args
        try:
            n_p = np_for_gain(self.config.target_gain, flux, self._delta(delta_MHz), mode,
                              self.config.max_pump_photons)
        except GainUnreachable:
            return None
        return float(delta_MHz), n_p

    def stability_map(self, flux: float) -> SweepResult:
        mode = self._mode_at(flux)
        cells = [(float(flux), mode, d) for d in self.config.delta_grid_MHz]
        with self.metrics.phase("stability_map"):
            columns = self._map(self._stability_column, cells)
            locus = [p for p in self._map(self._gain_locus_point, cells) if p is not None]
        rows = [row for column in columns for row in column]
        offset = self.config.frequency_offset_MHz
        deltas = [self._delta(d) for d in self.config.delta_grid_MHz]
        raw = boundary_polylines(deltas, flux, mode, max(self.config.np_grid))
        polylines = {name: [(rad_to_mhz(d) - offset, n) for d, n in line] for name, line in raw.items()}
        locus_name = f"G0={self.config.target_gain_dB:g}dB"
        polylines[locus_name] = locus
        result = SweepResult(name="stability_map", columns=STABILITY_COLUMNS, rows=rows,
                             config_hash=self.config_hash, key_columns=("flux", "delta_MHz", "n_p"),
                             polylines=polylines)
        if locus:
            result.extra["gain_locus_delta_max_MHz"] = max(d for d, _ in locus)
            result.extra["gain_locus_delta_min_MHz"] = min(d for d, _ in locus)
        result.extra["regions_present"] = sorted({r["region"] for r in rows if r.get("region")})
        return self._finish(result)

    # ---- saturation map --------------------------------------------------

    def _saturation_rows(self, args) -> List[Dict[str, object]]:
        flux, mode, delta_MHz = args
        base: Dict[str, object] = {"flux": flux, "delta_MHz": float(delta_MHz), "error": "",
                                   "config_hash": self.config_hash}
        try:
            model = self._operating_point(flux, self._delta(delta_MHz), mode)
        except GainUnreachable as e:
            return [dict(base, status=_error_text(e))]
        except SpaError as e:
            self.logger.error(f"operating point at flux {flux}, delta {delta_MHz} MHz: {e}")
            return [dict(base, error=_error_text(e))]

        G0 = small_signal_gain(model)
        base.update({"n_p": model.n_p, "G0_dB": linear_to_db(G0), "status": "ok"})
        try:
            compression = p1db(model)
            base.update({"p1db_W": compression, "p1db_dBm": watts_to_dbm(compression),
                         "p1db_exact_dBm": watts_to_dbm(p1db(model, exact=True))})
            imd = imd_result(G0, model)
            base.update({"iip3_W": imd.iip3, "iip3_dBm": imd.iip3_dbm})
            if self.config.kappa_pump is not None:
                base["eta_p"] = power_efficiency(G0, compression, model=model,
                                                 kappa_pump=self.config.kappa_pump)
            if self.config.undressed_p1db:
                base["p1db_undressed_dBm"] = watts_to_dbm(
                    max(input_power_for_gain_undressed(G0 / ONE_DB, G0, model)))
        except SpaError as e:
            base["status"] = _error_text(e)

        p_grid = [dbm_to_watts(p) for p in self.config.pin_grid_dBm]
        try:
            curve = saturation_curve(model, p_grid, self.config.gain_ceiling, self.config.target_gain)
        except SpaError as e:
            self.logger.error(f"saturation curve at delta {delta_MHz} MHz: {e}")
            return [dict(base, error=_error_text(e))]
        base["shark_fin"] = curve.shark_fin
        if curve.low_branch_end is not None:
            base["fold_dBm"] = watts_to_dbm(curve.low_branch_end)
        if curve.p1db is not None:
            base["p1db_curve_dBm"] = watts_to_dbm(curve.p1db)

        rows = []
        for p_dbm, p_w, gains in zip(self.config.pin_grid_dBm, p_grid, curve.branches):
            row = dict(base, p_in_dBm=float(p_dbm), p_in_W=p_w, branch_count=len(gains))
            ordered = [linear_to_db(g) for g in gains]
            if ordered:
                row["gain_low_dB"] = ordered[0]
                row["gain_high_dB"] = ordered[-1]
            if len(ordered) == 3:
                row["gain_mid_dB"] = ordered[1]
            rows.append(row)
        return rows

    def saturation_map(self, flux: float) -> SweepResult:
        mode = self._mode_at(flux)
        cells = [(float(flux), mode, d) for d in self.config.delta_grid_MHz]
        with self.metrics.phase("saturation_map"):
            blocks = self._map(self._saturation_rows, cells)
        rows = [row for block in blocks for row in block]
        result = SweepResult(name="saturation_map", columns=SATURATION_COLUMNS, rows=rows,
                             config_hash=self.config_hash)
        reachable = sorted({r["delta_MHz"] for r in rows if "n_p" in r})
        if reachable:
            result.extra["reachable_delta_min_MHz"] = reachable[0]
            result.extra["reachable_delta_max_MHz"] = reachable[-1]
            result.extra["reachable_window_MHz"] = reachable[-1] - reachable[0]
        return self._finish(result)

    # ---- drive Stark shift -----------------------------------------------

    def stark_oracle(self, flux: float) -> SweepResult:
        mode = self._mode_at(flux, higher=True)
        omega_d = mode.omega_a + mhz_to_rad(self.config.stark_drive_offset_MHz)
        per_watt = drive_photon_number(1.0, omega_d, mode)
        with self.metrics.phase("stark_oracle"):
            curve = stark_shift_curve(flux, omega_d, self.config.nbar_grid, mode,
                                      oracle_circuit=self.circuit if self.config.oracle_enabled else None)
        rows = []
        for nbar, shift, *oracle_shift in curve:
            p_w = nbar / per_watt
            rows.append({
                "flux": float(flux), "nbar": nbar, "p_in_W": p_w, "p_in_dBm": watts_to_dbm(p_w),
                "stark_MHz": rad_to_mhz(shift),
                "stark_oracle_MHz": rad_to_mhz(oracle_shift[0]) if oracle_shift else None,
                "error": "", "config_hash": self.config_hash,
            })
        result = SweepResult(name="stark_oracle", columns=STARK_COLUMNS, rows=rows,
                             config_hash=self.config_hash, key_columns=("flux", "nbar"))
        return self._finish(result)

    # ---- Kerr-free point -------------------------------------------------

    def _p1db_dbm(self, flux: float, delta_MHz: float, mode: Optional[ModeParams] = None):
        """(P1dB in dBm, n_p) at the target gain, NaN where undefined"""
        try:
            mode = mode or self._mode_at(flux)
            model = self._operating_point(flux, self._delta(delta_MHz), mode)
            return watts_to_dbm(p1db(model)), model.n_p
        except SpaError:
            return math.nan, math.nan

    def kerr_free_point(self, trace: Optional[list] = None) -> Tuple[float, float, float, float]:
        """Coarse (flux, delta) scan of P1dB then alternating bounded refinement"""
        trace = trace if trace is not None else []
        fluxes = [float(f) for f in self.config.flux_grid]
        deltas = [float(d) for d in self.config.delta_grid_MHz]
        modes = {f: m for f, m, _ in self._modes_along(fluxes)}

        def coarse(flux):
            mode = modes.get(flux)
            if mode is None:
                return [(math.nan, math.nan)] * len(deltas)
            return [self._p1db_dbm(flux, d, mode) for d in deltas]

        with self.metrics.phase("kerr_free_coarse"):
            table = self._map(coarse, fluxes)
        values = np.array([[v for v, _ in row] for row in table])
        for flux, row in zip(fluxes, table):
            for d, (v, n) in zip(deltas, row):
                trace.append(("coarse", flux, d, v, n))
        if not np.isfinite(values).any():
            raise SearchFailed("no finite P1dB anywhere on the (flux, delta) grid")

        i, j = np.unravel_index(int(np.nanargmax(values)), values.shape)
        flux, delta = fluxes[i], deltas[j]
        best = float(values[i, j])
        flux_step = (fluxes[-1] - fluxes[0]) / max(len(fluxes) - 1, 1)
        delta_step = (deltas[-1] - deltas[0]) / max(len(deltas) - 1, 1)

        def objective(value, axis):
            f, d = (value, delta) if axis == "flux" else (flux, value)
            p, n = self._p1db_dbm(f, d)
            trace.append((f"refine_{axis}", f, d, p, n))
            return -p if math.isfinite(p) else PENALTY_DBM

        with self.metrics.phase("kerr_free_refine"):
            for _ in range(REFINE_ROUNDS):
                for axis, center, step, lo, hi in (
                        ("flux", flux, flux_step, fluxes[0], fluxes[-1]),
                        ("delta", delta, delta_step, deltas[0], deltas[-1])):
                    bounds = (max(lo, center - step), min(hi, center + step))
                    if not bounds[1] > bounds[0]:
                        continue
                    found = minimize_scalar(objective, bounds=bounds, method="bounded",
                                            args=(axis,), options={"xatol": 1e-6 * max(step, 1e-9)})
                    if found.fun < -best:
                        best = -float(found.fun)
                        if axis == "flux":
                            flux = float(found.x)
                        else:
                            delta = float(found.x)
        _, n_p = self._p1db_dbm(flux, delta)
        self.logger.info(f"Kerr-free point: flux {flux:.5f}, delta {delta:.3f} MHz, "
                         f"P1dB {best:.2f} dBm, n_p {n_p:.1f}")
        return flux, delta, best, n_p

    def kerr_free_trace(self, trace: list) -> SweepResult:
        rows = [{"step": k, "stage": stage, "flux": f, "delta_MHz": d, "p1db_dBm": p, "n_p": n,
                 "config_hash": self.config_hash}
                for k, (stage, f, d, p, n) in enumerate(trace)]
        return SweepResult(name="kerr_free_trace", columns=TRACE_COLUMNS, rows=rows,
                           config_hash=self.config_hash, key_columns=("step",))


def g4_star_zero_crossing(rows: List[Dict[str, object]]) -> Optional[float]:
    """First sign change of g4* along a flux sweep, linearly interpolated"""
    points = [(r["flux"], r["g4_star_MHz"]) for r in rows if "g4_star_MHz" in r]
    points.sort()
    for (f0, g0), (f1, g1) in zip(points, points[1:]):
        if g0 == 0:
            return f0
        if g0 * g1 < 0:
            return f0 + (f1 - f0) * g0 / (g0 - g1)
    return None


def run_flux_sweep(config: Config, metrics: Optional[MetricsCollector] = None,
                   warm_start: bool = True) -> SweepResult:
    return SweepRunner(config, "flux-sweep", metrics, warm_start).flux_sweep()


def run_stability_map(config: Config, flux: float, metrics: Optional[MetricsCollector] = None) -> SweepResult:
    return SweepRunner(config, "stability-map", metrics).stability_map(flux)


def run_saturation_map(config: Config, flux: float, metrics: Optional[MetricsCollector] = None) -> SweepResult:
    return SweepRunner(config, "saturation-map", metrics).saturation_map(flux)


def run_stark_oracle(config: Config, flux: float, metrics: Optional[MetricsCollector] = None) -> SweepResult:
    return SweepRunner(config, "oracle", metrics).stark_oracle(flux)


def find_kerr_free_point(config: Config, trace: Optional[list] = None,
                         metrics: Optional[MetricsCollector] = None) -> Tuple[float, float, float, float]:
    return SweepRunner(config, "kerr-free", metrics).kerr_free_point(trace)
