# src/sweep/emitter.py
# CSV tables and a JSON manifest for sweep results. Data files carry no
# wall-clock content; timestamps and run metrics live only in the
# manifest's "metadata" field.

import csv
import json
import logging
import math
import os
from datetime import datetime, timezone
from typing import Dict, Iterable, List, Optional

from config import Config
from models import SweepResult
from utils.metrics import MetricsCollector

logger = logging.getLogger("SweepEmitter")

MANIFEST_NAME = "manifest.json"
FLOAT_FORMAT = ".10g"

COLUMN_DOCS: Dict[str, str] = {
    "flux": "external flux per SNAIL in flux quanta",
    "delta_MHz": "pump detuning omega_p/2 - omega_a over 2pi (grid value)",
    "n_p": "pump photon number",
    "p_in_dBm": "signal input power (dBm, 1 mW reference)",
    "p_in_W": "signal input power (W)",
    "omega_a_GHz": "fundamental mode frequency over 2pi",
    "kappa_MHz": "mode linewidth over 2pi",
    "g3_MHz": "three-wave coefficient g3 over 2pi",
    "g4_MHz": "bare quartic coefficient g4 over 2pi",
    "g4_star_MHz": "effective quartic coefficient g4* over 2pi",
    "K_MHz": "Kerr constant 12 g4* over 2pi",
    "Z1_ohm": "lumped mode impedance",
    "phi_min": "SNAIL potential minimum (rad)",
    "c2": "reduced Taylor coefficient c2", "c3": "reduced Taylor coefficient c3",
    "c4": "reduced Taylor coefficient c4",
    "G0_dB": "small-signal gain",
    "p1db_W": "large-gain closed-form 1 dB compression input power (W)",
    "p1db_dBm": "large-gain closed-form 1 dB compression input power (dBm)",
    "p1db_exact_dBm": "1 dB compression from the exact inversion of the gain relation (dBm)",
    "p1db_curve_dBm": "1 dB compression read from the numeric saturation curve (dBm)",
    "p1db_undressed_dBm": "compression from the undressed closed form (dBm)",
    "iip3_W": "input-referred third-order intercept (W)",
    "iip3_dBm": "input-referred third-order intercept (dBm)",
    "eta_p": "pump power efficiency G0 * P1dB / P_pump",
    "branch_count": "number of self-consistent gains at this input power",
    "gain_low_dB": "lowest self-consistent gain", "gain_mid_dB": "middle (unstable) gain",
    "gain_high_dB": "highest self-consistent gain",
    "shark_fin": "true when some input power carries three gain branches",
    "fold_dBm": "input power where the branch leaving G0 folds back (dBm)",
    "delta_b_MHz": "pump-dressed detuning over 2pi",
    "region": "stability region label",
    "nbar": "drive photon number (x-quadrature)",
    "stark_MHz": "drive Stark shift 24 g4* nbar over 2pi",
    "stark_oracle_MHz": "probe resonance shift in a lab-frame run with the drive on, over 2pi; empty when the oracle is disabled",
    "step": "evaluation index", "stage": "search stage",
    "status": "operating point status (ok or the reason no point exists)",
    "p1db_status": "status of the P1dB column",
    "error": "failure recorded for this row; empty when the row is complete",
    "config_hash": "sha256 of the physics-relevant configuration",
}


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, FLOAT_FORMAT)
    return str(value)


def write_csv(path: str, columns: List[str], rows: Iterable[Dict[str, object]]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])


def write_polylines(path: str, polylines: Dict[str, List[tuple]]):
    rows = [{"boundary": name, "index": k, "delta_MHz": d, "n_p": n}
            for name in sorted(polylines) for k, (d, n) in enumerate(polylines[name])]
    write_csv(path, ["boundary", "index", "delta_MHz", "n_p"], rows)


class SweepEmitter:
    """Writes sweep results into one output directory and keeps its manifest"""

    def __init__(self, output_dir: str, config: Config, metrics: Optional[MetricsCollector] = None):
        self.output_dir = output_dir
        self.config = config
        self.metrics = metrics
        self.files: Dict[str, Dict[str, object]] = {}
        self.results: Dict[str, Dict[str, object]] = {}
        os.makedirs(output_dir, exist_ok=True)

    def emit(self, result: SweepResult, suffix: str = "") -> str:
        """Write result as <name><suffix>.csv (plus polylines) and return the path"""
        stem = f"{result.name}{suffix}"
        path = os.path.join(self.output_dir, f"{stem}.csv")
        write_csv(path, result.columns, result.rows)
        self.files[f"{stem}.csv"] = {
            "rows": len(result.rows),
            "flagged_rows": result.flagged_rows,
            "columns": {c: COLUMN_DOCS.get(c, "") for c in result.columns},
        }
        if result.polylines:
            poly_name = f"{stem}_polylines.csv"
            write_polylines(os.path.join(self.output_dir, poly_name), result.polylines)
            self.files[poly_name] = {"rows": sum(len(v) for v in result.polylines.values())}
        if result.extra:
            self.results[stem] = dict(sorted(result.extra.items()))
        logger.info(f"wrote {path} ({len(result.rows)} rows)")
        return path

    def record(self, name: str, values: Dict[str, object]):
        """Scalar results (e.g. a search optimum) kept in the manifest"""
        self.results[name] = dict(sorted(values.items()))

    def manifest(self) -> Dict[str, object]:
        metadata = {"generated_at": datetime.now(timezone.utc).isoformat()}
        if self.metrics is not None:
            metadata["metrics"] = self.metrics.get_all_metrics()
        return {
            "config": self.config.to_dict(),
            "config_hash": self.config.config_hash(),
            "files": dict(sorted(self.files.items())),
            "results": dict(sorted(self.results.items())),
            "metadata": metadata,
        }

    def write_manifest(self) -> str:
        path = os.path.join(self.output_dir, MANIFEST_NAME)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.manifest(), f, indent=2, sort_keys=True, default=_json_default)
        return path


def _json_default(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if hasattr(value, "tolist"):
        return value.tolist()
    return str(value)
