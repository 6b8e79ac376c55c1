import hashlib
import json
import logging
import os
from typing import Any, Dict, List, Optional

from errors import ConfigError, InvalidSpec
from models import CircuitSpec, SnailSpec
from utils.units import db_to_linear, ghz_to_rad, mhz_to_rad

logger = logging.getLogger("Config")

# keys that do not change any emitted number
_NON_PHYSICS_KEYS = ("output_dir", "worker_count")


class Config:
    """Configuration manager for SPA simulations"""

    def __init__(self, config_file: str = None):
        # Device settings (fitted device)
        self.Zc_ohm = 45.8
        self.LJ_pH = 38.0
        self.alpha = 0.065
        self.M = 20
        self.omega0_GHz = 16.0
        self.kappa_MHz = 200.0
        self.kappa_table: Optional[List[List[float]]] = None
        self.allow_alpha_override = False

        # Operating point
        self.target_gain_dB = 20.0
        self.max_pump_photons = 2e4
        self.gain_ceiling_dB = 50.0
        self.kappa_pump_MHz: Optional[float] = None
        self.frequency_offset_MHz = 0.0
        self.undressed_p1db = False

        # Sweep grids
        self.flux_grid = [round(0.05 + 0.01 * i, 4) for i in range(41)]
        self.delta_grid_MHz = [float(d) for d in range(-500, 501, 10)]
        self.pin_grid_dBm = [round(-150.0 + 0.5 * i, 4) for i in range(141)]
        self.np_grid = [float(n) for n in range(0, 5001, 50)]
        self.nbar_grid = [0.0, 50.0, 100.0, 200.0, 400.0, 800.0]

        # Oracle settings
        self.oracle_enabled = True
        self.stark_drive_offset_MHz = 1000.0

        # Output settings
        self.output_dir = "output"
        self.worker_count = 4

        if config_file:
            self.load_from_file(config_file)

        # Environment overrides file values
        self.load_from_env()

    def load_from_file(self, file_path: str):
        """Load configuration from JSON file; unknown keys are logged and ignored"""
        try:
            with open(file_path, 'r') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file {file_path} not found")
        except json.JSONDecodeError as e:
            raise ConfigError(f"error parsing config file {file_path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        known = self.to_dict()
        for key, value in data.items():
            if key not in known:
                logger.warning(f"ignoring unknown config key {key!r}")
                continue
            setattr(self, key, value)

    def load_from_env(self):
        """Load overrides from SPA_* environment variables"""
        overrides = (
            ('SPA_OUTPUT_DIR', 'output_dir', str),
            ('SPA_WORKER_COUNT', 'worker_count', int),
            ('SPA_TARGET_GAIN_DB', 'target_gain_dB', float),
            ('SPA_MAX_PUMP_PHOTONS', 'max_pump_photons', float),
        )
        for env_name, attr, cast in overrides:
            raw = os.getenv(env_name)
            if raw is None:
                continue
            try:
                setattr(self, attr, cast(raw))
            except ValueError:
                raise ConfigError(f"{env_name}={raw!r} is not a valid {cast.__name__}")

    def apply_overrides(self, flux: Optional[float] = None, delta_MHz: Optional[float] = None,
                        gain_dB: Optional[float] = None, out: Optional[str] = None):
        """CLI flags; a single flux or detuning replaces the corresponding grid"""
        if flux is not None:
            self.flux_grid = [float(flux)]
        if delta_MHz is not None:
            self.delta_grid_MHz = [float(delta_MHz)]
        if gain_dB is not None:
            self.target_gain_dB = float(gain_dB)
        if out is not None:
            self.output_dir = out

    def validate(self):
        for name in ("Zc_ohm", "LJ_pH", "omega0_GHz", "kappa_MHz", "max_pump_photons"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not value > 0:
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        if int(self.worker_count) < 1:
            raise ConfigError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.target_gain_dB <= 0:
            raise ConfigError("target_gain_dB must be positive")
        if self.gain_ceiling_dB <= self.target_gain_dB:
            raise ConfigError("gain_ceiling_dB must exceed target_gain_dB")
        for name in ("flux_grid", "delta_grid_MHz", "pin_grid_dBm", "np_grid", "nbar_grid"):
            grid = getattr(self, name)
            if not isinstance(grid, list) or not grid:
                raise ConfigError(f"{name} must be a non-empty list")
            if any(b <= a for a, b in zip(grid, grid[1:])):
                raise ConfigError(f"{name} must be strictly increasing")
        if any(not 0 <= f <= 0.5 for f in self.flux_grid):
            raise ConfigError("flux_grid values must lie in [0, 0.5] flux quanta")
        try:
            self.circuit_spec()
        except InvalidSpec as e:
            raise ConfigError(str(e))
        return self

    def snail_spec(self) -> SnailSpec:
        return SnailSpec.create(self.LJ_pH, self.alpha, self.M, self.allow_alpha_override)

    def circuit_spec(self) -> CircuitSpec:
        if self.kappa_table:
            kappa = tuple((float(f), mhz_to_rad(k)) for f, k in self.kappa_table)
        else:
            kappa = mhz_to_rad(self.kappa_MHz)
        return CircuitSpec(Z_c=float(self.Zc_ohm), omega0=ghz_to_rad(self.omega0_GHz),
                           kappa=kappa, snail=self.snail_spec())

    @property
    def target_gain(self) -> float:
        return db_to_linear(self.target_gain_dB)

    @property
    def gain_ceiling(self) -> float:
        return db_to_linear(self.gain_ceiling_dB)

    @property
    def kappa_pump(self) -> Optional[float]:
        return None if self.kappa_pump_MHz is None else mhz_to_rad(self.kappa_pump_MHz)

    def config_hash(self) -> str:
        """sha256 of the physics-relevant settings"""
        payload = {k: v for k, v in self.to_dict().items() if k not in _NON_PHYSICS_KEYS}
        encoded = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(encoded.encode("utf-8")).hexdigest()

    def to_dict(self) -> Dict[str, Any]:
        """Export configuration as dictionary"""
        return {k: v for k, v in self.__dict__.items()
                if not k.startswith('_')}

    def save_to_file(self, file_path: str):
        with open(file_path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
