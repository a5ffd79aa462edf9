"""Configuration loading and validation for the command-line workflow.

A config is a single JSON object with optional blocks `emitter`, `cavity`,
`drive`, `path`, `analysis` and an integer `seed`.  Every omitted key falls
back to the published system parameters, so an empty file reproduces the
paper's numbers.  Validation errors name the offending key; the canonical
serialization (sorted keys, no whitespace) backs a stable config hash.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from . import constants
from .analysis import PathEfficiency
from .atom import EmitterModel, scheme_rates
from .cavity import CavityModel
from .simulator import DriveConfig

TWO_PI = 2 * math.pi


class ConfigError(ValueError):
    """Invalid configuration; `key` points at the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


DEFAULTS = {
    "emitter": {
        "gamma_total_mhz": 11.49,
        "branching": {"s12": constants.BRANCHING_S12,
                      "d32": constants.BRANCHING_D32,
                      "d52": constants.BRANCHING_D52},
        "b_field_gauss": constants.B_FIELD_GAUSS,
    },
    "cavity": {
        "length_mm": 19.906,
        "mirror_roc_mm": 9.984,
        "wavelength_nm": 854.0,
        "t1_ppm": 2.9,
        "t2_ppm": 90.0,
        "scatter_absorb_ppm": 23.0,
    },
    "drive": {
        "rabi_mhz": 14.0,
        "rabi2_mhz": 0.0,
        "detuning_mhz": -403.0,
        "relative_phase_rad": 0.0,
        "duration_us": 400.0,
        "jitter_rate_khz": 10.0,
    },
    "path": {
        "p_el": constants.P_EL,
        "p_fc": constants.P_FC,
        "p_det": constants.P_DET,
        "p_path_err": 0.03,
    },
    "analysis": {
        "bin_us": 1.2,
        "train_slots": 15,
        "train_pulse_us": 200.0,
        "train_gap_us": 60.0,
        "background_window_us": 60.0,
        "bootstrap_resamples": 200,
    },
    "seed": 0,
}

_POSITIVE = {
    "emitter.gamma_total_mhz", "emitter.b_field_gauss",
    "cavity.length_mm", "cavity.mirror_roc_mm", "cavity.wavelength_nm",
    "cavity.t2_ppm",
    "drive.duration_us",
    "analysis.bin_us", "analysis.train_pulse_us",
    "path.p_el", "path.p_fc", "path.p_det",
}
_NON_NEGATIVE = {
    "cavity.t1_ppm", "cavity.scatter_absorb_ppm",
    "drive.rabi_mhz", "drive.rabi2_mhz", "drive.jitter_rate_khz",
    "path.p_path_err",
    "analysis.train_gap_us", "analysis.background_window_us",
    "emitter.branching.s12", "emitter.branching.d32",
    "emitter.branching.d52",
}


def _merge(defaults, override, prefix=""):
    out = {}
    for key, dval in defaults.items():
        path = f"{prefix}{key}"
        if key not in override:
            out[key] = dval
            continue
        oval = override[key]
        if isinstance(dval, dict):
            if not isinstance(oval, dict):
                raise ConfigError(path, "expected an object")
            out[key] = _merge(dval, oval, prefix=f"{path}.")
        else:
            if isinstance(oval, bool) or not isinstance(oval, (int, float)):
                raise ConfigError(path, "expected a number")
            out[key] = oval
    for key in override:
        if key not in defaults:
            raise ConfigError(f"{prefix}{key}", "unknown key")
    return out


def _validate(tree):
    def get(path):
        node = tree
        for part in path.split("."):
            node = node[part]
        return node

    for path in _POSITIVE:
        if get(path) <= 0:
            raise ConfigError(path, f"must be positive, got {get(path)}")
    for path in _NON_NEGATIVE:
        if get(path) < 0:
            raise ConfigError(path, f"must be non-negative, got {get(path)}")
    br = tree["emitter"]["branching"]
    if abs(br["s12"] + br["d32"] + br["d52"] - 1.0) > 1e-3:
        raise ConfigError("emitter.branching", "ratios must sum to one")
    cav = tree["cavity"]
    if cav["length_mm"] >= 2 * cav["mirror_roc_mm"]:
        raise ConfigError("cavity.length_mm",
                          "unstable geometry: need l < 2 R_C")
    if not isinstance(tree["seed"], int):
        raise ConfigError("seed", "must be an integer")


@dataclass(frozen=True)
class GlobalConfig:
    """Validated configuration tree plus model constructors."""

    tree: dict

    @classmethod
    def from_dict(cls, data):
        tree = _merge(DEFAULTS, data)
        _validate(tree)
        return cls(tree=tree)

    def to_dict(self):
        return json.loads(self.canonical_json())

    def canonical_json(self):
        return json.dumps(self.tree, sort_keys=True, separators=(",", ":"))

    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @property
    def seed(self):
        return self.tree["seed"]

    def build_emitter(self):
        e = self.tree["emitter"]
        return EmitterModel.default(
            gamma_total=TWO_PI * e["gamma_total_mhz"] * 1e6,
            branching=(e["branching"]["s12"], e["branching"]["d32"],
                       e["branching"]["d52"]),
            b_field=e["b_field_gauss"])

    def build_cavity(self):
        c = self.tree["cavity"]
        return CavityModel.from_parameters(
            length=c["length_mm"] * 1e-3,
            mirror_roc=c["mirror_roc_mm"] * 1e-3,
            wavelength=c["wavelength_nm"] * 1e-9,
            t1=c["t1_ppm"] * 1e-6,
            t2=c["t2_ppm"] * 1e-6,
            scatter_absorb=c["scatter_absorb_ppm"] * 1e-6)

    def build_scheme(self, emitter=None):
        emitter = emitter or self.build_emitter()
        return scheme_rates(emitter, (-1.5, -2.5))

    def build_drive(self, zeeman_split=None):
        d = self.tree["drive"]
        detuning = TWO_PI * d["detuning_mhz"] * 1e6
        duration = d["duration_us"] * 1e-6
        if d["rabi2_mhz"] > 0:
            if zeeman_split is None:
                raise ValueError("bichromatic drive needs the Zeeman split")
            return DriveConfig.bichromatic(
                TWO_PI * d["rabi_mhz"] * 1e6, TWO_PI * d["rabi2_mhz"] * 1e6,
                zeeman_split, detuning=detuning,
                relative_phase=d["relative_phase_rad"],
                pulse_duration=duration)
        return DriveConfig.monochromatic(
            TWO_PI * d["rabi_mhz"] * 1e6, detuning=detuning,
            pulse_duration=duration)

    def jitter_rate(self):
        return TWO_PI * self.tree["drive"]["jitter_rate_khz"] * 1e3

    def build_path(self):
        p = self.tree["path"]
        return PathEfficiency(p_el=p["p_el"], p_fc=p["p_fc"],
                              p_det=p["p_det"], p_path_err=p["p_path_err"])

    def train_windows(self):
        a = self.tree["analysis"]
        step = a["train_pulse_us"] + a["train_gap_us"]
        return [(i * step, i * step + a["train_pulse_us"])
                for i in range(int(a["train_slots"]))]


def load_config(path=None):
    """Read and validate a JSON config; None or an empty file give defaults.

    Parse errors carry line and column; validation errors carry the key.
    """
    if path is None:
        return GlobalConfig.from_dict({})
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.strip():
        data = {}
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(
                str(path), f"JSON parse error at line {err.lineno}, "
                f"column {err.colno}: {err.msg}") from err
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a JSON object")
    return GlobalConfig.from_dict(data)
