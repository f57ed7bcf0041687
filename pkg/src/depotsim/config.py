"""Scenario configuration: flat `section.key = value` text files.

An empty file is a complete, runnable default scenario. Unknown keys are
errors (no silent typo acceptance); every physical value re-validates through
the parameter types it feeds. `scenario.bmi` presets apply before explicit
keys, so explicit keys always win.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import params as pr
from .flow import WATER_VISCOSITY, InjectionProtocol
from .mesh import AxiMesh, build_graded_mesh
from .params import ConfigurationError, PhCurve, PhysicalConstants

_DRUG_PRESETS = ("ipilimumab_like", "igg1_like")
_BMI_PRESETS = {
    "high": {"layers.adipose_cm": 1.5, "protocol.depth_cm": 0.8},
    "low": {"layers.adipose_cm": 0.6, "protocol.depth_cm": 0.5},
}

#: key -> (python type, default). The single source of truth for the format.
SCHEMA: dict[str, tuple[type, object]] = {
    "geometry.radius_cm": (float, 5.0),
    "geometry.height_cm": (float, 5.0),
    "layers.dermis_cm": (float, 0.2),
    "layers.adipose_cm": (float, 1.5),
    "layers.porosity": (float, 0.1),
    "layers.kappa_dermis_cm2": (float, 1.0e-10),
    "layers.kappa_adipose_cm2": (float, 1.0e-9),
    "layers.kappa_muscle_cm2": (float, 1.0e-11),
    "layers.slv_dermis_per_cm": (float, 70.0),
    "layers.slv_adipose_fraction": (float, 0.05),
    "mesh.fine_nr": (int, 200),
    "mesh.fine_nz": (int, 200),
    "mesh.fine_grading": (float, 1.01),
    "mesh.coarse_nr": (int, 80),
    "mesh.coarse_nz": (int, 80),
    "protocol.depth_cm": (float, 0.8),
    "protocol.volume_ml": (float, 1.0),
    "protocol.duration_s": (float, 5.0),
    "protocol.ramp_s": (float, 0.1),
    "protocol.source_radius_cm": (float, 0.1065),
    "formulation.drug": (str, "ipilimumab_like"),
    "formulation.mg_per_ml": (float, 100.0),
    "formulation.molar_mass_g_per_mol": (float, 150000.0),
    "formulation.buffer_ph": (float, 6.0),
    "curves.charge_csv": (str, ""),
    "curves.ka_csv": (str, ""),
    "curves.kd_csv": (str, ""),
    "species.d_na_cm2_s": (float, 1.33e-5),
    "species.d_cl_cm2_s": (float, 2.03e-5),
    "species.d_h_cm2_s": (float, 9.31e-5),
    "species.d_mab_cm2_s": (float, 1.0e-6),
    "species.c_na_init": (float, 1.4e-4),
    "species.c_h_init": (float, 4.0e-11),
    "constants.faraday": (float, 96485.0),
    "constants.gas_constant": (float, 8.314),
    "constants.temperature_k": (float, 293.0),
    "flow.viscosity": (float, WATER_VISCOSITY),
    "starling.l_pb": (float, 1.0e-6),
    "starling.l_pl": (float, 6.0e-5),
    "starling.sbv_per_cm": (float, 70.0),
    "starling.p_b": (float, 0.35),
    "starling.p_l": (float, 0.0),
    "starling.sigma_r": (float, 0.3),
    "starling.pi_b": (float, 0.35),
    "starling.pi_i": (float, 0.15),
    "binding.b_max_mol_per_cm3": (float, 1.0e-9),
    "binding.k_e_per_s": (float, 0.0),
    "phases.short_dt_s": (float, 0.02),
    "phases.short_horizon_s": (float, 10.0),
    "phases.long_dt_min_s": (float, 1.0),
    "phases.long_dt_max_s": (float, 60.0),
    "phases.long_horizon_h": (float, 36.0),
    "output.cadence_s": (float, 0.1),
    "output.long_cadence_s": (float, 600.0),
    "output.dir": (str, ""),
    "scenario.bmi": (str, ""),
}


def _parse_value(key: str, raw: str, lineno: int):
    typ, _ = SCHEMA[key]
    raw = raw.strip()
    try:
        if typ is int:
            as_float = float(raw)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigurationError(
            f"line {lineno}: cannot parse {raw!r} as {typ.__name__} for {key}"
        ) from None


def parse_config_text(text: str) -> dict:
    """Key/value dict from config text; defaults fill whatever is absent."""
    explicit: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'section.key = value'")
        key, raw = (s.strip() for s in stripped.split("=", 1))
        if key not in SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in explicit:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        explicit[key] = _parse_value(key, raw, lineno)

    values = {k: default for k, (_, default) in SCHEMA.items()}
    bmi = str(explicit.get("scenario.bmi", "")).lower()
    if bmi:
        if bmi not in _BMI_PRESETS:
            raise ConfigurationError(f"scenario.bmi must be 'high' or 'low', got {bmi!r}")
        values.update(_BMI_PRESETS[bmi])
    values.update(explicit)
    return values


@dataclass
class SimulationConfig:
    """Validated scenario; factory methods build the physics objects."""

    values: dict

    def __post_init__(self):
        self.validate()

    # -- accessors ---------------------------------------------------------
    def __getitem__(self, key: str):
        return self.values[key]

    def replace(self, **overrides) -> "SimulationConfig":
        """New config with dotted keys replaced (keys use _ for . here)."""
        vals = dict(self.values)
        for k, v in overrides.items():
            key = k.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigurationError(f"unknown key {key!r}")
            vals[key] = SCHEMA[key][0](v)
        return SimulationConfig(vals)

    def with_values(self, updates: dict) -> "SimulationConfig":
        vals = dict(self.values)
        for key, v in updates.items():
            if key not in SCHEMA:
                raise ConfigurationError(f"unknown key {key!r}")
            vals[key] = SCHEMA[key][0](v)
        return SimulationConfig(vals)

    # -- validation --------------------------------------------------------
    def validate(self):
        v = self.values
        unknown = set(v) - set(SCHEMA)
        if unknown:
            raise ConfigurationError(f"unknown keys: {sorted(unknown)}")
        for key in SCHEMA:
            if key not in v:
                raise ConfigurationError(f"missing key {key}")
        non_negative = {
            "starling.l_pb", "starling.l_pl", "starling.sbv_per_cm",
            "starling.p_b", "starling.p_l", "starling.sigma_r",
            "starling.pi_b", "starling.pi_i", "binding.k_e_per_s",
            "formulation.mg_per_ml", "layers.slv_dermis_per_cm",
            "layers.slv_adipose_fraction",
        }
        for key, (typ, _) in SCHEMA.items():
            if typ not in (int, float):
                continue
            x = float(v[key])
            if key in non_negative:
                if x < 0:
                    raise ConfigurationError(f"{key} must be >= 0, got {v[key]}")
            elif x <= 0:
                raise ConfigurationError(f"{key} must be > 0, got {v[key]}")
        if v["formulation.drug"] not in _DRUG_PRESETS and not v["curves.charge_csv"]:
            raise ConfigurationError(
                f"formulation.drug must be one of {_DRUG_PRESETS} "
                "unless explicit curve CSVs are given")
        if not 3.0 <= v["formulation.buffer_ph"] <= 12.0:
            raise ConfigurationError("formulation.buffer_ph must lie in [3, 12]")
        if v["phases.long_dt_min_s"] > v["phases.long_dt_max_s"]:
            raise ConfigurationError("phases.long_dt_min_s exceeds long_dt_max_s")
        if v["phases.short_horizon_s"] < v["protocol.duration_s"]:
            raise ConfigurationError("short horizon must cover the injection")
        if v["protocol.depth_cm"] >= v["geometry.height_cm"]:
            raise ConfigurationError("injection depth exceeds the domain height")
        # building the parameter objects runs their own invariant checks
        self.layers()
        self.constants()
        self.starling()
        self.protocol()

    # -- factories ---------------------------------------------------------
    def constants(self) -> PhysicalConstants:
        v = self.values
        return PhysicalConstants(v["constants.faraday"], v["constants.gas_constant"],
                                 v["constants.temperature_k"])

    def layers(self) -> pr.TissueLayers:
        v = self.values
        dermis = v["layers.dermis_cm"]
        adipose = v["layers.adipose_cm"]
        muscle = v["geometry.height_cm"] - dermis - adipose
        if muscle <= 0:
            raise ConfigurationError("layers exceed the domain height")
        slv_dermis = v["layers.slv_dermis_per_cm"]
        return pr.TissueLayers(
            layers=(
                pr.TissueLayer("muscle", muscle, v["layers.kappa_muscle_cm2"], 0.0),
                pr.TissueLayer("adipose", adipose, v["layers.kappa_adipose_cm2"],
                               v["layers.slv_adipose_fraction"] * slv_dermis),
                pr.TissueLayer("dermis-epidermis", dermis,
                               v["layers.kappa_dermis_cm2"], slv_dermis),
            ),
            porosity=v["layers.porosity"],
        )

    def starling(self) -> pr.StarlingParams:
        v = self.values
        return pr.StarlingParams(
            l_pb=v["starling.l_pb"], l_pl=v["starling.l_pl"],
            sbv=v["starling.sbv_per_cm"], p_b=v["starling.p_b"],
            p_l=v["starling.p_l"], sigma_r=v["starling.sigma_r"],
            pi_b=v["starling.pi_b"], pi_i=v["starling.pi_i"])

    def protocol(self) -> InjectionProtocol:
        v = self.values
        return InjectionProtocol(
            depth=v["protocol.depth_cm"], volume=v["protocol.volume_ml"],
            duration=v["protocol.duration_s"], ramp_time=v["protocol.ramp_s"],
            source_radius=v["protocol.source_radius_cm"])

    def curves(self) -> tuple[PhCurve, PhCurve, PhCurve]:
        v = self.values
        if v["curves.charge_csv"] or v["curves.ka_csv"] or v["curves.kd_csv"]:
            paths = (v["curves.charge_csv"], v["curves.ka_csv"], v["curves.kd_csv"])
            if not all(paths):
                raise ConfigurationError(
                    "curves.charge_csv, curves.ka_csv, curves.kd_csv must all be set")
            return tuple(PhCurve.from_csv(Path(p)) for p in paths)
        return pr.load_drug_curves(v["formulation.drug"])

    def binding(self) -> pr.BindingParams:
        _, ka, kd = self.curves()
        v = self.values
        return pr.BindingParams(ka_curve=ka, kd_curve=kd,
                                k_e=v["binding.k_e_per_s"],
                                b_max=v["binding.b_max_mol_per_cm3"])

    def charge_curve(self) -> PhCurve:
        return self.curves()[0]

    def syringe(self) -> dict[str, float]:
        v = self.values
        charge = self.charge_curve()
        return pr.syringe_composition(
            v["formulation.buffer_ph"], v["formulation.mg_per_ml"],
            v["formulation.molar_mass_g_per_mol"],
            float(charge(v["formulation.buffer_ph"])))

    def species(self) -> pr.SpeciesTable:
        v = self.values
        syr = self.syringe()
        c_na, c_h = v["species.c_na_init"], v["species.c_h_init"]
        return pr.SpeciesTable(
            sodium=pr.SpeciesSpec("Na+", v["species.d_na_cm2_s"], +1.0, c_na, syr["na"]),
            hydrogen=pr.SpeciesSpec("H+", v["species.d_h_cm2_s"], +1.0, c_h, syr["h"]),
            drug=pr.SpeciesSpec("mAb", v["species.d_mab_cm2_s"], 0.0, 0.0, syr["mab"]),
            chloride=pr.SpeciesSpec("Cl-", v["species.d_cl_cm2_s"], -1.0, c_na + c_h),
        )

    def fine_mesh(self) -> AxiMesh:
        v = self.values
        proto = self.protocol()
        return build_graded_mesh(
            v["geometry.radius_cm"], v["geometry.height_cm"],
            v["mesh.fine_nr"], v["mesh.fine_nz"],
            focus=proto.center(v["geometry.height_cm"]),
            grading=v["mesh.fine_grading"])

    def coarse_mesh(self) -> AxiMesh:
        v = self.values
        proto = self.protocol()
        return build_graded_mesh(
            v["geometry.radius_cm"], v["geometry.height_cm"],
            v["mesh.coarse_nr"], v["mesh.coarse_nz"],
            focus=proto.center(v["geometry.height_cm"]), grading=1.0)

    # -- serialization -----------------------------------------------------
    def to_text(self) -> str:
        lines = ["# depotsim scenario (all keys explicit)"]
        for key in sorted(SCHEMA):
            val = self.values[key]
            if isinstance(val, float):
                lines.append(f"{key} = {val!r}")
            else:
                lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def load_config_text(text: str) -> SimulationConfig:
    return SimulationConfig(parse_config_text(text))


def load_config(path) -> SimulationConfig:
    """Load and fully validate a scenario file; empty file = all defaults."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    return load_config_text(path.read_text())


def default_config() -> SimulationConfig:
    return load_config_text("")
