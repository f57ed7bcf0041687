"""Physical parameters, unit system, pH curves, and electroneutrality algebra.

Unit system (CGS-pressure hybrid, used everywhere without conversion layers):
    length cm | time s | amount mol | pressure N/cm^2 | energy J
    charge C | potential V | temperature K | concentration mol/cm^3

The only unit conversion in the whole model is the pH one:
    c_H [mol/L] = 1000 * c_H [mol/cm^3]
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

#: Conversion factor between mol/cm^3 and mol/L, used by every pH computation.
MOL_PER_CM3_TO_MOL_PER_L = 1000.0

#: Unit contract for every stored parameter value. Documentation only; no
#: per-field overrides exist anywhere in the package.
UNITS = {
    "length": "cm",
    "time": "s",
    "amount": "mol",
    "pressure": "N/cm^2",
    "energy": "J",
    "charge": "C",
    "potential": "V",
    "temperature": "K",
    "concentration": "mol/cm^3",
}


class ConfigurationError(ValueError):
    """A parameter or configuration value violates its invariants."""


@dataclass(frozen=True)
class PhysicalConstants:
    faraday: float = 96485.0  # C/mol
    gas_constant: float = 8.314  # J/K/mol
    temperature: float = 293.0  # K

    def __post_init__(self):
        for name in ("faraday", "gas_constant", "temperature"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be strictly positive")

    @property
    def rt(self) -> float:
        """Thermal energy R*T in J/mol."""
        return self.gas_constant * self.temperature


class PhCurve:
    """Tabulated pH -> value map with piecewise-linear interpolation.

    Evaluation clamps to the endpoint values outside the sampled pH range,
    so the curve is total on the real line.
    """

    def __init__(self, ph: np.ndarray, values: np.ndarray, name: str = ""):
        ph = np.asarray(ph, dtype=float)
        values = np.asarray(values, dtype=float)
        if ph.ndim != 1 or ph.shape != values.shape:
            raise ConfigurationError("curve samples must be two equal-length 1-D arrays")
        if ph.size < 2:
            raise ConfigurationError("curve needs at least 2 samples")
        if not np.all(np.diff(ph) > 0):
            raise ConfigurationError("curve pH samples must be strictly increasing")
        self.ph = ph
        self.values = values
        self.name = name

    def __call__(self, ph):
        """Evaluate at scalar or array pH (linear interpolation, clamped)."""
        return np.interp(ph, self.ph, self.values)

    @property
    def is_non_increasing(self) -> bool:
        return bool(np.all(np.diff(self.values) <= 0.0))

    def isoelectric_point(self) -> float:
        """pH where a charge curve crosses zero (linear interpolation).

        Raises if the tabulated values never change sign.
        """
        v = self.values
        if v[0] == 0.0:
            return float(self.ph[0])
        sign_change = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) <= 0)[0]
        if sign_change.size == 0:
            raise ConfigurationError(
                f"curve {self.name!r} has no zero crossing; cannot report pI"
            )
        k = int(sign_change[0])
        if v[k] == v[k + 1]:  # flat zero segment
            return float(self.ph[k])
        return float(self.ph[k] - v[k] * (self.ph[k + 1] - self.ph[k]) / (v[k + 1] - v[k]))

    @classmethod
    def from_csv(cls, path, name: str = "") -> "PhCurve":
        """Load a curve from CSV with header ``ph,value``; ``#`` comments allowed."""
        path = Path(path)
        rows = []
        with open(path) as f:
            header = None
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if header is None:
                    header = [c.strip().lower() for c in line.split(",")]
                    if header != ["ph", "value"]:
                        raise ConfigurationError(
                            f"{path}: expected header 'ph,value', got {line!r}"
                        )
                    continue
                cols = line.split(",")
                if len(cols) != 2:
                    raise ConfigurationError(f"{path}: malformed row {line!r}")
                rows.append((float(cols[0]), float(cols[1])))
        if header is None:
            raise ConfigurationError(f"{path}: empty curve file")
        arr = np.array(rows, dtype=float)
        return cls(arr[:, 0], arr[:, 1], name=name or path.stem)


def packaged_curve_path(stem: str) -> Path:
    """Path of a curve CSV shipped with the package (e.g. 'ipilimumab_like_charge')."""
    ref = resources.files("depotsim").joinpath(f"data/{stem}.csv")
    p = Path(str(ref))
    if not p.exists():
        raise ConfigurationError(f"no packaged curve named {stem!r}")
    return p


def load_drug_curves(preset: str) -> tuple["PhCurve", "PhCurve", "PhCurve"]:
    """Load the packaged (charge, ka, kd) curve triple for a drug preset."""
    return (
        PhCurve.from_csv(packaged_curve_path(f"{preset}_charge"), name=f"{preset}_charge"),
        PhCurve.from_csv(packaged_curve_path(f"{preset}_ka"), name=f"{preset}_ka"),
        PhCurve.from_csv(packaged_curve_path(f"{preset}_kd"), name=f"{preset}_kd"),
    )


@dataclass(frozen=True)
class SpeciesSpec:
    """Per-ion physical constants.

    ``valence`` is a constant for the small ions; the drug's pH-dependent
    charge lives in a PhCurve and is evaluated fieldwise by the caller.
    """

    name: str
    diffusivity: float  # cm^2/s
    valence: float  # dimensionless (drug: value at reference pH; curve governs)
    c_init: float  # mol/cm^3
    c_syringe: float = 0.0  # mol/cm^3

    def __post_init__(self):
        if self.diffusivity <= 0:
            raise ConfigurationError(f"diffusivity of {self.name} must be > 0")

    def mobility(self, constants: PhysicalConstants) -> float:
        """Ion mobility mu = D/(R*T), derived, never stored."""
        return self.diffusivity / constants.rt


@dataclass
class SpeciesTable:
    """The four-species system: Na+, H+, drug, and the eliminated Cl-."""

    sodium: SpeciesSpec
    hydrogen: SpeciesSpec
    drug: SpeciesSpec
    chloride: SpeciesSpec  # eliminated via electroneutrality

    def __post_init__(self):
        if self.chloride.valence == 0:
            raise ConfigurationError("eliminated species must have nonzero valence")

    @property
    def transported(self) -> tuple[SpeciesSpec, SpeciesSpec, SpeciesSpec]:
        return (self.sodium, self.hydrogen, self.drug)


@dataclass(frozen=True)
class BindingParams:
    """Matrix-binding kinetics: association/dissociation curves and capacity."""

    ka_curve: PhCurve  # cm^3/mol/s
    kd_curve: PhCurve  # 1/s
    k_e: float = 0.0  # 1/s, elimination of bound drug
    b_max: float = 1.0e-9  # mol/cm^3, bound concentration at saturation

    def __post_init__(self):
        if self.k_e < 0:
            raise ConfigurationError("k_e must be >= 0")
        if self.b_max <= 0:
            raise ConfigurationError("b_max must be > 0")
        probe = np.linspace(3.0, 12.0, 181)
        if np.any(self.ka_curve(probe) < 0) or np.any(self.kd_curve(probe) < 0):
            raise ConfigurationError("rate curves must be >= 0 on pH in [3, 12]")


@dataclass(frozen=True)
class StarlingParams:
    """Blood filtration / lymphatic uptake coefficients."""

    l_pb: float = 1.0e-6  # cm^3/N/s, hydraulic conductivity of blood vessels
    l_pl: float = 6.0e-5  # cm^3/N/s, hydraulic conductivity of lymphatics
    sbv: float = 70.0  # 1/cm, blood vessel area per tissue volume
    p_b: float = 0.35  # N/cm^2, blood capillary pressure
    p_l: float = 0.0  # N/cm^2, lymphatic pressure
    sigma_r: float = 0.3  # reflection coefficient
    pi_b: float = 0.35  # N/cm^2, blood osmotic pressure
    pi_i: float = 0.15  # N/cm^2, interstitial osmotic pressure

    def __post_init__(self):
        if not 0.0 <= self.sigma_r <= 1.0:
            raise ConfigurationError("sigma_r must lie in [0, 1]")


@dataclass(frozen=True)
class TissueLayer:
    name: str
    thickness: float  # cm
    permeability: float  # cm^2
    slv: float  # 1/cm, lymphatic vessel area per tissue volume

    def __post_init__(self):
        if self.thickness <= 0:
            raise ConfigurationError(f"layer {self.name}: thickness must be > 0")
        if self.permeability <= 0:
            raise ConfigurationError(f"layer {self.name}: permeability must be > 0")
        if self.slv < 0:
            raise ConfigurationError(f"layer {self.name}: lymphatic area must be >= 0")


@dataclass
class TissueLayers:
    """Layer stack tiling [0, H] in z; skin surface at z = H (top = dermis)."""

    layers: tuple[TissueLayer, ...]  # ordered bottom (z=0) to top (z=H)
    porosity: float = 0.1  # shared across layers

    def __post_init__(self):
        if not 0 < self.porosity < 1:
            raise ConfigurationError("porosity must lie in (0, 1)")
        if len(self.layers) == 0:
            raise ConfigurationError("need at least one tissue layer")
        bounds = np.concatenate([[0.0], np.cumsum([l.thickness for l in self.layers])])
        self._bounds = bounds

    @property
    def height(self) -> float:
        return float(self._bounds[-1])

    def layer_index(self, z) -> np.ndarray:
        """Index of the layer containing each z (interfaces belong to the upper layer)."""
        z = np.asarray(z, dtype=float)
        idx = np.searchsorted(self._bounds[1:-1], z, side="left")
        return idx

    def permeability_at(self, z) -> np.ndarray:
        kappa = np.array([l.permeability for l in self.layers])
        return kappa[self.layer_index(z)]

    def slv_at(self, z) -> np.ndarray:
        slv = np.array([l.slv for l in self.layers])
        return slv[self.layer_index(z)]


def default_layers(adipose_cm: float = 1.5, porosity: float = 0.1,
                   height: float = 5.0) -> TissueLayers:
    """Three-layer stack (muscle / adipose / dermis-epidermis) of total height H.

    The muscle layer absorbs changes in adipose thickness so the domain height
    stays fixed; the dermis-epidermis stays 0.2 cm.
    """
    dermis = 0.2
    muscle = height - adipose_cm - dermis
    if muscle <= 0:
        raise ConfigurationError("adipose layer too thick for the domain height")
    return TissueLayers(
        layers=(
            TissueLayer("muscle", muscle, 1.0e-11, 0.0),
            TissueLayer("adipose", adipose_cm, 1.0e-9, 0.05 * 70.0),
            TissueLayer("dermis-epidermis", dermis, 1.0e-10, 70.0),
        ),
        porosity=porosity,
    )


def default_species(c_drug_syringe: float = 0.0,
                    c_h_syringe: float = 4.0e-11,
                    drug_valence: float = 0.0) -> SpeciesTable:
    """Species table with physiological initial concentrations."""
    c_na = 1.4e-4  # mol/cm^3
    c_h = 4.0e-11  # mol/cm^3, tissue pH 7.4
    c_cl = c_na + c_h  # electroneutral rest state
    return SpeciesTable(
        sodium=SpeciesSpec("Na+", 1.33e-5, +1.0, c_na, 3.0 * c_na),
        hydrogen=SpeciesSpec("H+", 9.31e-5, +1.0, c_h, c_h_syringe),
        drug=SpeciesSpec("mAb", 1.0e-6, drug_valence, 0.0, c_drug_syringe),
        chloride=SpeciesSpec("Cl-", 2.03e-5, -1.0, c_cl),
    )


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def ph_from_hydrogen(c_h):
    """pH = -log10 of the hydrogen concentration expressed in mol/L.

    Raises on non-positive input; fieldwise callers get the offending node
    indices in the message. Use :func:`tissue_ph` for the clipped variant.
    """
    c = np.asarray(c_h, dtype=float)
    if np.any(c <= 0.0):
        bad = np.nonzero(c <= 0.0)
        if c.ndim == 0:
            raise ValueError(f"non-positive hydrogen concentration {float(c)}")
        raise ValueError(
            f"non-positive hydrogen concentration at node(s) "
            f"{[tuple(int(b[k]) for b in bad) for k in range(min(5, bad[0].size))]}"
        )
    out = -np.log10(MOL_PER_CM3_TO_MOL_PER_L * c)
    return float(out) if np.ndim(c_h) == 0 else out


def charge_at_ph(curve: PhCurve, ph):
    """Drug valence at the given pH (linear interpolation, clamped)."""
    return curve(ph)


def rates_at_ph(binding: BindingParams, ph):
    """(k_a, k_d) at the given pH, same interpolation rule as the charge."""
    return binding.ka_curve(ph), binding.kd_curve(ph)


def recover_chloride(c_na, c_h, c_mab, z_mab, z_cl: float = -1.0):
    """Chloride concentration closing the electroneutrality constraint.

    c_Cl = -(1/z_Cl) * (z_Na c_Na + z_H c_H + z_mAb c_mAb). Negative results
    (possible only for strongly negative drug charge) are reported, not fatal.
    """
    net = np.asarray(c_na) + np.asarray(c_h) + np.asarray(z_mab) * np.asarray(c_mab)
    c_cl = -net / z_cl
    n_neg = int(np.sum(np.asarray(c_cl) < 0.0))
    if n_neg:
        logger.warning("chloride recovery produced %d negative node(s)", n_neg)
    return c_cl


def syringe_composition(buffer_ph: float, mg_per_ml: float, molar_mass: float,
                        z_drug_at_buffer: float) -> dict[str, float]:
    """Per-species syringe concentrations (mol/cm^3) for a formulation.

    Na+ and Cl- ride at three times their physiological levels; H+ follows the
    buffer pH; Cl- closes the electroneutral balance of the injectate.
    """
    if not 3.0 <= buffer_ph <= 12.0:
        raise ConfigurationError("buffer pH must lie in [3, 12]")
    if molar_mass <= 0:
        raise ConfigurationError("molar mass must be > 0")
    if mg_per_ml < 0:
        raise ConfigurationError("formulation concentration must be >= 0")
    c_na = 3.0 * 1.4e-4
    c_h = 10.0 ** (-buffer_ph) / MOL_PER_CM3_TO_MOL_PER_L
    c_mab = (mg_per_ml * 1.0e-3) / molar_mass
    c_cl = c_na + c_h + z_drug_at_buffer * c_mab
    if c_cl < 0:
        raise ConfigurationError(
            "unbalanced formulation: electroneutral chloride would be negative"
        )
    return {"na": c_na, "h": c_h, "mab": c_mab, "cl": c_cl}
