"""Reported quantities: domain and ball averages, plume volume, dose splits.

Everything here is a pure function of a state; the only running totals live
in the orchestrator's dose ledger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import AxiMesh, integrate

#: concentrations at or below this are treated as "no plume left"
PLUME_FLOOR = 1.0e-18  # mol/cm^3

#: the frozen column order of the timeseries CSV
CHANNELS = (
    "pressure_ball_avg",
    "velocity_ball_max",
    "phi_avg",
    "ph_avg",
    "rho_mab_avg",
    "plume_volume_cm3",
    "free_pct",
    "bound_pct",
    "absorbed_pct",
)


def domain_average(fld: np.ndarray, mesh: AxiMesh) -> float:
    """Volume average over the whole cylinder."""
    return integrate(fld, mesh) / mesh.domain_volume


def net_charge_density(c_mab: np.ndarray, z_mab: np.ndarray) -> np.ndarray:
    """Pointwise net charge drug density rho = z * c."""
    return np.asarray(z_mab) * np.asarray(c_mab)


def ball_average(fld: np.ndarray, mesh: AxiMesh, center: tuple[float, float],
                 radius: float) -> float:
    """Volume-weighted average over nodes inside a sphere about `center`."""
    if radius <= 0:
        raise ValueError("ball radius must be positive")
    mask = mesh.ball_mask(center, radius)
    if not np.any(mask):
        raise ValueError("ball contains no mesh nodes; mesh too coarse")
    w = mesh.node_volumes[mask]
    return float(np.sum(np.asarray(fld)[mask] * w) / np.sum(w))


def plume_volume(c_mab: np.ndarray, mesh: AxiMesh) -> float:
    """Axisymmetric volume of the half-maximum region of the free drug.

    Cells cut by the threshold contribute a linearly interpolated fraction,
    which keeps the volume-versus-time curves smooth on coarse meshes.
    """
    c = np.asarray(c_mab, dtype=float)
    c_max = float(c.max(initial=0.0))
    if c_max <= PLUME_FLOOR:
        return 0.0
    thresh = 0.5 * c_max

    corners = np.stack([c[:-1, :-1], c[:-1, 1:], c[1:, :-1], c[1:, 1:]])
    lo = corners.min(axis=0)
    hi = corners.max(axis=0)
    mean = corners.mean(axis=0)

    frac = np.where(lo >= thresh, 1.0, 0.0)
    cut = (lo < thresh) & (hi > thresh)
    if np.any(cut):
        lin = 0.5 + (mean[cut] - thresh) / (hi[cut] - lo[cut])
        frac[cut] = np.clip(lin, 0.0, 1.0)
    return float(np.sum(frac * mesh.cell_volumes))


def dose_fractions(ledger) -> tuple[float, float, float]:
    """(free, bound, absorbed) each as a percentage of the injected dose."""
    if ledger.injected <= 0.0:
        raise ValueError("no dose injected yet; fractions undefined")
    scale = 100.0 / ledger.injected
    return (ledger.free * scale, ledger.bound * scale,
            ledger.absorbed_lymph * scale)


@dataclass
class MetricSeries:
    """Output channels sampled on a strictly increasing time grid."""

    time: list[float] = field(default_factory=list)
    channels: dict[str, list[float]] = field(
        default_factory=lambda: {name: [] for name in CHANNELS})

    def append(self, t: float, **values):
        if self.time and t <= self.time[-1]:
            raise ValueError("metric samples must have strictly increasing time")
        missing = set(CHANNELS) - set(values)
        if missing:
            raise ValueError(f"missing channels: {sorted(missing)}")
        for name in ("free_pct", "bound_pct", "absorbed_pct"):
            if not -1e-9 <= values[name] <= 101.0:
                raise ValueError(f"{name} out of range: {values[name]}")
        self.time.append(float(t))
        for name in CHANNELS:
            self.channels[name].append(float(values[name]))

    def __len__(self) -> int:
        return len(self.time)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.channels[name])

    def at_time(self, t: float) -> dict[str, float]:
        """Channel values at the sample closest to t."""
        if not self.time:
            raise ValueError("empty series")
        k = int(np.argmin(np.abs(np.asarray(self.time) - t)))
        out = {name: self.channels[name][k] for name in CHANNELS}
        out["t_s"] = self.time[k]
        return out

    def extend(self, other: "MetricSeries"):
        for k, t in enumerate(other.time):
            self.append(t, **{name: other.channels[name][k] for name in CHANNELS})
