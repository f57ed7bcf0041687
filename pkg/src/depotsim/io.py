"""Serialization: timeseries CSV, legacy-VTK snapshots, checkpoints, references.

The timeseries header is frozen; downstream tooling keys on the exact column
order. Snapshots use the legacy ASCII structured-grid dialect readable by
standard scientific viewers, with full float precision so a write/read
round-trip is bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flow import node_speed
from .mesh import AxiMesh, FieldState
from .metrics import CHANNELS, MetricSeries
from .orchestrator import DoseLedger
from .params import ConfigurationError

CHECKPOINT_FORMAT_VERSION = 1

TIMESERIES_HEADER = "t_s," + ",".join(CHANNELS)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# timeseries CSV
# ---------------------------------------------------------------------------

def write_timeseries(series: MetricSeries, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [TIMESERIES_HEADER]
    for k, t in enumerate(series.time):
        row = [t] + [series.channels[name][k] for name in CHANNELS]
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_timeseries(path) -> MetricSeries:
    path = Path(path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != TIMESERIES_HEADER:
        raise ConfigurationError(f"{path}: not a depotsim timeseries file")
    series = MetricSeries()
    for ln in lines[1:]:
        vals = [float(c) for c in ln.split(",")]
        series.append(vals[0], **dict(zip(CHANNELS, vals[1:])))
    return series


# ---------------------------------------------------------------------------
# VTK structured-grid snapshots
# ---------------------------------------------------------------------------

def snapshot_fields(state: FieldState) -> dict[str, np.ndarray]:
    """Nodal fields carried by a snapshot, including the derived panels."""
    mesh = state.mesh
    speed = node_speed(mesh, state.u_r, state.u_z)
    gphi_r = np.zeros_like(state.phi)
    gphi_z = np.zeros_like(state.phi)
    gphi_r[:, 1:-1] = (state.phi[:, 2:] - state.phi[:, :-2]) / (
        mesh.r[2:] - mesh.r[:-2])[None, :]
    gphi_z[1:-1, :] = (state.phi[2:, :] - state.phi[:-2, :]) / (
        mesh.z[2:] - mesh.z[:-2])[:, None]
    fields = {
        "c_na": state.c_na,
        "c_cl": state.c_cl,
        "c_h": state.c_h,
        "c_mab": state.c_mab,
        "c_b": state.c_b,
        "ph": state.ph,
        "p": state.p,
        "phi": state.phi,
        "phi_grad_mag": np.hypot(gphi_r, gphi_z),
        "speed": speed,
        "log10_speed": np.log10(np.maximum(speed, 1e-30)),
        "z_mab": state.z_mab,
        "rho_mab": state.z_mab * state.c_mab,
    }
    return {k: v for k, v in fields.items() if v is not None}


def write_snapshot(state: FieldState, path) -> Path:
    """Legacy ASCII VTK structured grid with all nodal fields at full precision."""
    mesh = state.mesh
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = snapshot_fields(state)

    out = []
    out.append("# vtk DataFile Version 3.0")
    out.append(f"depotsim snapshot t={_fmt(state.t)} s")
    out.append("ASCII")
    out.append("DATASET STRUCTURED_GRID")
    out.append(f"DIMENSIONS {mesh.nr1} {mesh.nz1} 1")
    out.append(f"POINTS {mesh.n_nodes} double")
    for j in range(mesh.nz1):
        for i in range(mesh.nr1):
            out.append(f"{_fmt(mesh.r[i])} {_fmt(mesh.z[j])} 0")
    out.append(f"POINT_DATA {mesh.n_nodes}")
    for name, arr in fields.items():
        out.append(f"SCALARS {name} double")
        out.append("LOOKUP_TABLE default")
        out.extend(_fmt(v) for v in np.asarray(arr).ravel())
    path.write_text("\n".join(out) + "\n")
    return path


def read_snapshot(path) -> tuple[AxiMesh, dict[str, np.ndarray], float]:
    """Parse a snapshot back into (mesh, fields, time)."""
    path = Path(path)
    tokens = path.read_text().splitlines()
    if not tokens or not tokens[0].startswith("# vtk DataFile"):
        raise ConfigurationError(f"{path}: not a VTK snapshot")
    t = 0.0
    if "t=" in tokens[1]:
        t = float(tokens[1].split("t=")[1].split()[0])
    k = tokens.index("DATASET STRUCTURED_GRID")
    nr1, nz1, _ = (int(v) for v in tokens[k + 1].split()[1:])
    n_points = int(tokens[k + 2].split()[1])
    pts = np.array([[float(c) for c in tokens[k + 3 + m].split()]
                    for m in range(n_points)])
    r = pts[:nr1, 0]
    z = pts[::nr1, 1]
    mesh = AxiMesh(r=r, z=z)

    fields: dict[str, np.ndarray] = {}
    m = k + 3 + n_points
    assert tokens[m].startswith("POINT_DATA")
    m += 1
    while m < len(tokens):
        if not tokens[m].strip():
            m += 1
            continue
        name = tokens[m].split()[1]
        m += 2  # skip LOOKUP_TABLE
        vals = np.array([float(tokens[m + q]) for q in range(n_points)])
        fields[name] = vals.reshape(nz1, nr1)
        m += n_points
    return mesh, fields, t


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(state: FieldState, ledger: DoseLedger, phase: str,
                    path, config_text: str = "") -> Path:
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(path.suffix + ".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    mesh = state.mesh
    np.savez_compressed(
        path,
        format_version=np.array([CHECKPOINT_FORMAT_VERSION]),
        phase=np.array([phase]),
        t_s=np.array([state.t]),
        r_nodes=mesh.r, z_nodes=mesh.z,
        injection_r=np.array([mesh.injection_point[0]]),
        injection_z=np.array([mesh.injection_point[1]]),
        c_na=state.c_na, c_h=state.c_h, c_mab=state.c_mab, c_b=state.c_b,
        p=state.p, phi=state.phi, u_r=state.u_r, u_z=state.u_z,
        c_cl=state.c_cl if state.c_cl is not None else np.zeros_like(state.p),
        ph=state.ph if state.ph is not None else np.zeros_like(state.p),
        z_mab=state.z_mab if state.z_mab is not None else np.zeros_like(state.p),
        j_l=state.j_l if state.j_l is not None else np.zeros_like(state.p),
        ledger=np.array([ledger.injected, ledger.free, ledger.bound,
                         ledger.absorbed_lymph, ledger.eliminated]),
        config_text=np.array([config_text]),
    )
    return path


def load_checkpoint(path) -> tuple[FieldState, DoseLedger, str, str]:
    """Returns (state, ledger, phase, config_text)."""
    with np.load(Path(path), allow_pickle=False) as data:
        version = int(data["format_version"][0])
        if version > CHECKPOINT_FORMAT_VERSION:
            raise ConfigurationError(
                f"checkpoint format {version} is newer than supported")
        mesh = AxiMesh(r=data["r_nodes"], z=data["z_nodes"],
                       injection_point=(float(data["injection_r"][0]),
                                        float(data["injection_z"][0])))
        state = FieldState(
            mesh=mesh, c_na=data["c_na"], c_h=data["c_h"], c_mab=data["c_mab"],
            c_b=data["c_b"], p=data["p"], phi=data["phi"],
            u_r=data["u_r"], u_z=data["u_z"], t=float(data["t_s"][0]),
            c_cl=data["c_cl"], ph=data["ph"], z_mab=data["z_mab"],
            j_l=data["j_l"])
        lg = data["ledger"]
        ledger = DoseLedger(injected=float(lg[0]), free=float(lg[1]),
                            bound=float(lg[2]), absorbed_lymph=float(lg[3]),
                            eliminated=float(lg[4]))
        phase = str(data["phase"][0])
        config_text = str(data["config_text"][0])
    return state, ledger, phase, config_text


# ---------------------------------------------------------------------------
# reference clearance curves
# ---------------------------------------------------------------------------

@dataclass
class ReferenceCurve:
    """Externally supplied depot-clearance data: remaining fraction vs time."""

    time_h: np.ndarray
    remaining: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.time_h = np.asarray(self.time_h, dtype=float)
        self.remaining = np.asarray(self.remaining, dtype=float)
        if self.time_h.ndim != 1 or self.time_h.shape != self.remaining.shape:
            raise ConfigurationError("reference curve arrays must match in shape")
        if np.any(np.diff(self.time_h) <= 0):
            raise ConfigurationError("reference times must be increasing")
        if np.any((self.remaining < 0) | (self.remaining > 1)):
            raise ConfigurationError("remaining fractions must lie in [0, 1]")


def load_reference_csv(path) -> ReferenceCurve:
    """CSV with header time_h,remaining_fraction; '#' comments allowed."""
    path = Path(path)
    rows = []
    header = None
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = [c.strip().lower() for c in line.split(",")]
            if header != ["time_h", "remaining_fraction"]:
                raise ConfigurationError(
                    f"{path}: expected header 'time_h,remaining_fraction'")
            continue
        cols = line.split(",")
        rows.append((float(cols[0]), float(cols[1])))
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")
    arr = np.array(rows)
    return ReferenceCurve(arr[:, 0], arr[:, 1], label=path.stem)


@dataclass
class ComparisonReport:
    rmse: float
    max_deviation: float
    time_h: np.ndarray
    reference: np.ndarray
    simulated: np.ndarray
    label: str = ""


def compare_reference(sim_time_h: np.ndarray, sim_remaining: np.ndarray,
                      reference: ReferenceCurve) -> ComparisonReport:
    """Align the run on the reference grid (linear interpolation) and score it."""
    sim_time_h = np.asarray(sim_time_h, dtype=float)
    sim_remaining = np.asarray(sim_remaining, dtype=float)
    t_lo = max(sim_time_h[0], reference.time_h[0])
    t_hi = min(sim_time_h[-1], reference.time_h[-1])
    if t_lo > t_hi:
        raise ConfigurationError("simulation and reference time ranges are disjoint")
    mask = (reference.time_h >= t_lo) & (reference.time_h <= t_hi)
    t_ref = reference.time_h[mask]
    ref = reference.remaining[mask]
    sim = np.interp(t_ref, sim_time_h, sim_remaining)
    dev = sim - ref
    return ComparisonReport(
        rmse=float(np.sqrt(np.mean(dev**2))),
        max_deviation=float(np.max(np.abs(dev))),
        time_h=t_ref, reference=ref, simulated=sim, label=reference.label)


# ---------------------------------------------------------------------------
# run directories
# ---------------------------------------------------------------------------

def write_run_outputs(result, outdir) -> Path:
    """Standard layout of one run: timeseries, final checkpoint, snapshot."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    write_timeseries(result.series, outdir / "timeseries.csv")
    (outdir / "config.cfg").write_text(result.config.to_text())
    config_text = result.config.to_text()
    save_checkpoint(result.short_state, result.ledger, "short_end",
                    outdir / "checkpoint_short_end.npz", config_text)
    save_checkpoint(result.final_state, result.ledger, "final",
                    outdir / "checkpoint_final.npz", config_text)
    write_snapshot(result.short_state, outdir / "snapshot_short_end.vtk")
    (outdir / "ledger.json").write_text(json.dumps({
        "injected_mol": result.ledger.injected,
        "free_mol": result.ledger.free,
        "bound_mol": result.ledger.bound,
        "absorbed_lymph_mol": result.ledger.absorbed_lymph,
        "eliminated_mol": result.ledger.eliminated,
        "closure_residual": result.ledger.closure_residual(),
        "electroneutrality_max": result.electroneutrality_max,
        "retries": result.retries,
    }, indent=2) + "\n")
    return outdir
