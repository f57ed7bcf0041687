"""Pressure equation with injection source and vascular exchange; Darcy velocity.

The pore pressure solves the quasi-static balance

    -div( (kappa/eta) grad p ) = q_p + J_b(p) - J_l(p)

with p = 0 on the outer rim (r = R) and no-flux everywhere else. Both
exchange terms are linear in p and kept implicit, so one factorization per
mesh serves the whole injection phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _assembly as fv
from .mesh import AxiMesh, integrate
from .params import ConfigurationError, StarlingParams, TissueLayers

WATER_VISCOSITY = 1.0e-7  # N*s/cm^2


class SolverError(RuntimeError):
    """A linear solve failed or produced an unusable field."""


@dataclass(frozen=True)
class InjectionProtocol:
    """Needle position and the trapezoidal delivery schedule."""

    depth: float = 0.8  # cm below the skin surface
    volume: float = 1.0  # cm^3 delivered in total
    duration: float = 5.0  # s, flow stops exactly here
    ramp_time: float = 0.1  # s, linear ramp at start and end
    source_radius: float = 0.1065  # cm; spatial bump sigma = source_radius/2 (calibrated)

    def __post_init__(self):
        if self.depth <= 0 or self.volume <= 0 or self.duration <= 0:
            raise ConfigurationError("depth, volume, duration must be > 0")
        if not 0 < self.ramp_time < 0.5 * self.duration:
            raise ConfigurationError("ramp time must lie in (0, duration/2)")
        if self.source_radius <= 0:
            raise ConfigurationError("source radius must be > 0")

    @property
    def plateau_rate(self) -> float:
        """Constant mid-injection flow rate; integrates to the full volume."""
        return self.volume / (self.duration - self.ramp_time)

    def flow_rate(self, t: float) -> float:
        """Q(t): trapezoid with linear ramps inside [0, duration]."""
        if t <= 0.0 or t >= self.duration:
            return 0.0
        q = self.plateau_rate
        if t < self.ramp_time:
            return q * t / self.ramp_time
        if t > self.duration - self.ramp_time:
            return q * (self.duration - t) / self.ramp_time
        return q

    def center(self, domain_height: float) -> tuple[float, float]:
        return (0.0, domain_height - self.depth)


def injection_source(mesh: AxiMesh, protocol: InjectionProtocol, t: float) -> np.ndarray:
    """Volumetric source density q_p (1/s) at time t, exactly normalized.

    Spatial profile: exp(-d^2 / (2 sigma^2)) truncated at 3 sigma around the
    needle tip, rescaled every evaluation so integrate(q_p) equals Q(t).
    """
    r0, z0 = protocol.center(mesh.height)
    if not (0.0 <= r0 <= mesh.radius and 0.0 <= z0 <= mesh.height):
        raise ConfigurationError("injection point lies outside the domain")
    q_total = protocol.flow_rate(t)
    if q_total == 0.0:
        return np.zeros((mesh.nz1, mesh.nr1))
    sigma = 0.5 * protocol.source_radius
    d2 = (mesh.rr - r0) ** 2 + (mesh.zz - z0) ** 2
    shape = np.exp(-d2 / (2.0 * sigma**2))
    shape[d2 > (3.0 * sigma) ** 2] = 0.0
    total = integrate(shape, mesh)
    if total <= 0.0:
        raise ConfigurationError("mesh cannot resolve the injection source")
    return shape * (q_total / total)


def starling_blood(p, params: StarlingParams, porosity: float):
    """Blood filtration rate J_b = n L_pb (S_b/V) (p_b - p - sigma_r (pi_b - pi_i))."""
    drive = params.p_b - np.asarray(p) - params.sigma_r * (params.pi_b - params.pi_i)
    return porosity * params.l_pb * params.sbv * drive


def starling_lymph(p, params: StarlingParams, porosity: float, slv):
    """Lymphatic drainage rate J_l = n L_pl (S_l/V) (p - p_l); zero where S_l/V = 0."""
    return porosity * params.l_pl * np.asarray(slv) * (np.asarray(p) - params.p_l)


def exchange_coefficients(mesh: AxiMesh, layers: TissueLayers,
                          params: StarlingParams):
    """Split J_b - J_l into `const - reaction * p` on the nodes."""
    n = layers.porosity
    blood = n * params.l_pb * params.sbv
    lymph = n * params.l_pl * layers.slv_at(mesh.z)[:, None] * np.ones((1, mesh.nr1))
    reaction = blood + lymph
    const = (blood * (params.p_b - params.sigma_r * (params.pi_b - params.pi_i))
             + lymph * params.p_l)
    return reaction, const


class PressureSolver:
    """Factorized elliptic solver for the pressure equation on one mesh.

    ``reaction`` and ``const`` are the linearized exchange terms; passing
    zeros gives the plain Darcy operator (used by the verification tests).
    """

    def __init__(self, mesh: AxiMesh, kappa_nodes: np.ndarray,
                 viscosity: float = WATER_VISCOSITY,
                 reaction: np.ndarray | float = 0.0,
                 const: np.ndarray | float = 0.0):
        self.mesh = mesh
        self.viscosity = viscosity
        self.kappa = np.broadcast_to(np.asarray(kappa_nodes, dtype=float),
                                     (mesh.nz1, mesh.nr1)).copy()
        if np.any(self.kappa <= 0):
            raise ConfigurationError("permeability must be positive everywhere")
        self.reaction = np.broadcast_to(np.asarray(reaction, dtype=float),
                                        (mesh.nz1, mesh.nr1)).copy()
        self.const = np.broadcast_to(np.asarray(const, dtype=float),
                                     (mesh.nz1, mesh.nr1)).copy()

        coef_r, coef_z = fv.harmonic_face_coefficients(mesh, self.kappa / viscosity)
        a = fv.diffusion_matrix(mesh, coef_r, coef_z)
        a = a + sp.diags((self.reaction * mesh.node_volumes).ravel())

        # Dirichlet p = 0 on the outer rim
        rim = np.arange(mesh.n_nodes).reshape(mesh.nz1, mesh.nr1)[:, -1]
        a = a.tolil()
        a[rim, :] = 0.0
        a[rim, rim] = 1.0
        self._rim = rim
        try:
            self._lu = fv.factorize(a.tocsr())
        except RuntimeError as exc:  # pragma: no cover - singular only if misconfigured
            raise SolverError(f"pressure operator factorization failed: {exc}") from exc

    def solve(self, q_p: np.ndarray | float = 0.0) -> np.ndarray:
        b = ((np.broadcast_to(np.asarray(q_p, dtype=float),
                              (self.mesh.nz1, self.mesh.nr1)) + self.const)
             * self.mesh.node_volumes).ravel().copy()
        b[self._rim] = 0.0
        p = self._lu.solve(b)
        if not np.all(np.isfinite(p)):
            raise SolverError("pressure solve produced non-finite values")
        return p.reshape(self.mesh.nz1, self.mesh.nr1)


def solve_pressure(mesh: AxiMesh, layers: TissueLayers, starling: StarlingParams,
                   q_p: np.ndarray | float = 0.0,
                   viscosity: float = WATER_VISCOSITY) -> np.ndarray:
    """One-shot pressure solve with layered permeability and vascular exchange."""
    kappa = layers.permeability_at(mesh.z)[:, None] * np.ones((1, mesh.nr1))
    reaction, const = exchange_coefficients(mesh, layers, starling)
    return PressureSolver(mesh, kappa, viscosity, reaction, const).solve(q_p)


def velocity_from_pressure(mesh: AxiMesh, kappa_nodes: np.ndarray, p: np.ndarray,
                           viscosity: float = WATER_VISCOSITY):
    """Face-normal Darcy velocities u = -(kappa/eta) grad p.

    Permeability is harmonically averaged across faces, which keeps the
    normal flux continuous across layer interfaces.
    """
    kappa = np.broadcast_to(np.asarray(kappa_nodes, dtype=float),
                            (mesh.nz1, mesh.nr1))
    coef_r, coef_z = fv.harmonic_face_coefficients(mesh, kappa / viscosity)
    g_r, g_z = fv.face_gradients(mesh, p)
    return -coef_r * g_r, -coef_z * g_z


def node_speed(mesh: AxiMesh, u_r: np.ndarray, u_z: np.ndarray) -> np.ndarray:
    """Velocity magnitude interpolated to nodes from the face components."""
    ur_n = np.zeros((mesh.nz1, mesh.nr1))
    ur_n[:, 1:-1] = 0.5 * (u_r[:, :-1] + u_r[:, 1:])
    ur_n[:, 0] = u_r[:, 0]
    ur_n[:, -1] = u_r[:, -1]
    uz_n = np.zeros((mesh.nz1, mesh.nr1))
    uz_n[1:-1, :] = 0.5 * (u_z[:-1, :] + u_z[1:, :])
    uz_n[0, :] = u_z[0, :]
    uz_n[-1, :] = u_z[-1, :]
    return np.hypot(ur_n, uz_n)
