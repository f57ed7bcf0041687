"""Electric potential from the summed, electroneutrality-reduced ion balance.

Multiplying each transported-species balance by its valence, summing, and
eliminating chloride through the electroneutrality constraint leaves one
elliptic equation for the potential:

    div( G ) + div( sigma grad Phi ) = z_drug * (J_l c_drug + s_B)

    G     = sum_i z_i n (D_i - D_Cl) grad c_i          (i = Na+, H+, drug)
    sigma = sum_i z_i F n (z_i mu_i - z_Cl mu_Cl) c_i

All boundaries are flux-free, so Phi is defined up to a constant. The solve
subtracts the mean of the discrete residual (compatibility) and pins the
gauge by forcing the domain-average of Phi to zero with a bordered system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

import scipy.sparse.linalg as spla

from . import _assembly as fv
from .flow import SolverError
from .mesh import AxiMesh
from .params import PhysicalConstants, SpeciesTable


@dataclass
class PotentialCoefficients:
    """Assembled ingredients of the potential equation on one mesh."""

    sigma: np.ndarray  # effective conductivity-like coefficient, per node
    rhs: np.ndarray  # volumetric charge source z*(J_l c + s_B), per node
    div_g: np.ndarray  # outward-summed concentration-driven flux, per dual cell


def assemble_potential(mesh: AxiMesh, species: SpeciesTable,
                       constants: PhysicalConstants, porosity: float,
                       c_na: np.ndarray, c_h: np.ndarray, c_mab: np.ndarray,
                       z_mab: np.ndarray, j_l: np.ndarray | float = 0.0,
                       binding_rate: np.ndarray | float = 0.0) -> PotentialCoefficients:
    """Build sigma, the charge source, and the concentration-flux divergence.

    ``binding_rate`` is the net free-to-bound exchange rate (association minus
    dissociation, mol/cm^3/s); together with the lymphatic sink it is the only
    charge source surviving the electroneutral summation.
    """
    n = porosity
    f_const = constants.faraday
    z_cl = species.chloride.valence
    mu_cl = species.chloride.mobility(constants)
    d_cl = species.chloride.diffusivity

    sigma = np.zeros((mesh.nz1, mesh.nr1))
    triples = (
        (species.sodium, c_na, np.full_like(sigma, species.sodium.valence)),
        (species.hydrogen, c_h, np.full_like(sigma, species.hydrogen.valence)),
        (species.drug, c_mab, np.asarray(z_mab, dtype=float)),
    )
    for spec, c, z in triples:
        mu = spec.mobility(constants)
        sigma += z * f_const * n * (z * mu - z_cl * mu_cl) * c

    if np.min(sigma) <= 0.0:
        raise SolverError("effective conductivity lost positivity; "
                          f"min sigma = {np.min(sigma):.3e}")

    # concentration-driven part: face fluxes of sum_i z_i n (D_i - D_Cl) grad c_i
    g_r = np.zeros((mesh.nz1, mesh.nr))
    g_z = np.zeros((mesh.nz, mesh.nr1))
    for spec, c, z in triples:
        dg_r, dg_z = fv.face_gradients(mesh, c)
        coef = n * (spec.diffusivity - d_cl)
        z_r = 0.5 * (z[:, :-1] + z[:, 1:])
        z_f = 0.5 * (z[:-1, :] + z[1:, :])
        g_r += z_r * coef * dg_r
        g_z += z_f * coef * dg_z
    div_g = fv.divergence_of_face_flux(mesh, g_r, g_z)

    rhs = np.asarray(z_mab, dtype=float) * (
        np.asarray(j_l) * c_mab + np.asarray(binding_rate))
    rhs = np.broadcast_to(rhs, (mesh.nz1, mesh.nr1)).copy()
    return PotentialCoefficients(sigma=sigma, rhs=rhs, div_g=div_g)


def solve_potential(coeffs: PotentialCoefficients, mesh: AxiMesh) -> np.ndarray:
    """Solve the pure-Neumann potential problem with zero-mean gauge.

    The summed balance div G + div(sigma grad Phi) = rhs rearranges to
    -div(sigma grad Phi) = div G - rhs, which is what the operator expects.
    """
    return _solve_neumann(mesh, coeffs.sigma,
                          coeffs.div_g - coeffs.rhs * mesh.node_volumes)


def _solve_neumann(mesh: AxiMesh, sigma: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A phi = b for the flux-free operator A = -div(sigma grad ./).

    The operator's nullspace is the constants, so b is first shifted to zero
    total (discrete compatibility; the residual mean is what gets removed).
    One node is then pinned to make the factorization regular - for a
    compatible b the pinned solution solves every equation exactly - and the
    gauge integrate(phi) = 0 fixes the remaining constant.
    """
    coef_r, coef_z = fv.harmonic_face_coefficients(mesh, sigma)
    a = fv.diffusion_matrix(mesh, coef_r, coef_z)

    w = mesh.integration_weights.ravel()
    b = b.ravel() - w * (b.sum() / w.sum())  # now sums to zero exactly

    pin = 0
    lo, hi = a.indptr[pin], a.indptr[pin + 1]
    a.data[lo:hi] = 0.0
    a.data[lo:hi][a.indices[lo:hi] == pin] = 1.0
    b = b.copy()
    b[pin] = 0.0
    try:
        lu = fv.factorize(a)
    except RuntimeError as exc:
        raise SolverError(f"potential factorization failed: {exc}") from exc
    phi = lu.solve(b)
    if not np.all(np.isfinite(phi)):
        raise SolverError("potential solve produced non-finite values")
    phi -= np.dot(w, phi) / w.sum()
    return phi.reshape(mesh.nz1, mesh.nr1)
