"""Potential assembly and pure-Neumann solve, checked against closed forms.

The key independent oracle is the classical liquid-junction relation for a
binary salt gradient: with the anion diffusing faster than the cation, the
concentrated region sits at the higher potential,

    Phi(x) = (R T / F) * (D_Cl - D_Na) / (D_Na + D_Cl) * ln c(x) + const.
"""

import numpy as np
import pytest

from depotsim.flow import SolverError
from depotsim.mesh import build_graded_mesh, integrate
from depotsim.metrics import domain_average
from depotsim.params import PhysicalConstants, default_species
from depotsim.potential import (_solve_neumann, assemble_potential,
                                solve_potential)

CONSTANTS = PhysicalConstants()


@pytest.fixture(scope="module")
def mesh():
    return build_graded_mesh(5, 5, 40, 40, focus=(0, 4.2), grading=1.0)


def uniform_fields(mesh, c_na=1.4e-4, c_h=4e-11, c_mab=0.0, z=0.0):
    shape = (mesh.nz1, mesh.nr1)
    return (np.full(shape, c_na), np.full(shape, c_h), np.full(shape, c_mab),
            np.full(shape, z))


class TestAssemble:
    def test_uniform_neutral_state(self, mesh):
        c_na, c_h, c_mab, z = uniform_fields(mesh)
        coeffs = assemble_potential(mesh, default_species(), CONSTANTS, 0.1,
                                    c_na, c_h, c_mab, z)
        assert np.allclose(coeffs.div_g, 0.0)
        assert np.allclose(coeffs.rhs, 0.0)

    def test_conductivity_dominant_term(self, mesh):
        # F n [c_Na (mu_Na + mu_Cl) + c_H (mu_H + mu_Cl)] with
        # mu_Na = 1.33e-5 / (8.314 * 293) = 5.46e-9
        species = default_species()
        c_na, c_h, c_mab, z = uniform_fields(mesh)
        coeffs = assemble_potential(mesh, species, CONSTANTS, 0.1,
                                    c_na, c_h, c_mab, z)
        mu_na = species.sodium.mobility(CONSTANTS)
        mu_h = species.hydrogen.mobility(CONSTANTS)
        mu_cl = species.chloride.mobility(CONSTANTS)
        assert mu_na == pytest.approx(5.46e-9, rel=1e-3)
        expected = CONSTANTS.faraday * 0.1 * (
            1.4e-4 * (mu_na + mu_cl) + 4e-11 * (mu_h + mu_cl))
        assert np.allclose(coeffs.sigma, expected, rtol=1e-12)
        dominant = 96485 * 0.1 * 1.4e-4 * (5.46e-9 + 8.33e-9)
        assert expected == pytest.approx(dominant, rel=1e-3)

    def test_salt_pair_conductivity(self, mesh):
        # single Na/Cl pair: sigma = F n c (mu_Na + mu_Cl) > 0
        species = default_species()
        c_na, c_h, c_mab, z = uniform_fields(mesh, c_h=0.0)
        coeffs = assemble_potential(mesh, species, CONSTANTS, 0.1,
                                    c_na, c_h, c_mab, z)
        expected = (CONSTANTS.faraday * 0.1 * 1.4e-4
                    * (species.sodium.mobility(CONSTANTS)
                       + species.chloride.mobility(CONSTANTS)))
        assert np.allclose(coeffs.sigma, expected)
        assert np.all(coeffs.sigma > 0)

    def test_lost_positivity_aborts(self, mesh):
        c_na, c_h, c_mab, z = uniform_fields(mesh, c_na=0.0, c_h=0.0)
        with pytest.raises(SolverError):
            assemble_potential(mesh, default_species(), CONSTANTS, 0.1,
                               c_na, c_h, c_mab, z)


class TestSolve:
    def test_uniform_state_gives_zero_potential(self, mesh):
        c_na, c_h, c_mab, z = uniform_fields(mesh)
        coeffs = assemble_potential(mesh, default_species(), CONSTANTS, 0.1,
                                    c_na, c_h, c_mab, z)
        phi = solve_potential(coeffs, mesh)
        assert np.max(np.abs(phi)) < 1e-12

    def test_gauge_zero_mean(self, mesh):
        c_na, c_h, c_mab, z = uniform_fields(mesh)
        c_na = c_na * (1.0 + 0.5 * np.exp(-((mesh.rr) ** 2 + (mesh.zz - 4) ** 2)))
        coeffs = assemble_potential(mesh, default_species(), CONSTANTS, 0.1,
                                    c_na, c_h, c_mab, z)
        phi = solve_potential(coeffs, mesh)
        assert abs(domain_average(phi, mesh)) < 1e-12 * np.max(np.abs(phi))

    def test_deterministic(self, mesh):
        c_na, c_h, c_mab, z = uniform_fields(mesh)
        c_na = c_na * (1.0 + np.exp(-((mesh.rr - 1) ** 2 + (mesh.zz - 3) ** 2)))
        coeffs = assemble_potential(mesh, default_species(), CONSTANTS, 0.1,
                                    c_na, c_h, c_mab, z)
        a = solve_potential(coeffs, mesh)
        b = solve_potential(coeffs, mesh)
        assert np.array_equal(a, b)

    def test_concentration_scaling_leaves_potential_invariant(self, mesh):
        # with no reactive source, sigma and G both scale linearly in the
        # concentrations, so Phi is unchanged and the electromigration flux
        # (prop. to c grad Phi) scales by the same factor as c
        species = default_species()
        base = uniform_fields(mesh)[0] * (
            1.0 + 0.4 * np.exp(-((mesh.rr) ** 2 + (mesh.zz - 4.2) ** 2) / 0.5))
        shape = (mesh.nz1, mesh.nr1)
        for lam in (0.5, 2.0):
            phi_ref = solve_potential(assemble_potential(
                mesh, species, CONSTANTS, 0.1, base, np.full(shape, 4e-11),
                np.zeros(shape), np.zeros(shape)), mesh)
            phi_lam = solve_potential(assemble_potential(
                mesh, species, CONSTANTS, 0.1, lam * base,
                np.full(shape, lam * 4e-11), np.zeros(shape),
                np.zeros(shape)), mesh)
            assert np.allclose(phi_lam, phi_ref, atol=1e-14 + 1e-10 * np.abs(phi_ref).max())

    def test_manufactured_solution_order(self):
        # Phi* = cos(pi r / R) cos(pi z / H) is flux-free on every boundary
        from verification import potential_order
        assert potential_order() >= 1.9


class TestJunctionOracle:
    def test_binary_salt_junction_matches_henderson(self):
        # 1-D column with a smooth NaCl ramp; drug and hydrogen absent.
        # Phi must match (RT/F) (D_Na - D_Cl)/(D_Na + D_Cl) ln c up to the
        # gauge constant, so the concentrated side is the positive one.
        mesh = build_graded_mesh(1.0, 5.0, 8, 96, focus=(0, 2.5), grading=1.0)
        species = default_species()
        c = 1.4e-4 * (1.0 + 2.0 / (1.0 + np.exp((mesh.zz - 2.5) / 0.3)))
        shape = (mesh.nz1, mesh.nr1)
        coeffs = assemble_potential(mesh, species, CONSTANTS, 0.1,
                                    c, np.zeros(shape), np.zeros(shape),
                                    np.zeros(shape))
        phi = solve_potential(coeffs, mesh)

        d_na, d_cl = species.sodium.diffusivity, species.chloride.diffusivity
        ratio = (d_na - d_cl) / (d_na + d_cl)
        expected = -(CONSTANTS.rt / CONSTANTS.faraday) * ratio * np.log(c)
        expected -= integrate(expected, mesh) / mesh.domain_volume
        assert np.allclose(phi, expected, atol=2e-5)
        # concentrated bottom sits above the dilute top
        assert phi[0, 0] > phi[-1, 0]
        assert phi[0, 0] - phi[-1, 0] == pytest.approx(
            -(CONSTANTS.rt / CONSTANTS.faraday) * ratio * np.log(3.0), rel=0.02)

    def test_binding_front_depresses_potential(self):
        # a localized uptake of positively charged drug acts as a negative
        # volumetric charge source and digs a local potential well
        mesh = build_graded_mesh(5, 5, 40, 40, focus=(0, 2.5), grading=1.0)
        species = default_species()
        shape = (mesh.nz1, mesh.nr1)
        c_na = np.full(shape, 1.4e-4)
        c_mab = np.full(shape, 5e-7)
        z = np.full(shape, 15.0)
        blob = np.exp(-((mesh.rr) ** 2 + (mesh.zz - 2.5) ** 2) / 0.25)
        rate = 1e-9 * blob  # mol/cm^3/s of drug binding
        coeffs = assemble_potential(mesh, species, CONSTANTS, 0.1, c_na,
                                    np.full(shape, 4e-11), c_mab, z,
                                    j_l=0.0, binding_rate=rate)
        phi = solve_potential(coeffs, mesh)
        inside = phi[mesh.ball_mask((0, 2.5), 0.4)].mean()
        outside = phi[mesh.ball_mask((4.0, 0.8), 0.5)].mean()
        assert inside < outside
