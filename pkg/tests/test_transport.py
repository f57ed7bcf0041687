"""Species transport: fluxes, conservation, positivity, migration physics."""

import numpy as np
import pytest

from depotsim.mesh import build_graded_mesh, nodal_integral
from depotsim.params import PhysicalConstants, default_species
from depotsim.transport import (TransportStepInputs, advance_species,
                                species_flux, tissue_ph)

CONSTANTS = PhysicalConstants()
N = 0.1


@pytest.fixture(scope="module")
def mesh():
    return build_graded_mesh(5, 5, 32, 32, focus=(0, 4.2), grading=1.0)


def zero_velocity(mesh):
    return np.zeros((mesh.nz1, mesh.nr)), np.zeros((mesh.nz, mesh.nr1))


def make_inputs(mesh, dt=0.1, phi=None, u=None, q=None, **kw):
    u_r, u_z = u if u is not None else zero_velocity(mesh)
    shape = (mesh.nz1, mesh.nr1)
    return TransportStepInputs(
        dt=dt, u_r=u_r, u_z=u_z,
        phi=phi if phi is not None else np.zeros(shape),
        q_p=q if q is not None else np.zeros(shape),
        c_max={"na": 4.2e-4, "h": 1e-9, "mab": 6.67e-7},
        porosity=N, **kw)


class TestSpeciesFlux:
    def test_uniform_still_state_has_no_flux(self, mesh):
        c = np.full((mesh.nz1, mesh.nr1), 1.4e-4)
        u_r, u_z = zero_velocity(mesh)
        phi = np.zeros((mesh.nz1, mesh.nr1))
        f_r, f_z = species_flux(mesh, c, 1.33e-5, 1.0, u_r, u_z, phi, N, CONSTANTS)
        assert np.allclose(f_r, 0.0) and np.allclose(f_z, 0.0)

    def test_positive_ion_moves_down_potential(self, mesh):
        # Phi decreasing in r: flux of a z=+1 species points toward +r
        c = np.full((mesh.nz1, mesh.nr1), 1e-4)
        phi = -0.01 * mesh.rr
        u_r, u_z = zero_velocity(mesh)
        f_r, _ = species_flux(mesh, c, 1.33e-5, +1.0, u_r, u_z, phi, N, CONSTANTS)
        assert np.all(f_r > 0)

    def test_ficks_law_value(self):
        # 1-D column: D = 1e-6, n = 0.1, dc/dz = 1 -> flux -1e-7
        mesh = build_graded_mesh(1, 1, 8, 8, focus=(0, 0.5), grading=1.0)
        c = mesh.zz.copy()  # slope 1 mol/cm^4
        u_r, u_z = zero_velocity(mesh)
        phi = np.zeros((mesh.nz1, mesh.nr1))
        _, f_z = species_flux(mesh, c, 1e-6, 0.0, u_r, u_z, phi, N, CONSTANTS)
        assert np.allclose(f_z, -1e-7)


class TestAdvanceSpecies:
    def test_uniform_state_is_fixed_point(self, mesh):
        species = default_species()
        shape = (mesh.nz1, mesh.nr1)
        c_na = np.full(shape, 1.4e-4)
        c_h = np.full(shape, 4e-11)
        c_mab = np.full(shape, 1e-7)
        out = advance_species(mesh, c_na, c_h, c_mab, np.zeros(shape),
                              species, CONSTANTS, make_inputs(mesh))
        for old, new in zip((c_na, c_h, c_mab), out):
            assert np.allclose(new, old, rtol=1e-12)

    def test_source_mass_balance_closed_domain(self, mesh):
        # total sodium gained per step equals the integrated source exactly
        species = default_species()
        shape = (mesh.nz1, mesh.nr1)
        rng = np.random.default_rng(3)
        q = np.exp(-((mesh.rr) ** 2 + (mesh.zz - 4.2) ** 2) / 0.05)
        u_r = rng.normal(0, 0.2, (mesh.nz1, mesh.nr))
        u_z = rng.normal(0, 0.2, (mesh.nz, mesh.nr1))
        phi = 1e-3 * np.cos(np.pi * mesh.rr / 5)
        inputs = make_inputs(mesh, dt=0.05, phi=phi, u=(u_r, u_z), q=q)
        c_na = np.full(shape, 1.4e-4)
        c_h = np.full(shape, 4e-11)
        c_mab = np.zeros(shape)
        new_na, _, _ = advance_species(mesh, c_na, c_h, c_mab, np.zeros(shape),
                                       species, CONSTANTS, inputs)
        gained = N * (nodal_integral(new_na, mesh) - nodal_integral(c_na, mesh))
        forced = 0.05 * nodal_integral(q, mesh) * 4.2e-4
        assert gained == pytest.approx(forced, rel=1e-8)

    def test_pure_diffusion_matches_heat_kernel(self):
        # axisymmetric Gaussian pulse spreading at the analytic rate
        from verification import diffusion_order
        assert diffusion_order() >= 1.9

    def test_maximum_principle_pure_diffusion(self, mesh):
        species = default_species()
        shape = (mesh.nz1, mesh.nr1)
        rng = np.random.default_rng(11)
        c = np.abs(rng.normal(1e-4, 5e-5, shape))
        c_h = np.full(shape, 4e-11)
        new, _, _ = advance_species(mesh, c, c_h, np.zeros(shape),
                                    np.zeros(shape), species, CONSTANTS,
                                    make_inputs(mesh, dt=5.0))
        assert new.max() <= c.max() * (1 + 1e-12)
        assert new.min() >= min(0.0, c.min())

    def test_maximum_principle_on_darcy_field(self, mesh):
        # the operating envelope: a post-injection Darcy field whose
        # divergence is only the (tiny) vascular exchange; extrema stay
        # bounded up to that compression
        from depotsim.flow import solve_pressure, velocity_from_pressure
        from depotsim.params import StarlingParams, default_layers
        species = default_species()
        layers = default_layers()
        shape = (mesh.nz1, mesh.nr1)
        p = solve_pressure(mesh, layers, StarlingParams(), q_p=0.0)
        kappa = layers.permeability_at(mesh.z)[:, None] * np.ones((1, mesh.nr1))
        u = velocity_from_pressure(mesh, kappa, p)
        rng = np.random.default_rng(11)
        c = np.abs(rng.normal(1e-4, 5e-5, shape))
        c_h = np.full(shape, 4e-11)
        new, _, _ = advance_species(mesh, c, c_h, np.zeros(shape),
                                    np.zeros(shape), species, CONSTANTS,
                                    make_inputs(mesh, dt=0.5, u=u))
        assert new.max() <= c.max() * (1 + 1e-5)
        assert new.min() >= 0.0

    def test_migration_moves_charged_species_only(self, mesh):
        # fixed potential ramp, no flow: the center of mass of a positive
        # species drifts toward lower potential; a neutral one stays put
        species = default_species()
        shape = (mesh.nz1, mesh.nr1)
        phi = 0.05 * (mesh.zz / 5.0)  # decreasing downward
        blob = 1e-7 * np.exp(-((mesh.rr) ** 2 + (mesh.zz - 2.5) ** 2) / 0.3)
        c_na = np.full(shape, 1.4e-4)
        c_h = np.full(shape, 4e-11)

        def center_of_mass(c):
            return nodal_integral(c * mesh.zz, mesh) / nodal_integral(c, mesh)

        for z_val, expect_drop in ((+10.0, True), (0.0, False)):
            inputs = make_inputs(mesh, dt=50.0, phi=phi)
            _, _, new = advance_species(mesh, c_na, c_h, blob.copy(),
                                        np.full(shape, z_val), species,
                                        CONSTANTS, inputs)
            shift = center_of_mass(new) - center_of_mass(blob)
            if expect_drop:
                assert shift < -1e-5
            else:
                # only isotropic diffusion acts; the blob center barely moves
                assert abs(shift) < 1e-7

    def test_implicit_sink_and_release_budget(self, mesh):
        # drug mass change = source - lymph - association + release, exactly
        species = default_species()
        shape = (mesh.nz1, mesh.nr1)
        rng = np.random.default_rng(5)
        c_mab = np.abs(rng.normal(3e-7, 1e-7, shape))
        c_na = np.full(shape, 1.4e-4)
        c_h = np.full(shape, 4e-11)
        j_l = np.abs(rng.normal(1e-6, 3e-7, shape))
        assoc = np.abs(rng.normal(1e-3, 3e-4, shape))
        release = np.abs(rng.normal(1e-11, 3e-12, shape))
        dt = 2.0
        inputs = make_inputs(mesh, dt=dt, j_l=j_l, binding_assoc=assoc,
                             binding_release=release)
        _, _, new = advance_species(mesh, c_na, c_h, c_mab, np.zeros(shape),
                                    species, CONSTANTS, inputs)
        gained = N * (nodal_integral(new, mesh) - nodal_integral(c_mab, mesh))
        expected = dt * (nodal_integral(release, mesh)
                         - nodal_integral((j_l + assoc) * new, mesh))
        assert gained == pytest.approx(expected, rel=1e-10)


class TestTissuePh:
    def test_physiological_field(self):
        assert np.allclose(tissue_ph(np.full((3, 3), 4e-11)), 7.39794, atol=1e-5)

    def test_floor_is_flagged(self, caplog):
        with caplog.at_level("WARNING"):
            ph = tissue_ph(np.array([[1e-16, 4e-11]]))
        assert ph[0, 0] == pytest.approx(13.0)
        assert any("floor" in r.message for r in caplog.records)

    def test_below_floor_clipped_to_13(self):
        assert tissue_ph(np.array([[1e-22]]))[0, 0] == pytest.approx(13.0)
