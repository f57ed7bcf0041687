"""Mesh construction, axisymmetric quadrature, and field projection."""

import numpy as np
import pytest

from depotsim.mesh import (AxiMesh, FieldState, MeshError, build_graded_mesh,
                           integrate, nodal_integral, project_field)

CYLINDER_VOLUME = np.pi * 25.0 * 5.0  # R = H = 5


class TestBuildGradedMesh:
    def test_uniform_spacing(self):
        mesh = build_graded_mesh(5, 5, 10, 10, focus=(0, 4.2), grading=1.0)
        assert np.allclose(np.diff(mesh.r), 0.5)
        assert np.allclose(np.diff(mesh.z), 0.5)

    def test_cell_volumes_tile_the_cylinder(self):
        for grading in (1.0, 1.1, 1.25):
            mesh = build_graded_mesh(5, 5, 24, 24, focus=(0, 4.2), grading=grading)
            assert np.sum(mesh.cell_volumes) == pytest.approx(
                CYLINDER_VOLUME, rel=1e-10)
            assert np.sum(mesh.node_volumes) == pytest.approx(
                CYLINDER_VOLUME, rel=1e-10)

    def test_finest_row_contains_focus(self):
        mesh = build_graded_mesh(5, 5, 20, 20, focus=(0, 4.2), grading=1.2)
        j_min = int(np.argmin(np.diff(mesh.z)))
        z_lo, z_hi = mesh.z[j_min], mesh.z[j_min + 1]
        assert z_lo <= 4.2 <= z_hi + np.diff(mesh.z).min()

    def test_grading_above_cap_rejected(self):
        with pytest.raises(MeshError):
            build_graded_mesh(5, 5, 20, 20, focus=(0, 4.2), grading=1.35)

    def test_too_few_cells_rejected(self):
        with pytest.raises(MeshError):
            build_graded_mesh(5, 5, 4, 20, focus=(0, 4.2), grading=1.0)

    def test_deterministic_construction(self):
        a = build_graded_mesh(5, 5, 40, 40, focus=(0, 4.2), grading=1.05)
        b = build_graded_mesh(5, 5, 40, 40, focus=(0, 4.2), grading=1.05)
        assert np.array_equal(a.r, b.r)
        assert np.array_equal(a.z, b.z)
        assert np.array_equal(a.node_volumes, b.node_volumes)


class TestIntegrate:
    def setup_method(self):
        self.mesh = build_graded_mesh(5, 5, 32, 32, focus=(0, 4.2), grading=1.05)

    def test_constant_one(self):
        ones = np.ones((self.mesh.nz1, self.mesh.nr1))
        assert integrate(ones, self.mesh) == pytest.approx(392.699, abs=1e-2)

    def test_zero(self):
        assert integrate(np.zeros((self.mesh.nz1, self.mesh.nr1)), self.mesh) == 0.0

    def test_radial_field_closed_form(self):
        # 2 pi int r^2 dr dz = (2 pi / 3) R^3 H = 1308.997
        mesh = build_graded_mesh(5, 5, 64, 16, focus=(0, 4.2), grading=1.0)
        val = integrate(mesh.rr, mesh)
        assert val == pytest.approx(2 * np.pi / 3 * 125 * 5, rel=2e-4)

    def test_linearity_with_random_fields(self):
        rng = np.random.default_rng(7)
        f = rng.normal(size=(self.mesh.nz1, self.mesh.nr1))
        g = rng.normal(size=(self.mesh.nz1, self.mesh.nr1))
        lhs = integrate(f + g, self.mesh)
        rhs = integrate(f, self.mesh) + integrate(g, self.mesh)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_weights_reproduce_integral(self):
        rng = np.random.default_rng(8)
        f = rng.normal(size=(self.mesh.nz1, self.mesh.nr1))
        assert np.sum(f * self.mesh.integration_weights) == pytest.approx(
            integrate(f, self.mesh), rel=1e-12, abs=1e-12)

    def test_nodal_integral_of_one(self):
        ones = np.ones((self.mesh.nz1, self.mesh.nr1))
        assert nodal_integral(ones, self.mesh) == pytest.approx(
            CYLINDER_VOLUME, rel=1e-10)


class TestProjectField:
    def setup_method(self):
        self.fine = build_graded_mesh(5, 5, 96, 96, focus=(0, 4.2), grading=1.0)
        self.coarse = build_graded_mesh(5, 5, 24, 24, focus=(0, 4.2), grading=1.0)

    def test_constant_field(self):
        f = np.full((self.fine.nz1, self.fine.nr1), 7.0)
        out, change = project_field(self.fine, f, self.coarse)
        assert np.allclose(out, 7.0)
        assert abs(change) < 1e-12

    def test_linear_field_exact(self):
        f = self.fine.zz.copy()
        out, change = project_field(self.fine, f, self.coarse)
        assert np.allclose(out, self.coarse.zz, atol=1e-12)
        assert abs(change) < 1e-12

    def test_bilinear_field_exact(self):
        def bilinear(mesh):
            return 1.0 + 2.0 * mesh.rr - 0.5 * mesh.zz + 0.25 * mesh.rr * mesh.zz
        out, _ = project_field(self.fine, bilinear(self.fine), self.coarse)
        assert np.allclose(out, bilinear(self.coarse), atol=1e-12)

    def test_gaussian_bump_mass_report(self):
        # 4:1 reduction of a resolved bump keeps the integral within 2 percent;
        # the report must agree with quadrature on both meshes
        f = np.exp(-((self.fine.rr - 0.0) ** 2 + (self.fine.zz - 4.0) ** 2)
                   / (2 * 0.7**2))
        out, change = project_field(self.fine, f, self.coarse)
        m_src = integrate(f, self.fine)
        m_dst = integrate(out, self.coarse)
        assert change == pytest.approx((m_dst - m_src) / m_src, abs=1e-14)
        assert abs(change) < 0.02

    def test_domain_mismatch_rejected(self):
        other = build_graded_mesh(4, 5, 16, 16, focus=(0, 4.0), grading=1.0)
        f = np.ones((self.fine.nz1, self.fine.nr1))
        with pytest.raises(MeshError):
            project_field(self.fine, f, other)


class TestFieldState:
    def test_rest_state_shapes_and_values(self):
        from depotsim.params import default_species
        mesh = build_graded_mesh(5, 5, 12, 12, focus=(0, 4.2), grading=1.0)
        state = FieldState.rest_state(mesh, default_species())
        assert state.c_na.shape == (13, 13)
        assert np.all(state.c_na == 1.4e-4)
        assert np.all(state.c_mab == 0.0)
        assert state.u_r.shape == (13, 12)
        assert state.u_z.shape == (12, 13)

    def test_clip_concentrations(self):
        from depotsim.params import default_species
        mesh = build_graded_mesh(5, 5, 12, 12, focus=(0, 4.2), grading=1.0)
        state = FieldState.rest_state(mesh, default_species())
        state.c_mab[3, 3] = -1e-16
        n = state.clip_concentrations()
        assert n == 1
        assert state.c_mab[3, 3] == 0.0
