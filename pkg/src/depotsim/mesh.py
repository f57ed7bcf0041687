"""Graded axisymmetric structured grid and its finite-volume geometry.

Fields live on nodes of a tensor-product (r, z) grid. Each node owns a dual
control volume bounded by the midpoints toward its neighbors; the exact
axisymmetric measure of a dual cell is pi*(rR^2 - rL^2)*(zT - zB). Fluxes are
exchanged across dual faces, which makes every transport operator built here
conservative by construction. The r = 0 axis needs no special casing: the
innermost dual face has zero area.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AxiMesh", "FieldState", "build_graded_mesh", "project_field", "integrate"]

MAX_NEIGHBOR_RATIO = 1.3  # hard cap on adjacent cell-size ratio


class MeshError(ValueError):
    pass


def _graded_side(length: float, n: int, ratio: float) -> np.ndarray:
    """Spacings of n cells over `length`, geometric with the given cell ratio.

    The first cell is the smallest; ratio 1 gives uniform spacing.
    """
    if ratio == 1.0:
        return np.full(n, length / n)
    d0 = length * (ratio - 1.0) / (ratio**n - 1.0)
    return d0 * ratio ** np.arange(n)


def _graded_axis(length: float, n: int, focus: float, ratio: float) -> np.ndarray:
    """Node coordinates on [0, length] with cells growing away from `focus`.

    Cells are split between the two sides of the focus so that the smallest
    spacings on either side match as closely as possible.
    """
    if ratio < 1.0:
        raise MeshError("grading ratio must be >= 1")
    if not 0.0 <= focus <= length:
        raise MeshError("focus must lie inside the domain")
    if ratio == 1.0 or focus <= 0.0 or focus >= length:
        side = focus if focus > 0 else length
        if ratio == 1.0:
            spacings = np.full(n, length / n)
        elif focus <= 0.0:
            spacings = _graded_side(length, n, ratio)
        else:  # focus at the far end: grade toward it
            spacings = _graded_side(length, n, ratio)[::-1]
        nodes = np.concatenate([[0.0], np.cumsum(spacings)])
        nodes[-1] = length
        return nodes

    la, lb = focus, length - focus
    best = None
    for na in range(1, n):
        nb = n - na
        da = la * (ratio - 1.0) / (ratio**na - 1.0) if ratio > 1 else la / na
        db = lb * (ratio - 1.0) / (ratio**nb - 1.0) if ratio > 1 else lb / nb
        mismatch = abs(np.log(da / db))
        if best is None or mismatch < best[0]:
            best = (mismatch, na, nb)
    _, na, nb = best
    below = _graded_side(la, na, ratio)[::-1]  # shrink toward the focus
    above = _graded_side(lb, nb, ratio)
    spacings = np.concatenate([below, above])
    nodes = np.concatenate([[0.0], np.cumsum(spacings)])
    nodes[-1] = length
    return nodes


@dataclass
class AxiMesh:
    """Axisymmetric structured grid over [0, R] x [0, H].

    Arrays are indexed [j, i] with j the z index (axis 0) and i the r index
    (axis 1), so flattened node k = j*(nr+1) + i.
    """

    r: np.ndarray  # (nr+1,) node radii, r[0] = 0, r[-1] = R
    z: np.ndarray  # (nz+1,) node heights, z[0] = 0, z[-1] = H
    injection_point: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.r[0] != 0.0:
            raise MeshError("radial axis must start at r = 0")
        for name, x in (("r", self.r), ("z", self.z)):
            d = np.diff(x)
            if np.any(d <= 0):
                raise MeshError(f"{name} nodes must be strictly increasing")
            ratios = d[1:] / d[:-1]
            if ratios.size and (ratios.max() > MAX_NEIGHBOR_RATIO + 1e-12
                                or ratios.min() < 1.0 / MAX_NEIGHBOR_RATIO - 1e-12):
                raise MeshError(
                    f"{name} spacing ratio exceeds {MAX_NEIGHBOR_RATIO} between neighbors"
                )
        self._build_geometry()

    def _build_geometry(self):
        r, z = self.r, self.z
        self.nr = r.size - 1
        self.nz = z.size - 1
        self.nr1 = r.size
        self.nz1 = z.size
        self.n_nodes = self.nr1 * self.nz1

        # dual-cell boundaries: spacing midpoints, domain edges at the ends
        self.r_dual = np.concatenate([[r[0]], 0.5 * (r[:-1] + r[1:]), [r[-1]]])
        self.z_dual = np.concatenate([[z[0]], 0.5 * (z[:-1] + z[1:]), [z[-1]]])

        ring = np.pi * (self.r_dual[1:] ** 2 - self.r_dual[:-1] ** 2)  # (nr1,)
        dz_dual = self.z_dual[1:] - self.z_dual[:-1]  # (nz1,)
        #: exact axisymmetric volume of each nodal control cell
        self.node_volumes = dz_dual[:, None] * ring[None, :]  # (nz1, nr1)

        self.dr = np.diff(r)  # (nr,) node spacings
        self.dz = np.diff(z)  # (nz,)
        # face between radially adjacent nodes (i, i+1): cylinder strip
        self.area_r = 2.0 * np.pi * self.r_dual[1:-1][None, :] * dz_dual[:, None]  # (nz1, nr)
        # face between vertically adjacent nodes (j, j+1): annulus of the dual cell
        self.area_z = np.broadcast_to(ring[None, :], (self.nz, self.nr1)).copy()

        # primal-cell quadrature (integration measure of `integrate`)
        r_c = 0.5 * (r[:-1] + r[1:])
        self.cell_volumes = (2.0 * np.pi * r_c[None, :] * self.dr[None, :]
                             * self.dz[:, None])  # (nz, nr)

        # nodal weights reproducing `integrate` as a linear functional
        w = np.zeros((self.nz1, self.nr1))
        quarter = 0.25 * self.cell_volumes
        w[:-1, :-1] += quarter
        w[:-1, 1:] += quarter
        w[1:, :-1] += quarter
        w[1:, 1:] += quarter
        self.integration_weights = w

        rr, zz = np.meshgrid(r, z)
        self.rr = rr  # (nz1, nr1) node radii
        self.zz = zz  # (nz1, nr1) node heights

    @property
    def radius(self) -> float:
        return float(self.r[-1])

    @property
    def height(self) -> float:
        return float(self.z[-1])

    @property
    def domain_volume(self) -> float:
        return float(np.pi * self.radius**2 * self.height)

    def node_index(self, i: int, j: int) -> int:
        return j * self.nr1 + i

    def ball_mask(self, center: tuple[float, float], radius: float) -> np.ndarray:
        """Boolean node mask of the sphere of given radius about (r0, z0)."""
        r0, z0 = center
        return (self.rr - r0) ** 2 + (self.zz - z0) ** 2 <= radius**2

    def distance_to(self, center: tuple[float, float]) -> np.ndarray:
        r0, z0 = center
        return np.hypot(self.rr - r0, self.zz - z0)


def build_graded_mesh(radius: float, height: float, n_r: int, n_z: int,
                      focus: tuple[float, float], grading: float) -> AxiMesh:
    """Tensor-product mesh with geometric grading toward the focus point.

    ``grading`` is the size ratio between adjacent cells (1 = uniform). Ratios
    above 1.3 violate the mesh quality contract and raise.
    """
    if n_r < 8 or n_z < 8:
        raise MeshError("need at least 8 cells per direction")
    if grading < 1.0:
        raise MeshError("grading ratio must be >= 1")
    if grading > MAX_NEIGHBOR_RATIO:
        raise MeshError(f"grading ratio {grading} exceeds {MAX_NEIGHBOR_RATIO}")
    fr, fz = focus
    if not (0.0 <= fr <= radius and 0.0 <= fz <= height):
        raise MeshError("focus must lie inside the domain")
    r = _graded_axis(radius, n_r, fr, grading)
    z = _graded_axis(height, n_z, fz, grading)
    return AxiMesh(r=r, z=z, injection_point=(fr, fz))


def integrate(field: np.ndarray, mesh: AxiMesh) -> float:
    """Axisymmetric integral: sum over primal cells of cell-average x volume."""
    f = np.asarray(field)
    if f.shape != (mesh.nz1, mesh.nr1):
        raise ValueError(f"field shape {f.shape} does not match mesh "
                         f"({mesh.nz1}, {mesh.nr1})")
    cell_avg = 0.25 * (f[:-1, :-1] + f[:-1, 1:] + f[1:, :-1] + f[1:, 1:])
    return float(np.sum(cell_avg * mesh.cell_volumes))


def nodal_integral(field: np.ndarray, mesh: AxiMesh) -> float:
    """Integral in the dual (conservation) measure: sum of field x node volume."""
    return float(np.sum(np.asarray(field) * mesh.node_volumes))


def project_field(src_mesh: AxiMesh, src_field: np.ndarray,
                  dst_mesh: AxiMesh) -> tuple[np.ndarray, float]:
    """Bilinear interpolation of a nodal field onto another mesh.

    Returns the projected field and the relative change of its axisymmetric
    integral (the mass-change report). Both meshes must cover the same domain.
    """
    if (abs(src_mesh.radius - dst_mesh.radius) > 1e-12
            or abs(src_mesh.height - dst_mesh.height) > 1e-12):
        raise MeshError("meshes cover different domains")
    f = np.asarray(src_field, dtype=float)
    if f.shape != (src_mesh.nz1, src_mesh.nr1):
        raise ValueError("field shape does not match source mesh")

    # locate destination nodes inside source cells
    ir = np.clip(np.searchsorted(src_mesh.r, dst_mesh.r, side="right") - 1,
                 0, src_mesh.nr - 1)
    jz = np.clip(np.searchsorted(src_mesh.z, dst_mesh.z, side="right") - 1,
                 0, src_mesh.nz - 1)
    tr = (dst_mesh.r - src_mesh.r[ir]) / src_mesh.dr[ir]
    tz = (dst_mesh.z - src_mesh.z[jz]) / src_mesh.dz[jz]
    tr = np.clip(tr, 0.0, 1.0)[None, :]
    tz = np.clip(tz, 0.0, 1.0)[:, None]

    f00 = f[np.ix_(jz, ir)]
    f01 = f[np.ix_(jz, ir + 1)]
    f10 = f[np.ix_(jz + 1, ir)]
    f11 = f[np.ix_(jz + 1, ir + 1)]
    out = ((1 - tz) * ((1 - tr) * f00 + tr * f01)
           + tz * ((1 - tr) * f10 + tr * f11))

    m_src = integrate(f, src_mesh)
    m_dst = integrate(out, dst_mesh)
    denom = abs(m_src) if m_src != 0.0 else 1.0
    return out, (m_dst - m_src) / denom


@dataclass
class FieldState:
    """All nodal unknowns plus the face-normal Darcy velocity at time t.

    Concentrations are mol/cm^3 of pore fluid; bound drug c_b is mol/cm^3 of
    tissue. Velocities live on dual faces: u_r (nz1, nr), u_z (nz, nr1).
    """

    mesh: AxiMesh
    c_na: np.ndarray
    c_h: np.ndarray
    c_mab: np.ndarray
    c_b: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    u_r: np.ndarray
    u_z: np.ndarray
    t: float = 0.0
    # derived nodal fields, refreshed by the stepper after each accepted step
    c_cl: np.ndarray | None = None
    ph: np.ndarray | None = None
    z_mab: np.ndarray | None = None
    j_l: np.ndarray | None = None

    @classmethod
    def rest_state(cls, mesh: AxiMesh, species) -> "FieldState":
        shape = (mesh.nz1, mesh.nr1)
        return cls(
            mesh=mesh,
            c_na=np.full(shape, species.sodium.c_init),
            c_h=np.full(shape, species.hydrogen.c_init),
            c_mab=np.full(shape, species.drug.c_init),
            c_b=np.zeros(shape),
            p=np.zeros(shape),
            phi=np.zeros(shape),
            u_r=np.zeros((mesh.nz1, mesh.nr)),
            u_z=np.zeros((mesh.nz, mesh.nr1)),
            t=0.0,
        )

    def clip_concentrations(self, logger=None) -> int:
        """Zero out tiny negative concentrations left over from linear solves.

        Overshoot large enough to reject the step is the stepper's business;
        by the time a state is accepted only round-off negatives remain.
        """
        n_clipped = 0
        for name in ("c_na", "c_h", "c_mab", "c_b"):
            arr = getattr(self, name)
            neg = arr < 0.0
            if np.any(neg):
                n_clipped += int(neg.sum())
                arr[neg] = 0.0
        if n_clipped and logger is not None:
            logger.debug("clipped %d tiny negative nodal values", n_clipped)
        return n_clipped
