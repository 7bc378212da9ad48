# -*- coding: utf-8 -*-
"""Assembly of the generalized eigenproblem pencil (K, M).

The block layout of K is

    [ A   B^T  0 ]
    [ B   0    c ]
    [ 0   c^T  0 ]

with A the permeability + viscous velocity operator, B the (negative)
divergence coupling, and c the zero-mean pressure constraint column that
is present only when the whole boundary is essential.  M carries the
velocity mass block only.  Global dofs are numbered velocity component 0,
velocity component 1, pressure, then the optional multiplier.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from .elements import Family, cell_jacobians, push_forward, quadrature
from .mesh2d import BOUNDARY_DIRICHLET, Mesh


class AssemblyError(ValueError):
    """Inconsistent mesh/layout/parameter combination."""


def _as_tensor(value):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = float(arr) * np.eye(2)
    if arr.shape != (2, 2):
        raise AssemblyError(
            "permeability entries must be scalars or 2x2 tensors, got shape %s"
            % (arr.shape,)
        )
    return arr


@dataclass(frozen=True)
class PhysicalParams:
    """Viscosity and inverse permeability per subdomain tag.

    `permeability_inverse` maps subdomain tags to symmetric positive
    semidefinite 2x2 tensors; a scalar kappa is shorthand for kappa*I.
    A zero tensor models free flow.
    """

    nu: float
    permeability_inverse: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.nu > 0.0:
            raise AssemblyError("viscosity nu must be positive, got %g" % self.nu)
        tensors = {int(k): _as_tensor(v) for k, v in self.permeability_inverse.items()}
        for tag, t in tensors.items():
            if not np.allclose(t, t.T, atol=1e-12):
                raise AssemblyError("permeability tensor for tag %d not symmetric" % tag)
            ev = np.linalg.eigvalsh(t)
            if ev.min() < -1e-12 * max(1.0, abs(ev).max()):
                raise AssemblyError(
                    "permeability tensor for tag %d not positive semidefinite" % tag
                )
        object.__setattr__(self, "permeability_inverse", tensors)

    def tensor(self, tag):
        try:
            return self.permeability_inverse[int(tag)]
        except KeyError:
            raise AssemblyError("no permeability entry for subdomain tag %d" % tag)

    def cell_tensors(self, mesh):
        """Inverse permeability per cell, shape (nc, 2, 2)."""
        tags = np.unique(mesh.cell_subdomain)
        table = np.stack([self.tensor(t) for t in tags])
        index = np.searchsorted(tags, mesh.cell_subdomain)
        return table[index]


@dataclass
class DofLayout:
    """Global degree-of-freedom maps for one family on one mesh.

    `cell_vdofs` holds scalar velocity node indices per cell (component 0;
    component 1 adds `n_scalar`).  `dirichlet` lists the velocity dofs on
    the essential boundary, both components.
    """

    mesh: Mesh
    family: Family
    n_scalar: int
    n_p: int
    has_multiplier: bool
    cell_vdofs: np.ndarray
    cell_pdofs: np.ndarray
    dirichlet: np.ndarray

    @property
    def n_u(self):
        return 2 * self.n_scalar

    @property
    def total_dim(self):
        return self.n_u + self.n_p + (1 if self.has_multiplier else 0)

    @property
    def pressure_offset(self):
        return self.n_u

    def split(self, x):
        """Split a solution vector into (u, p, multiplier)."""
        x = np.asarray(x)
        u = x[: self.n_u]
        p = x[self.n_u : self.n_u + self.n_p]
        mult = float(x[-1]) if self.has_multiplier else None
        return u, p, mult

    def velocity_node_coords(self):
        """Coordinates of the scalar velocity nodes (bubbles at centroids)."""
        mesh = self.mesh
        if self.family.name == "mini":
            return np.vstack([mesh.vertices, mesh.cell_centroids()])
        mids = 0.5 * (
            mesh.vertices[mesh.facets.vertices[:, 0]]
            + mesh.vertices[mesh.facets.vertices[:, 1]]
        )
        return np.vstack([mesh.vertices, mids])


def build_layout(mesh, family):
    """Number the dofs of `family` on `mesh` and collect essential dofs."""
    nv = mesh.num_vertices
    nc = mesh.num_cells
    f = mesh.facets
    if family.name == "mini":
        n_scalar = nv + nc
        cell_vdofs = np.hstack([mesh.cells, nv + np.arange(nc)[:, None]])
    elif family.name == "taylor_hood":
        n_scalar = nv + f.n
        cell_vdofs = np.hstack([mesh.cells, nv + f.cell_to_facets])
    else:
        raise AssemblyError("unsupported family %r" % (family.name,))
    cell_pdofs = mesh.cells.copy()

    dir_facets = np.flatnonzero(
        f.boundary_mask & (f.boundary_tag == BOUNDARY_DIRICHLET)
    )
    dir_nodes = set(f.vertices[dir_facets].ravel().tolist())
    if family.name == "taylor_hood":
        dir_nodes.update((nv + dir_facets).tolist())
    dir_nodes = np.asarray(sorted(dir_nodes), dtype=np.int64)
    dirichlet = np.concatenate([dir_nodes, dir_nodes + n_scalar])

    has_multiplier = not mesh.has_natural_boundary()
    return DofLayout(
        mesh=mesh,
        family=family,
        n_scalar=n_scalar,
        n_p=nv,
        has_multiplier=has_multiplier,
        cell_vdofs=cell_vdofs,
        cell_pdofs=cell_pdofs,
        dirichlet=dirichlet,
    )


def _local_blocks(layout, params):
    """Per-cell local matrices (vectorized over cells).

    Returns mass (nc, nb, nb), stiffness (nc, nb, nb), permeability-weighted
    mass expanded over components (nc, 2, 2, nb, nb), divergence coupling
    (nc, 2, 3, nb) and the pressure integrals (nc, 3).
    """
    mesh = layout.mesh
    fam = layout.family
    rule = quadrature(fam.quad_degree)
    pf = push_forward(mesh.cell_vertices(), fam.velocity, rule)
    pvals = fam.pressure.values(rule.xy)

    mass = np.einsum("cq,qi,qj->cij", pf.measure, pf.values, pf.values)
    stiff = np.einsum("cq,cqid,cqjd->cij", pf.measure, pf.gradients, pf.gradients)
    kinv = params.cell_tensors(mesh)
    perm = np.einsum("cab,cij->cabij", kinv, mass)
    # B_{q j} = -int psi_q d_a phi_j, per component a
    div = -np.einsum("cq,qi,cqja->caij", pf.measure, pvals, pf.gradients)
    pressure_int = np.einsum("cq,qi->ci", pf.measure, pvals)
    return mass, stiff, perm, div, pressure_int, pf


def _scatter(rows, cols, vals, shape):
    return sp.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape
    ).tocsr()


def assemble_pencil(layout, params, eliminate_dirichlet=True):
    """Assemble the stiffness-like matrix K and singular mass matrix M.

    Essential velocity dofs are eliminated symmetrically: their K rows and
    columns are replaced by the identity and their M rows and columns by
    zero, so they contribute no finite eigenvalue.
    """
    if not isinstance(params, PhysicalParams):
        raise AssemblyError("params must be a PhysicalParams instance")
    mesh = layout.mesh
    if layout.mesh is not mesh:
        raise AssemblyError("layout was built for a different mesh")
    mass, stiff, perm, div, pressure_int, _ = _local_blocks(layout, params)
    nb = layout.cell_vdofs.shape[1]
    n_s = layout.n_scalar
    dim = layout.total_dim
    nu = params.nu

    rows = []
    cols = []
    vals = []
    vd = layout.cell_vdofs
    pd = layout.cell_pdofs + layout.pressure_offset
    ri = np.repeat(vd[:, :, None], nb, axis=2)
    ci = np.repeat(vd[:, None, :], nb, axis=1)
    for a in range(2):
        for b in range(2):
            block = perm[:, a, b]
            if a == b:
                block = block + nu * stiff
            rows.append(ri + a * n_s)
            cols.append(ci + b * n_s)
            vals.append(block)
    pri = np.repeat(pd[:, :, None], nb, axis=2)
    vci = np.repeat(vd[:, None, :], 3, axis=1)
    for a in range(2):
        rows.append(pri)
        cols.append(vci + a * n_s)
        vals.append(div[:, a])
        rows.append(np.swapaxes(vci + a * n_s, 1, 2))
        cols.append(np.swapaxes(pri, 1, 2))
        vals.append(np.swapaxes(div[:, a], 1, 2))
    if layout.has_multiplier:
        mcol = dim - 1
        rows.append(pd)
        cols.append(np.full_like(pd, mcol))
        vals.append(pressure_int)
        rows.append(np.full_like(pd, mcol))
        cols.append(pd)
        vals.append(pressure_int)

    K = sp.coo_matrix(
        (
            np.concatenate([v.ravel() for v in vals]),
            (
                np.concatenate([r.ravel() for r in rows]),
                np.concatenate([c.ravel() for c in cols]),
            ),
        ),
        shape=(dim, dim),
    ).tocsr()

    mrows = np.concatenate([(ri + a * n_s).ravel() for a in range(2)])
    mcols = np.concatenate([(ci + a * n_s).ravel() for a in range(2)])
    mvals = np.concatenate([mass.ravel(), mass.ravel()])
    M = sp.coo_matrix((mvals, (mrows, mcols)), shape=(dim, dim)).tocsr()

    if eliminate_dirichlet and layout.dirichlet.size:
        K, M = eliminate(K, M, layout.dirichlet, dim)
    K.sum_duplicates()
    M.sum_duplicates()
    return K, M


def eliminate(K, M, dofs, dim):
    """Symmetric essential-dof elimination: identity in K, zero in M."""
    keep = np.ones(dim)
    keep[dofs] = 0.0
    Z = sp.diags(keep)
    D = sp.diags(1.0 - keep)
    K = (Z @ K @ Z + D).tocsr()
    M = (Z @ M @ Z).tocsr()
    return K, M


def velocity_mass(layout, params=None):
    """The velocity mass block M_u as an (n_u, n_u) sparse matrix."""
    mesh = layout.mesh
    fam = layout.family
    rule = quadrature(fam.quad_degree)
    pf = push_forward(mesh.cell_vertices(), fam.velocity, rule)
    mass = np.einsum("cq,qi,qj->cij", pf.measure, pf.values, pf.values)
    nb = layout.cell_vdofs.shape[1]
    vd = layout.cell_vdofs
    ri = np.repeat(vd[:, :, None], nb, axis=2)
    ci = np.repeat(vd[:, None, :], nb, axis=1)
    n_s = layout.n_scalar
    rows = np.concatenate([(ri + a * n_s).ravel() for a in range(2)])
    cols = np.concatenate([(ci + a * n_s).ravel() for a in range(2)])
    vals = np.concatenate([mass.ravel(), mass.ravel()])
    return sp.coo_matrix((vals, (rows, cols)), shape=(layout.n_u, layout.n_u)).tocsr()


def apply_weighted_norm(layout, params, u, p):
    """Parameter-weighted norm of a discrete velocity/pressure pair.

    Returns ( ||Kinv^{1/2} u||^2 + nu ||grad u||^2 + ||div u||^2
    + ||p||^2 )^{1/2} where the permeability term vanishes on free-flow
    cells.
    """
    mesh = layout.mesh
    fam = layout.family
    u = np.asarray(u, dtype=float)
    p = np.asarray(p, dtype=float)
    if u.shape != (layout.n_u,) or p.shape != (layout.n_p,):
        raise AssemblyError("coefficient vectors do not match the layout")
    rule = quadrature(fam.quad_degree)
    pf = push_forward(mesh.cell_vertices(), fam.velocity, rule)
    pvals = fam.pressure.values(rule.xy)
    n_s = layout.n_scalar
    uc = np.stack([u[:n_s][layout.cell_vdofs], u[n_s:][layout.cell_vdofs]], axis=-1)
    # velocity values and gradients at quadrature points
    vals = np.einsum("qi,cia->cqa", pf.values, uc)
    grads = np.einsum("cqid,cia->cqad", pf.gradients, uc)
    kinv = params.cell_tensors(mesh)
    perm_term = np.einsum("cq,cab,cqa,cqb->", pf.measure, kinv, vals, vals)
    visc_term = params.nu * np.einsum("cq,cqad,cqad->", pf.measure, grads, grads)
    divv = grads[:, :, 0, 0] + grads[:, :, 1, 1]
    div_term = np.einsum("cq,cq,cq->", pf.measure, divv, divv)
    pc = p[layout.cell_pdofs]
    pvalsq = np.einsum("qi,ci->cq", pvals, pc)
    p_term = np.einsum("cq,cq,cq->", pf.measure, pvalsq, pvalsq)
    return float(np.sqrt(perm_term + visc_term + div_term + p_term))


def dump_matrix_market(path, matrix):
    """Write a sparse matrix in Matrix Market coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix))
