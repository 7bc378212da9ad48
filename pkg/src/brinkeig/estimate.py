# -*- coding: utf-8 -*-
"""Residual a posteriori error indicators for computed eigenpairs.

The local indicator of a cell T combines the strong momentum residual,
the divergence residual, and the normal-stress jumps over its facets:

    eta_T^2 = h_T^2 ||lam*u + nu*Lap(u) - Kinv*u - grad p||_{0,T}^2
            + ||div u||_{0,T}^2
            + sum_e (h_e/2) ||[[ (nu*grad(u) - p*I) n ]]||_{0,e}^2

where interior facets share their jump between the two adjacent cells.
Essential-boundary facets contribute nothing; natural-boundary facets can
contribute their full one-sided residual with weight h_e (flagged, since
the plain formula omits boundary terms).
"""

from dataclasses import dataclass

import numpy as np

from .elements import quadrature, cell_jacobians
from .mesh2d import BOUNDARY_DIRICHLET, BOUNDARY_NATURAL


class EstimateError(ValueError):
    """Eigenpair does not match the mesh/layout it is estimated on."""


@dataclass
class IndicatorField:
    """Per-cell error indicators and their parts (all squared totals)."""

    eta_T: np.ndarray
    volume_part: np.ndarray
    divergence_part: np.ndarray
    jump_part: np.ndarray
    eta: float


# 3-point Gauss rule on [0,1], exact through degree 5
_EDGE_T = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
_EDGE_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def _velocity_coeffs(layout, u):
    n_s = layout.n_scalar
    return np.stack(
        [u[:n_s][layout.cell_vdofs], u[n_s:][layout.cell_vdofs]], axis=-1
    )


def _stress_normal_at_edge(layout, params, uc, pc, facet_ids, side, points):
    """(nu*grad(u) - p*I) n on the given side of each facet at edge points.

    `points` has shape (nf, nq, 2) in physical coordinates; the result is
    (nf, nq, 2).
    """
    mesh = layout.mesh
    fam = layout.family
    f = mesh.facets
    cells = f.cells[facet_ids, side]
    _, jac_inv, _ = cell_jacobians(mesh.cell_vertices()[cells])
    v0 = mesh.vertices[mesh.cells[cells, 0]]
    ref = np.einsum("fkd,fed->fke", points - v0[:, None, :], jac_inv)
    g_ref = fam.velocity.gradients(ref)
    g_phys = np.einsum("fknd,fde->fkne", g_ref, jac_inv)
    grads = np.einsum("fkne,fna->fkae", g_phys, uc[cells])
    pvals = np.einsum("fkn,fn->fk", fam.pressure.values(ref), pc[cells])
    tau = params.nu * grads
    tau[:, :, 0, 0] -= pvals
    tau[:, :, 1, 1] -= pvals
    return np.einsum("fkad,fd->fka", tau, f.normals[facet_ids])


def local_indicators(layout, params, pair, include_gamma2=None):
    """Assemble the local residual indicators for one eigenpair.

    Parameters
    ----------
    layout : DofLayout
        Must be the layout the pair was computed with.
    params : PhysicalParams
    pair : EigenPair
    include_gamma2 : bool, optional
        Add the one-sided natural-boundary residual with weight h_e.
        Defaults to True exactly when the mesh has natural facets (the
        term is vacuous otherwise).

    Returns
    -------
    IndicatorField
    """
    mesh = layout.mesh
    fam = layout.family
    u = np.asarray(pair.u, dtype=float)
    p = np.asarray(pair.p, dtype=float)
    if u.shape != (layout.n_u,) or p.shape != (layout.n_p,):
        raise EstimateError("eigenpair does not conform to the layout")
    if include_gamma2 is None:
        include_gamma2 = mesh.has_natural_boundary()
    lam = float(pair.value)

    from .elements import push_forward

    rule = quadrature(fam.quad_degree)
    pf = push_forward(mesh.cell_vertices(), fam.velocity, rule)
    uc = _velocity_coeffs(layout, u)
    pc = p[layout.cell_pdofs]

    vals = np.einsum("qn,cna->cqa", pf.values, uc)
    laps = np.einsum("cqn,cna->cqa", pf.laplacians, uc)
    kinv = params.cell_tensors(mesh)
    drag = np.einsum("cab,cqb->cqa", kinv, vals)
    # P1 pressure gradient is constant per cell
    p_pf = push_forward(mesh.cell_vertices(), fam.pressure, rule)
    gradp = np.einsum("cnd,cn->cd", p_pf.gradients[:, 0], pc)
    resid = lam * vals + params.nu * laps - drag - gradp[:, None, :]
    h_T = mesh.cell_diameters()
    volume = h_T**2 * np.einsum("cq,cqa,cqa->c", pf.measure, resid, resid)

    divu = np.einsum("cqnd,cnd->cq", pf.gradients, uc)
    divergence = np.einsum("cq,cq,cq->c", pf.measure, divu, divu)

    jump = np.zeros(mesh.num_cells)
    f = mesh.facets
    interior = np.flatnonzero(f.interior_mask)
    if interior.size:
        a = mesh.vertices[f.vertices[interior, 0]]
        b = mesh.vertices[f.vertices[interior, 1]]
        pts = a[:, None, :] + _EDGE_T[None, :, None] * (b - a)[:, None, :]
        tn0 = _stress_normal_at_edge(layout, params, uc, pc, interior, 0, pts)
        tn1 = _stress_normal_at_edge(layout, params, uc, pc, interior, 1, pts)
        diff = tn0 - tn1
        energy = f.lengths[interior] * np.einsum("k,fka,fka->f", _EDGE_W, diff, diff)
        share = 0.5 * f.lengths[interior] * energy
        np.add.at(jump, f.cells[interior, 0], share)
        np.add.at(jump, f.cells[interior, 1], share)
    if include_gamma2:
        natural = np.flatnonzero(f.boundary_tag == BOUNDARY_NATURAL)
        if natural.size:
            a = mesh.vertices[f.vertices[natural, 0]]
            b = mesh.vertices[f.vertices[natural, 1]]
            pts = a[:, None, :] + _EDGE_T[None, :, None] * (b - a)[:, None, :]
            tn = _stress_normal_at_edge(layout, params, uc, pc, natural, 0, pts)
            energy = f.lengths[natural] * np.einsum("k,fka,fka->f", _EDGE_W, tn, tn)
            np.add.at(jump, f.cells[natural, 0], f.lengths[natural] * energy)

    eta_sq = volume + divergence + jump
    return IndicatorField(
        eta_T=np.sqrt(eta_sq),
        volume_part=volume,
        divergence_part=divergence,
        jump_part=jump,
        eta=float(np.sqrt(eta_sq.sum())),
    )


def global_estimator(field):
    """The global estimator eta = sqrt(sum_T eta_T^2)."""
    return float(np.sqrt(np.sum(field.eta_T**2)))
