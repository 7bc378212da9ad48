# -*- coding: utf-8 -*-
"""Adaptive refinement loop: solve, estimate, mark, refine.

One target eigenvalue is tracked across meshes.  Marking uses the maximum
strategy: refine every cell whose indicator reaches a fraction theta of
the largest indicator (theta defaults to 0.5).
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import build_layout, assemble_pencil
from .eigensolve import EigenSolveError, SolverConfig, smallest_eigenpairs
from .estimate import local_indicators
from .mesh2d import refine_bisect
from .study import StudyRecord, err_eff


class AdaptError(ValueError):
    pass


class AdaptiveSolveError(EigenSolveError):
    """Solver failure mid-loop; carries the records gathered so far."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass
class AdaptiveRun:
    """Configuration and per-iteration history of one adaptive run.

    `target` is the 1-based index of the tracked eigenvalue.  `lambda_ref`
    is the extrapolated reference used for err/eff; when absent the
    records carry no error column.
    """

    target: int = 1
    theta: float = 0.5
    max_iterations: int = 15
    dof_budget: Optional[int] = None
    lambda_ref: Optional[float] = None
    nev: Optional[int] = None
    records: list = field(default_factory=list)

    def __post_init__(self):
        if self.target < 1:
            raise AdaptError("target eigenvalue index is 1-based")
        if not 0.0 < self.theta <= 1.0:
            raise AdaptError("theta must lie in (0, 1]")
        if self.max_iterations < 1:
            raise AdaptError("max_iterations must be >= 1")


def mark_max(eta_T, theta=0.5):
    """Cells whose indicator reaches theta times the largest indicator."""
    eta_T = np.asarray(eta_T, dtype=float)
    if eta_T.size == 0:
        raise AdaptError("empty indicator field")
    if not 0.0 < theta <= 1.0:
        raise AdaptError("theta must lie in (0, 1]")
    return np.flatnonzero(eta_T >= theta * eta_T.max())


def track_eigenvalue(previous, new_pairs, mass=None, previous_u=None):
    """Index of the new pair matching a previously tracked one.

    With an interpolated previous velocity and the new mass matrix the
    match maximizes the mass-weighted overlap |<u_prev, M u_new>|, ties
    broken by nearest eigenvalue; otherwise the nearest eigenvalue wins.
    """
    if not new_pairs:
        raise AdaptError("no candidate eigenpairs to track into")
    prev_value = previous.value if hasattr(previous, "value") else float(previous)
    values = np.array([p.value for p in new_pairs])
    if previous_u is not None and mass is not None:
        overlaps = np.array(
            [abs(float(previous_u @ (mass @ p.vector[: len(previous_u)])))
             for p in new_pairs]
        )
        best = overlaps.max()
        tied = np.flatnonzero(overlaps >= best * (1.0 - 1e-9))
        return int(tied[np.argmin(np.abs(values[tied] - prev_value))])
    return int(np.argmin(np.abs(values - prev_value)))


def prolong_vertex_velocity(old_layout, new_layout, u_old):
    """Carry the vertex part of a velocity field onto a bisected mesh.

    Exact for the piecewise-linear vertex component: every new vertex is
    the midpoint of an edge of the previous mesh.  Bubble and edge dofs of
    the new layout are left at zero; the result is meant for overlap
    scoring, not for high-order transfer.
    """
    old_mesh = old_layout.mesh
    new_mesh = new_layout.mesh
    nv_old = old_mesh.num_vertices
    nv_new = new_mesh.num_vertices
    out = np.zeros(new_layout.n_u)
    parents = new_mesh.vertex_parents[nv_old:]
    if parents.size and parents.max() >= nv_old:
        raise AdaptError("mesh is not a single-step refinement of the source")
    for comp in range(2):
        vals = np.empty(nv_new)
        vals[:nv_old] = u_old[comp * old_layout.n_scalar :][:nv_old]
        if nv_new > nv_old:
            vals[nv_old:] = 0.5 * (vals[parents[:, 0]] + vals[parents[:, 1]])
        out[comp * new_layout.n_scalar : comp * new_layout.n_scalar + nv_new] = vals
    return out


def run_adaptive(
    initial_mesh,
    family,
    params,
    run,
    solver=None,
    include_gamma2=None,
    snapshot_hook=None,
):
    """Execute the adaptive loop and return the per-iteration records.

    Stops after `run.max_iterations` iterations or once the dof budget is
    exceeded.  A solver failure aborts with the partial history attached
    to the raised AdaptiveSolveError.
    """
    mesh = initial_mesh
    run.records = []
    prev_pair = None
    prev_layout = None
    nev = run.nev if run.nev is not None else max(run.target + 2, 5)
    for iteration in range(run.max_iterations):
        t0 = time.perf_counter()
        layout = build_layout(mesh, family)
        K, M = assemble_pencil(layout, params)
        cfg = SolverConfig(
            nev=nev,
            shift=solver.shift if solver else 0.0,
            krylov_dim=solver.krylov_dim if solver else None,
            tol=solver.tol if solver else 1e-10,
            max_restarts=solver.max_restarts if solver else 50,
        )
        try:
            pairs = smallest_eigenpairs(K, M, layout, cfg)
        except EigenSolveError as exc:
            raise AdaptiveSolveError(
                "solve failed at adaptive iteration %d: %s" % (iteration, exc),
                records=run.records,
            ) from exc
        if prev_pair is None:
            if run.target > len(pairs):
                raise AdaptError(
                    "target index %d exceeds computed pairs" % run.target
                )
            idx = run.target - 1
        else:
            u_interp = prolong_vertex_velocity(prev_layout, layout, prev_pair.u)
            full = np.zeros(layout.total_dim)
            full[: layout.n_u] = u_interp
            idx = track_eigenvalue(prev_pair, pairs, mass=M, previous_u=full)
        pair = pairs[idx]
        fld = local_indicators(layout, params, pair, include_gamma2)
        err = eff = None
        if run.lambda_ref is not None:
            err, eff = err_eff(pair.value, run.lambda_ref, fld.eta)
        record = StudyRecord(
            level=iteration,
            h=layout.total_dim ** -0.5,
            dof=layout.total_dim,
            eigenvalues=np.array([p.value for p in pairs]),
            eta=fld.eta,
            err=err,
            eff=eff,
            walltime_ms=1e3 * (time.perf_counter() - t0),
        )
        run.records.append(record)
        if snapshot_hook is not None:
            snapshot_hook(iteration, mesh, layout, pair, fld)
        if iteration == run.max_iterations - 1:
            break
        if run.dof_budget is not None and layout.total_dim >= run.dof_budget:
            break
        marked = mark_max(fld.eta_T, run.theta)
        mesh = refine_bisect(mesh, marked)
        prev_pair = pair
        prev_layout = layout
    return run.records
