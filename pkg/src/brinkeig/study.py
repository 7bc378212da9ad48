# -*- coding: utf-8 -*-
"""Convergence studies, eigenvalue extrapolation, and report generation.

Uniform refinement studies record the first `nev` eigenvalues per level,
fit lambda_h ~ lambda_extr + C*h^t per eigenvalue, and derive the error
err = |lambda_h - lambda_extr| and the effectivity eff = err / eta^2.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assembly import build_layout, assemble_pencil
from .eigensolve import SolverConfig, smallest_eigenpairs
from .estimate import local_indicators


class StudyError(ValueError):
    pass


@dataclass
class StudyRecord:
    """One row of a study: a refinement level or an adaptive iteration."""

    level: int
    h: float
    dof: int
    eigenvalues: np.ndarray
    eta: Optional[float] = None
    err: Optional[np.ndarray] = None
    eff: Optional[np.ndarray] = None
    walltime_ms: float = 0.0


@dataclass
class FitResult:
    """Least-squares fit of lambda_h = lambda_extr + C * h^order.

    `order` is None when the data is constant and the rate is undefined.
    The fit residual is reported, never hidden.
    """

    lam_extr: float
    order: Optional[float]
    residual: float


def _fit_sse(h, lam, t):
    basis = np.column_stack([np.ones_like(h), h**t])
    coef, *_ = np.linalg.lstsq(basis, lam, rcond=None)
    r = lam - basis @ coef
    return float(r @ r), coef


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def fit_extrapolate(samples, t_range=(0.5, 6.0)):
    """Fit an extrapolated eigenvalue and convergence order.

    Parameters
    ----------
    samples : sequence of (h, lambda_h)
        At least 3 levels with distinct h.
    t_range : (float, float)
        Search interval for the order; a coarse scan locates the basin and
        golden-section refines it.
    """
    samples = [(float(h), float(l)) for h, l in samples]
    if len(samples) < 3:
        raise StudyError("extrapolation needs at least 3 levels")
    h = np.array([s[0] for s in samples])
    lam = np.array([s[1] for s in samples])
    if len(np.unique(h)) != len(h):
        raise StudyError("levels must have distinct h")
    if np.ptp(lam) == 0.0:
        return FitResult(lam_extr=float(lam[0]), order=None, residual=0.0)

    lo, hi = t_range
    grid = np.linspace(lo, hi, 56)
    sses = [_fit_sse(h, lam, t)[0] for t in grid]
    k = int(np.argmin(sses))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    # golden-section refinement of the bracketing interval
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc = _fit_sse(h, lam, c)[0]
    fd = _fit_sse(h, lam, d)[0]
    for _ in range(80):
        if b - a < 1e-12:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = _fit_sse(h, lam, c)[0]
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = _fit_sse(h, lam, d)[0]
    t = 0.5 * (a + b)
    sse, coef = _fit_sse(h, lam, t)
    return FitResult(lam_extr=float(coef[0]), order=float(t), residual=math.sqrt(sse))


def err_eff(lam_h, lam_extr, eta):
    """Eigenvalue error against the extrapolated value and its effectivity.

    eff = err / eta^2; a vanishing estimator with nonzero error reports an
    infinite effectivity.
    """
    err = abs(float(lam_h) - float(lam_extr))
    if eta > 0.0:
        eff = err / (eta * eta)
    else:
        eff = 0.0 if err == 0.0 else math.inf
    return err, eff


@dataclass
class StudyResult:
    records: list
    fits: list

    def eigenvalue_table(self):
        return np.array([r.eigenvalues for r in self.records])


def run_uniform_study(
    make_mesh,
    family,
    params,
    levels,
    nev=5,
    solver=None,
    compute_eta=False,
    include_gamma2=None,
):
    """Solve on a sequence of uniformly refined meshes and fit the rates.

    Parameters
    ----------
    make_mesh : callable
        Maps a resolution level N to a Mesh.
    family, params : element family and physical parameters
    levels : list of int
        Resolutions N; h is recorded as 1/N.
    nev : int
        Eigenvalues per level.
    compute_eta : bool
        Also compute the residual estimator for the first eigenpair.

    Returns
    -------
    StudyResult with `records` per level and `fits` per eigenvalue.
    """
    if not levels:
        raise StudyError("levels must be nonempty")
    records = []
    for n in levels:
        t0 = time.perf_counter()
        mesh = make_mesh(n)
        layout = build_layout(mesh, family)
        K, M = assemble_pencil(layout, params)
        cfg = solver if solver is not None else SolverConfig(nev=nev)
        if cfg.nev != nev:
            cfg = SolverConfig(
                nev=nev,
                shift=cfg.shift,
                krylov_dim=cfg.krylov_dim,
                tol=cfg.tol,
                max_restarts=cfg.max_restarts,
            )
        pairs = smallest_eigenpairs(K, M, layout, cfg)
        eta = None
        if compute_eta:
            fld = local_indicators(layout, params, pairs[0], include_gamma2)
            eta = fld.eta
        records.append(
            StudyRecord(
                level=int(n),
                h=1.0 / float(n),
                dof=layout.total_dim,
                eigenvalues=np.array([p.value for p in pairs]),
                eta=eta,
                walltime_ms=1e3 * (time.perf_counter() - t0),
            )
        )
    fits = [None] * nev
    if len(records) >= 3:
        for i in range(nev):
            fits[i] = fit_extrapolate([(r.h, r.eigenvalues[i]) for r in records])
        for r in records:
            r.err = np.array(
                [abs(r.eigenvalues[i] - fits[i].lam_extr) for i in range(nev)]
            )
            if r.eta is not None:
                r.eff = np.array(
                    [err_eff(r.eigenvalues[i], fits[i].lam_extr, r.eta)[1]
                     for i in range(nev)]
                )
    return StudyResult(records=records, fits=fits)


@dataclass
class SpuriousReport:
    """Eigenvalues below the window bound per level, plus flagged values."""

    bound: float
    levels: list
    values: list
    flags: list

    @property
    def sequence_count(self):
        return max((len(v) for v in self.values), default=0)


def scan_records(level_values, bound, drift=0.10):
    """Flag values with no converging counterpart at the next finer level.

    `level_values` is a list of per-level eigenvalue arrays ordered from
    coarse to fine.  Values below `bound` are matched one-to-one against
    the full spectrum of the next level (each finer value consumed at most
    once); a value whose match drifts by more than `drift` relative, or
    that finds no match at all, is flagged.
    """
    arrays = [np.sort(np.asarray(v, dtype=float)) for v in level_values]
    windows = [a[a < bound] for a in arrays]
    flags = []
    for li in range(len(arrays) - 1):
        cur = windows[li]
        nxt = arrays[li + 1]
        dist = np.abs(cur[:, None] - nxt[None, :])
        order = np.argsort(dist, axis=None)
        matched = {}
        used = set()
        for flat in order:
            i, j = divmod(int(flat), nxt.size)
            if i in matched or j in used:
                continue
            matched[i] = j
            used.add(j)
            if len(matched) == cur.size:
                break
        for i, v in enumerate(cur):
            j = matched.get(i)
            if j is None:
                flags.append((li, float(v), "no counterpart at next level"))
                continue
            rel = abs(nxt[j] - v) / max(abs(v), 1e-300)
            if rel > drift:
                flags.append(
                    (li, float(v), "drift %.1f%% to match %.6g" % (100 * rel, nxt[j]))
                )
    return windows, flags


def spurious_scan(make_mesh, family, params, levels, bound, solver=None, max_nev=40):
    """Scan the spectrum window [0, bound] across levels for spurious values.

    The number of requested eigenvalues grows until each level covers the
    window.  Returns a SpuriousReport; an empty `flags` list means every
    value below the bound belongs to a converging sequence.
    """
    if len(levels) < 2:
        raise StudyError("spurious scan needs at least 2 levels")
    all_values = []
    for n in levels:
        mesh = make_mesh(n)
        layout = build_layout(mesh, family)
        K, M = assemble_pencil(layout, params)
        nev = 8
        while True:
            cfg = SolverConfig(
                nev=nev,
                shift=solver.shift if solver else 0.0,
                tol=solver.tol if solver else 1e-10,
            )
            pairs = smallest_eigenpairs(K, M, layout, cfg)
            vals = np.array([p.value for p in pairs])
            if vals[-1] >= bound or nev >= max_nev:
                break
            nev = min(2 * nev, max_nev)
        all_values.append(vals)
    windows, flags = scan_records(all_values, bound)
    return SpuriousReport(
        bound=float(bound), levels=list(levels), values=windows, flags=flags
    )


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return "%.10g" % x


def write_csv(path, records, nev):
    """CSV report, one row per level, '%.10g' numeric formatting."""
    cols = ["level", "N_or_iter", "dof", "h"]
    cols += ["lambda_%d" % (i + 1) for i in range(nev)]
    cols += ["eta"]
    cols += ["err_%d" % (i + 1) for i in range(nev)]
    cols += ["eff_%d" % (i + 1) for i in range(nev)]
    cols += ["walltime_ms"]
    lines = [",".join(cols)]
    for seq, r in enumerate(records):
        row = [str(seq), str(r.level), str(r.dof), _fmt(r.h)]
        lam = list(r.eigenvalues) + [None] * (nev - len(r.eigenvalues))
        row += [_fmt(x) for x in lam[:nev]]
        row.append(_fmt(r.eta))
        for attr in (r.err, r.eff):
            vals = np.atleast_1d(attr) if attr is not None else []
            vals = list(vals) + [None] * (nev - len(vals))
            row += [_fmt(x) for x in vals[:nev]]
        row.append(_fmt(r.walltime_ms))
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as handle:
        handle.write(text)
    return text


def render_markdown(result):
    """Markdown table in the layout of the convergence tables: one row per
    eigenvalue, one column per level, then fitted order and extrapolation."""
    records = result.records
    nev = len(result.fits)
    header = ["eigenvalue"] + ["N=%d" % r.level for r in records] + [
        "order",
        "lambda_extr",
    ]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for i in range(nev):
        fit = result.fits[i]
        row = ["lambda_%d" % (i + 1)]
        row += ["%.4f" % r.eigenvalues[i] for r in records]
        if fit is None:
            row += ["n/a", "n/a"]
        else:
            row.append("%.2f" % fit.order if fit.order is not None else "n/a")
            row.append("%.4f" % fit.lam_extr)
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
