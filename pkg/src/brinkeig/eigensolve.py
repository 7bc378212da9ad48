# -*- coding: utf-8 -*-
"""Shift-invert eigensolver for the pencil K x = lambda M x.

K is symmetric nonsingular after constraints, M is positive semidefinite
with velocity-only support.  The solver runs restarted Arnoldi (ARPACK)
on the operator (K - sigma*M)^{-1} M, converts Ritz values mu back by
lambda = sigma + 1/mu, and discards the null directions contributed by
pressure, multiplier, and eliminated essential dofs.
"""

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class EigenSolveError(RuntimeError):
    """Base class for solver failures."""


class SingularMatrixError(EigenSolveError):
    """Factorization hit a zero pivot; carries the pivot index if known."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(EigenSolveError):
    """Arnoldi failed to converge; carries the best residuals seen."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the shift-invert solve."""

    nev: int = 5
    shift: float = 0.0
    krylov_dim: Optional[int] = None
    tol: float = 1e-10
    max_restarts: int = 50

    def __post_init__(self):
        if self.nev < 1:
            raise ValueError("nev must be >= 1")
        if self.krylov_dim is not None and self.krylov_dim <= self.nev:
            raise ValueError("krylov_dim must exceed nev")

    @property
    def ncv(self):
        if self.krylov_dim is not None:
            return self.krylov_dim
        return max(4 * self.nev + 10, 30)


@dataclass
class EigenPair:
    """One converged eigenpair of the pencil.

    The velocity is normalized to unit L2 norm (u^T M_u u = 1) and the
    sign is fixed so the largest-magnitude velocity dof is positive.
    """

    value: float
    u: np.ndarray
    p: np.ndarray
    multiplier: Optional[float]
    residual: float
    vector: np.ndarray = field(repr=False, default=None)


class Factorization:
    """Sparse LU of a shifted pencil matrix, reusable for many solves."""

    def __init__(self, matrix):
        matrix = sp.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise ValueError("matrix must be square")
        try:
            self._lu = spla.splu(matrix)
        except RuntimeError as exc:  # SuperLU signals singularity this way
            pivot = _parse_pivot(str(exc))
            raise SingularMatrixError(
                "sparse factorization failed (%s); the matrix is singular"
                % exc,
                pivot=pivot,
            ) from exc
        udiag = np.abs(self._lu.U.diagonal())
        if udiag.size and udiag.min() == 0.0:
            raise SingularMatrixError(
                "zero pivot in factorization",
                pivot=int(np.argmin(udiag)),
            )
        self.shape = matrix.shape

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))


def _parse_pivot(message):
    m = re.search(r"[Uu]\s*\(?\s*(\d+)", message)
    return int(m.group(1)) if m else None


def factorize(matrix):
    """Factor a (possibly indefinite) sparse matrix for repeated solves."""
    return Factorization(matrix)


def _dense_finite_eigenpairs(K, M):
    """All finite eigenpairs of the pencil by dense QZ (small systems)."""
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K, dtype=float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    w, v = scipy.linalg.eig(Kd, Md)
    finite = np.isfinite(w)
    w = w[finite]
    v = v[:, finite]
    real = np.abs(w.imag) <= 1e-8 * np.maximum(np.abs(w.real), 1.0)
    return w[real].real, v[:, real].real


def _realify(mu, xs):
    """Expand Ritz output into real eigenvalue/vector candidates.

    A double real eigenvalue may come back from Arnoldi as a complex
    conjugate pair whose vector's real and imaginary parts span the
    invariant subspace; such pairs are expanded and their partner entry
    consumed.  Ritz values with significant imaginary part are dropped.
    """
    vals = []
    vecs = []
    used = np.zeros(len(mu), dtype=bool)
    for i in range(len(mu)):
        if used[i]:
            continue
        used[i] = True
        mi = mu[i]
        scale = max(abs(mi), 1e-300)
        if abs(mi.imag) > 1e-9 * scale:
            continue
        xr = np.real(xs[:, i])
        xi = np.imag(xs[:, i])
        vals.append(mi.real)
        vecs.append(xr)
        if np.linalg.norm(xi) > 1e-10 * max(np.linalg.norm(xr), 1e-300):
            for j in range(i + 1, len(mu)):
                if not used[j] and abs(mu[j] - np.conj(mi)) <= 1e-9 * scale:
                    used[j] = True
                    vals.append(mi.real)
                    vecs.append(xi)
                    break
    if not vals:
        return np.zeros(0), np.zeros((xs.shape[0], 0))
    return np.asarray(vals), np.column_stack(vecs)


def _normalize_pairs(values, vectors, K, M, layout, tol):
    order = np.argsort(values)
    values = values[order]
    vectors = vectors[:, order]
    # cluster by relative gap; within a cluster the individual vectors are
    # arbitrary, so M-orthonormalize with rank-revealing Gram-Schmidt
    clusters = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or abs(values[i] - values[i - 1]) > 1e-6 * max(
            abs(values[i]), 1e-30
        ):
            clusters.append((start, i))
            start = i
    pairs = []
    for a, b in clusters:
        block = vectors[:, a:b]
        kept = []
        for j in range(block.shape[1]):
            x = block[:, j].copy()
            before = np.sqrt(max(x @ (M @ x), 0.0))
            if before <= 0.0:
                continue
            for y in kept:
                x = x - (y @ (M @ x)) * y
            after = np.sqrt(max(x @ (M @ x), 0.0))
            if after <= 1e-6 * before:
                continue  # duplicate copy of an already-kept direction
            kept.append(x / after)
        for x in kept:
            lam = float(x @ (K @ x))  # Rayleigh quotient, x normalized in M
            kx = K @ x
            res = float(
                np.linalg.norm(kx - lam * (M @ x)) / max(np.linalg.norm(kx), 1e-300)
            )
            if layout is not None:
                u, p, mult = layout.split(x)
            else:
                u, p, mult = x, np.zeros(0), None
            imax = int(np.argmax(np.abs(u))) if u.size else 0
            if u.size and u[imax] < 0.0:
                x = -x
                u, p = -u, -p
                mult = -mult if mult is not None else None
            pairs.append(
                EigenPair(
                    value=lam, u=np.array(u), p=np.array(p),
                    multiplier=mult, residual=res, vector=x,
                )
            )
    pairs.sort(key=lambda pr: pr.value)
    return pairs


def smallest_eigenpairs(K, M, layout=None, config=None):
    """The `nev` smallest positive eigenvalues of K x = lambda M x.

    Parameters
    ----------
    K, M : sparse matrices
        Symmetric pencil; M positive semidefinite with velocity support.
    layout : DofLayout, optional
        Used to split eigenvectors into velocity/pressure/multiplier.
        When omitted the whole vector is treated as velocity.
    config : SolverConfig

    Returns
    -------
    list of EigenPair, sorted ascending by eigenvalue.
    """
    if config is None:
        config = SolverConfig()
    K = sp.csr_matrix(K)
    M = sp.csr_matrix(M)
    n = K.shape[0]
    sigma = config.shift
    shifted = K - sigma * M if sigma != 0.0 else K
    try:
        fact = factorize(shifted)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            "shifted matrix K - sigma*M is singular for sigma=%g; "
            "try a different shift (%s)" % (sigma, exc),
            pivot=exc.pivot,
        ) from exc

    k_req = min(config.nev + 2, n - 2)
    if k_req < 1 or n < 8:
        # system too small for Arnoldi; fall back to a dense solve
        vals, vecs = _dense_finite_eigenpairs(K, M)
        keep = vals > max(1e-12 * max(abs(vals).max(initial=0.0), 1.0), 0.0)
        pairs = _normalize_pairs(vals[keep], vecs[:, keep], K, M, layout, config.tol)
        return pairs[: config.nev]

    op = spla.LinearOperator(
        (n, n), matvec=lambda x: fact.solve(M @ x), dtype=float
    )
    rng = np.random.default_rng(0x5EED + n)
    v0 = fact.solve(M @ rng.standard_normal(n))  # purified start vector
    nrm = np.linalg.norm(v0)
    if nrm == 0.0:
        raise EigenSolveError("mass matrix annihilates the start vector")
    v0 /= nrm

    ncv = min(max(config.ncv, k_req + 2), n)
    try:
        mu, xs = spla.eigs(
            op,
            k=k_req,
            which="LM",
            ncv=ncv,
            tol=config.tol,
            maxiter=max(config.max_restarts, 1),
            v0=v0,
        )
    except spla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues) >= config.nev:
            mu, xs = exc.eigenvalues, exc.eigenvectors
        else:
            raise ConvergenceError(
                "Arnoldi did not converge after %d restarts "
                "(%d of %d Ritz pairs converged)"
                % (config.max_restarts, len(exc.eigenvalues), k_req),
                residuals=None,
            ) from exc

    mu_mag = np.abs(mu)
    keep = mu_mag >= 1e-8 * mu_mag.max()
    mu_real, xs_real = _realify(mu[keep], xs[:, keep])
    lam = sigma + 1.0 / mu_real
    pos = lam > 0.0
    lam = lam[pos]
    xs = xs_real[:, pos]
    if lam.size < config.nev:
        raise ConvergenceError(
            "only %d of %d requested eigenvalues found; "
            "increase the Krylov dimension" % (lam.size, config.nev)
        )
    pairs = _normalize_pairs(lam, xs, K, M, layout, config.tol)[: config.nev]
    worst = max(p.residual for p in pairs)
    if worst > 10.0 * config.tol:
        raise ConvergenceError(
            "residual %.3e exceeds 10x solver tolerance %.1e" % (worst, config.tol),
            residuals=[p.residual for p in pairs],
        )
    return pairs
