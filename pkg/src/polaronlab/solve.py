"""Lowest eigenpairs of sparse symmetric operators, plus dense oracles.

The iterative route is a thick-restart Lanczos recurrence with explicit
two-pass reorthogonalization against the active basis and an explicitly
projected (not assumed tridiagonal) Rayleigh-Ritz matrix.  Convergence is
certified by recomputing true residual norms ||A y - theta y|| before
returning; estimates alone never declare success.  Runs are deterministic:
the start vector comes from a seeded generator.

A single Krylov run carries at most one direction per eigenspace, so it is
structurally blind to multiplicity.  Multiple eigenpairs are therefore
extracted one at a time, each run deflated against the vectors already
certified; a fresh random start inside the orthogonal complement recovers the
remaining copies of a degenerate level.

The dense route (LAPACK eigh on the materialized matrix) exists so iterative
results can always be cross-checked on small instances, and it powers the
resolvent positivity audit.
"""

import math
from dataclasses import dataclass
from typing import List

import numpy as np
import scipy.linalg

from .errors import CapacityError, ConvergenceError

DEFAULT_SEED = 42
DEFAULT_TOL = 1e-9
DEFAULT_DENSE_CAP = 2000
DEFAULT_WINDOW = 120
DEFAULT_MAX_STEPS = 20000


@dataclass
class SpectralResult:
    """One converged eigenpair with its certified residual."""

    energy: float
    vector: np.ndarray
    residual: float
    iterations: int
    converged: bool


@dataclass
class PositivityReport:
    """Entrywise audit of a shifted resolvent and the ground eigenvector."""

    lam: float
    min_entry: float
    strictly_positive: bool
    ground_vector_min: float
    gap: float


def _fresh_direction(rng, rows: np.ndarray, n: int) -> np.ndarray:
    """Random unit vector orthogonalized twice against the given rows."""
    for _ in range(5):
        v = rng.standard_normal(n)
        for _ in range(2):
            v = v - rows.T @ (rows @ v)
        nv = float(np.linalg.norm(v))
        if nv > 1e-8:
            return v / nv
    raise ConvergenceError("could not generate a direction outside the current subspace")


def _deflated_lowest(
    op,
    est_tol: float,
    cert_tol: float,
    seed: int,
    max_steps: int,
    window: int,
    locked: np.ndarray,
) -> SpectralResult:
    """Lowest eigenpair of a symmetric operator on the complement of `locked`.

    `locked` rows are previously certified eigenvectors; the start vector and
    every recurrence vector are reorthogonalized against them, steering the
    run to the smallest eigenvalue whose eigenspace span(locked) has not
    already exhausted.  Certification recomputes the residual on the full
    operator and accepts at `cert_tol`; residual estimates must reach the
    tighter `est_tol` before certification is attempted.
    """
    n = op.dimension
    n_eff = n - locked.shape[0]
    window = int(min(n_eff, max(window, 21)))
    keep = min(11, max(1, window - 2))
    rng = np.random.default_rng(seed)

    basis = np.zeros((window + 1, n))
    proj = np.zeros((window + 1, window + 1))
    v0 = rng.standard_normal(n)
    if locked.size:
        for _ in range(2):
            v0 = v0 - locked.T @ (locked @ v0)
    basis[0] = v0 / np.linalg.norm(v0)
    j = 0
    steps = 0
    scale = 1.0
    best_est = math.inf

    def certified(theta, coef):
        y = basis[: j + 1].T @ coef[:, 0]
        y = y / float(np.linalg.norm(y))
        r = op.matvec(y) - theta[0] * y
        res = float(np.linalg.norm(r))
        if res <= cert_tol:
            return SpectralResult(float(theta[0]), y, res, steps, True)
        return None

    while steps < max_steps:
        w = op.matvec(basis[j])
        steps += 1
        if locked.size:
            w = w - locked.T @ (locked @ w)
        h = basis[: j + 1] @ w
        w = w - basis[: j + 1].T @ h
        h2 = basis[: j + 1] @ w
        w = w - basis[: j + 1].T @ h2
        if locked.size:
            w = w - locked.T @ (locked @ w)
        h = h + h2
        proj[: j + 1, j] = h
        proj[j, : j + 1] = h
        beta = float(np.linalg.norm(w))
        theta, coef = np.linalg.eigh(proj[: j + 1, : j + 1])
        scale = max(scale, float(np.abs(theta).max()), beta)
        breakdown = 1e-13 * scale

        est = float(beta * abs(coef[j, 0]))
        best_est = min(best_est, est)
        if est <= est_tol:
            result = certified(theta, coef)
            if result is not None:
                return result
            if beta <= breakdown and j + 1 >= n_eff:
                raise ConvergenceError(
                    f"residual floor above tol = {cert_tol} on the full space "
                    f"(estimate {est:.3e})"
                )

        if j + 1 >= window:
            # thick restart: keep the lowest Ritz vectors, continue with w
            kept = basis[: j + 1].T @ coef[:, :keep]
            q, _ = np.linalg.qr(kept)
            basis[:keep] = q.T
            proj[:, :] = 0.0
            proj[:keep, :keep] = np.diag(theta[:keep])
            j = keep
            if beta > breakdown:
                basis[j] = w / beta
            else:
                basis[j] = _fresh_direction(rng, np.vstack([basis[:j], locked]), n)
        elif beta <= breakdown:
            if j + 1 >= n_eff:
                # complement spanned and not certified above: the floor is real
                result = certified(theta, coef)
                if result is not None:
                    return result
                raise ConvergenceError(
                    f"residual floor above tol = {cert_tol} after spanning the space"
                )
            j += 1
            basis[j] = _fresh_direction(rng, np.vstack([basis[:j], locked]), n)
        else:
            j += 1
            basis[j] = w / beta

    raise ConvergenceError(
        f"no certified eigenpair after {max_steps} matvecs "
        f"(best residual estimate {best_est:.3e}, tol {cert_tol})"
    )


def lowest_eigenpairs(
    op,
    k: int = 1,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    max_steps: int = DEFAULT_MAX_STEPS,
    window: int = DEFAULT_WINDOW,
) -> List[SpectralResult]:
    """k smallest eigenpairs of a symmetric operator, counted with multiplicity.

    Pairs are extracted one at a time, each run deflated against the vectors
    already found, so repeated eigenvalues come back as distinct orthogonal
    copies.  Stage estimates are tightened by a factor 4k below tol to keep
    deflation leakage under the certification threshold; every returned
    residual is recomputed on the full operator.  Exact breakdown injects a
    fresh random direction, so invariant subspaces (diagonal operators
    included) are handled without special cases.  Raises ConvergenceError
    with the best residual if max_steps matvecs pass without certification.
    """
    n = op.dimension
    if n < 1:
        raise ValueError("operator dimension must be positive")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    est_tol = tol if k == 1 else tol / (4.0 * k)
    locked = np.zeros((0, n))
    results: List[SpectralResult] = []
    for i in range(k):
        res = _deflated_lowest(op, est_tol, tol, seed + i, max_steps, window, locked)
        results.append(res)
        locked = np.vstack([locked, res.vector[None, :]])
    results.sort(key=lambda r: r.energy)
    return results


def ground_state(
    op,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    max_steps: int = DEFAULT_MAX_STEPS,
    window: int = DEFAULT_WINDOW,
) -> SpectralResult:
    """Certified lowest eigenpair; thin wrapper over lowest_eigenpairs."""
    return lowest_eigenpairs(
        op, k=1, tol=tol, seed=seed, max_steps=max_steps, window=window
    )[0]


def dense_spectrum(op, k: int = 6, dense_cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
    """k smallest eigenvalues by dense LAPACK; the oracle for the iterative route."""
    n = op.dimension
    if n > dense_cap:
        raise CapacityError(f"dimension {n} exceeds the dense cap {dense_cap}")
    k = min(int(k), n)
    if k < 1:
        raise ValueError("k must be positive")
    vals = scipy.linalg.eigh(
        op.to_dense(), eigvals_only=True, subset_by_index=[0, k - 1]
    )
    return np.asarray(vals, dtype=np.float64)


def resolvent_positivity_audit(
    op, lam: float, dense_cap: int = DEFAULT_DENSE_CAP
) -> PositivityReport:
    """Entrywise positivity of (op + lam)^{-1} plus ground-vector sign data.

    The caller passes the operator in the basis where positivity is expected
    (for fiber operators: after the sign flip).  lam must shift the spectrum
    strictly above zero; a non-positive-definite shift is a precondition
    violation, reported as ValueError.
    """
    n = op.dimension
    if n > dense_cap:
        raise CapacityError(f"dimension {n} exceeds the dense cap {dense_cap}")
    dense = op.to_dense()
    shifted = dense + float(lam) * np.eye(n)
    try:
        chol = scipy.linalg.cho_factor(shifted, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError(
            f"shift lam = {lam} does not make the operator positive definite; "
            "pick lam > -E0"
        ) from exc
    inv = scipy.linalg.cho_solve(chol, np.eye(n), check_finite=False)
    inv = 0.5 * (inv + inv.T)
    min_entry = float(inv.min())
    max_entry = float(inv.max())
    strictly_positive = bool(min_entry > 1e-14 * max(max_entry, 0.0))

    upper = min(1, n - 1)
    vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, upper])
    psi = vecs[:, 0]
    i = int(np.argmax(np.abs(psi)))
    if psi[i] < 0:
        psi = -psi
    ground_vector_min = float(psi.min())
    gap = float(vals[1] - vals[0]) if n > 1 else math.inf
    return PositivityReport(
        lam=float(lam),
        min_entry=min_entry,
        strictly_positive=strictly_positive,
        ground_vector_min=ground_vector_min,
        gap=gap,
    )
