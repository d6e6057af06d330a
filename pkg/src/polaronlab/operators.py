"""Sparse assembly of fiber Hamiltonians and their factorization diagnostics.

The fiber operator at conserved momentum P acts on the truncated phonon space:
its diagonal is the kinetic term (P - P_f)^2 + N and its off-diagonal part
couples adjacent number blocks through the mode couplings g_i.  Everything is
assembled block-at-a-time from integer occupation tables, so matrix elements
are exact where the inputs are exact (alpha = 0 stays strictly diagonal).

Dense routines (assemble_KT, neumann_norms) are diagnostics and refuse to run
above a dimension cap instead of silently thrashing memory.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.sparse

from .errors import CapacityError, ConvergenceError
from .fock import BasisIndex
from .modes import ModeGrid

DEFAULT_DENSE_CAP = 2000
DEFAULT_SEED = 42
DEFAULT_POWER_RTOL = 1e-8
DEFAULT_POWER_MAXITER = 50000


class SparseOperator:
    """Symmetric sparse matrix stored as its upper triangle (row <= col).

    Entries are kept in canonical (row, col) lexicographic order with exact
    zeros dropped and duplicates rejected, so two assemblies of the same
    operator compare equal entry-by-entry.  matvec symmetrizes lazily through
    a cached CSR form.
    """

    def __init__(self, dimension: int, rows, cols, vals):
        dimension = int(dimension)
        if dimension < 0:
            raise ValueError("dimension must be non-negative")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("rows, cols, vals must have equal length")
        if rows.size:
            if rows.min() < 0 or cols.max() >= dimension:
                raise ValueError("entry indices out of range")
            if (rows > cols).any():
                raise ValueError("entries must satisfy row <= col (upper triangle)")
        keep = vals != 0.0
        if not keep.all():
            rows, cols, vals = rows[keep], cols[keep], vals[keep]
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            same = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if same.any():
                k = int(np.flatnonzero(same)[0])
                raise ValueError(f"duplicate entry at (row, col) = ({rows[k]}, {cols[k]})")
        self.dimension = dimension
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self._csr = None

    @property
    def nnz(self) -> int:
        """Stored entries (upper triangle only)."""
        return int(self.vals.size)

    def _symmetrized(self) -> scipy.sparse.csr_matrix:
        if self._csr is None:
            off = self.rows != self.cols
            r = np.concatenate([self.rows, self.cols[off]])
            c = np.concatenate([self.cols, self.rows[off]])
            v = np.concatenate([self.vals, self.vals[off]])
            self._csr = scipy.sparse.csr_matrix(
                (v, (r, c)), shape=(self.dimension, self.dimension)
            )
        return self._csr

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dimension,):
            raise ValueError(f"vector of length {self.dimension} expected")
        return self._symmetrized() @ x

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.dimension)
        on = self.rows == self.cols
        d[self.rows[on]] = self.vals[on]
        return d

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.dimension, self.dimension))
        a[self.rows, self.cols] = self.vals
        return a + a.T - np.diag(np.diag(a))


@dataclass(frozen=True)
class FiberConfig:
    """Parameters of one fiber operator: coupling, momentum, grid, truncation."""

    alpha: float
    p: np.ndarray
    grid: ModeGrid
    n_max: int

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        p = np.asarray(self.p, dtype=np.float64).reshape(3)
        object.__setattr__(self, "p", p)
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")


def _check_basis(cfg: FiberConfig, basis: BasisIndex) -> None:
    grid = cfg.grid
    if basis.m_modes != len(grid):
        raise ValueError(
            f"basis has {basis.m_modes} modes but the grid has {len(grid)}"
        )
    if basis.n_max != cfg.n_max:
        raise ValueError(
            f"basis truncation N_max = {basis.n_max} does not match cfg.n_max = {cfg.n_max}"
        )
    if len(grid):
        if basis.mode_units is None:
            raise ValueError("basis carries no mode-momentum table; rebuild it from the grid")
        if basis.spacing != grid.spacing or not np.array_equal(basis.mode_units, grid.units):
            raise ValueError("basis momentum table does not match the grid")


def kinetic_diagonal(cfg: FiberConfig, basis: BasisIndex) -> np.ndarray:
    """(P - P_f)^2 + N per state.  P_f comes from exact integer mode sums."""
    _check_basis(cfg, basis)
    parts = []
    for n in range(basis.n_max + 1):
        pf = basis.spacing * basis.pf_units(n).astype(np.float64)
        parts.append(((cfg.p[None, :] - pf) ** 2).sum(axis=1) + float(n))
    return np.concatenate(parts)


def _raise_entries(cfg: FiberConfig, basis: BasisIndex, include_alpha: bool = True):
    """Global (row, col, val) triplets of the creation part, row block < col block.

    val = [sqrt(alpha)] * g_i * sqrt(n_i + 1) between |s; n> and |s + e_i; n+1>.
    """
    g = cfg.grid.couplings
    scale = float(np.sqrt(cfg.alpha)) if include_alpha else 1.0
    rr, cc, vv = [], [], []
    if scale != 0.0 and len(cfg.grid):
        for n in range(basis.n_max):
            src, mode, counts, tgt = basis.raise_map(n)
            if src.size == 0:
                continue
            rr.append(basis.block_offset(n) + src)
            cc.append(basis.block_offset(n + 1) + tgt)
            vv.append(scale * g[mode] * np.sqrt(counts + 1.0))
    if not rr:
        z = np.zeros(0, dtype=np.int64)
        return z, z, np.zeros(0)
    return np.concatenate(rr), np.concatenate(cc), np.concatenate(vv)


def assemble_fiber(cfg: FiberConfig, basis: BasisIndex) -> SparseOperator:
    """Fiber operator (P - P_f)^2 + N + sqrt(alpha) * (a(v) + a*(v)) as a SparseOperator."""
    diag = kinetic_diagonal(cfg, basis)
    idx = np.arange(basis.dimension, dtype=np.int64)
    rr, cc, vv = _raise_entries(cfg, basis)
    rows = np.concatenate([idx, rr])
    cols = np.concatenate([idx, cc])
    vals = np.concatenate([diag, vv])
    return SparseOperator(basis.dimension, rows, cols, vals)


def assemble_free(cfg: FiberConfig, basis: BasisIndex) -> SparseOperator:
    """Diagonal comparison operator (P - P_f)^2 + N + 1; every entry is >= 1."""
    diag = kinetic_diagonal(cfg, basis) + 1.0
    idx = np.arange(basis.dimension, dtype=np.int64)
    return SparseOperator(basis.dimension, idx, idx, diag)


def annihilation_csr(
    cfg: FiberConfig, basis: BasisIndex, include_alpha: bool = True
) -> scipy.sparse.csr_matrix:
    """The (non-symmetric) coupled annihilation part as a square CSR matrix.

    Row s, column t carries [sqrt(alpha)] g_i sqrt(n_i(s) + 1) whenever t is s
    with one extra phonon in mode i, i.e. the matrix maps block n+1 down to n.
    """
    _check_basis(cfg, basis)
    rr, cc, vv = _raise_entries(cfg, basis, include_alpha=include_alpha)
    return scipy.sparse.csr_matrix(
        (vv, (rr, cc)), shape=(basis.dimension, basis.dimension)
    )


def assemble_KT(
    cfg: FiberConfig, basis: BasisIndex, dense_cap: int = DEFAULT_DENSE_CAP
) -> Tuple[np.ndarray, np.ndarray]:
    """Dense factor pair (K, T) with K + T = fiber + 1 as an exact identity.

    K = (1 + sqrt(alpha) A d^{-1}) d (1 + sqrt(alpha) A d^{-1})^T with d the
    free diagonal and A the bare annihilation part; T = -alpha (A d^{-1}) A^T.
    K is symmetric positive definite; T is symmetric negative semidefinite.
    """
    if basis.dimension > dense_cap:
        raise CapacityError(
            f"dimension {basis.dimension} exceeds the dense cap {dense_cap}"
        )
    d = kinetic_diagonal(cfg, basis) + 1.0
    a = annihilation_csr(cfg, basis, include_alpha=False).toarray()
    ad = a / d[None, :]
    sqrt_alpha = float(np.sqrt(cfg.alpha))
    ell = np.eye(basis.dimension) + sqrt_alpha * ad
    k = (ell * d[None, :]) @ ell.T
    t = -cfg.alpha * (ad @ a.T)
    k = 0.5 * (k + k.T)
    t = 0.5 * (t + t.T)
    return k, t


def sign_flip(op: SparseOperator, basis: BasisIndex) -> SparseOperator:
    """Conjugate by (-1)^N: entries between blocks of opposite parity flip sign."""
    if op.dimension != basis.dimension:
        raise ValueError("operator and basis dimensions differ")
    nums = basis.total_numbers()
    odd = (nums[op.rows] + nums[op.cols]) % 2 == 1
    vals = np.where(odd, -op.vals, op.vals)
    return SparseOperator(op.dimension, op.rows.copy(), op.cols.copy(), vals)


def _power_iteration(
    apply_sym,
    dim: int,
    seed: int = DEFAULT_SEED,
    rtol: float = DEFAULT_POWER_RTOL,
    max_iter: int = DEFAULT_POWER_MAXITER,
) -> float:
    """Largest eigenvalue of a PSD operator given as a matvec closure."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(dim)
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise ConvergenceError("degenerate start vector")
    x /= nx
    lam_prev = None
    for _ in range(max_iter):
        y = apply_sym(x)
        lam = float(x @ y)
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            # operator annihilates the iterate: nilpotent directions only
            return 0.0
        x = y / ny
        if lam_prev is not None and abs(lam - lam_prev) <= rtol * max(abs(lam), 1e-300):
            return max(lam, 0.0)
        lam_prev = lam
    raise ConvergenceError(
        f"power iteration did not settle in {max_iter} steps (last value {lam_prev!r})"
    )


def neumann_norms(
    cfg: FiberConfig,
    basis: BasisIndex,
    j_max: int,
    dense_cap: int = DEFAULT_DENSE_CAP,
    seed: int = DEFAULT_SEED,
    rtol: float = DEFAULT_POWER_RTOL,
    max_iter: int = DEFAULT_POWER_MAXITER,
) -> np.ndarray:
    """Operator norms s_j = || (sqrt(alpha) A h0^{-1})^j || for j = 1..j_max.

    h0 is the free diagonal at cfg.p.  Norms are squared-operator power
    iterations to relative tolerance `rtol`; the truncation makes the chain
    nilpotent, so s_j vanishes identically once j exceeds N_max.
    """
    if j_max < 1:
        raise ValueError("j_max must be at least 1")
    if basis.dimension > dense_cap:
        raise CapacityError(
            f"dimension {basis.dimension} exceeds the dense cap {dense_cap}"
        )
    a = annihilation_csr(cfg, basis)
    at = a.T.tocsr()
    d = kinetic_diagonal(cfg, basis) + 1.0
    out = np.zeros(j_max)
    for j in range(1, j_max + 1):
        def apply_sym(x, j=j):
            y = x
            for _ in range(j):
                y = a @ (y / d)
            for _ in range(j):
                y = (at @ y) / d
            return y

        out[j - 1] = float(np.sqrt(_power_iteration(
            apply_sym, basis.dimension, seed=seed, rtol=rtol, max_iter=max_iter
        )))
    return out


def weighted_annihilation_norm(
    cfg: FiberConfig,
    basis: BasisIndex,
    seed: int = DEFAULT_SEED,
    rtol: float = DEFAULT_POWER_RTOL,
    max_iter: int = DEFAULT_POWER_MAXITER,
) -> float:
    """|| sqrt(alpha) A h0^{-1/2} (N + 1)^{-1/4} || at cfg.p, fully sparse.

    This is the uniform-in-cutoff bound certificate: the weight combines the
    inverse square root of the free diagonal with the number damping.
    """
    a = annihilation_csr(cfg, basis)
    at = a.T.tocsr()
    d = kinetic_diagonal(cfg, basis) + 1.0
    nums = basis.total_numbers().astype(np.float64)
    w = d ** -0.5 * (nums + 1.0) ** -0.25

    def apply_sym(x):
        y = a @ (w * x)
        return w * (at @ y)

    return float(np.sqrt(_power_iteration(
        apply_sym, basis.dimension, seed=seed, rtol=rtol, max_iter=max_iter
    )))


def neumann_constant(
    cfg: FiberConfig,
    basis: BasisIndex,
    dense_cap: int = DEFAULT_DENSE_CAP,
    seed: int = DEFAULT_SEED,
    rtol: float = DEFAULT_POWER_RTOL,
    max_iter: int = DEFAULT_POWER_MAXITER,
) -> float:
    """Constant C = || sqrt(alpha) A h0^{-1} (N + 1)^{1/4} || controlling s_j decay.

    Blockwise, || sqrt(alpha) A h0^{-1} restricted to block n || <= C (n+1)^{-1/4},
    which chains to s_j <= C^j / (j!)^{1/4} on the truncated space.
    """
    if basis.dimension > dense_cap:
        raise CapacityError(
            f"dimension {basis.dimension} exceeds the dense cap {dense_cap}"
        )
    a = annihilation_csr(cfg, basis)
    at = a.T.tocsr()
    d = kinetic_diagonal(cfg, basis) + 1.0
    nums = basis.total_numbers().astype(np.float64)
    w = (nums + 1.0) ** 0.25 / d

    def apply_sym(x):
        y = a @ (w * x)
        return w * (at @ y)

    return float(np.sqrt(_power_iteration(
        apply_sym, basis.dimension, seed=seed, rtol=rtol, max_iter=max_iter
    )))
