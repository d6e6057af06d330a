"""Finite-volume model: a block per dual-lattice momentum, plus Yukawa kernels.

The torus operator is block diagonal over total momenta P in (2 pi / ell) Z^3
up to a fiber cutoff; every block reuses one shared phonon grid and basis.
The degeneracy analysis feeds the either-or argument: a translation-invariant
ground state forces the global minimum to sit at P = 0 and be simple, so a
non-simple minimum (or one away from 0) certifies symmetry breaking.

periodized_yukawa sums the massive kernel over lattice images; its shell
convergence is the quantitative input for the fixed-point comparison.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import CapacityError, ConvergenceError
from .fock import enumerate_basis
from .modes import build_grid
from .operators import FiberConfig, SparseOperator, assemble_fiber
from .solve import DEFAULT_SEED, DEFAULT_TOL, lowest_eigenpairs

DEFAULT_FIBER_CUTOFF = 3.0
DEFAULT_DEGENERACY_TOL = 1e-7
DEFAULT_TORUS_CAPACITY = 5_000_000


@dataclass(frozen=True)
class TorusConfig:
    """Side length, coupling, phonon discretization, and the fiber selection.

    By default the momentum blocks run over the full dual lattice inside
    fiber_cutoff, which always contains P = 0.  An explicit `fibers` tuple
    overrides the lattice scan (for restricted-sector studies); it must be
    closed under P -> -P, the symmetry every analysis below relies on.
    """

    ell: float
    alpha: float
    delta: float
    cutoff: float
    n_max: int
    fiber_cutoff: float = DEFAULT_FIBER_CUTOFF
    degeneracy_tol: float = DEFAULT_DEGENERACY_TOL
    fibers: Optional[Tuple[Tuple[float, float, float], ...]] = None

    def __post_init__(self):
        if self.ell <= 0:
            raise ValueError("ell must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.fiber_cutoff <= 0:
            raise ValueError("fiber_cutoff must be positive")
        if self.degeneracy_tol <= 0:
            raise ValueError("degeneracy_tol must be positive")
        if self.fibers is not None:
            fibers = tuple(tuple(float(x) for x in f) for f in self.fibers)
            if not fibers:
                raise ValueError("explicit fiber list must not be empty")
            if any(len(f) != 3 for f in fibers):
                raise ValueError("fibers must be 3-vectors")
            have = set(fibers)
            for f in fibers:
                if tuple(-x for x in f) not in have:
                    raise ValueError(f"fiber list not closed under P -> -P: missing {tuple(-x for x in f)}")
            object.__setattr__(self, "fibers", fibers)


def lattice_fibers(cfg: TorusConfig) -> np.ndarray:
    """Momenta of the blocks, shape (F, 3), in lexicographic order.

    Dual-lattice points (2 pi / ell) n with |n| within the fiber cutoff; the
    membership test is on integers so boundary points never flicker.  With an
    explicit cfg.fibers the given momenta are returned sorted.
    """
    if cfg.fibers is not None:
        arr = np.asarray(sorted(cfg.fibers), dtype=np.float64)
        return arr
    spacing = 2.0 * math.pi / cfg.ell
    r2max = int((cfg.fiber_cutoff / spacing) ** 2 + 1e-9)
    r = math.isqrt(r2max)
    axis = np.arange(-r, r + 1, dtype=np.int64)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    units = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    keep = (units * units).sum(axis=1) <= r2max
    units = units[keep]
    order = np.lexsort((units[:, 2], units[:, 1], units[:, 0]))
    return spacing * units[order].astype(np.float64)


@dataclass
class TorusModel:
    """Assembled block family sharing one grid and basis."""

    config: TorusConfig
    fibers: np.ndarray
    grid: object
    basis: object
    blocks: Tuple[SparseOperator, ...]

    @property
    def total_dimension(self) -> int:
        return len(self.blocks) * self.basis.dimension


@dataclass(frozen=True)
class TorusReport:
    """Ground energy, its fiber location(s), and the near-degeneracy count."""

    ground_energy: float
    argmin: Tuple[Tuple[float, float, float], ...]
    multiplicity: int
    fiber_energies: Tuple[Tuple[Tuple[float, float, float], float], ...]
    degeneracy_tol: float


def assemble_torus(cfg: TorusConfig, capacity: int = DEFAULT_TORUS_CAPACITY) -> TorusModel:
    """Build every momentum block over a shared grid and basis."""
    grid = build_grid(cfg.delta, cfg.cutoff)
    basis = enumerate_basis(len(grid), cfg.n_max, grid.units, grid.spacing)
    fibers = lattice_fibers(cfg)
    total = len(fibers) * basis.dimension
    if total > capacity:
        raise CapacityError(
            f"{len(fibers)} fibers x dimension {basis.dimension} = {total} "
            f"exceeds capacity {capacity}"
        )
    blocks = tuple(
        assemble_fiber(FiberConfig(alpha=cfg.alpha, p=p, grid=grid, n_max=cfg.n_max), basis)
        for p in fibers
    )
    return TorusModel(config=cfg, fibers=fibers, grid=grid, basis=basis, blocks=blocks)


def degeneracy_analysis(
    model: TorusModel,
    degeneracy_tol: Optional[float] = None,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> TorusReport:
    """Global minimum over blocks and how many eigenvalues sit within tol of it.

    Per block the two lowest eigenvalues are solved (one if the block is one
    dimensional), so the multiplicity counts at most two levels per fiber,
    enough to distinguish a simple global minimum from a degenerate one.
    """
    tol_deg = model.config.degeneracy_tol if degeneracy_tol is None else float(degeneracy_tol)
    if tol_deg <= 0:
        raise ValueError("degeneracy_tol must be positive")
    k = min(2, model.basis.dimension)

    def work(block):
        try:
            pairs = lowest_eigenpairs(block, k=k, tol=tol, seed=seed)
        except ConvergenceError:
            raise
        return [r.energy for r in pairs]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_fiber = list(pool.map(work, model.blocks))
    else:
        per_fiber = [work(b) for b in model.blocks]

    ground = min(min(es) for es in per_fiber)
    argmin = []
    multiplicity = 0
    fiber_energies = []
    for p, es in zip(model.fibers, per_fiber):
        pt = tuple(map(float, p))
        fiber_energies.append((pt, float(es[0])))
        if es[0] <= ground + tol_deg:
            argmin.append(pt)
        multiplicity += sum(1 for e in es if e <= ground + tol_deg)
    return TorusReport(
        ground_energy=float(ground),
        argmin=tuple(argmin),
        multiplicity=multiplicity,
        fiber_energies=tuple(fiber_energies),
        degeneracy_tol=tol_deg,
    )


def contradiction_check(report: TorusReport) -> Tuple[str, bool]:
    """Classify the report against the either-or dichotomy.

    Either the minimum sits at P = 0 alone and is simple, or the ground level
    is degenerate (equivalently, attained away from 0, which the P -> -P
    symmetry doubles).  Returns (branch, consistent).
    """
    zero_hit = any(all(x == 0.0 for x in p) for p in report.argmin)
    if zero_hit and len(report.argmin) == 1:
        return "simple-zero-minimum", report.multiplicity == 1
    return "degenerate-minimum", report.multiplicity >= 2


def periodized_yukawa(
    x, xp, ell: float, mass: float = 1.0, image_cut: int = 1
) -> float:
    """Sum of exp(-mass r)/(4 pi r) over lattice images r = |x - xp - ell n|.

    Evaluating at a lattice image of the singularity (r = 0) is an error, not
    an infinity.  image_cut bounds the image box |n|_inf <= image_cut.
    """
    if ell <= 0:
        raise ValueError("ell must be positive")
    if mass < 1.0:
        raise ValueError("mass must be at least 1 (kernel masses are sqrt(n+1))")
    if image_cut < 1:
        raise ValueError("image_cut must be at least 1")
    diff = np.asarray(x, dtype=np.float64).reshape(3) - np.asarray(xp, dtype=np.float64).reshape(3)
    axis = np.arange(-image_cut, image_cut + 1, dtype=np.float64)
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    images = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    pts = diff[None, :] - ell * images
    r = np.sqrt((pts * pts).sum(axis=1))
    if float(r.min()) < 1e-12 * max(1.0, ell):
        raise ValueError("kernel evaluated at (an image of) the singularity x = xp")
    return float(np.sum(np.exp(-mass * r) / (4.0 * math.pi * r)))


def yukawa_converged(
    x,
    xp,
    ell: float,
    mass: float = 1.0,
    rel: float = 1e-12,
    start_cut: int = 1,
    max_cut: int = 64,
) -> Tuple[float, int]:
    """Grow the image box until the added shell is below rel (relative).

    Returns (value, cut used).  The terms are positive, so the partial sums
    increase and the first quiet shell certifies convergence.
    """
    if start_cut < 1:
        raise ValueError("start_cut must be at least 1")
    prev = periodized_yukawa(x, xp, ell, mass=mass, image_cut=start_cut)
    for cut in range(start_cut + 1, max_cut + 1):
        val = periodized_yukawa(x, xp, ell, mass=mass, image_cut=cut)
        if val - prev <= rel * abs(val):
            return val, cut
        prev = val
    raise ConvergenceError(f"image sum did not settle by image_cut = {max_cut}")
