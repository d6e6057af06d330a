"""Momentum-block torus model, degeneracy dichotomy, periodized kernel."""

import math

import numpy as np
import pytest
import scipy.linalg

from polaronlab import (
    CapacityError,
    ConvergenceError,
    TorusConfig,
    TorusReport,
    assemble_torus,
    contradiction_check,
    degeneracy_analysis,
    lattice_fibers,
    periodized_yukawa,
    yukawa_converged,
)

TWO_PI = 2.0 * math.pi

# quick coupled instance (ell = 2 pi, alpha = 1, delta = 1, Lambda = 2,
# N_max = 2, fiber cutoff 1): frozen ground and first-excited-fiber energies
QUICK_GROUND = -0.06400812614047786
QUICK_E_UNIT = 0.8134782090472137


def _quick_config(**kw):
    base = dict(
        ell=TWO_PI, alpha=1.0, delta=1.0, cutoff=2.0, n_max=2, fiber_cutoff=1.0
    )
    base.update(kw)
    return TorusConfig(**base)


def test_lattice_fibers_unit_ball():
    fibers = lattice_fibers(_quick_config())
    assert fibers.shape == (7, 3)
    as_tuples = [tuple(f) for f in fibers]
    assert (0.0, 0.0, 0.0) in as_tuples
    assert as_tuples == sorted(as_tuples)
    norms = sorted(float(np.linalg.norm(f)) for f in fibers)
    assert norms == pytest.approx([0.0] + [1.0] * 6)


def test_lattice_fibers_boundary_is_integer_exact():
    # |n|^2 = 2 points sit exactly on the cutoff sqrt(2) and must be kept
    fibers = lattice_fibers(_quick_config(fiber_cutoff=math.sqrt(2.0)))
    assert fibers.shape == (19, 3)
    # just below the boundary the shell drops out
    assert lattice_fibers(_quick_config(fiber_cutoff=1.41)).shape == (7, 3)


def test_lattice_fibers_singleton():
    # dual spacing 2 pi exceeds the cutoff: only the zero fiber remains
    fibers = lattice_fibers(TorusConfig(ell=1.0, alpha=0.0, delta=1.0, cutoff=1.0, n_max=1, fiber_cutoff=3.0))
    np.testing.assert_array_equal(fibers, np.zeros((1, 3)))


def test_explicit_fibers_sorted_and_validated():
    cfg = _quick_config(fibers=((0.0, 0.0, 1.0), (0.0, 0.0, -1.0)))
    np.testing.assert_array_equal(
        lattice_fibers(cfg), [[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]]
    )
    with pytest.raises(ValueError):
        _quick_config(fibers=((0.0, 0.0, 1.0),))  # not closed under P -> -P
    with pytest.raises(ValueError):
        _quick_config(fibers=())
    with pytest.raises(ValueError):
        _quick_config(fibers=((0.0, 1.0),))


def test_config_validation():
    with pytest.raises(ValueError):
        _quick_config(ell=0.0)
    with pytest.raises(ValueError):
        _quick_config(alpha=-0.5)
    with pytest.raises(ValueError):
        _quick_config(fiber_cutoff=0.0)
    with pytest.raises(ValueError):
        _quick_config(degeneracy_tol=0.0)


def test_assemble_torus_capacity():
    with pytest.raises(CapacityError):
        assemble_torus(_quick_config(), capacity=100)


def test_block_spectra_union():
    # the torus operator is the direct sum of its momentum blocks, so its
    # spectrum is the sorted union of the block spectra
    model = assemble_torus(_quick_config(cutoff=1.5, n_max=1))
    dense_blocks = [b.to_dense() for b in model.blocks]
    union = np.sort(np.concatenate([np.linalg.eigvalsh(d) for d in dense_blocks]))
    full = np.linalg.eigvalsh(scipy.linalg.block_diag(*dense_blocks))
    np.testing.assert_allclose(union, full, atol=1e-10)
    rep = degeneracy_analysis(model)
    assert rep.ground_energy == pytest.approx(float(union[0]), abs=1e-8)


def test_decoupled_torus_minimum_is_simple():
    model = assemble_torus(_quick_config(alpha=0.0, cutoff=1.5, n_max=2))
    rep = degeneracy_analysis(model)
    assert rep.ground_energy == pytest.approx(0.0, abs=1e-9)
    assert rep.argmin == ((0.0, 0.0, 0.0),)
    assert rep.multiplicity == 1
    branch, consistent = contradiction_check(rep)
    assert branch == "simple-zero-minimum"
    assert consistent


def test_coupled_quick_report_frozen():
    model = assemble_torus(_quick_config())
    rep = degeneracy_analysis(model)
    assert rep.ground_energy == pytest.approx(QUICK_GROUND, rel=1e-9)
    assert rep.argmin == ((0.0, 0.0, 0.0),)
    assert rep.multiplicity == 1
    by_p = dict(rep.fiber_energies)
    assert by_p[(0.0, 0.0, 1.0)] == pytest.approx(QUICK_E_UNIT, rel=1e-9)
    assert len(rep.fiber_energies) == 7
    branch, consistent = contradiction_check(rep)
    assert branch == "simple-zero-minimum"
    assert consistent


def test_restricted_sector_is_exactly_degenerate():
    cfg = _quick_config(fibers=((0.0, 0.0, 1.0), (0.0, 0.0, -1.0)))
    rep = degeneracy_analysis(assemble_torus(cfg))
    energies = [e for _, e in rep.fiber_energies]
    assert abs(energies[0] - energies[1]) <= 1e-10
    assert energies[0] == pytest.approx(QUICK_E_UNIT, rel=1e-9)
    assert rep.multiplicity >= 2
    assert len(rep.argmin) == 2
    branch, consistent = contradiction_check(rep)
    assert branch == "degenerate-minimum"
    assert consistent


def test_degeneracy_analysis_threads_deterministic():
    model = assemble_torus(_quick_config(cutoff=1.5, n_max=1))
    a = degeneracy_analysis(model, threads=1)
    b = degeneracy_analysis(model, threads=2)
    assert a.fiber_energies == b.fiber_energies
    assert a.ground_energy == b.ground_energy


def test_degeneracy_tol_validation():
    model = assemble_torus(_quick_config(cutoff=1.5, n_max=1))
    with pytest.raises(ValueError):
        degeneracy_analysis(model, degeneracy_tol=0.0)


def test_contradiction_check_flags_inconsistency():
    # a simple zero minimum must come with multiplicity one ...
    rep = TorusReport(
        ground_energy=-1.0, argmin=((0.0, 0.0, 0.0),), multiplicity=2,
        fiber_energies=(((0.0, 0.0, 0.0), -1.0),), degeneracy_tol=1e-7,
    )
    assert contradiction_check(rep) == ("simple-zero-minimum", False)
    # ... and an off-zero minimum must be (at least) twofold
    rep = TorusReport(
        ground_energy=-1.0, argmin=((0.0, 0.0, 1.0),), multiplicity=1,
        fiber_energies=(((0.0, 0.0, 1.0), -1.0),), degeneracy_tol=1e-7,
    )
    assert contradiction_check(rep) == ("degenerate-minimum", False)


def test_yukawa_large_torus_matches_free_kernel():
    val = periodized_yukawa((1.0, 0.0, 0.0), (0.0, 0.0, 0.0), ell=50.0)
    assert abs(val - math.exp(-1.0) / (4.0 * math.pi)) <= 1e-10


def test_yukawa_symmetric_and_mass_monotone():
    x, xp = (0.3, 0.1, -0.2), (-0.1, 0.4, 0.2)
    a = periodized_yukawa(x, xp, ell=2.0, image_cut=3)
    b = periodized_yukawa(xp, x, ell=2.0, image_cut=3)
    assert a == pytest.approx(b, rel=1e-14)
    heavier = periodized_yukawa(x, xp, ell=2.0, mass=2.0, image_cut=3)
    assert heavier < a


def test_yukawa_grows_with_image_box():
    x, xp = (0.3, 0.0, 0.0), (0.0, 0.0, 0.0)
    v1 = periodized_yukawa(x, xp, ell=1.0, image_cut=1)
    v2 = periodized_yukawa(x, xp, ell=1.0, image_cut=2)
    assert v2 > v1  # every added image contributes a positive term


def test_yukawa_singularities_are_errors():
    with pytest.raises(ValueError):
        periodized_yukawa((0.5, 0.5, 0.5), (0.5, 0.5, 0.5), ell=2.0)
    with pytest.raises(ValueError):
        periodized_yukawa((2.0, 0.0, 0.0), (0.0, 0.0, 0.0), ell=2.0)  # image hit


def test_yukawa_preconditions():
    x, xp = (0.3, 0.0, 0.0), (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        periodized_yukawa(x, xp, ell=0.0)
    with pytest.raises(ValueError):
        periodized_yukawa(x, xp, ell=2.0, mass=0.5)
    with pytest.raises(ValueError):
        periodized_yukawa(x, xp, ell=2.0, image_cut=0)


def test_yukawa_converged_certifies_its_cut():
    x, xp = (0.3, 0.1, -0.2), (0.0, 0.0, 0.0)
    val, cut = yukawa_converged(x, xp, ell=2.0)
    assert cut >= 2
    assert val == periodized_yukawa(x, xp, ell=2.0, image_cut=cut)
    assert val > periodized_yukawa(x, xp, ell=2.0, image_cut=1)
    with pytest.raises(ValueError):
        yukawa_converged(x, xp, ell=2.0, start_cut=0)
    with pytest.raises(ConvergenceError):
        yukawa_converged((0.2, 0.0, 0.0), (0.0, 0.0, 0.0), ell=0.5, max_cut=3)
