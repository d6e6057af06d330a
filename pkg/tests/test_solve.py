"""Iterative eigensolver against dense oracles; resolvent positivity audits."""

import math

import numpy as np
import pytest

from polaronlab import (
    CapacityError,
    ConvergenceError,
    FiberConfig,
    SparseOperator,
    assemble_fiber,
    build_grid,
    dense_spectrum,
    enumerate_basis,
    ground_state,
    lowest_eigenpairs,
    resolvent_positivity_audit,
    sign_flip,
)
from suite_configs import all_operators, kt_suite


def _diag_op(values):
    idx = np.arange(len(values), dtype=np.int64)
    return SparseOperator(len(values), idx, idx, np.asarray(values, float))


def _tridiag_op(n):
    # discrete Laplacian: eigenvalues 2 - 2 cos(pi j / (n+1)) are closed form
    i = np.arange(n, dtype=np.int64)
    rows = np.concatenate([i, i[:-1]])
    cols = np.concatenate([i, i[:-1] + 1])
    vals = np.concatenate([np.full(n, 2.0), np.full(n - 1, -1.0)])
    return SparseOperator(n, rows, cols, vals)


def test_diagonal_example():
    res = ground_state(_diag_op([3.0, 1.0, 2.0]))
    assert res.energy == pytest.approx(1.0, abs=1e-12)
    assert np.abs(res.vector) == pytest.approx([0.0, 1.0, 0.0], abs=1e-9)
    assert res.residual <= 1e-9
    assert res.converged


def test_two_by_two_pair():
    op = SparseOperator(2, [0, 0, 1], [0, 1, 1], [0.0, 1.0, 2.0])
    pairs = lowest_eigenpairs(op, k=2)
    assert pairs[0].energy == pytest.approx(1.0 - math.sqrt(2.0), abs=1e-10)
    assert pairs[1].energy == pytest.approx(1.0 + math.sqrt(2.0), abs=1e-10)
    for res in pairs:
        r = op.matvec(res.vector) - res.energy * res.vector
        assert np.linalg.norm(r) == pytest.approx(res.residual, abs=1e-13)
        assert res.residual <= 1e-9


def test_identity_breaks_down_cleanly():
    res = ground_state(_diag_op(np.ones(5)))
    assert res.energy == pytest.approx(1.0, abs=1e-12)
    assert res.residual <= 1e-12


def test_degenerate_lowest_level():
    pairs = lowest_eigenpairs(_diag_op([1.0, 1.0, 2.0, 5.0, 5.0, 9.0]), k=3)
    energies = [p.energy for p in pairs]
    assert energies == pytest.approx([1.0, 1.0, 2.0], abs=1e-9)


def test_restart_path_matches_closed_form():
    n = 300
    op = _tridiag_op(n)
    pairs = lowest_eigenpairs(op, k=4, window=30)
    for j, res in enumerate(pairs, start=1):
        exact = 2.0 - 2.0 * math.cos(math.pi * j / (n + 1))
        assert res.energy == pytest.approx(exact, abs=1e-9)
        assert res.residual <= 1e-9
    # the same instance through the dense oracle
    np.testing.assert_allclose(
        [p.energy for p in pairs], dense_spectrum(op, k=4), atol=1e-9
    )


def test_suite_operators_match_dense():
    for name, op in all_operators():
        if op.dimension > 600:
            continue
        res = ground_state(op)
        oracle = dense_spectrum(op, k=1)[0]
        assert res.energy == pytest.approx(oracle, abs=1e-8), name
        assert res.residual <= 1e-9


def test_convergence_error_carries_estimate():
    op = _tridiag_op(400)
    with pytest.raises(ConvergenceError):
        lowest_eigenpairs(op, k=1, max_steps=3)


def test_deterministic_runs():
    _, op = all_operators()[4]
    a = ground_state(op)
    b = ground_state(op)
    assert a.energy == b.energy
    np.testing.assert_array_equal(a.vector, b.vector)
    c = ground_state(op, seed=7)
    assert c.energy == pytest.approx(a.energy, abs=1e-9)


def test_truncation_monotonicity():
    # enlarging the variational space can only lower the ground energy
    grid = build_grid(1.0, 1.5)
    energies = []
    for n_max in range(4):
        basis = enumerate_basis(len(grid), n_max, grid.units, grid.spacing)
        cfg = FiberConfig(alpha=1.0, p=np.zeros(3), grid=grid, n_max=n_max)
        energies.append(ground_state(assemble_fiber(cfg, basis)).energy)
    assert energies[0] == pytest.approx(0.0, abs=1e-12)
    for a, b in zip(energies, energies[1:]):
        assert b <= a + 1e-12


def test_sign_flip_preserves_ground_energy():
    for name, cfg, basis in kt_suite()[:4]:
        op = assemble_fiber(cfg, basis)
        e1 = ground_state(op).energy
        e2 = ground_state(sign_flip(op, basis)).energy
        assert e1 == pytest.approx(e2, abs=1e-9)


def test_solver_argument_validation():
    op = _diag_op([1.0, 2.0])
    with pytest.raises(ValueError):
        lowest_eigenpairs(op, k=0)
    with pytest.raises(ValueError):
        lowest_eigenpairs(op, k=3)
    with pytest.raises(ValueError):
        lowest_eigenpairs(op, tol=0.0)
    with pytest.raises(ValueError):
        lowest_eigenpairs(SparseOperator(0, [], [], []))


def test_dense_spectrum_oracle():
    op = _diag_op([3.0, 1.0, 2.0])
    np.testing.assert_allclose(dense_spectrum(op, k=6), [1.0, 2.0, 3.0])
    with pytest.raises(CapacityError):
        dense_spectrum(op, dense_cap=2)
    with pytest.raises(ValueError):
        dense_spectrum(op, k=0)


def test_audit_inverse_positive_case():
    # [[2,-1],[-1,2]]: an M-matrix, inverse (1/3)[[2,1],[1,2]] is positive
    op = SparseOperator(2, [0, 0, 1], [0, 1, 1], [2.0, -1.0, 2.0])
    rep = resolvent_positivity_audit(op, lam=0.0)
    assert rep.strictly_positive
    assert rep.min_entry == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert rep.ground_vector_min == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)
    assert rep.gap == pytest.approx(2.0, abs=1e-12)
    assert rep.lam == 0.0


def test_audit_detects_sign_problem():
    # positive off-diagonal coupling: inverse entries change sign and the
    # ground vector cannot be chosen entrywise positive
    op = SparseOperator(2, [0, 0, 1], [0, 1, 1], [2.0, 1.0, 2.0])
    rep = resolvent_positivity_audit(op, lam=0.0)
    assert not rep.strictly_positive
    assert rep.ground_vector_min < 0.0


def test_audit_shift_must_clear_spectrum():
    op = SparseOperator(2, [0, 0, 1], [0, 1, 1], [2.0, -1.0, 2.0])
    with pytest.raises(ValueError):
        resolvent_positivity_audit(op, lam=-1.5)  # lands inside the spectrum
    with pytest.raises(CapacityError):
        resolvent_positivity_audit(op, lam=0.0, dense_cap=1)


def test_audit_single_state_gap_is_infinite():
    rep = resolvent_positivity_audit(_diag_op([2.0]), lam=0.0)
    assert rep.gap == math.inf
    assert rep.strictly_positive


def test_audit_fiber_needs_the_sign_flip():
    grid = build_grid(1.0, 1.0)
    basis = enumerate_basis(len(grid), 2, grid.units, grid.spacing)
    cfg = FiberConfig(alpha=1.0, p=np.zeros(3), grid=grid, n_max=2)
    op = assemble_fiber(cfg, basis)
    e0 = dense_spectrum(op, k=1)[0]
    lam = 1.0 - e0
    flipped = resolvent_positivity_audit(sign_flip(op, basis), lam=lam)
    assert flipped.strictly_positive
    assert flipped.ground_vector_min > 0.0
    assert flipped.gap > 0.0
    raw = resolvent_positivity_audit(op, lam=lam)
    assert not raw.strictly_positive
    assert raw.ground_vector_min < 0.0
