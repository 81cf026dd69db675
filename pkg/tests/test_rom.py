import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from dgrom.geometry import DEFAULT_BOX
from dgrom.online import ReducedModel, ReducedSolveError, solve_pivoted
from dgrom.rom import (
    PodError, SnapshotSet, collect_snapshots, error_metrics, fom_solve, pod, pod_eigen, project,
    projection_error, sample_parameters, velocity_pod,
)


def spd(rng, n):
    Q = rng.normal(size=(n, n))
    return sp.csr_matrix(Q @ Q.T + n * np.eye(n))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 8))
def test_pod_identities_on_random_low_rank_data(seed, rank):
    rng = np.random.default_rng(seed)
    M = spd(rng, 30)
    S = rng.normal(size=(30, rank)) @ rng.normal(size=(rank, 12))
    basis = pod(S, M)
    assert basis.rank == rank
    np.testing.assert_allclose(basis.B.T @ (M @ basis.B), np.eye(rank), atol=1e-10)
    for n in range(1, rank + 1):
        b = pod(S, M, n)
        tail = basis.eigenvalues[n:].sum()
        assert projection_error(S, b, M) == pytest.approx(tail, rel=1e-8, abs=1e-10 * basis.eigenvalues[0])


def test_eigenvalues_sorted_and_equal_to_squared_singular_values():
    rng = np.random.default_rng(3)
    S = rng.normal(size=(20, 6))
    w, V = pod_eigen(S, sp.identity(20))
    np.testing.assert_allclose(w, np.linalg.svd(S, compute_uv=False) ** 2, rtol=1e-12)
    assert np.all(np.diff(w) <= 0)


def test_pod_errors():
    rng = np.random.default_rng(1)
    S = rng.normal(size=(10, 4))
    with pytest.raises(PodError, match="zero"):
        pod(np.zeros((10, 3)), sp.identity(10))
    with pytest.raises(PodError, match="positive definite"):
        pod(S, sp.diags(np.r_[np.ones(9), -50.0]))
    with pytest.raises(PodError, match="usable maximum"):
        pod(S, sp.identity(10), n=5)


def test_sampling_is_reproducible_and_prefix_stable():
    a = sample_parameters(DEFAULT_BOX, 110, 42)
    np.testing.assert_array_equal(a[:100], sample_parameters(DEFAULT_BOX, 100, 42))
    assert not np.array_equal(a[:5], sample_parameters(DEFAULT_BOX, 5, 43))
    (x0, x1), (y0, y1) = DEFAULT_BOX
    assert np.all((a[:, 0] >= x0) & (a[:, 0] <= x1) & (a[:, 1] >= y0) & (a[:, 1] <= y1))


def test_snapshot_set_validation():
    with pytest.raises(ValueError):
        SnapshotSet(np.zeros((4, 2)), np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        SnapshotSet(np.full((4, 1), np.nan), np.zeros((3, 1)), np.zeros((1, 2)))


@pytest.fixture(scope="module")
def offline(coarse):
    params = sample_parameters(coarse.domain.box, 12, 5)
    snaps = collect_snapshots(coarse.op, coarse.domain, params)
    bases = velocity_pod(snaps.Sv, coarse.ip.Mv, coarse.space.dofmap)
    bp = pod(snaps.Sp, coarse.ip.Mp)
    model = project(coarse.op, coarse.domain, bases, bp, extras={"n_elements": coarse.mesh.n_elements,
                                                                  "vel_local": 6})
    return snaps, bases, bp, model


def test_componentwise_bases_live_on_their_component(coarse, offline):
    _, bases, _, _ = offline
    vel = coarse.space.dofmap.vel
    for c, b in enumerate(bases):
        other = vel[:, 1 - c].ravel()
        assert not b.B[other].any()
        np.testing.assert_allclose(b.B.T @ (coarse.ip.Mv @ b.B), np.eye(b.n), atol=1e-10)
    joint = velocity_pod(offline[0].Sv, coarse.ip.Mv, coarse.space.dofmap, mode="joint")
    assert len(joint) == 1 and joint[0].rank <= 12
    with pytest.raises(ValueError):
        velocity_pod(offline[0].Sv, coarse.ip.Mv, coarse.space.dofmap, mode="polar")


def test_reduced_solution_reproduces_training_snapshot(coarse, offline):
    snaps, bases, bp, model = offline
    r = model.solve(snaps.params[0], [b.rank for b in bases], bp.rank)
    ev, ep = error_metrics((snaps.Sv[:, 0], snaps.Sp[:, 0]), r, coarse.ip, (model.Bv, model.Bp))
    assert ev < 1e-6 and ep < 1e-6


def test_reduced_system_is_galerkin_projection(coarse, offline):
    # projecting the online full-order system equals assembling the reduced system
    from dgrom.affine import assemble_online
    from dgrom.geometry import build_maps

    _, _, _, model = offline
    mu = (0.52, 0.27)
    full = assemble_online(coarse.op, coarse.op.theta(build_maps(coarse.domain, mu)))
    cols = model.check_n(3, 3)
    K, rhs = model.assemble(mu, cols, 3)
    Bv, Bp = model.Bv[:, cols], model.Bp[:, :3]
    np.testing.assert_allclose(K[:6, :6], Bv.T @ (full.A @ Bv), atol=1e-10)
    np.testing.assert_allclose(K[:6, 6:], Bv.T @ (full.B @ Bp), atol=1e-10)
    np.testing.assert_allclose(rhs, np.r_[Bv.T @ full.F1, Bp.T @ full.F2], atol=1e-10)


def test_dimension_checks(offline):
    _, _, _, model = offline
    with pytest.raises(ValueError, match=">= 1"):
        model.solve((0.5, 0.3), 0)
    with pytest.raises(ValueError, match="usable maximum"):
        model.solve((0.5, 0.3), model.max_n + 1)


def test_archive_round_trip(offline, tmp_path):
    _, _, _, model = offline
    model.aux = {"Mv": sp.identity(3, format="csr"), "cells": np.zeros((2, 3, 2))}
    model.save(tmp_path / "m.npz")
    back = ReducedModel.load(tmp_path / "m.npz")
    a, b = model.solve((0.44, 0.36), 4), back.solve((0.44, 0.36), 4)
    np.testing.assert_array_equal(a.U_N, b.U_N)
    assert back.v_groups == model.v_groups and back.extras == model.extras
    assert (back.aux["Mv"] != model.aux["Mv"]).nnz == 0


def test_pivoted_solve():
    rng = np.random.default_rng(0)
    K = rng.normal(size=(5, 5))
    x = rng.normal(size=5)
    np.testing.assert_allclose(solve_pivoted(K, K @ x), x, rtol=1e-10)
    K[:, 4] = K[:, 3]
    with pytest.raises(ReducedSolveError, match="singular"):
        solve_pivoted(K, K @ x)


def test_error_metrics_guards(coarse):
    z = (np.zeros(coarse.space.n_u), np.zeros(coarse.space.n_p))
    with pytest.raises(ValueError, match="zero norm"):
        error_metrics(z, z, coarse.ip)


def test_fom_solve_runs_through_affine_sum(coarse):
    U, P = fom_solve(coarse.op, coarse.domain, (0.5, 0.3))
    assert U.shape == (coarse.space.n_u,) and np.isfinite(P).all()
