import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm, solve_continuous_lyapunov

from jumptime.dissipators import Collective, DarkTrapped, DirectionalHop, effective_hamiltonian, local_collapse
from jumptime.models import MomentumGrid, dark_only_chain, directional_chain, ssh
from jumptime.trajectories import (EnsembleAccumulator, NoJumpPropagator, PureState, TrajectoryConfig,
                                   ensemble_average, run_trajectory, sample_waiting_time, trajectory_rng)

SSH_CFG = TrajectoryConfig(ssh(0.2, 0.5), Collective(), (32,), (0,), "A", 4)


def test_nojump_matches_expm():
    grid = MomentumGrid((12,))
    blocks = effective_hamiltonian(ssh(0.3, 0.8, hz_sin=0.4), Collective("A", 1.7), grid).blocks
    rng = np.random.default_rng(1)
    psi = rng.normal(size=(12, 2)) + 1j * rng.normal(size=(12, 2))
    for tau in (0.0, 0.37, 2.5, 11.0):
        ref = np.einsum("kab,kb->ka", np.array([expm(-1j * b * tau) for b in blocks]), psi)
        np.testing.assert_allclose(NoJumpPropagator(blocks).apply(psi, tau), ref, atol=1e-12)


def test_localized_state_real_space():
    st_ = PureState.localized(MomentumGrid((8,)), 3, "B")
    real = st_.real_space()
    assert abs(real[3, 1]) == pytest.approx(1.0)
    assert np.abs(real).sum() == pytest.approx(1.0)


@given(st.floats(1e-6, 1 - 1e-6))
@settings(max_examples=40, deadline=None)
def test_waiting_time_solves_survival(u):
    grid = MomentumGrid((16,))
    blocks = effective_hamiltonian(ssh(0.2, 0.5), Collective(), grid).blocks
    prep = NoJumpPropagator(blocks).prepare(PureState.localized(grid).amplitudes)
    tau = sample_waiting_time(prep, u)
    assert prep.survival(tau) == pytest.approx(u, abs=1e-10)


def test_dark_state_never_jumps():
    grid = MomentumGrid((8,))
    blocks = effective_hamiltonian(dark_only_chain(1.0), Collective(), grid).blocks
    prep = NoJumpPropagator(blocks).prepare(PureState.localized(grid).amplitudes)
    with pytest.raises(DarkTrapped):
        sample_waiting_time(prep, 0.5)
    cfg = TrajectoryConfig(dark_only_chain(1.0), Collective(), (8,), (0,), "A", 2)
    assert run_trajectory(cfg, 1, 0).terminated
    with pytest.raises(DarkTrapped):
        ensemble_average(cfg, 3, 1)


def test_mean_waiting_time_matches_norm_integral():
    # E[tau] = int ||exp(-i H_eff t) psi||^2 dt = <psi|X|psi>, i H^+ X - i X H = -1
    L = 16
    grid = MomentumGrid((L,))
    blocks = effective_hamiltonian(ssh(0.2, 0.5), Collective(), grid).blocks
    expected = np.mean([solve_continuous_lyapunov(1j * b.conj().T, -np.eye(2))[0, 0].real for b in blocks])
    cfg = TrajectoryConfig(ssh(0.2, 0.5), Collective(), (L,), (0,), "A", 1)
    taus = np.array([run_trajectory(cfg, 11, i).jumps[0][1] for i in range(3000)])
    se = taus.std(ddof=1) / np.sqrt(len(taus))
    assert abs(taus.mean() - expected) <= 4 * se


def test_first_jump_lands_on_a():
    rec = run_trajectory(SSH_CFG, 5, 0)
    assert rec.snapshots[1][1]["popB"][0] == pytest.approx(0.0, abs=1e-28)


def test_determinism_and_rng_streams():
    a, b = run_trajectory(SSH_CFG, 7, 3), run_trajectory(SSH_CFG, 7, 3)
    assert a.jumps == b.jumps
    assert all(np.array_equal(x[1]["x"], y[1]["x"]) for x, y in zip(a.snapshots, b.snapshots))
    assert trajectory_rng(7, 3).random() != trajectory_rng(7, 4).random()


def test_worker_count_does_not_change_result():
    one = ensemble_average(SSH_CFG, 130, 9, workers=1)
    two = ensemble_average(SSH_CFG, 130, 9, workers=2)
    assert one.rows() == two.rows()


def test_records_are_ordered():
    rec = run_trajectory(SSH_CFG, 2, 1)
    rec.check()
    assert [n for n, _, _ in rec.jumps] == [1, 2, 3, 4]


def test_directional_walltime_current():
    times = (0.5, 2.0)
    cfg = TrajectoryConfig(directional_chain(0.25), DirectionalHop(1.0), (64,), (3,), "A", times=times)
    acc = ensemble_average(cfg, 400, 4)
    for k, t in enumerate(times):
        m, se = acc.mean(("t", k), "x")[0], acc.stderr(("t", k), "x")[0]
        assert abs(m - 3 - t) <= 4 * se


def test_local_collapse_keeps_norm():
    cfg = TrajectoryConfig(ssh(0.5, 0.2), local_collapse(), (32,), (0,), "A", 5)
    for i in range(5):
        rec = run_trajectory(cfg, 3, i)
        for _, obs in rec.snapshots:
            assert obs["popA"][0] + obs["popB"][0] == pytest.approx(1.0, abs=1e-10)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=30), st.integers(1, 29))
@settings(max_examples=50, deadline=None)
def test_accumulator_merge_matches_single_pass(values, cut):
    cut = min(cut, len(values) - 1)
    whole, left, right = EnsembleAccumulator(), EnsembleAccumulator(), EnsembleAccumulator()
    for i, v in enumerate(values):
        whole.add(("n", 0), {"x": np.array([v])})
        (left if i < cut else right).add(("n", 0), {"x": np.array([v])})
    merged = left.merge(right)
    lab = ("n", 0)
    assert merged.count(lab) == len(values)
    np.testing.assert_allclose(merged.mean(lab, "x"), np.mean(values), atol=1e-12)
    np.testing.assert_allclose(merged.stderr(lab, "x"), np.std(values, ddof=1) / np.sqrt(len(values)), atol=1e-10)
