import numpy as np
import pytest

from jumptime.dissipators import Collective, DirectionalHop, KickDistribution, KickFamily, SublatticeProjector
from jumptime.models import dark_only_chain, directional_chain, ssh, torus2d
from jumptime.reference import (AmbiguityError, DenseDensityMatrix, integrate_master, jump_operators, jumptime_map,
                                liouvillian, localized_density, steady_state_numeric, sublattice_kernel,
                                kernel_to_dense, trace_distance)


def test_master_preserves_trace_and_positivity():
    rho0 = localized_density((8,), 0, "A")
    for st in integrate_master(rho0, ssh(0.2, 0.5, hz_sin=0.3), Collective("A", 1.0), [0.5, 3.0], 8):
        assert st.trace == pytest.approx(1.0, abs=1e-9)
        st.check(psd_tol=1e-9)


def test_local_and_collective_operator_sets():
    ops = jump_operators(KickFamily(KickDistribution("uniform")), (4,))
    assert len(ops) == 4
    local = jump_operators(KickFamily(KickDistribution("uniform")), (4,), local_basis=True)
    # the two unravelings of local collapse share a Lindbladian
    rho = localized_density((4,), 1, "B")
    a = sum(g * op @ rho @ op.conj().T for g, op in ops)
    b = sum(g * op @ rho @ op.conj().T for g, op in local)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_map_trace_preserving_and_positive():
    rho = localized_density((12,), 0, "A")
    for d in (Collective(), SublatticeProjector("B"), KickFamily(KickDistribution("uniform"))):
        res = jumptime_map(rho, ssh(0.3, 0.7), d, 12)
        assert res.trace == pytest.approx(1.0, abs=1e-10)
        DenseDensityMatrix(res.rho, (12,)).check(psd_tol=1e-10)


def test_dark_weight_is_dropped():
    res = jumptime_map(localized_density((6,), 0, "A"), dark_only_chain(1.0), Collective(), 6)
    assert res.trace == pytest.approx(0.0, abs=1e-12)
    assert res.info["dark_modes"] > 0


def test_directional_map_shifts_by_one_cell():
    # L = 64 keeps the no-jump spreading away from the periodic seam
    rho = localized_density((64,), 3, "A")
    out = jumptime_map(rho, directional_chain(0.25), DirectionalHop(), 64).rho
    assert DenseDensityMatrix(out, (64,)).position_mean((3,))[0] == pytest.approx(4.0, abs=1e-12)


def test_long_time_master_reaches_steady_state():
    L = 8
    rho0 = localized_density((L,), 0, "A")
    late = integrate_master(rho0, ssh(0.2, 0.5), Collective(), 600.0, L)[0].rho
    ss = steady_state_numeric(ssh(0.2, 0.5), Collective(), L, rho0=rho0).rho
    assert trace_distance(late, ss) < 1e-6


def test_degenerate_steady_state_needs_initial_state():
    with pytest.raises(AmbiguityError):
        steady_state_numeric(ssh(0.2, 0.5), Collective(), 4)


def test_liouvillian_preserves_trace():
    sup = liouvillian(ssh(0.2, 0.5), Collective(), 4)
    eye = np.eye(8).reshape(-1)
    np.testing.assert_allclose(eye.conj() @ sup, 0, atol=1e-13)


def test_dense_dimension_limit():
    with pytest.raises(ValueError):
        jumptime_map(localized_density((16, 16), (0, 0), "A"), torus2d(6, 10, 1), Collective(), (16, 16))


def test_kernel_basis_roundtrip():
    rng = np.random.default_rng(0)
    k = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    np.testing.assert_allclose(sublattice_kernel(kernel_to_dense(k, (8,)), (8,)), k, atol=1e-14)
