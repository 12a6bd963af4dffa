import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumptime.dissipators import (Collective, KickDistribution, KickFamily, Mixture, SublatticeProjector,
                                  local_collapse)
from jumptime.models import DarkContactError, MomentumGrid, random_model, ssh, torus2d
from jumptime.propagators import (DensityKernel, evolve_kernel, invariant_intracell, k_cc, k_cc_2d, k_mixture, k_numeric,
                                  k_sublattice, kernel_function, mean_displacement, propagator_kind)
from jumptime.reference import jumptime_map, kernel_to_dense, trace_distance

seeds = st.integers(0, 2 ** 32 - 1)
PTS = MomentumGrid((40,)).flat_points


def _pairs(rng, n=200, d=1):
    return rng.uniform(0, 2 * np.pi, (n, d)), rng.uniform(0, 2 * np.pi, (n, d))


@given(seeds, st.floats(0.1, 5.0))
@settings(max_examples=25, deadline=None)
def test_cc_normalized_on_diagonal(seed, gamma):
    model = random_model(np.random.default_rng(seed))
    k = k_cc(model, PTS, PTS, gamma, tol=0.0)
    np.testing.assert_allclose(k, 1.0, atol=1e-14)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_numeric_matches_closed_forms(seed):
    rng = np.random.default_rng(seed)
    v, w = rng.uniform(0.05, 2.0, 2)
    if abs(v - w) < 0.05:
        return
    model = ssh(v, w)
    p, pp = _pairs(rng)
    cases = [
        (Collective("A", 1.3), k_cc(model, p, pp, 1.3)),
        (SublatticeProjector("A", 0.7), k_sublattice(model, "A", p, pp, 0.7)),
        (Mixture((Collective("A", 0.4), SublatticeProjector("B", 0.6))), k_mixture(model, 0.4, 0.6, p, pp)),
    ]
    for d, ref in cases:
        np.testing.assert_allclose(k_numeric(model, d, p, pp), ref, atol=1e-11)


def test_sublattice_kernels_coincide():
    p, pp = _pairs(np.random.default_rng(0))
    np.testing.assert_array_equal(k_sublattice(ssh(0.2, 0.5), "A", p, pp), k_sublattice(ssh(0.2, 0.5), "B", p, pp))


def test_cc_is_contraction_on_ssh():
    grid = MomentumGrid((512,)).flat_points
    rng = np.random.default_rng(2)
    i, j = rng.integers(0, 512, (2, 5000))
    assert np.abs(k_cc(ssh(0.2, 0.5), grid[i], grid[j])).max() <= 1 + 1e-12


def test_2d_kernel_is_vector_argument_form():
    model = torus2d(6, 10, 1)
    p, pp = _pairs(np.random.default_rng(4), d=2)
    np.testing.assert_allclose(k_cc_2d(model, p, pp), k_cc(model, p, pp), atol=1e-14)
    grid = MomentumGrid.uniform(128, 2).flat_points
    assert np.isfinite(k_cc(model, grid, grid)).all()


def test_dark_contact_raises():
    with pytest.raises(DarkContactError):
        k_cc(ssh(0.5, 0.5), [[np.pi]], [[0.0]])


def test_projector_requires_chiral_model():
    with pytest.raises(ValueError):
        k_sublattice(ssh(0.2, 0.5, hz_sin=0.3), "A", PTS, PTS)
    assert propagator_kind(ssh(0.2, 0.5, hz_sin=0.3), SublatticeProjector("A")).name == "Empirical"


@pytest.mark.parametrize("d", [Collective(), SublatticeProjector("A"), SublatticeProjector("B"),
                               Mixture((Collective("A", 0.5), SublatticeProjector("B", 0.5))), local_collapse()])
def test_kernel_matches_dense_map(d):
    L = 16
    model = ssh(0.2, 0.5)
    grid = MomentumGrid((L,))
    sigma = invariant_intracell(d)
    kern = DensityKernel.localized(grid, 0)
    rho = kernel_to_dense(kern.matrix, (L,), intracell=sigma)
    for _ in range(2):
        rho = jumptime_map(rho, model, d, L).rho
        kern = evolve_kernel(kern, model, d, 1)
        assert trace_distance(rho, kernel_to_dense(kern.matrix, (L,), intracell=sigma)) <= 1e-9


def test_evolution_hermitian_and_trace_preserving():
    grid = MomentumGrid((48,))
    rng = np.random.default_rng(5)
    v = rng.normal(size=48) + 1j * rng.normal(size=48)
    rho = DensityKernel(np.outer(v, v.conj()) / np.vdot(v, v).real, grid)
    for d in (Collective(), local_collapse(), KickFamily(KickDistribution("gaussian", 1.0))):
        out = evolve_kernel(rho, ssh(0.3, 0.6), d, 3)
        assert out.is_hermitian(1e-12)
        assert out.diagonal().min() >= -1e-12
        assert out.trace == pytest.approx(1.0, abs=1e-12)


def test_cc_preserves_diagonal():
    grid = MomentumGrid((32,))
    rng = np.random.default_rng(6)
    v = rng.normal(size=32) + 1j * rng.normal(size=32)
    rho = DensityKernel(np.outer(v, v.conj()) / np.vdot(v, v).real, grid)
    np.testing.assert_allclose(evolve_kernel(rho, ssh(0.2, 0.5), Collective(), 4).diagonal(), rho.diagonal(),
                               atol=1e-15)


def test_transport_increment_independent_of_g():
    grid = MomentumGrid((64,))
    model = ssh(0.2, 0.5)
    xs = []
    for G in (KickDistribution("delta"), KickDistribution("uniform"), KickDistribution("gaussian", 1.0)):
        rho = evolve_kernel(DensityKernel.localized(grid), model, KickFamily(G), 2)
        xs.append(mean_displacement(rho).mean[0])
    assert max(xs) - min(xs) <= 1e-10
    assert xs[0] == pytest.approx(2.0, abs=2e-3)


def test_kernel_function_kinds():
    assert kernel_function(ssh(0.2, 0.5), Collective())[1].name == "CC"
    assert kernel_function(torus2d(6, 10, 1), Collective())[1].name == "CC2D"
    assert kernel_function(ssh(0.2, 0.5), Mixture((Collective(), SublatticeProjector("A"))))[1].name == "Empirical"
