import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumptime.models import (DarkContactError, ModelValidationError, MomentumGrid, ModelSpec,
                             bloch_vector, directional_chain, h_perp_min, model_from_dict,
                             random_model, real_space_hamiltonian, ssh, symmetry_check, torus2d,
                             transform_primitive_vectors, winding_angle_count)

seeds = st.integers(0, 2 ** 32 - 1)


def test_ssh_bloch_components():
    h = bloch_vector(ssh(0.2, 0.5), np.array([0.0, np.pi / 2, np.pi]))
    np.testing.assert_allclose(h.hx, [0.7, 0.2, -0.3], atol=1e-15)
    np.testing.assert_allclose(np.abs(h.hy), [0.0, 0.5, 0.0], atol=1e-15)
    np.testing.assert_allclose(h.hz, 0.0, atol=1e-15)


def test_non_hermitian_hoppings_rejected():
    with pytest.raises(ModelValidationError):
        ModelSpec(1, {(1,): np.eye(2)})


def test_dimension_mismatch_rejected():
    with pytest.raises(ModelValidationError):
        ModelSpec(1, {(1, 0): np.eye(2), (-1, 0): np.eye(2)})


def test_dark_contact_at_transition():
    mc = h_perp_min(ssh(0.5, 0.5), 64)
    assert mc.is_contact
    assert abs(mc.momentum[0] - np.pi) < 1e-6


def test_torus_is_dark_free():
    assert h_perp_min(torus2d(6, 10, 1), 256).minimum > 0.1


def test_dark_contact_error_carries_momenta():
    err = DarkContactError("x", [np.pi])
    assert err.contacts.shape == (1, 1)


@pytest.mark.parametrize("n", [16, 33])
def test_real_space_spectrum_matches_bloch(n):
    model = ssh(0.3, 0.7, hz_sin=0.2)
    ev = np.sort(np.linalg.eigvalsh(real_space_hamiltonian(model, n)))
    pts = MomentumGrid((n,)).flat_points
    bloch = np.sort(np.linalg.eigvalsh(model.bloch_matrix(pts)).ravel())
    np.testing.assert_allclose(ev, bloch, atol=1e-12)


def test_symmetry_classes():
    assert symmetry_check(ssh(0.2, 0.5)).chiral
    rep = symmetry_check(ssh(0.2, 0.5, hz_sin=0.3))
    assert rep.inversion and not rep.trs and not rep.chiral
    assert symmetry_check(torus2d(6, 10, 1)).trs


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_random_models_respect_requested_symmetry(seed):
    rng = np.random.default_rng(seed)
    assert symmetry_check(random_model(rng, chiral=True)).chiral
    assert symmetry_check(random_model(rng, trs=True)).trs
    assert symmetry_check(random_model(rng, inversion=True)).inversion


@given(seeds, st.integers(-2, 2))
@settings(max_examples=15, deadline=None)
def test_transform_preserves_real_space_spectrum(seed, m):
    rng = np.random.default_rng(seed)
    u = rng.uniform(2, 18)
    model = torus2d(u, 10.0, 1.0)
    moved = transform_primitive_vectors(model, m)
    a = np.sort(np.linalg.eigvalsh(real_space_hamiltonian(model, (6, 6))))
    b = np.sort(np.linalg.eigvalsh(real_space_hamiltonian(moved, (6, 6))))
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_transform_identity():
    model = torus2d(6, 10, 1)
    same = transform_primitive_vectors(model, 0)
    pts = MomentumGrid.uniform(8, 2).flat_points
    np.testing.assert_array_equal(model.bloch_matrix(pts), same.bloch_matrix(pts))


@pytest.mark.parametrize("v, w, expected", [(0.2, 0.5, 1), (0.5, 0.2, 0)])
def test_angle_count(v, w, expected):
    assert winding_angle_count(ssh(v, w)) == expected


def test_model_dict_roundtrip():
    rng = np.random.default_rng(3)
    model = random_model(rng)
    back = model_from_dict(model.to_dict())
    pts = MomentumGrid((32,)).flat_points
    np.testing.assert_allclose(back.bloch_matrix(pts), model.bloch_matrix(pts), atol=1e-15)
    assert model_from_dict({"builtin": "directional_chain", "J": 0.25}).params == directional_chain(0.25).params
    with pytest.raises(ModelValidationError):
        model_from_dict({"dimension": 1})


def test_divided_model_scales_blocks():
    pts = MomentumGrid((16,)).flat_points
    np.testing.assert_array_equal(ssh(2.0, 5.0).divided(10.0).bloch_matrix(pts), ssh(0.2, 0.5).bloch_matrix(pts))
