import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumptime.dissipators import Collective, Mixture, SublatticeProjector
from jumptime.models import DarkContactError, h_perp_min, random_model, ssh, torus2d
from jumptime.topology import (ConsistencyError, closed_form_connection_cc, curvature_chern, jumptime_connection,
                               jumptime_phase, residual_terms, topology_report, transform_phases, winding_number)

# frozen oracles (closed-form quadrature at converged grids)
T_SSH_SIN = 0.5739428571
R_SSH_SIN = (-0.24, -0.1860571429)
T_CC_PLUS_A = 0.23006369


@pytest.mark.parametrize("v, w, W", [(0.2, 0.5, 1), (0.5, 0.2, 0), (0.1, 1.0, 1)])
def test_ssh_winding_and_phase(v, w, W):
    assert winding_number(ssh(v, w)).rounded == W
    assert jumptime_phase(ssh(v, w), Collective()).value == pytest.approx(W, abs=1e-8)


def test_reversed_collective_flips_sign():
    assert jumptime_phase(ssh(0.2, 0.5), Collective("B", 1.0)).value == pytest.approx(-1.0, abs=1e-8)


def test_connection_matches_winding_integrand():
    pts = np.linspace(0, 2 * np.pi, 37)[:, None]
    np.testing.assert_allclose(jumptime_connection(ssh(0.3, 0.8), Collective(), pts),
                               closed_form_connection_cc(ssh(0.3, 0.8), pts), atol=1e-8)


def test_sin_mass_decomposition_oracle():
    model = ssh(0.2, 0.5, hz_sin=0.3)
    T = jumptime_phase(model, Collective()).value
    r1, r2 = residual_terms(model)
    assert T == pytest.approx(T_SSH_SIN, abs=1e-8)
    assert (r1, r2) == pytest.approx(R_SSH_SIN, abs=1e-8)
    assert T == pytest.approx(winding_number(model).value + r1 + r2, abs=1e-10)


def test_cc_plus_a_mixture_phase_is_not_zero():
    mix = Mixture((Collective("A", 1.0), SublatticeProjector("A", 1.0)))
    ph = jumptime_phase(ssh(0.2, 0.5), mix)
    assert ph.empirical and ph.kind == "Empirical"
    assert ph.value == pytest.approx(T_CC_PLUS_A, abs=1e-7)


def test_dark_contact_is_a_domain_error():
    with pytest.raises(DarkContactError):
        jumptime_phase(ssh(0.5, 0.5), Collective())
    with pytest.raises(DarkContactError):
        residual_terms(ssh(0.5, 0.5))


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=15, deadline=None)
def test_phase_equals_winding_for_chiral_models(seed):
    model = random_model(np.random.default_rng(seed), chiral=True)
    if h_perp_min(model, 256).minimum < 0.1 * model.energy_scale:
        return
    assert jumptime_phase(model, Collective()).value == pytest.approx(winding_number(model).value, abs=1e-6)


def test_phase_independent_of_gamma_for_chiral_models():
    vals = [jumptime_phase(ssh(0.2, 0.5), Collective("A", g)).value for g in (0.1, 1.0, 10.0)]
    assert max(vals) - min(vals) < 1e-8


def test_torus_report_and_chern():
    rep = topology_report(torus2d(6, 10, 1), Collective(), with_chern=True)
    assert rep.T() == pytest.approx([-1.0, 0.0], abs=1e-6)
    assert abs(rep.chern) < 1e-6
    assert rep.axes[0].slice_spread < 1e-8
    with pytest.raises(ConsistencyError):
        curvature_chern(torus2d(6, 10, 1), Collective(), n=16, tol=0.0)


@pytest.mark.parametrize("m", [-1, 1, 3])
def test_transformation_law(m):
    model = torus2d(6, 10, 1)
    tp = transform_phases(topology_report(model, Collective()), m, model=model)
    assert tp.T == pytest.approx([-1.0, 0.0], abs=1e-6)
    assert tp.recomputed == pytest.approx(tp.T, abs=1e-6)
    assert tp.displacement_after == pytest.approx(tp.displacement_before, abs=1e-6)


def test_transform_needs_2d_report():
    with pytest.raises(ValueError):
        transform_phases(topology_report(ssh(0.2, 0.5), Collective()), 1)


def test_report_serializes():
    import json
    data = json.loads(topology_report(ssh(0.2, 0.5, hz_sin=0.3), Collective()).to_json())
    assert data["axes"][0]["W_rounded"] == 1
