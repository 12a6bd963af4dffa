import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jumptime.models import MomentumGrid, ssh
from jumptime.steady import (ScopeError, bloch_steady_state, crossover_rows, crossover_width,
                             lindblad_block_residual, ssh_steady_current, ssh_steady_current_numeric)

# frozen oracle: direct formula evaluation at v = w = 1, gamma = 1e-6
J_GOLDEN = 2.4999995580582616e-07
J_REFERENCE = 0.3084389153

pos = st.floats(0.05, 3.0)


def test_golden_current():
    assert ssh_steady_current(1.0, 1.0, 1e-6) == pytest.approx(J_GOLDEN, rel=1e-12)
    assert J_GOLDEN == pytest.approx(1e-6 / 4 * (1 - 1e-6 * np.sqrt(2) / 8), rel=1e-9)


def test_current_matches_trace_formula():
    assert ssh_steady_current(0.2, 0.5, 1.0) == pytest.approx(J_REFERENCE, abs=1e-10)
    assert ssh_steady_current_numeric(0.2, 0.5, 1.0) == pytest.approx(J_REFERENCE, abs=1e-10)


@given(pos, pos, pos)
@settings(max_examples=40, deadline=None)
def test_steady_state_is_stationary_and_physical(v, w, g):
    p = MomentumGrid((24,)).flat_points
    r = bloch_steady_state(ssh(v, w), g, p)
    assert (r.length <= 1 + 1e-12).all()
    assert lindblad_block_residual(ssh(v, w), g, p, r.r).max() <= 1e-12


@given(pos, pos, pos)
@settings(max_examples=40, deadline=None)
def test_current_bounds(v, w, g):
    J = ssh_steady_current(v, w, g)
    assert -1e-15 <= J <= g / 2 + 1e-15


def test_strong_dissipation_pins_population():
    p = MomentumGrid((16,)).flat_points
    r = bloch_steady_state(ssh(0.2, 0.5), 50.0, p)
    assert r.r[:, 2].min() > 0.99
    assert lindblad_block_residual(ssh(0.2, 0.5), 50.0, p, r.r).max() <= 1e-12


def test_limits():
    assert ssh_steady_current(1.0, 10.0, 0.01) == pytest.approx(0.005, rel=0.01)
    assert abs(ssh_steady_current(10.0, 1.0, 0.01)) <= 0.01 * 0.005


def test_scope_requires_chiral_model():
    with pytest.raises(ScopeError):
        bloch_steady_state(ssh(0.2, 0.5, hz_sin=0.1), 1.0, [0.3])


def test_crossover_width_grows_with_gamma():
    r = np.linspace(0.5, 1.5, 401)
    widths = [crossover_width(r, [ssh_steady_current(x, 1.0, g) for x in r], g / 2) for g in (0.05, 0.2)]
    assert widths[0] < widths[1]


def test_crossover_rows_mark_dark_point():
    rows = crossover_rows([0.5, 1.0, 1.5], [0.5])
    assert rows[0][3] == pytest.approx(1.0, abs=1e-8)
    assert np.isnan(rows[1][3])
    assert rows[2][3] == pytest.approx(0.0, abs=1e-8)
