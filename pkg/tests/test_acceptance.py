"""One test per acceptance criterion; thresholds live in jumptime.acceptance."""

import pytest

from jumptime import acceptance as acc

TIMES = {}


def _run(report, check, **kwargs):
    res = report(check(**kwargs))
    TIMES[res.key] = res.seconds
    assert res.passed, res.detail
    return res


def test_tolerances_pinned():
    assert (acc.FIG2_TOL_ABS, acc.FIG2_SIGMAS, acc.FIG2_RUNTIME) == (0.15, 4.0, 60.0)
    assert (acc.ORACLE_DET_TOL, acc.ORACLE_RUNTIME) == (1e-9, 300.0)
    assert acc.PHASE_TOL == 1e-6
    assert (acc.TRS_RESIDUAL_TOL, acc.INVERSION_WITNESS) == (1e-10, 1e-4)
    assert acc.MIXTURE_TOL == 1e-8
    assert acc.G_TOL == 1e-6
    assert (acc.SLICE_TOL, acc.CHERN_TOL, acc.TRANSFORM_TOL) == (1e-8, 1e-6, 1e-6)
    assert (acc.STEADY_TOL, acc.BLOCK_RESIDUAL_TOL, acc.LIMIT_REL) == (1e-8, 1e-12, 0.01)
    assert acc.DIRECTIONAL_TOL == 1e-12
    assert acc.VERIFY_BUDGET == 600.0


def test_criterion_01_transport_statistics(report):
    _run(report, acc.check_fig2, N=700)


def test_criterion_02_oracle_chain(report):
    _run(report, acc.check_oracle_chain, L=16, N=20000)


def test_criterion_03_phase_winding(report):
    _run(report, acc.check_phase_winding, n_models=50)


def test_criterion_04_decomposition(report):
    _run(report, acc.check_decomposition, n_models=20)


def test_criterion_05_symmetry_residuals(report):
    _run(report, acc.check_symmetry_residuals)


def test_criterion_06a_projector_phases(report):
    _run(report, acc.check_projector_phases)


def test_criterion_06b_cc_b_mixture(report):
    _run(report, acc.check_mixture_ccb)


def test_criterion_06c_cc_a_mixture(report):
    _run(report, acc.check_mixture_cca)


def test_criterion_07_g_invariance(report):
    _run(report, acc.check_g_invariance)


def test_criterion_08_torus(report):
    _run(report, acc.check_torus)


def test_criterion_09_transform(report):
    _run(report, acc.check_transform)


def test_criterion_10_steady_state(report):
    _run(report, acc.check_steady_state, L=16)


def test_criterion_11_directional(report):
    _run(report, acc.check_directional)


def test_verify_gamma_rescaling(report):
    _run(report, acc.check_gamma_rescaling)


def test_verify_mutation_fixture(report):
    _run(report, acc.check_mutation_detected)


def test_verify_runtime_budget(report):
    missing = [k for k in acc.CHECKS if k not in TIMES and k != "3m"]
    if missing:
        pytest.skip(f"budget needs the full suite in this session; missing {missing}")
    total = sum(TIMES.values())
    res = acc.CheckResult("T", "verify suite runtime", total <= acc.VERIFY_BUDGET,
                          f"{total:.0f}s of {acc.VERIFY_BUDGET:.0f}s", total)
    report(res)
    assert res.passed
