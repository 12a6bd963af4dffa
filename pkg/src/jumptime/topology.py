"""Winding numbers, jumptime connections and phases, residual terms, curvature.

Brillouin-zone averages use the rectangle rule on a uniform grid, which is
spectrally accurate for smooth periodic integrands.  Grids are doubled until
successive values agree to ``CONV_TOL``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .dissipators import DissipatorSpec, KickDistribution, KickFamily, leaves
from .models import (DarkContactError, MomentumGrid, ModelSpec, bloch_derivative,
                     bloch_vector, h_perp_min, transform_primitive_vectors)
from .propagators import PropagatorKind, kernel_function, require_dark_free

CONV_TOL = 1e-8
N_START = {1: 512, 2: 128}
N_MAX = {1: 2 ** 14, 2: 512}
NEAR_DARK = 1e-3
CROSS_CHECK_MAX = {1: 1024, 2: 64}


class ConsistencyError(RuntimeError):
    pass


def _check_dark(model: ModelSpec, n: int) -> float:
    mc = h_perp_min(model, n)
    if mc.is_contact:
        raise DarkContactError(f"h_perp vanishes near p = {np.round(mc.momentum, 6).tolist()}", mc.momentum)
    return mc.minimum


def _converge(fn, dim: int, n0: int | None = None, n_max: int | None = None):
    """Evaluate fn(n) with doubling n until successive results agree."""
    n = n0 or N_START[dim]
    n_max = n_max or N_MAX[dim]
    history = []
    prev = None
    while True:
        val = fn(n)
        scalar = float(np.max(np.abs(np.atleast_1d(val[0] if isinstance(val, tuple) else val))))
        history.append((n, scalar))
        if prev is not None and abs(scalar - prev) < CONV_TOL:
            return val, n, history
        if n >= n_max:
            return val, n, history
        prev = scalar
        n *= 2


# -- winding numbers -------------------------------------------------------------


def _winding_integrand(model: ModelSpec, pts: np.ndarray, axis: int) -> np.ndarray:
    h = bloch_vector(model, pts)
    dh = bloch_derivative(model, pts, axis)
    return (dh.hx * h.hy - h.hx * dh.hy) / h.h_perp_sq


@dataclass(frozen=True)
class Winding:
    value: float
    rounded: int
    residue: float
    slice_spread: float
    n_points: int
    history: list = field(default_factory=list)


def winding_number(model: ModelSpec, axis: int = 0, n0: int | None = None) -> Winding:
    d = model.dimension
    hmin = _check_dark(model, n0 or N_START[d])
    if hmin < NEAR_DARK * model.energy_scale:
        n0 = max(n0 or N_START[d], 8 * N_START[d])

    def fn(n):
        grid = MomentumGrid.uniform(n, d)
        vals = _winding_integrand(model, grid.points, axis)
        if d == 1:
            return float(vals.mean()), 0.0
        slices = vals.mean(axis=axis)  # one value per p_j slice
        return float(slices.mean()), float(slices.max() - slices.min())

    (val, spread), n, hist = _converge(fn, d, n0)
    r = int(round(val))
    return Winding(val, r, abs(val - r), spread, n, hist)


# -- jumptime connection and phase ----------------------------------------------


def _richardson(K, pts: np.ndarray, axis: int, delta: float) -> np.ndarray:
    e = np.zeros(pts.shape[-1])
    e[axis] = 1.0

    def central(h):
        return (K(pts + h * e, pts) - K(pts - h * e, pts)) / (2 * h)

    return (4 * central(delta / 2) - central(delta)) / 3


def connection_values(model: ModelSpec, dissipator: DissipatorSpec, pts: np.ndarray, axis: int = 0,
                      delta: float | None = None, K=None) -> np.ndarray:
    """J(p) = i dK(p, p')/dp |_{p'=p} by Richardson-extrapolated central differences."""
    if K is None:
        K, _ = kernel_function(model, dissipator)
    pts = np.asarray(pts, dtype=float).reshape(-1, model.dimension)
    delta = 2 * np.pi / N_START[model.dimension] / 32 if delta is None else delta
    return np.real(1j * _richardson(K, pts, axis, delta))


def closed_form_connection_cc(model: ModelSpec, pts: np.ndarray, axis: int = 0) -> np.ndarray:
    """h_z = 0 collective connection, equal to the winding integrand."""
    return _winding_integrand(model, np.asarray(pts, dtype=float).reshape(-1, model.dimension), axis)


def jumptime_connection(model: ModelSpec, dissipator: DissipatorSpec, p, axis: int = 0,
                        check_closed_form: bool = True) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(p, dtype=float)).reshape(-1, model.dimension)
    J = connection_values(model, dissipator, pts, axis)
    K, kind = kernel_function(model, dissipator)
    if check_closed_form and kind.name in ("CC", "CC2D", "Kick"):
        h = bloch_vector(model, pts)
        if np.abs(h.hz).max() <= 1e-12 * model.energy_scale:
            ref = closed_form_connection_cc(model, pts, axis)
            if np.abs(J - ref).max() > 1e-8 * max(1.0, np.abs(ref).max()):
                raise ConsistencyError("finite-difference connection disagrees with the closed form")
    return J


@dataclass(frozen=True)
class Phase:
    value: float
    kind: str
    empirical: bool
    n_points: int
    history: list = field(default_factory=list)
    cross_check: float | None = None
    cross_reference: float | None = None


def jumptime_phase(model: ModelSpec, dissipator: DissipatorSpec, axis: int = 0, n0: int | None = None,
                   K=None) -> Phase:
    """Zone average of the connection along ``axis`` (averaged over the other axis in 2D).

    Kick families use K_q(p, p') = K_cc(p - q, p' - q); the G-weighted double
    average is evaluated directly as a cross-check of the shift identity.
    """
    d = model.dimension
    require_dark_free(model, dissipator, n0 or N_START[d])
    hmin = _check_dark(model, n0 or N_START[d]) if _has_dark_axis(dissipator) else np.inf
    if hmin < NEAR_DARK * model.energy_scale:
        n0 = max(n0 or N_START[d], 8 * N_START[d])
    Kf, kind = kernel_function(model, dissipator)
    Kf = K or Kf

    def fn(n):
        grid = MomentumGrid.uniform(n, d)
        delta = grid.spacing[axis] / 32
        return float(connection_values(model, dissipator, grid.flat_points, axis, delta, K=Kf).mean())

    val, n, hist = _converge(fn, d, n0)
    cross = ref = None
    comps = leaves(dissipator)
    if len(comps) == 1 and isinstance(comps[0], KickFamily):
        # the direct double sum is quadratic in n, so it runs on a capped grid
        nc = min(n, CROSS_CHECK_MAX[d])
        cross = kick_phase_direct(model, comps[0].G, comps[0].gamma, axis, nc, K=Kf)
        ref = val if nc == n else fn(nc)
    return Phase(val, kind.name, not kind.closed_form, n, hist, cross, ref)


def _has_dark_axis(dissipator: DissipatorSpec) -> bool:
    from .dissipators import _common_kernel
    return _common_kernel(dissipator).shape[1] == 1


def kick_phase_direct(model: ModelSpec, G: KickDistribution, gamma: float, axis: int = 0,
                      n: int | None = None, K=None) -> float:
    """sum_q G(q) <J_q(p)>_p with J_q built from the shifted collective kernel."""
    d = model.dimension
    n = min(n or N_START[d], CROSS_CHECK_MAX[d])
    grid = MomentumGrid.uniform(n, d)
    g = G.weights(grid.shape).reshape(-1)
    pts = grid.flat_points
    if K is None:
        from .dissipators import Collective
        K, _ = kernel_function(model, Collective("A", gamma))
    total = 0.0
    for m in np.flatnonzero(g > 0):
        q = pts[m]

        def Kq(a, b, q=q):
            return K(a - q, b - q)

        total += g[m] * float(connection_values(model, None, pts, axis, grid.spacing[axis] / 32, K=Kq).mean())
    return total


# -- residual terms -------------------------------------------------------------------


def residual_terms(model: ModelSpec, axis: int = 0, gamma: float = 1.0, n0: int | None = None) -> tuple[float, float]:
    """(R1, R2) for collective collapse; zone averages with the outer average in 2D."""
    d = model.dimension
    _check_dark(model, n0 or N_START[d])

    def fn(n):
        pts = MomentumGrid.uniform(n, d).flat_points
        h = bloch_vector(model, pts)
        dhz = bloch_derivative(model, pts, axis).hz
        r1 = -(2 / gamma) * np.mean(dhz * np.log(h.h_perp_sq / gamma ** 2))
        r2 = np.mean(dhz * (16 * h.hz ** 2 + gamma ** 2) / (4 * gamma * h.h_perp_sq))
        return np.array([r1, r2])

    val, _, _ = _converge(fn, d, n0)
    return float(val[0]), float(val[1])


# -- curvature ------------------------------------------------------------------------


@dataclass(frozen=True)
class Curvature:
    omega: np.ndarray
    chern: float
    n_points: int


def curvature_chern(model: ModelSpec, dissipator: DissipatorSpec, n: int = 64, delta: float | None = None,
                    tol: float = 1e-6) -> Curvature:
    """Omega_12 = d1 J2 - d2 J1 by central differences of the connection at each grid point."""
    if model.dimension != 2:
        raise ValueError("curvature needs a 2D model")
    require_dark_free(model, dissipator, n)
    grid = MomentumGrid.uniform(n, 2)
    pts = grid.flat_points
    K, _ = kernel_function(model, dissipator)
    h = 2 * np.pi / n / 8 if delta is None else delta
    e1, e2 = np.array([h, 0.0]), np.array([0.0, h])

    def J(axis, x):
        return connection_values(model, dissipator, x, axis, K=K)

    d1J2 = (J(1, pts + e1) - J(1, pts - e1)) / (2 * h)
    d2J1 = (J(0, pts + e2) - J(0, pts - e2)) / (2 * h)
    omega = (d1J2 - d2J1).reshape(grid.shape)
    chern = float(omega.mean())
    if abs(chern) > tol:
        raise ConsistencyError(f"Chern number {chern:.3g} exceeds {tol}")
    return Curvature(omega, chern, n)


# -- reports ---------------------------------------------------------------------------


@dataclass
class AxisReport:
    W: float
    W_rounded: int
    W_residue: float
    T: float
    R1: float
    R2: float
    defect: float
    slice_spread: float
    n_points: int
    empirical: bool = False
    history: list = field(default_factory=list)


@dataclass
class TopologyReport:
    model: str
    dissipator: str
    gamma: float
    axes: list
    lattice_vectors: list
    chern: float | None = None

    def T(self) -> np.ndarray:
        return np.array([a.T for a in self.axes])

    def displacement_vector(self) -> np.ndarray:
        return self.T() @ np.asarray(self.lattice_vectors, dtype=float)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def topology_report(model: ModelSpec, dissipator: DissipatorSpec, with_chern: bool = False) -> TopologyReport:
    from .dissipators import total_rate
    gamma = total_rate(dissipator)
    axes = []
    cc_like = _has_dark_axis(dissipator)
    for axis in range(model.dimension):
        w = winding_number(model, axis) if cc_like else None
        ph = jumptime_phase(model, dissipator, axis)
        r1, r2 = residual_terms(model, axis, gamma) if cc_like else (0.0, 0.0)
        W = w.value if w else 0.0
        _, kind = kernel_function(model, dissipator)
        defect = abs(ph.value - W - r1 - r2) if kind.name in ("CC", "CC2D", "Kick") else float("nan")
        axes.append(AxisReport(W, int(round(W)), abs(W - round(W)), ph.value, r1, r2, defect,
                               w.slice_spread if w else 0.0, ph.n_points, ph.empirical, ph.history))
    chern = None
    if with_chern and model.dimension == 2:
        chern = curvature_chern(model, dissipator).chern
    return TopologyReport(repr(model), repr(dissipator), gamma, axes, model.lattice_vectors.tolist(), chern)


@dataclass(frozen=True)
class TransformedPhases:
    T: np.ndarray
    recomputed: np.ndarray
    displacement_before: np.ndarray
    displacement_after: np.ndarray


def transform_phases(report: TopologyReport, m: int, model: ModelSpec | None = None,
                     dissipator: DissipatorSpec | None = None, tol: float = 1e-6) -> TransformedPhases:
    """T1' = T1 - m T2, T2' = T2, verified against a direct recomputation when a model is given."""
    if len(report.axes) != 2:
        raise ValueError("transformation law applies to 2D reports")
    T = report.T()
    Tn = np.array([T[0] - m * T[1], T[1]])
    a = np.asarray(report.lattice_vectors, dtype=float)
    a_new = np.array([a[0], a[1] + m * a[0]])
    before, after = T @ a, Tn @ a_new
    if np.abs(before - after).max() > tol:
        raise ConsistencyError("displacement vector changed under the basis change")
    recomputed = Tn
    if model is not None:
        from .dissipators import Collective
        dis = dissipator or Collective("A", report.gamma)
        tm = transform_primitive_vectors(model, m)
        recomputed = np.array([jumptime_phase(tm, dis, i).value for i in range(2)])
        if np.abs(recomputed - Tn).max() > tol:
            raise ConsistencyError(f"recomputed phases {recomputed} differ from transformation law {Tn}")
    return TransformedPhases(Tn, recomputed, before, after)
