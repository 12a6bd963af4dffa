"""Scalar jumptime propagators and deterministic kernel evolution.

A density kernel is the momentum-space matrix rho(p_k, p_k') of the state on
its invariant intracell component (the A sublattice for B->A collapse).  One
jump multiplies it elementwise by a propagator K(p, p'); kick families add a
cyclic convolution over the momentum transfer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dissipators import (Collective, DirectionalHop, DissipatorSpec, KickFamily,
                          Mixture, SublatticeProjector, dark_set_report,
                          decay_operator, leaves, total_rate)
from .models import (DarkContactError, MomentumGrid, ModelSpec, _as_momenta,
                     bloch_vector, h_perp_min)

MAX_KERNEL_POINTS = 48 * 48


# -- closed forms ------------------------------------------------------------


def _check_perp(hp2: np.ndarray, p: np.ndarray, tol: float) -> None:
    bad = hp2 <= tol ** 2
    if np.any(bad):
        raise DarkContactError("propagator evaluated at a dark contact", np.asarray(p)[bad])


def k_cc(model: ModelSpec, p, pp, gamma: float = 1.0, tol: float | None = None) -> np.ndarray:
    """Collective B->A propagator for general h_z (reduces to the h_z = 0 form).

    Works for momentum arrays of shape (..., d), so it also serves 2D models.
    """
    p = _as_momenta(p, model.dimension)
    pp = _as_momenta(pp, model.dimension)
    tol = 1e-9 * model.energy_scale if tol is None else tol
    a, b = bloch_vector(model, p), bloch_vector(model, pp)
    _check_perp(a.h_perp_sq, p, tol)
    _check_perp(b.h_perp_sq, pp, tol)
    g = gamma
    A = a.h_perp_sq - b.h_perp_sq + a.hz ** 2 - b.hz ** 2 + 0.5j * g * (a.hz + b.hz)
    B = a.h_perp_sq + b.h_perp_sq + a.hz ** 2 + b.hz ** 2 + 0.5j * g * (a.hz - b.hz)
    num = 2 * g ** 2 * (a.hx + 1j * a.hy) * (b.hx - 1j * b.hy)
    return num / (2 * A ** 2 + g ** 2 * B)


def k_cc_2d(model: ModelSpec, p, pp, gamma: float = 1.0) -> np.ndarray:
    if model.dimension != 2:
        raise ValueError("k_cc_2d needs a 2D model")
    return k_cc(model, p, pp, gamma)


def k_sublattice(model: ModelSpec, target: str, p, pp, gamma: float = 1.0, tol: float | None = None) -> np.ndarray:
    """Sublattice-projector propagator (identical for A and B); needs h_z == 0."""
    if target not in ("A", "B"):
        raise ValueError("target must be 'A' or 'B'")
    p = _as_momenta(p, model.dimension)
    pp = _as_momenta(pp, model.dimension)
    tol = 1e-9 * model.energy_scale if tol is None else tol
    a, b = bloch_vector(model, p), bloch_vector(model, pp)
    if np.abs(a.hz).max() > 1e-12 * model.energy_scale or np.abs(b.hz).max() > 1e-12 * model.energy_scale:
        raise ValueError("closed-form projector propagator is only valid for h_z == 0")
    _check_perp(a.h_perp_sq, p, tol)
    _check_perp(b.h_perp_sq, pp, tol)
    s = a.h_perp_sq + b.h_perp_sq
    d = a.h_perp_sq - b.h_perp_sq
    return (gamma ** 2 * s / (2 * d ** 2 + gamma ** 2 * s)).astype(complex)


def k_mixture(model: ModelSpec, gamma_cc: float, gamma_b: float, p, pp) -> np.ndarray:
    """(gamma_cc/gamma) K_cc + (gamma_B/gamma) K_B, both at the total rate gamma."""
    g = gamma_cc + gamma_b
    out = np.zeros(np.broadcast_shapes(np.shape(_as_momenta(p, model.dimension))[:-1],
                                       np.shape(_as_momenta(pp, model.dimension))[:-1]), dtype=complex)
    if gamma_cc:
        out = out + (gamma_cc / g) * k_cc(model, p, pp, g)
    if gamma_b:
        out = out + (gamma_b / g) * k_sublattice(model, "B", p, pp, g)
    return out


# -- generic one-step kernel ----------------------------------------------------------


def invariant_intracell(dissipator: DissipatorSpec) -> np.ndarray:
    """Candidate invariant intracell state: normalized sum_j gamma_j l_j l_j^dag."""
    s = sum(leaf.gamma * (leaf.intracell @ leaf.intracell.conj().T) for leaf in leaves(dissipator))
    return s / np.trace(s).real


def _lattice_phase(leaf, p: np.ndarray) -> np.ndarray:
    if isinstance(leaf, DirectionalHop):
        return np.exp(-1j * p[..., leaf.axis])
    return np.ones(p.shape[:-1], dtype=complex)


def k_numeric(model: ModelSpec, dissipator: DissipatorSpec, p, pp, check_tol: float = 1e-9) -> np.ndarray:
    """One-step scalar kernel from per-momentum-pair 2x2 Sylvester solves.

    Assumes a fixed intracell state sigma is reproduced by every jump; raises
    if the output is not proportional to sigma.  Kick families are treated at
    q = 0 (their kernel is the shifted collective kernel).
    """
    d = model.dimension
    p = _as_momenta(p, d)
    pp = _as_momenta(pp, d)
    p, pp = np.broadcast_arrays(p, pp)
    shape = p.shape[:-1]
    p2, pp2 = p.reshape(-1, d), pp.reshape(-1, d)
    gamma = total_rate(dissipator)
    decay = decay_operator(dissipator)
    ha = model.bloch_matrix(p2) - 0.5j * decay
    hb = model.bloch_matrix(pp2) - 0.5j * decay
    sigma = invariant_intracell(dissipator)
    eye = np.eye(2)
    # -i Ha X + i X Hb^dag = -sigma, row-major vec
    big = np.einsum("kab,cd->kacbd", -1j * ha, eye).reshape(-1, 4, 4)
    big = big + np.einsum("ab,kcd->kacbd", eye, 1j * np.conj(hb)).reshape(-1, 4, 4)
    x = np.linalg.solve(big, np.broadcast_to(-sigma.reshape(4), (len(big), 4))[..., None])[..., 0].reshape(-1, 2, 2)
    out = np.zeros_like(x)
    for leaf in leaves(dissipator):
        l = leaf.intracell
        ph = _lattice_phase(leaf, p2) * np.conj(_lattice_phase(leaf, pp2))
        out += leaf.gamma * ph[:, None, None] * (l @ x @ l.conj().T)
    k = np.einsum("kab,ba->k", out, sigma.conj().T) / np.trace(sigma @ sigma.conj().T).real
    resid = np.abs(out - k[:, None, None] * sigma).max(axis=(1, 2))
    if np.any(resid > check_tol * np.maximum(1.0, np.abs(k))):
        raise ValueError("dissipator has no invariant intracell state; scalar kernel undefined")
    return k.reshape(shape)


# -- dispatch ----------------------------------------------------------------------


@dataclass(frozen=True)
class PropagatorKind:
    """Tag for the scalar propagator attached to a dissipator."""

    name: str  # CC, CC2D, SublatticeA, SublatticeB, MixtureCCB, Kick, Empirical
    gamma: float
    gamma_cc: float = 0.0
    gamma_b: float = 0.0
    closed_form: bool = True


def propagator_kind(model: ModelSpec, dissipator: DissipatorSpec) -> PropagatorKind:
    comps = leaves(dissipator)
    g = total_rate(dissipator)
    chiral = bool(np.abs(bloch_vector(model, MomentumGrid.uniform(64, model.dimension).flat_points).hz).max()
                  <= 1e-12 * model.energy_scale)
    if len(comps) == 1:
        c = comps[0]
        if isinstance(c, Collective) and c.target == "A":
            return PropagatorKind("CC2D" if model.dimension == 2 else "CC", g)
        if isinstance(c, KickFamily):
            return PropagatorKind("Kick", g)
        if isinstance(c, SublatticeProjector) and chiral:
            return PropagatorKind("Sublattice" + c.target, g)
    elif len(comps) == 2:
        cc = [c for c in comps if isinstance(c, Collective) and c.target == "A"]
        pb = [c for c in comps if isinstance(c, SublatticeProjector) and c.target == "B"]
        if len(cc) == 1 and len(pb) == 1 and chiral:
            return PropagatorKind("MixtureCCB", g, cc[0].gamma, pb[0].gamma)
    return PropagatorKind("Empirical", g, closed_form=False)


def kernel_function(model: ModelSpec, dissipator: DissipatorSpec) -> tuple[Callable, PropagatorKind]:
    """K(p, p') for the dissipator (q = 0 member for kick families) plus its kind."""
    kind = propagator_kind(model, dissipator)
    g = kind.gamma
    if kind.name in ("CC", "CC2D", "Kick"):
        return (lambda p, pp: k_cc(model, p, pp, g)), kind
    if kind.name.startswith("Sublattice"):
        t = kind.name[-1]
        return (lambda p, pp: k_sublattice(model, t, p, pp, g)), kind
    if kind.name == "MixtureCCB":
        return (lambda p, pp: k_mixture(model, kind.gamma_cc, kind.gamma_b, p, pp)), kind
    if any(isinstance(c, KickFamily) for c in leaves(dissipator)):
        raise ValueError("no scalar kernel for mixtures containing kick families")
    return (lambda p, pp: k_numeric(model, dissipator, p, pp)), kind


def require_dark_free(model: ModelSpec, dissipator: DissipatorSpec, grid: MomentumGrid | int = 512) -> None:
    rep = dark_set_report(model, dissipator, grid)
    if len(rep.contacts):
        raise DarkContactError(f"{len(rep.contacts)} dark contact(s) on the grid", rep.contacts)
    if rep.is_dark_free and rep.dark_sublattice is not None:
        mc = h_perp_min(model, grid)
        if mc.is_contact:
            raise DarkContactError("dark contact between grid points", mc.momentum)


# -- density kernels ------------------------------------------------------------------


@dataclass
class DensityKernel:
    """rho(p_k, p_k') with flat grid indices; trace normalized to one."""

    matrix: np.ndarray
    grid: MomentumGrid

    @classmethod
    def localized(cls, grid: MomentumGrid, cell=0) -> "DensityKernel":
        cell = np.atleast_1d(cell) if np.ndim(cell) else np.full(grid.dimension, cell)
        pts = grid.flat_points
        phase = np.exp(-1j * pts @ np.asarray(cell, dtype=float))
        return cls(np.outer(phase, phase.conj()) / grid.size, grid)

    @classmethod
    def homogeneous(cls, grid: MomentumGrid) -> "DensityKernel":
        return cls.localized(grid, 0)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= tol)

    def real_space(self) -> np.ndarray:
        n = self.grid.size
        d = self.grid.dimension
        k = self.matrix.reshape(self.grid.shape * 2)
        real = np.fft.ifftn(k, axes=tuple(range(d)), norm="ortho")
        return np.fft.fftn(real, axes=tuple(range(d, 2 * d)), norm="ortho").reshape(n, n)

    def to_rows(self):
        n = self.grid.size
        for k in range(n):
            for kk in range(n):
                z = self.matrix[k, kk]
                yield k, kk, float(z.real), float(z.imag)


def kernel_matrix(model: ModelSpec, dissipator: DissipatorSpec, grid: MomentumGrid) -> np.ndarray:
    if grid.dimension == 2 and grid.size > MAX_KERNEL_POINTS:
        raise ValueError(f"2D kernels are limited to {MAX_KERNEL_POINTS} grid points")
    f, _ = kernel_function(model, dissipator)
    pts = grid.flat_points
    return f(pts[:, None, :], pts[None, :, :])


def evolve_kernel(rho: DensityKernel, model: ModelSpec, dissipator: DissipatorSpec, steps: int = 1,
                  K: np.ndarray | None = None) -> DensityKernel:
    """Apply ``steps`` jumptime steps on the grid (exact for q on the grid)."""
    grid = rho.grid
    require_dark_free(model, dissipator, grid)
    K = kernel_matrix(model, dissipator, grid) if K is None else K
    comps = leaves(dissipator)
    kick = comps[0] if len(comps) == 1 and isinstance(comps[0], KickFamily) else None
    m = rho.matrix.astype(complex)
    if kick is None:
        return DensityKernel(K ** steps * m, grid)
    g = kick.G.weights(grid.shape)
    if kick.G.kind == "delta":
        return DensityKernel(K ** steps * m, grid)
    shape = grid.shape
    d = grid.dimension
    ghat = np.fft.fftn(g)
    # index k' = k + delta so that the convolution acts on k at fixed delta
    idx = np.indices(shape + shape).reshape(2 * d, -1)
    k_idx = np.ravel_multi_index(idx[:d], shape)
    kp_idx = np.ravel_multi_index([(idx[i] + idx[d + i]) % shape[i] for i in range(d)], shape)
    for _ in range(steps):
        mt = (K * m)[k_idx, kp_idx].reshape(shape + shape)
        conv = np.fft.ifftn(np.fft.fftn(mt, axes=tuple(range(d))) * ghat.reshape(shape + (1,) * d),
                            axes=tuple(range(d)))
        m = np.empty_like(m)
        m[k_idx, kp_idx] = conv.reshape(-1)
    return DensityKernel(m, grid)


@dataclass(frozen=True)
class Displacement:
    mean: np.ndarray
    seam_occupancy: float


def mean_displacement(rho: DensityKernel, origin=None, seam_width: int = 2) -> Displacement:
    """<x> per axis from the real-space diagonal, coordinates centred on ``origin``."""
    grid = rho.grid
    d = grid.dimension
    origin = np.zeros(d, dtype=int) if origin is None else np.atleast_1d(origin)
    prob = np.real(np.diag(rho.real_space())).reshape(grid.shape)
    means, seam = [], np.zeros(grid.shape, dtype=bool)
    for axis, n in enumerate(grid.shape):
        half = (n - 1) // 2
        dd = ((np.arange(n) - origin[axis] + half) % n) - half
        marg = prob.sum(axis=tuple(i for i in range(d) if i != axis))
        means.append(float(marg @ (origin[axis] + dd)))
        near = (dd <= dd.min() + seam_width - 1) | (dd >= dd.max() - seam_width + 1)
        sh = [1] * d
        sh[axis] = n
        seam |= near.reshape(sh)
    return Displacement(np.array(means), float(prob[seam].sum()))
