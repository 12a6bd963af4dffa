"""Dense real-space oracles: master equation, exact jumptime map, steady states.

Basis index is ``flat_cell * 2 + s`` with cells flattened in C order, the
same layout as :func:`jumptime.models.real_space_hamiltonian`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import schur, solve_sylvester

from .dissipators import (Collective, DirectionalHop, DissipatorSpec, KickFamily,
                          SublatticeProjector, leaves)
from .models import ModelSpec, real_space_hamiltonian

log = logging.getLogger(__name__)

MAX_DENSE_DIM = 128
COND_LIMIT = 1e8


class IntegrationError(RuntimeError):
    pass


class DarkDivergence(RuntimeError):
    """The tau integral diverges: a weighted mode never decays but keeps jumping."""


class AmbiguityError(RuntimeError):
    def __init__(self, message, vectors):
        super().__init__(message)
        self.vectors = vectors


def _sizes(model: ModelSpec, L) -> tuple[int, ...]:
    L = tuple(int(x) for x in np.atleast_1d(L))
    if len(L) == 1 and model.dimension == 2:
        L = L * 2
    dim = 2 * int(np.prod(L))
    if dim > MAX_DENSE_DIM:
        raise ValueError(f"dense dimension {dim} exceeds {MAX_DENSE_DIM}")
    return L


def cell_coordinates(L: Sequence[int]) -> np.ndarray:
    """Integer coordinates (n_cells, d) in flattened order."""
    return np.indices(tuple(L)).reshape(len(L), -1).T


def jump_operators(dissipator: DissipatorSpec, L: Sequence[int], local_basis: bool = False) -> list[tuple[float, np.ndarray]]:
    """Dense (rate, L_k) pairs.

    A uniform kick family can equivalently be written with one local operator
    per cell (``local_basis=True``); both give the same dissipator and the same
    jumptime map.
    """
    L = tuple(L)
    n_cells = int(np.prod(L))
    eye = np.eye(n_cells)
    coords = cell_coordinates(L)
    out = []
    for leaf in leaves(dissipator):
        if isinstance(leaf, (Collective, SublatticeProjector)):
            out.append((leaf.gamma, np.kron(eye, leaf.intracell)))
        elif isinstance(leaf, DirectionalHop):
            shifted = coords.copy()
            shifted[:, leaf.axis] = (shifted[:, leaf.axis] + 1) % L[leaf.axis]
            hop = np.zeros((n_cells, n_cells))
            hop[np.ravel_multi_index(shifted.T, L), np.arange(n_cells)] = 1.0
            out.append((leaf.gamma, np.kron(hop, np.eye(2))))
        elif isinstance(leaf, KickFamily):
            g = leaf.G.weights(L).reshape(-1)
            if local_basis and leaf.G.kind == "uniform":
                for j in range(n_cells):
                    e = np.zeros((n_cells, n_cells))
                    e[j, j] = 1.0
                    out.append((leaf.gamma, np.kron(e, leaf.intracell)))
                continue
            qs = np.indices(L).reshape(len(L), -1).T * (2 * np.pi / np.array(L))
            for m in np.flatnonzero(g > 0):
                phase = np.exp(1j * coords @ qs[m])
                out.append((leaf.gamma * g[m], np.kron(np.diag(phase), leaf.intracell)))
        else:
            raise TypeError(f"unsupported dissipator {leaf!r}")
    return out


def _effective(model, dissipator, L, ops=None):
    ops = jump_operators(dissipator, L) if ops is None else ops
    H = real_space_hamiltonian(model, L)
    decay = sum(g * (op.conj().T @ op) for g, op in ops)
    return H, H - 0.5j * decay, ops


@dataclass
class DenseDensityMatrix:
    rho: np.ndarray
    L: tuple
    info: dict = field(default_factory=dict)

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def check(self, herm_tol: float = 1e-12, psd_tol: float = 1e-10) -> None:
        if np.abs(self.rho - self.rho.conj().T).max() > herm_tol * max(1.0, np.abs(self.rho).max()):
            raise AssertionError("density matrix not Hermitian")
        if np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min() < -psd_tol:
            raise AssertionError("density matrix not positive semidefinite")

    def position_mean(self, origin: Sequence[int] | None = None) -> np.ndarray:
        """<x> per axis with coordinates centred on ``origin`` (default: cell 0)."""
        origin = (0,) * len(self.L) if origin is None else tuple(origin)
        prob = np.real(np.diag(self.rho)).reshape(tuple(self.L) + (2,)).sum(-1)
        out = []
        for axis, n in enumerate(self.L):
            half = (n - 1) // 2
            x = origin[axis] + ((np.arange(n) - origin[axis] + half) % n) - half
            marg = prob.sum(axis=tuple(i for i in range(len(self.L)) if i != axis))
            out.append(float(marg @ x))
        return np.array(out)


def localized_density(L: Sequence[int], cell: Sequence[int] | int = 0, sublattice: str = "A") -> np.ndarray:
    L = tuple(L)
    cell = tuple(np.atleast_1d(cell)) if np.ndim(cell) else (int(cell),) * len(L)
    idx = 2 * int(np.ravel_multi_index(tuple(c % n for c, n in zip(cell, L)), L)) + "AB".index(sublattice)
    rho = np.zeros((2 * int(np.prod(L)),) * 2, dtype=complex)
    rho[idx, idx] = 1.0
    return rho


def integrate_master(rho0: np.ndarray, model: ModelSpec, dissipator: DissipatorSpec, t: float | Sequence[float],
                     L, tol: float = 1e-10) -> list[DenseDensityMatrix]:
    """Adaptive DOP853 integration of the Lindblad equation; one result per requested time."""
    L = _sizes(model, L)
    _, heff, ops = _effective(model, dissipator, L)
    dim = heff.shape[0]
    heff_dag = heff.conj().T

    def rhs(_, y):
        rho = y.reshape(dim, dim)
        out = -1j * (heff @ rho) + 1j * (rho @ heff_dag)
        for g, op in ops:
            out += g * (op @ rho @ op.conj().T)
        return out.reshape(-1)

    times = np.atleast_1d(np.asarray(t, dtype=float))
    sol = solve_ivp(rhs, (0.0, float(times.max())), np.asarray(rho0, dtype=complex).reshape(-1),
                    method="DOP853", t_eval=times, rtol=tol, atol=tol * 1e-2)
    if not sol.success:
        raise IntegrationError(sol.message)
    out = []
    for k, tk in enumerate(sol.t):
        rho = sol.y[:, k].reshape(dim, dim)
        out.append(DenseDensityMatrix(rho, L, {"t": float(tk), "nfev": int(sol.nfev)}))
    return out


@dataclass
class JumptimeMapResult:
    rho: np.ndarray
    trace: float
    info: dict


def jumptime_map(rho: np.ndarray, model: ModelSpec, dissipator: DissipatorSpec, L,
                 local_basis: bool = False, dark_tol: float = 1e-9) -> JumptimeMapResult:
    """rho -> sum_k g_k L_k X L_k^dag with X = int_0^inf e^{-i Heff t} rho e^{i Heff^dag t} dt.

    In the eigenbasis Heff = V diag(lam) V^-1 the integral multiplies
    (V^-1 rho V^-dag)_kl by -i / (lam_k - conj(lam_l)).
    """
    L = _sizes(model, L)
    ops = jump_operators(dissipator, L, local_basis=local_basis)
    _, heff, _ = _effective(model, dissipator, L, ops)
    rho = np.asarray(rho, dtype=complex)
    scale = max(1.0, np.abs(heff).max())
    T, Z = schur(heff, output="complex")
    if np.abs(np.triu(T, 1)).max() <= 1e-12 * scale:
        # normal generator: the Schur vectors are a unitary eigenbasis
        lam, V = np.diag(T).copy(), Z
    else:
        lam, V = np.linalg.eig(heff)
    cond = np.linalg.cond(V)
    info = {"method": "eigen", "cond": float(cond)}
    if cond > COND_LIMIT:
        log.warning("eigenvector condition %.3g exceeds %.0e; using Sylvester solve", cond, COND_LIMIT)
        info["method"] = "sylvester"
        X = solve_sylvester(-1j * heff, 1j * heff.conj().T, -rho)
    else:
        Vinv = np.linalg.inv(V)
        c = Vinv @ rho @ Vinv.conj().T
        dark = np.abs(lam.imag) <= dark_tol * scale
        if dark.any():
            # dark modes are annihilated by every L_k; anything they carry never jumps
            weight = np.abs(c[dark]).max() if c[dark].size else 0.0
            for k in np.flatnonzero(dark):
                if max(np.linalg.norm(op @ V[:, k]) for _, op in ops) > 1e-8 and weight > 1e-12:
                    raise DarkDivergence(f"undamped mode {lam[k]:.3g} is not annihilated by the jump operators")
            keep = ~dark
            c = c * np.outer(keep, keep)
            info["dark_modes"] = int(dark.sum())
        denom = lam[:, None] - lam.conj()[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(c != 0, -1j / denom, 0.0)
        X = V @ (c * factor) @ V.conj().T
    out = sum(g * (op @ X @ op.conj().T) for g, op in ops)
    out = 0.5 * (out + out.conj().T)
    return JumptimeMapResult(out, float(np.trace(out).real), info)


# -- steady states ----------------------------------------------------------


def liouvillian(model: ModelSpec, dissipator: DissipatorSpec, L) -> np.ndarray:
    """Row-major superoperator: vec(A X B) = kron(A, B^T) vec(X)."""
    L = _sizes(model, L)
    H, _, ops = _effective(model, dissipator, L)
    dim = H.shape[0]
    eye = np.eye(dim)
    sup = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for g, op in ops:
        ld = op.conj().T @ op
        sup += g * (np.kron(op, op.conj()) - 0.5 * np.kron(ld, eye) - 0.5 * np.kron(eye, ld.T))
    return sup


def steady_state_numeric(model: ModelSpec, dissipator: DissipatorSpec, L, rho0: np.ndarray | None = None,
                         null_tol: float = 1e-8, residual_tol: float = 1e-10) -> DenseDensityMatrix:
    """Null vector of the Liouvillian.

    A degenerate null space is resolved only when ``rho0`` is given, by the
    spectral projection P = R (Lf^H R)^-1 Lf^H that the long-time limit applies.
    """
    L = _sizes(model, L)
    sup = liouvillian(model, dissipator, L)
    dim = int(round(np.sqrt(sup.shape[0])))
    u, s, vh = np.linalg.svd(sup)
    scale = max(1.0, s[0])
    null = s <= null_tol * scale
    right = vh[null].conj().T
    if right.shape[1] == 0:
        raise AmbiguityError("no steady state found", [])
    if right.shape[1] > 1:
        if rho0 is None:
            raise AmbiguityError(f"steady-state manifold has dimension {right.shape[1]}",
                                 [right[:, k].reshape(dim, dim) for k in range(min(2, right.shape[1]))])
        left = u[:, null]  # left null vectors: sup^H left = 0
        vec = right @ np.linalg.solve(left.conj().T @ right, left.conj().T @ np.asarray(rho0, complex).reshape(-1))
    else:
        vec = right[:, 0]
    rho = vec.reshape(dim, dim)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    residual = float(np.linalg.norm(sup @ rho.reshape(-1)))
    if residual > residual_tol:
        raise AssertionError(f"steady-state residual {residual:.3g} above {residual_tol}")
    return DenseDensityMatrix(rho, L, {"null_dim": int(right.shape[1]), "residual": residual})


# -- basis changes -------------------------------------------------------------


def sublattice_kernel(rho: np.ndarray, L: Sequence[int], sublattice: str = "A") -> np.ndarray:
    """<p, s| rho |p', s> on the momentum grid, shape (N, N) with flat indices."""
    L = tuple(L)
    n = int(np.prod(L))
    s = "AB".index(sublattice)
    block = np.asarray(rho)[s::2, s::2].reshape(L + L)
    d = len(L)
    k = np.fft.fftn(block, axes=tuple(range(d)), norm="ortho")
    k = np.fft.ifftn(k, axes=tuple(range(d, 2 * d)), norm="ortho")
    return k.reshape(n, n)


def kernel_to_dense(kernel: np.ndarray, L: Sequence[int], sublattice: str = "A",
                    intracell: np.ndarray | None = None) -> np.ndarray:
    """Dense matrix of kernel (x) |s><s|, or kernel (x) ``intracell`` when given."""
    L = tuple(L)
    n = int(np.prod(L))
    d = len(L)
    k = np.asarray(kernel).reshape(L + L)
    real = np.fft.ifftn(k, axes=tuple(range(d)), norm="ortho")
    real = np.fft.fftn(real, axes=tuple(range(d, 2 * d)), norm="ortho").reshape(n, n)
    if intracell is not None:
        return np.kron(real, np.asarray(intracell, dtype=complex))
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    s = "AB".index(sublattice)
    out[s::2, s::2] = real
    return out


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(a) - np.asarray(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())
