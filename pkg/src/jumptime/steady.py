"""Walltime steady state under collective B->A collapse (h_z = 0) and the SSH bond current."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .models import (LOWER_BA, RAISE_AB, SIGMA_X, SIGMA_Y, SIGMA_Z, MomentumGrid,
                     ModelSpec, bloch_vector, ssh)

CSV_SCHEMA = "crossover/1"


class ScopeError(ValueError):
    pass


@dataclass(frozen=True)
class SteadyBloch:
    r: np.ndarray  # (..., 3)

    @property
    def length(self) -> np.ndarray:
        return np.linalg.norm(self.r, axis=-1)

    def density(self) -> np.ndarray:
        r = np.asarray(self.r)[..., None, None]
        return 0.5 * (np.eye(2) + r[..., 0, :, :] * SIGMA_X + r[..., 1, :, :] * SIGMA_Y + r[..., 2, :, :] * SIGMA_Z)


def _require_chiral(model: ModelSpec) -> None:
    hz = bloch_vector(model, MomentumGrid.uniform(64, model.dimension).flat_points).hz
    if np.abs(hz).max() > 1e-12 * model.energy_scale:
        raise ScopeError("closed-form steady state requires h_z == 0")


def bloch_steady_state(model: ModelSpec, gamma: float, p) -> SteadyBloch:
    """r_ss = (gamma/2) / (h_perp^2 + gamma^2/8) * (h_y, -h_x, gamma/4)."""
    _require_chiral(model)
    h = bloch_vector(model, p)
    pref = (gamma / 2) / (h.h_perp_sq + gamma ** 2 / 8)
    r = np.stack([pref * h.hy, -pref * h.hx, pref * gamma / 4 * np.ones_like(h.hx)], axis=-1)
    if np.any(np.linalg.norm(r, axis=-1) > 1 + 1e-12):
        raise AssertionError("steady Bloch vector outside the Bloch ball")
    return SteadyBloch(r)


def lindblad_block_residual(model: ModelSpec, gamma: float, p, r: np.ndarray) -> np.ndarray:
    """max |d rho / dt| of the per-momentum 2x2 Lindblad generator at Bloch vector r."""
    H = model.bloch_matrix(p)
    rho = SteadyBloch(np.asarray(r)).density()
    L, Ld = RAISE_AB, LOWER_BA
    LdL = Ld @ L
    out = -1j * (H @ rho - rho @ H) + gamma * (L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL))
    return np.abs(out).max(axis=(-1, -2))


def ssh_steady_current(v: float, w: float, gamma: float) -> float:
    """Steady bond current for SSH + collective collapse from a localized initial state."""
    if v <= 0 or w <= 0:
        raise ValueError("v and w must be positive")
    d = w ** 2 - v ** 2 - gamma ** 2 / 8
    return gamma / 4 * (1 + d / np.sqrt(d ** 2 + w ** 2 * gamma ** 2 / 2))


def ssh_steady_current_numeric(v: float, w: float, gamma: float, n: int = 4096) -> float:
    """Zone average of Tr[rho_in(p) J(p)] with J(p) = -i w (e^{-ip}|B><A| - e^{ip}|A><B|)."""
    pts = MomentumGrid((n,)).flat_points
    rho = bloch_steady_state(ssh(v, w), gamma, pts).density()
    p = pts[:, 0]
    J = -1j * w * (np.exp(-1j * p)[:, None, None] * LOWER_BA - np.exp(1j * p)[:, None, None] * RAISE_AB)
    return float(np.real(np.einsum("kab,kba->k", rho, J)).mean())


def crossover_rows(ratios: Sequence[float], gammas: Sequence[float], w: float = 1.0,
                   jumptime: bool = True) -> list[tuple[float, float, float, float]]:
    """(v_over_w, gamma, J_ss, a_times_T) rows; a*T is NaN at the dark point v = w."""
    from .dissipators import Collective
    from .models import DarkContactError
    from .topology import jumptime_phase
    rows = []
    t_cache = {}
    for g in gammas:
        for r in ratios:
            j = ssh_steady_current(r * w, w, g)
            if not jumptime:
                t = np.nan
            elif (r, g) in t_cache:
                t = t_cache[(r, g)]
            else:
                try:
                    t = jumptime_phase(ssh(r * w, w), Collective("A", g)).value
                except DarkContactError:
                    t = np.nan
                t_cache[(r, g)] = t
            rows.append((float(r), float(g), float(j), float(t)))
    return rows


def crossover_sweep_csv(ratios: Sequence[float], gammas: Sequence[float], w: float = 1.0) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["v_over_w", "gamma", "J_ss", "a_times_T"])
    for row in crossover_rows(ratios, gammas, w):
        writer.writerow([repr(x) for x in row])
    return buf.getvalue()


def crossover_width(ratios: Sequence[float], current: Sequence[float], upper: float) -> float:
    """Distance in v/w between the 90% and 10% levels of the falling current (relative to ``upper``)."""
    r = np.asarray(ratios, dtype=float)
    j = np.asarray(current, dtype=float) / upper
    order = np.argsort(r)
    r, j = r[order], j[order]

    def crossing(level):
        idx = np.flatnonzero((j[:-1] - level) * (j[1:] - level) <= 0)
        if not len(idx):
            raise ValueError(f"current never crosses {level:.0%} of the upper limit")
        k = idx[0]
        return r[k] + (level - j[k]) * (r[k + 1] - r[k]) / (j[k + 1] - j[k])

    return float(crossing(0.1) - crossing(0.9))


def dense_block_bloch(rho: np.ndarray, L: int) -> np.ndarray:
    """Per-momentum intracell Bloch vectors (normalized by the block populations) of a dense 1D state."""
    blocks = np.asarray(rho).reshape(L, 2, L, 2)
    mom = np.fft.fft(blocks, axis=0, norm="ortho")
    mom = np.fft.ifft(mom, axis=2, norm="ortho")
    diag = mom[np.arange(L), :, np.arange(L), :]  # (L, 2, 2)
    pop = np.real(np.trace(diag, axis1=1, axis2=2))
    d = diag / pop[:, None, None]
    return np.stack([2 * d[:, 1, 0].real, 2 * d[:, 1, 0].imag, (d[:, 0, 0] - d[:, 1, 1]).real], axis=-1)
