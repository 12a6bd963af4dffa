"""Quantum-jump trajectories in the momentum basis.

All catalog dissipators leave the no-jump evolution block diagonal in
momentum, so a trajectory between jumps is propagated exactly with one closed
form 2x2 exponential per grid momentum.  Waiting times are drawn by inverting
the exact survival probability ``||psi(tau)||^2 = u``.

Time is handled internally in units of ``1 / gamma_total``; the effective
Hamiltonian is divided by the total rate once.  Jumptime observables therefore
depend on ``H / gamma`` only.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .dissipators import (Channel, DarkTrapped, DissipatorSpec, KickFamily,
                          apply_jump, decay_operator, jump_channels,
                          leaves, total_rate)
from .models import MomentumGrid, ModelSpec

RNG_NAME = "Philox4x64-10"
TAU_MAX = 50.0  # in units of 1 / gamma_total
NORM_RTOL = 1e-12
SEAM_WIDTH = 2
SEAM_LIMIT = 1e-3
CHUNK = 64


def trajectory_rng(base_seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for trajectory ``index``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(base_seed), int(index)])))


# -- states ------------------------------------------------------------------


@dataclass
class PureState:
    """Amplitudes psi(k, s) on the momentum grid, shape ``grid.shape + (2,)``."""

    amplitudes: np.ndarray
    grid: MomentumGrid

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(self.grid.shape + (2,))

    @classmethod
    def localized(cls, grid: MomentumGrid, cell: Sequence[int] | int = 0, sublattice: str = "A") -> "PureState":
        real = np.zeros(grid.shape + (2,), dtype=complex)
        cell = tuple(np.atleast_1d(cell)) if np.ndim(cell) else (int(cell),) * grid.dimension
        real[tuple(int(c) % n for c, n in zip(cell, grid.shape)) + ("AB".index(sublattice),)] = 1.0
        return cls.from_real_space(real, grid)

    @classmethod
    def from_real_space(cls, psi: np.ndarray, grid: MomentumGrid) -> "PureState":
        axes = tuple(range(grid.dimension))
        psi = np.asarray(psi, dtype=complex).reshape(grid.shape + (2,))
        return cls(np.fft.fftn(psi, axes=axes, norm="ortho"), grid)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        return PureState(self.amplitudes / self.norm, self.grid)

    def real_space(self) -> np.ndarray:
        return np.fft.ifftn(self.amplitudes, axes=tuple(range(self.grid.dimension)), norm="ortho")


# -- exact no-jump propagation --------------------------------------------------


class NoJumpPropagator:
    """exp(-i H_eff tau) per block via H_eff = m0 + M, M^2 = s^2 (M traceless)."""

    def __init__(self, blocks: np.ndarray):
        blocks = np.asarray(blocks, dtype=complex)
        self.m0 = 0.5 * (blocks[..., 0, 0] + blocks[..., 1, 1])
        self.traceless = blocks - self.m0[..., None, None] * np.eye(2)
        self.s = np.sqrt(-np.linalg.det(self.traceless) + 0j)

    def prepare(self, psi: np.ndarray) -> "_Prepared":
        flat = psi.reshape(-1, 2)
        return _Prepared(self, flat, np.einsum("kab,kb->ka", self.traceless, flat), psi.shape)

    def apply(self, psi: np.ndarray, tau: float) -> np.ndarray:
        if tau < 0:
            raise ValueError("tau must be nonnegative")
        return self.prepare(psi).at(tau)


@dataclass
class _Prepared:
    prop: NoJumpPropagator
    psi: np.ndarray
    mpsi: np.ndarray
    shape: tuple

    def at(self, tau: float) -> np.ndarray:
        st = self.prop.s * tau
        c = np.cos(st)
        sn = np.sinc(st / np.pi)  # sin(st)/st, analytic through zero
        out = np.exp(-1j * self.prop.m0 * tau)[:, None] * (c[:, None] * self.psi - 1j * tau * sn[:, None] * self.mpsi)
        return out.reshape(self.shape)

    def survival(self, tau: float) -> float:
        v = self.at(tau)
        return float(np.vdot(v, v).real)


def evolve_nojump(state: PureState, blocks: np.ndarray, tau: float) -> PureState:
    """Unnormalized exp(-i H_eff tau) |psi> with ``blocks`` of shape (grid.size, 2, 2)."""
    return PureState(NoJumpPropagator(blocks).apply(state.amplitudes, tau), state.grid)


def sample_waiting_time(prepared: _Prepared, u: float, tau_max: float = TAU_MAX, start: float = 1.0) -> float:
    """Solve ||psi(tau)||^2 = u by bracket doubling then Brent's method.

    Times are in the units of the blocks the propagator was built from.
    """
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    lo, f_lo = 0.0, 1.0 - u
    hi = min(start, tau_max)
    while True:
        f_hi = prepared.survival(hi) - u
        if f_hi > f_lo + 1e-12:
            raise AssertionError("survival probability increased: decay operator is not dissipative")
        if f_hi <= 0:
            break
        if hi >= tau_max:
            raise DarkTrapped(f"survival stays above u={u:.3g} up to tau_max")
        lo, f_lo = hi, f_hi
        hi = min(2 * hi, tau_max)
    if f_hi == 0:
        return hi
    return brentq(lambda t: prepared.survival(t) - u, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# -- observables -------------------------------------------------------------


def _wrap(d: np.ndarray, n: int) -> np.ndarray:
    half = (n - 1) // 2
    return ((d + half) % n) - half


@dataclass(frozen=True)
class Observer:
    """Maps normalized momentum-basis states to observable arrays."""

    grid: MomentumGrid
    origin: tuple
    density: bool = False

    def __post_init__(self):
        coords = []
        for axis, n in enumerate(self.grid.shape):
            j = np.arange(n)
            coords.append(self.origin[axis] + _wrap(j - self.origin[axis], n))
        object.__setattr__(self, "_coords", coords)
        seam = np.zeros(self.grid.shape, dtype=bool)
        for axis, n in enumerate(self.grid.shape):
            d = _wrap(np.arange(n) - self.origin[axis], n)
            near = (d <= d.min() + SEAM_WIDTH - 1) | (d >= d.max() - SEAM_WIDTH + 1)
            shape = [1] * self.grid.dimension
            shape[axis] = n
            seam |= near.reshape(shape)
        object.__setattr__(self, "_seam", seam)

    def measure(self, amplitudes: np.ndarray) -> tuple[dict, float]:
        d = self.grid.dimension
        real = np.fft.ifftn(amplitudes, axes=tuple(range(d)), norm="ortho")
        prob_s = np.abs(real) ** 2
        prob = prob_s.sum(-1)
        out = {}
        xs = []
        for axis in range(d):
            marg = prob.sum(axis=tuple(i for i in range(d) if i != axis))
            xs.append(float(marg @ self._coords[axis]))
        out["x"] = np.array(xs)
        out["popA"] = np.array([prob_s[..., 0].sum()])
        out["popB"] = np.array([prob_s[..., 1].sum()])
        out["pos_hist"] = prob.reshape(-1)
        out["mom_hist"] = (np.abs(amplitudes) ** 2).sum(-1).reshape(-1)
        if self.density:
            v = real.reshape(-1)
            out["density"] = np.outer(v, v.conj())
        return out, float(prob[self._seam].sum())


# -- records and accumulation -----------------------------------------------------


@dataclass
class JumpRecord:
    base_seed: int
    index: int
    jumps: list = field(default_factory=list)  # (n, t_n, Channel)
    snapshots: list = field(default_factory=list)  # (label, observable dict)
    terminated: bool = False
    seam_occupancy: float = 0.0

    def check(self) -> None:
        times = [t for _, t, _ in self.jumps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise AssertionError("jump times not strictly increasing")
        if [n for n, _, _ in self.jumps] != list(range(1, len(self.jumps) + 1)):
            raise AssertionError("jump counts not contiguous")


class EnsembleAccumulator:
    """Per-label running mean and M2 of every observable (Welford, Chan merge)."""

    def __init__(self):
        self.stats: dict = {}  # (label, name) -> [count, mean, m2]
        self.trapped = 0
        self.seam_max = 0.0
        self.trajectories = 0

    def add(self, label, obs: dict) -> None:
        for name, value in obs.items():
            value = np.asarray(value)
            key = (label, name)
            if key not in self.stats:
                self.stats[key] = [1, value.astype(complex if np.iscomplexobj(value) else float), np.zeros(value.shape)]
                continue
            cnt, mean, m2 = self.stats[key]
            cnt += 1
            delta = value - mean
            mean = mean + delta / cnt
            m2 = m2 + np.real(delta * np.conj(value - mean))
            self.stats[key] = [cnt, mean, m2]

    def add_record(self, record: JumpRecord) -> None:
        self.trajectories += 1
        self.trapped += int(record.terminated)
        self.seam_max = max(self.seam_max, record.seam_occupancy)
        for label, obs in record.snapshots:
            self.add(label, obs)

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        out = EnsembleAccumulator()
        out.trapped = self.trapped + other.trapped
        out.trajectories = self.trajectories + other.trajectories
        out.seam_max = max(self.seam_max, other.seam_max)
        for key in set(self.stats) | set(other.stats):
            a, b = self.stats.get(key), other.stats.get(key)
            if a is None or b is None:
                out.stats[key] = list(a or b)
                continue
            na, ma, sa = a
            nb, mb, sb = b
            n = na + nb
            delta = mb - ma
            out.stats[key] = [n, ma + delta * (nb / n), sa + sb + np.abs(delta) ** 2 * (na * nb / n)]
        return out

    def labels(self) -> list:
        return sorted({label for label, _ in self.stats}, key=lambda l: (str(l[0]), l[1]))

    def count(self, label, name: str = "x") -> int:
        return self.stats[(label, name)][0]

    def mean(self, label, name: str) -> np.ndarray:
        return self.stats[(label, name)][1]

    def stderr(self, label, name: str) -> np.ndarray:
        cnt, _, m2 = self.stats[(label, name)]
        if cnt < 2:
            return np.full(np.shape(m2), np.nan)
        return np.sqrt(m2 / (cnt - 1) / cnt)

    def rows(self, names: Sequence[str] = ("x", "popA", "popB")) -> list[tuple]:
        """(label_kind, label_value, observable, mean, std_err, count) rows for CSV output."""
        out = []
        for label in self.labels():
            for name in names:
                if (label, name) not in self.stats:
                    continue
                mean = np.atleast_1d(np.real(self.mean(label, name)))
                se = np.atleast_1d(self.stderr(label, name))
                for i, (m, s) in enumerate(zip(mean, se)):
                    obs = f"{name}{i + 1}" if name == "x" and len(mean) > 1 else name
                    out.append((label[0], label[1], obs, float(m), float(s), self.count(label, name)))
        return out


# -- trajectory driver -------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryConfig:
    model: ModelSpec
    dissipator: DissipatorSpec
    grid_shape: tuple
    init_cell: tuple
    init_sublattice: str = "A"
    n_max: int = 4
    times: tuple | None = None  # walltime readout in units of 1/gamma_total when set
    density: bool = False


class _Engine:
    def __init__(self, cfg: TrajectoryConfig):
        self.cfg = cfg
        self.grid = MomentumGrid(cfg.grid_shape)
        self.gamma = total_rate(cfg.dissipator)
        if self.gamma <= 0:
            raise DarkTrapped("dissipator has zero total rate")
        # energies are divided by gamma before the Bloch sum so that a joint
        # rescaling of (H, gamma) reproduces the same blocks bit for bit
        h = cfg.model.divided(self.gamma).bloch_matrix(self.grid.flat_points)
        self.prop = NoJumpPropagator(h - 0.5j * (decay_operator(cfg.dissipator) / self.gamma))
        self.observer = Observer(self.grid, tuple(cfg.init_cell), cfg.density)
        self.kick_cdf = {}
        for i, leaf in enumerate(leaves(cfg.dissipator)):
            if isinstance(leaf, KickFamily):
                self.kick_cdf[i] = np.cumsum(leaf.G.weights(self.grid.shape).reshape(-1))

    def initial(self) -> PureState:
        return PureState.localized(self.grid, self.cfg.init_cell, self.cfg.init_sublattice)

    def _choose(self, psi: np.ndarray, rng: np.random.Generator) -> Channel:
        rates = np.array([r for _, r in jump_channels(self.cfg.dissipator, psi)])
        total = rates.sum()
        if total <= 0:
            raise DarkTrapped("all jump rates vanish")
        comp = int(np.searchsorted(np.cumsum(rates), rng.random() * total, side="right"))
        comp = min(comp, len(rates) - 1)
        kick = None
        if comp in self.kick_cdf:
            cdf = self.kick_cdf[comp]
            kick = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(cdf) - 1)
        return Channel(comp, kick)

    def run(self, base_seed: int, index: int) -> JumpRecord:
        rng = trajectory_rng(base_seed, index)
        rec = JumpRecord(base_seed, index)
        psi = self.initial().amplitudes
        walltime = self.cfg.times is not None
        times = list(self.cfg.times or ())
        t, n, t_idx = 0.0, 0, 0

        def snap(label, amps):
            obs, seam = self.observer.measure(amps)
            rec.snapshots.append((label, obs))
            rec.seam_occupancy = max(rec.seam_occupancy, seam)

        if not walltime:
            snap(("n", 0), psi)
        while True:
            if not walltime and n >= self.cfg.n_max:
                break
            if walltime and t_idx >= len(times):
                break
            prepared = self.prop.prepare(psi)
            u = 1.0 - rng.random()
            try:
                tau = sample_waiting_time(prepared, u) if u < 1.0 else 0.0
            except DarkTrapped:
                rec.terminated = True
                tau = np.inf
            while walltime and t_idx < len(times) and times[t_idx] <= t + tau:
                amps = prepared.at(times[t_idx] - t)
                snap(("t", t_idx), amps / np.linalg.norm(amps))
                t_idx += 1
            if rec.terminated:
                break
            amps = prepared.at(tau)
            amps = amps / np.linalg.norm(amps)
            t += tau
            ch = self._choose(amps, rng)
            psi = apply_jump(self.cfg.dissipator, ch, amps, self.grid.shape)
            n += 1
            if abs(np.linalg.norm(psi) - 1) > 1e-10:
                raise AssertionError("post-jump state is not normalized")
            rec.jumps.append((n, t / self.gamma, ch))
            if not walltime:
                snap(("n", n), psi)
        rec.check()
        return rec


def run_trajectory(cfg: TrajectoryConfig, base_seed: int, index: int = 0) -> JumpRecord:
    """One trajectory; DarkTrapped is reported via ``record.terminated``."""
    return _Engine(cfg).run(base_seed, index)


def _run_chunk(args) -> EnsembleAccumulator:
    cfg, base_seed, start, stop = args
    eng = _Engine(cfg)
    acc = EnsembleAccumulator()
    for i in range(start, stop):
        acc.add_record(eng.run(base_seed, i))
    return acc


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("JUMPTIME_THREADS", "1")))
    except ValueError:
        return 1


def ensemble_average(cfg: TrajectoryConfig, N: int, base_seed: int, workers: int | None = None) -> EnsembleAccumulator:
    """Average N trajectories.  Chunks are fixed by index and merged in order,
    so the result does not depend on the worker count."""
    if N < 1:
        raise ValueError("N must be positive")
    workers = worker_count() if workers is None else workers
    jobs = [(cfg, base_seed, s, min(s + CHUNK, N)) for s in range(0, N, CHUNK)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    acc = parts[0]
    for p in parts[1:]:
        acc = acc.merge(p)
    if acc.trapped == N and cfg.times is None:
        raise DarkTrapped(f"all {N} trajectories reached a dark state")
    return acc
