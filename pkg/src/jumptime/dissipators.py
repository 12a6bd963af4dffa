"""Jump-operator families, effective Hamiltonians and dark-state diagnostics.

Every catalog dissipator is built from leaves whose jump operators factor as
(translation-invariant lattice part) x (fixed 2x2 intracell part):

* ``Collective(target="A")``:  1 x |A><B|   (``target="B"`` gives 1 x |B><A|)
* ``SublatticeProjector(s)``:  1 x |s><s|
* ``KickFamily(G)``:           exp(i q x) x |A><B|, q drawn from G on the grid
* ``DirectionalHop()``:        exp(-i p a) x 1   (shifts every cell by +1)

``Mixture`` combines leaves with individual rates; the total rate is their sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .models import (DARK_RTOL, LOWER_BA, RAISE_AB, MomentumGrid, ModelSpec,
                     bloch_vector)

_A = np.array([[1, 0], [0, 0]], dtype=complex)
_B = np.array([[0, 0], [0, 1]], dtype=complex)


class DissipatorConfigError(ValueError):
    pass


class DarkTrapped(RuntimeError):
    """No jump channel has a positive rate (or the survival norm never drops)."""


# -- momentum-transfer distributions --------------------------------------


@dataclass(frozen=True)
class KickDistribution:
    """G(q) sampled on the momentum grid; ``weights`` sum to one.

    kind: ``delta`` (collective limit), ``uniform`` (local collapse),
    ``gaussian`` (width ``sigma`` in lattice units) or ``table``.
    """

    kind: str = "delta"
    sigma: float | None = None
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("delta", "uniform", "gaussian", "table"):
            raise DissipatorConfigError(f"unknown kick distribution {self.kind!r}")
        if self.kind == "gaussian" and not (self.sigma and self.sigma > 0):
            raise DissipatorConfigError("gaussian G needs sigma > 0")
        if self.kind == "table" and self.values is None:
            raise DissipatorConfigError("table G needs values")

    def weights(self, shape: Sequence[int]) -> np.ndarray:
        """Normalized weights G(q_k) dq over a grid of the given shape."""
        shape = tuple(np.atleast_1d(shape))
        if self.kind == "delta":
            w = np.zeros(shape)
            w[(0,) * len(shape)] = 1.0
            return w
        if self.kind == "uniform":
            return np.full(shape, 1.0 / np.prod(shape))
        if self.kind == "table":
            w = np.asarray(self.values, dtype=float).reshape(shape)
            if (w < 0).any() or w.sum() <= 0:
                raise DissipatorConfigError("table G must be nonnegative with positive mass")
            return w / w.sum()
        q2 = np.zeros(shape)
        for axis, n in enumerate(shape):
            q = 2 * np.pi * np.arange(n) / n
            q = (q + np.pi) % (2 * np.pi) - np.pi
            q2 = q2 + np.expand_dims(q ** 2, tuple(i for i in range(len(shape)) if i != axis))
        w = np.exp(-0.5 * self.sigma ** 2 * q2)
        return w / w.sum()

    def to_dict(self) -> dict:
        out = {"type": self.kind}
        if self.sigma is not None:
            out["sigma"] = self.sigma
        if self.values is not None:
            out["values"] = list(self.values)
        return out


# -- dissipator specs -------------------------------------------------------


@dataclass(frozen=True)
class Collective:
    target: str = "A"
    gamma: float = 1.0

    @property
    def intracell(self) -> np.ndarray:
        return RAISE_AB if self.target == "A" else LOWER_BA


@dataclass(frozen=True)
class SublatticeProjector:
    target: str = "A"
    gamma: float = 1.0

    @property
    def intracell(self) -> np.ndarray:
        return _A if self.target == "A" else _B


@dataclass(frozen=True)
class KickFamily:
    G: KickDistribution = field(default_factory=KickDistribution)
    gamma: float = 1.0

    @property
    def intracell(self) -> np.ndarray:
        return RAISE_AB


@dataclass(frozen=True)
class DirectionalHop:
    gamma: float = 1.0
    axis: int = 0

    @property
    def intracell(self) -> np.ndarray:
        return np.eye(2, dtype=complex)


Leaf = Collective | SublatticeProjector | KickFamily | DirectionalHop


@dataclass(frozen=True)
class Mixture:
    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise DissipatorConfigError("empty mixture")
        flat = []
        for c in comps:
            flat.extend(leaves(c))
        if any(c.gamma <= 0 for c in flat):
            raise DissipatorConfigError("mixture rates must be positive")
        object.__setattr__(self, "components", tuple(flat))

    @property
    def gamma(self) -> float:
        return float(sum(c.gamma for c in self.components))


DissipatorSpec = Leaf | Mixture


def leaves(d: DissipatorSpec) -> tuple:
    return d.components if isinstance(d, Mixture) else (d,)


def total_rate(d: DissipatorSpec) -> float:
    return float(sum(c.gamma for c in leaves(d)))


def local_collapse(gamma: float = 1.0) -> KickFamily:
    return KickFamily(KickDistribution("uniform"), gamma)


def decay_operator(d: DissipatorSpec) -> np.ndarray:
    """Intracell sum_j gamma_j L_j^dag L_j (identical in every momentum block)."""
    out = np.zeros((2, 2), dtype=complex)
    for leaf in leaves(d):
        l = leaf.intracell
        out += leaf.gamma * (l.conj().T @ l)
    return out


@dataclass(frozen=True)
class EffectiveHamiltonianBlocks:
    """H_eff(p) = H(p) - (i/2) sum_j gamma_j L_j^dag L_j on each grid momentum."""

    grid: MomentumGrid
    blocks: np.ndarray  # (grid.size, 2, 2)

    def anti_hermitian_part(self) -> np.ndarray:
        return 0.5 * (self.blocks - np.conj(np.swapaxes(self.blocks, -1, -2))) / 1j


def effective_hamiltonian(model: ModelSpec, dissipator: DissipatorSpec,
                          grid: MomentumGrid | int) -> EffectiveHamiltonianBlocks:
    if isinstance(grid, int):
        grid = MomentumGrid.uniform(grid, model.dimension)
    h = model.bloch_matrix(grid.flat_points)
    return EffectiveHamiltonianBlocks(grid, h - 0.5j * decay_operator(dissipator))


# -- dark states ------------------------------------------------------------


@dataclass(frozen=True)
class DarkSetReport:
    is_dark_free: bool
    contacts: np.ndarray  # (k, d) momenta admitting a dark state
    dark_sublattice: str | None
    persistent: bool  # jumps continue inside the projected sublattice
    trace_terminating: bool
    note: str = ""


def _common_kernel(d: DissipatorSpec) -> np.ndarray:
    """Orthonormal basis (columns) of the intersection of the intracell kernels."""
    stack = np.vstack([leaf.intracell for leaf in leaves(d)])
    _, s, vh = np.linalg.svd(stack)
    rank = int((s > 1e-12).sum())
    return vh[rank:].conj().T


def dark_set_report(model: ModelSpec, dissipator: DissipatorSpec,
                    grid: MomentumGrid | int = 512, tol: float | None = None) -> DarkSetReport:
    if isinstance(grid, int):
        grid = MomentumGrid.uniform(grid, model.dimension)
    tol = DARK_RTOL * model.energy_scale if tol is None else tol
    pts = grid.flat_points
    kernel = _common_kernel(dissipator)
    empty = np.zeros((0, model.dimension))
    if kernel.shape[1] == 0:
        return DarkSetReport(True, empty, None, False, False, "no common kernel: dark-free for any Hamiltonian")
    if kernel.shape[1] == 2:
        return DarkSetReport(False, pts, None, False, True, "dissipator annihilates every state")
    vec = kernel[:, 0]
    sub = "A" if abs(vec[0]) > 0.5 else "B"
    h = bloch_vector(model, pts)
    contacts = pts[np.sqrt(h.h_perp_sq) <= tol]
    projector_only = all(isinstance(leaf, SublatticeProjector) for leaf in leaves(dissipator))
    terminating = len(contacts) == grid.size and not projector_only
    note = ""
    if projector_only:
        note = "persistent within projected sublattice"
    elif terminating:
        note = "all momenta dark: jumptime evolution terminates after the first jump"
    return DarkSetReport(len(contacts) == 0, contacts, sub, projector_only, terminating, note)


# -- channels and jumps on momentum-basis states ------------------------------


@dataclass(frozen=True)
class Channel:
    component: int
    kick: int | None = None  # flat grid index of the momentum transfer


def jump_channels(dissipator: DissipatorSpec, amplitudes: np.ndarray) -> list[tuple[int, float]]:
    """Rates gamma_j <psi|L_j^dag L_j|psi> per mixture component.

    ``amplitudes`` has shape (..., 2) over grid momenta and sublattice; for a
    kick family the rate is independent of G (every L_q^dag L_q equals 1 x |B><B|).
    """
    amps = np.asarray(amplitudes).reshape(-1, 2)
    rho_in = amps.T @ amps.conj()  # intracell reduced state, rho_in[s, t] = sum psi_s psi_t^*
    out = []
    for i, leaf in enumerate(leaves(dissipator)):
        l = leaf.intracell
        rate = leaf.gamma * float(np.real(np.trace(l.conj().T @ l @ rho_in)))
        out.append((i, max(rate, 0.0)))
    return out


def apply_jump(dissipator: DissipatorSpec, channel: Channel, amplitudes: np.ndarray,
               grid_shape: Sequence[int]) -> np.ndarray:
    """Return L_j psi / ||L_j psi|| for a state given on the momentum grid."""
    leaf = leaves(dissipator)[channel.component]
    shape = tuple(grid_shape)
    psi = np.asarray(amplitudes).reshape(shape + (2,))
    if isinstance(leaf, DirectionalHop):
        p = 2 * np.pi * np.arange(shape[leaf.axis]) / shape[leaf.axis]
        phase = np.exp(-1j * p).reshape([-1 if i == leaf.axis else 1 for i in range(len(shape))] + [1])
        out = psi * phase
    else:
        out = psi @ leaf.intracell.T
        if isinstance(leaf, KickFamily):
            shift = np.unravel_index(channel.kick or 0, shape)
            out = np.roll(out, shift, axis=tuple(range(len(shape))))
    norm = np.linalg.norm(out)
    if norm == 0:
        raise DarkTrapped("jump applied to a state it annihilates")
    return (out / norm).reshape(np.shape(amplitudes))


# -- JSON config -------------------------------------------------------------


def dissipator_from_dict(data: Mapping) -> DissipatorSpec:
    kind = data.get("type")
    gamma = float(data.get("gamma", 1.0))
    if kind == "collective":
        return Collective(data.get("target", "A"), gamma)
    if kind in ("sublattice_A", "sublattice_B"):
        return SublatticeProjector(kind[-1], gamma)
    if kind == "kick":
        g = data.get("G", {"type": "delta"})
        return KickFamily(KickDistribution(g["type"], g.get("sigma"),
                                           tuple(g["values"]) if "values" in g else None), gamma)
    if kind == "local":
        return local_collapse(gamma)
    if kind == "directional":
        return DirectionalHop(gamma, int(data.get("axis", 0)))
    if kind == "mixture":
        return Mixture(tuple(dissipator_from_dict(c) for c in data["components"]))
    raise DissipatorConfigError(f"unknown dissipator type {kind!r}")


def dissipator_to_dict(d: DissipatorSpec) -> dict:
    if isinstance(d, Mixture):
        return {"type": "mixture", "components": [dissipator_to_dict(c) for c in d.components]}
    if isinstance(d, Collective):
        out = {"type": "collective", "gamma": d.gamma}
        if d.target != "A":
            out["target"] = d.target
        return out
    if isinstance(d, SublatticeProjector):
        return {"type": f"sublattice_{d.target}", "gamma": d.gamma}
    if isinstance(d, KickFamily):
        return {"type": "kick", "G": d.G.to_dict(), "gamma": d.gamma}
    if isinstance(d, DirectionalHop):
        return {"type": "directional", "gamma": d.gamma, "axis": d.axis}
    raise DissipatorConfigError(f"cannot serialize {d!r}")
