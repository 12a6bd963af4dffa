"""Two-band lattice Hamiltonians given as finite hopping sets.

Units: hbar = 1 and every lattice constant is 1, so momenta are the
dimensionless phases ``p * a / hbar`` living on ``[0, 2*pi)`` per axis.

A model is a map ``r -> H_r`` from integer translations to 2x2 blocks with

    H(p) = sum_r H_r exp(i p . r),   <j, s| H |j + r, s'> = H_r[s, s'],

in the intracell basis ``(A, B)`` with ``sigma_z = |A><A| - |B><B|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
RAISE_AB = np.array([[0, 1], [0, 0]], dtype=complex)  # |A><B|
LOWER_BA = np.array([[0, 0], [1, 0]], dtype=complex)  # |B><A|

SYMMETRY_RTOL = 1e-10
DARK_RTOL = 1e-9


class ModelValidationError(ValueError):
    """Raised for malformed hopping sets or lattice sizes."""


class DarkContactError(ValueError):
    """A quantity is undefined because h_perp vanishes at some momenta."""

    def __init__(self, message: str, contacts=()):
        super().__init__(message)
        self.contacts = np.atleast_2d(np.asarray(contacts, dtype=float))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Translation-invariant two-band Hamiltonian in 1D or 2D.

    ``hoppings`` maps integer translation tuples to 2x2 complex blocks.
    ``lattice_vectors`` holds the primitive vectors as rows (used only for
    real-space displacement vectors; momenta are always in lattice units).
    """

    dimension: int
    hoppings: Mapping[tuple[int, ...], np.ndarray]
    lattice_vectors: np.ndarray | None = None
    name: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ModelValidationError(f"dimension must be 1 or 2, got {self.dimension}")
        clean = {}
        for r, mat in self.hoppings.items():
            r = tuple(int(x) for x in np.atleast_1d(r))
            if len(r) != self.dimension:
                raise ModelValidationError(f"translation {r} does not match dimension {self.dimension}")
            mat = np.asarray(mat, dtype=complex)
            if mat.shape != (2, 2):
                raise ModelValidationError(f"hopping block for {r} has shape {mat.shape}")
            clean[r] = clean.get(r, 0) + mat
        if not clean:
            raise ModelValidationError("empty hopping set")
        scale = max(np.abs(m).max() for m in clean.values()) or 1.0
        for r, mat in clean.items():
            partner = clean.get(tuple(-x for x in r))
            if partner is None:
                partner = np.zeros((2, 2), complex)
            if np.abs(partner - mat.conj().T).max() > 1e-12 * scale:
                raise ModelValidationError(f"hoppings are not Hermitian: H_{{-r}} != H_r^dagger for r={r}")
        object.__setattr__(self, "hoppings", clean)
        if self.lattice_vectors is None:
            object.__setattr__(self, "lattice_vectors", np.eye(self.dimension))
        else:
            lv = np.asarray(self.lattice_vectors, dtype=float).reshape(self.dimension, self.dimension)
            object.__setattr__(self, "lattice_vectors", lv)
        shifts = np.array(list(clean.keys()), dtype=float).reshape(len(clean), self.dimension)
        object.__setattr__(self, "_shifts", shifts)
        object.__setattr__(self, "_blocks", np.array(list(clean.values())))

    @property
    def energy_scale(self) -> float:
        return float(max(np.abs(m).max() for m in self.hoppings.values()))

    @property
    def hopping_range(self) -> tuple[int, ...]:
        return tuple(int(np.abs(self._shifts[:, i]).max()) for i in range(self.dimension))

    def divided(self, scale: float) -> "ModelSpec":
        """Same lattice with every hopping block divided by ``scale`` (dimensionless energies)."""
        return ModelSpec(self.dimension, {r: m / scale for r, m in self.hoppings.items()},
                         self.lattice_vectors, self.name, dict(self.params))

    def bloch_matrix(self, p) -> np.ndarray:
        """H(p) for momenta of shape (..., d) (or (...) in 1D) -> (..., 2, 2)."""
        p = _as_momenta(p, self.dimension)
        phase = np.exp(1j * (p @ self._shifts.T))
        return np.einsum("...m,mab->...ab", phase, self._blocks)

    def bloch_matrix_derivative(self, p, axis: int) -> np.ndarray:
        p = _as_momenta(p, self.dimension)
        phase = 1j * self._shifts[:, axis] * np.exp(1j * (p @ self._shifts.T))
        return np.einsum("...m,mab->...ab", phase, self._blocks)

    def to_dict(self) -> dict:
        if self.name in BUILTIN_MODELS:
            return {"builtin": self.name, **{k: float(v) for k, v in self.params.items()}}
        return {
            "dimension": self.dimension,
            "lattice": {"vectors": self.lattice_vectors.tolist()},
            "hoppings": [
                {"r": list(r), "matrix": [[float(z.real), float(z.imag)] for z in m.reshape(-1)]}
                for r, m in sorted(self.hoppings.items())
            ],
        }

    def __repr__(self):
        if self.params:
            args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
            return f"ModelSpec<{self.name}({args})>"
        return f"ModelSpec<{self.name}, d={self.dimension}, {len(self.hoppings)} hoppings>"


def _as_momenta(p, dimension: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if dimension == 1:
        if p.ndim == 0 or p.shape[-1] != 1:
            p = p[..., None]
    elif p.shape[-1] != dimension:
        raise ValueError(f"momentum array trailing axis must be {dimension}, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class BlochVector:
    """Pauli components of H(p) = h0 + hx sx + hy sy + hz sz (arrays broadcast over momenta)."""

    h0: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray

    @property
    def h_perp_sq(self) -> np.ndarray:
        return self.hx ** 2 + self.hy ** 2

    @property
    def vector(self) -> np.ndarray:
        return np.stack([self.hx, self.hy, self.hz], axis=-1)

    def matrix(self) -> np.ndarray:
        h0, hx, hy, hz = (np.asarray(a)[..., None, None] for a in (self.h0, self.hx, self.hy, self.hz))
        return h0 * SIGMA_0 + hx * SIGMA_X + hy * SIGMA_Y + hz * SIGMA_Z


def pauli_components(mat: np.ndarray) -> BlochVector:
    h0 = 0.5 * (mat[..., 0, 0] + mat[..., 1, 1])
    hz = 0.5 * (mat[..., 0, 0] - mat[..., 1, 1])
    # H_BA = hx + i hy, H_AB = hx - i hy
    hx = 0.5 * (mat[..., 1, 0] + mat[..., 0, 1])
    hy = 0.5 * (mat[..., 1, 0] - mat[..., 0, 1]) / 1j
    return BlochVector(h0.real, hx.real, hy.real, hz.real)


def bloch_vector(model: ModelSpec, p) -> BlochVector:
    return pauli_components(model.bloch_matrix(p))


def bloch_derivative(model: ModelSpec, p, axis: int = 0) -> BlochVector:
    """Analytic momentum derivative of the Bloch vector along ``axis``."""
    return pauli_components(model.bloch_matrix_derivative(p, axis))


@dataclass(frozen=True)
class MomentumGrid:
    """Uniform grid ``p_k = 2 pi k / N`` on each axis, covering the zone once."""

    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        if any(n < 1 for n in shape):
            raise ValueError("grid needs at least one point per axis")
        object.__setattr__(self, "shape", shape)

    @classmethod
    def uniform(cls, n: int, dimension: int = 1) -> "MomentumGrid":
        return cls((n,) * dimension)

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(2 * np.pi / n for n in self.shape)

    def axis_points(self, axis: int = 0) -> np.ndarray:
        return 2 * np.pi * np.arange(self.shape[axis]) / self.shape[axis]

    @property
    def points(self) -> np.ndarray:
        """Momenta of shape ``shape + (d,)``."""
        axes = np.meshgrid(*(self.axis_points(i) for i in range(self.dimension)), indexing="ij")
        return np.stack(axes, axis=-1)

    @property
    def flat_points(self) -> np.ndarray:
        return self.points.reshape(self.size, self.dimension)

    def negated_index(self) -> np.ndarray:
        """Flat index of -p for every flat grid index."""
        idx = np.indices(self.shape)
        neg = [(-idx[i]) % self.shape[i] for i in range(self.dimension)]
        return np.ravel_multi_index(neg, self.shape).reshape(-1)


@dataclass(frozen=True)
class DarkContact:
    minimum: float
    momentum: np.ndarray
    is_contact: bool


def h_perp_min(model: ModelSpec, grid: MomentumGrid | int, tol: float | None = None) -> DarkContact:
    """Minimum of |h_perp| over the zone, refined by bounded line searches."""
    if isinstance(grid, int):
        grid = MomentumGrid.uniform(grid, model.dimension)
    if grid.size == 0:
        raise ValueError("empty grid")
    tol = DARK_RTOL * model.energy_scale if tol is None else tol
    pts = grid.flat_points
    hp = np.sqrt(bloch_vector(model, pts).h_perp_sq)
    k = int(np.argmin(hp))
    best_p = pts[k].copy()
    best = float(hp[k])
    for axis in range(model.dimension):
        step = grid.spacing[axis]

        def f(x, axis=axis):
            q = best_p.copy()
            q[axis] = x
            return float(np.sqrt(bloch_vector(model, q).h_perp_sq))

        centre = best_p[axis]
        res = minimize_scalar(f, bounds=(centre - step, centre + step), method="bounded",
                              options={"xatol": 1e-12})
        if res.fun < best:
            best = float(res.fun)
            best_p[axis] = float(np.mod(res.x, 2 * np.pi))
    return DarkContact(best, best_p if model.dimension > 1 else best_p[:1], best <= tol)


def real_space_hamiltonian(model: ModelSpec, L: int | Sequence[int]) -> np.ndarray:
    """Dense periodic real-space matrix, basis index ``flat_cell * 2 + s``."""
    L = tuple(int(x) for x in np.atleast_1d(L))
    if len(L) == 1 and model.dimension == 2:
        L = L * 2
    if len(L) != model.dimension:
        raise ModelValidationError(f"need {model.dimension} lattice sizes, got {L}")
    for n, rng in zip(L, model.hopping_range):
        if n < max(2 * rng, 1):
            raise ModelValidationError(f"lattice size {n} too small for hopping range {rng}")
    n_cells = int(np.prod(L))
    out = np.zeros((2 * n_cells, 2 * n_cells), dtype=complex)
    cells = np.indices(L).reshape(model.dimension, -1).T
    rows = np.ravel_multi_index(cells.T, L)
    for r, block in model.hoppings.items():
        cols = np.ravel_multi_index(((cells + np.array(r)) % np.array(L)).T, L)
        for s in range(2):
            for t in range(2):
                np.add.at(out, (2 * rows + s, 2 * cols + t), block[s, t])
    return out


@dataclass(frozen=True)
class SymmetryReport:
    chiral: bool
    pt: bool
    trs: bool
    inversion: bool

    @property
    def residual_forced_zero(self) -> bool:
        return self.chiral or self.trs


def symmetry_check(model: ModelSpec, grid: MomentumGrid | int = 64, rtol: float = SYMMETRY_RTOL) -> SymmetryReport:
    """Chiral/PT: h_z == 0.  TRS: h0, hx, hz even, hy odd.  Inversion: h0, hx even, hy, hz odd."""
    if isinstance(grid, int):
        grid = MomentumGrid.uniform(grid, model.dimension)
    tol = rtol * model.energy_scale
    h = bloch_vector(model, grid.flat_points)
    neg = grid.negated_index()

    def even(a):
        return np.abs(a - a[neg]).max() <= tol

    def odd(a):
        return np.abs(a + a[neg]).max() <= tol

    chiral = bool(np.abs(h.hz).max() <= tol)
    trs = bool(even(h.h0) and even(h.hx) and odd(h.hy) and even(h.hz))
    inversion = bool(even(h.h0) and even(h.hx) and odd(h.hy) and odd(h.hz))
    return SymmetryReport(chiral=chiral, pt=chiral, trs=trs, inversion=inversion)


def transform_primitive_vectors(model: ModelSpec, m: int) -> ModelSpec:
    """Re-express a 2D model in the basis a1' = a1, a2' = a2 + m a1.

    A translation r = r1 a1 + r2 a2 has coordinates (r1 - m r2, r2) in the new
    basis, so h'(p1, p2) = h(p1, p2 - m p1).
    """
    if model.dimension != 2:
        raise ModelValidationError("primitive-vector transformation needs a 2D model")
    m = int(m)
    hops = {(r[0] - m * r[1], r[1]): blk for r, blk in model.hoppings.items()}
    a1, a2 = model.lattice_vectors
    return ModelSpec(2, hops, np.array([a1, a2 + m * a1]), name="custom")


# -- built-in models -------------------------------------------------------


def ssh(v: float, w: float, hz_sin: float = 0.0) -> ModelSpec:
    """SSH chain: h = (v + w cos p, -w sin p, hz_sin * sin p).

    The intercell bond couples A in cell j to B in cell j+1.
    """
    hops = {
        (0,): v * SIGMA_X,
        (1,): w * RAISE_AB + (hz_sin / 2j) * SIGMA_Z,
        (-1,): w * LOWER_BA - (hz_sin / 2j) * SIGMA_Z,
    }
    params = {"v": v, "w": w}
    if hz_sin:
        params["hz_sin"] = hz_sin
    return ModelSpec(1, hops, name="ssh", params=params)


def torus2d(u: float, v: float, w: float) -> ModelSpec:
    """h = (u + v cos p1, v sin p1 + 2w sin p2, 2w cos p2)."""
    hops = {
        (0, 0): u * SIGMA_X,
        (-1, 0): v * RAISE_AB,
        (1, 0): v * LOWER_BA,
        (0, 1): w * np.array([[1, -1], [1, -1]], dtype=complex),
        (0, -1): w * np.array([[1, 1], [-1, -1]], dtype=complex),
    }
    return ModelSpec(2, hops, name="torus2d", params={"u": u, "v": v, "w": w})


def directional_chain(J: float) -> ModelSpec:
    """Nearest-neighbour chain 2 J cos p carried on both sublattices (h = 0)."""
    hops = {(1,): J * SIGMA_0, (-1,): J * SIGMA_0}
    return ModelSpec(1, hops, name="directional_chain", params={"J": J})


def dark_only_chain(t: float, eps: float = 0.0) -> ModelSpec:
    """H(p) = (eps + 2 t cos p) sigma_z: every momentum admits a dark state."""
    hops = {(0,): eps * SIGMA_Z, (1,): t * SIGMA_Z, (-1,): t * SIGMA_Z}
    return ModelSpec(1, hops, name="custom")


BUILTIN_MODELS = {"ssh": ssh, "torus2d": torus2d, "directional_chain": directional_chain}


def random_model(rng: np.random.Generator, *, max_range: int = 2, chiral: bool = False,
                 trs: bool = False, inversion: bool = False, hz_scale: float = 1.0) -> ModelSpec:
    """Random finite 1D hopping set with optional symmetry constraints.

    ``chiral`` kills the sigma_z part; ``trs`` forces real blocks with
    H_{-r} = H_r^T; ``inversion`` forces H_r = sigma_x H_{-r} sigma_x.
    """
    hops = {}
    for r in range(0, max_range + 1):
        m = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        if trs:
            m = m.real.astype(complex)
        m[0, 0] *= hz_scale
        m[1, 1] *= hz_scale
        if chiral:
            m[0, 0] = m[1, 1] = 0.0
        if r == 0:
            m = 0.5 * (m + m.conj().T)
        hops[(r,)] = m
        if r:
            hops[(-r,)] = m.conj().T
    if inversion:
        hops = {r: 0.5 * (m + SIGMA_X @ hops[(-r[0],)] @ SIGMA_X) for r, m in hops.items()}
    return ModelSpec(1, hops, name="custom")


def model_from_dict(data: Mapping) -> ModelSpec:
    """Parse a model definition (built-in shortcut or explicit hopping list)."""
    data = dict(data)
    if "builtin" in data:
        kind = data.pop("builtin")
        if kind not in BUILTIN_MODELS:
            raise ModelValidationError(f"unknown built-in model {kind!r}")
        return BUILTIN_MODELS[kind](**{k: float(v) for k, v in data.items()})
    for key in BUILTIN_MODELS:
        if key in data:
            return BUILTIN_MODELS[key](**{k: float(v) for k, v in data[key].items()})
    try:
        dim = int(data["dimension"])
        hops = {}
        for entry in data["hoppings"]:
            vals = np.array(entry["matrix"], dtype=float).reshape(4, 2)
            hops[tuple(entry["r"])] = (vals[:, 0] + 1j * vals[:, 1]).reshape(2, 2)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelValidationError(f"malformed model definition: {exc}") from exc
    vectors = data.get("lattice", {}).get("vectors")
    return ModelSpec(dim, hops, None if vectors is None else np.array(vectors, dtype=float))


def winding_angle_count(model: ModelSpec, n: int = 4096) -> int:
    """Integer winding by accumulating wrapped angle steps (robust cross-check)."""
    if model.dimension != 1:
        raise ModelValidationError("angle counting implemented for 1D models")
    h = bloch_vector(model, MomentumGrid((n,)).flat_points)
    phi = np.arctan2(h.hy, h.hx)
    d = np.diff(np.append(phi, phi[0]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    # the loop integrand counts clockwise turns of (hx, hy)
    return int(round(-d.sum() / (2 * math.pi)))
