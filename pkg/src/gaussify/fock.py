"""Truncated multi-mode Fock-space states, operators, and the standard optical unitaries.

All states live on a per-mode truncated basis |0>, ..., |d-1>. Multi-mode
objects use row-major (C-order) flattening, so mode 0 is the slowest index
and ``np.kron(A, B)`` composes mode 0 with mode 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

# Validation tolerances; comfortably above double-precision noise for the
# matrix sizes handled here (up to ~1300 x 1300).
HERMITICITY_TOL = 1e-10
POSITIVITY_TOL = 1e-8
NORM_TOL = 1e-10


@dataclass(frozen=True)
class FockDims:
    """Per-mode truncation dimensions; mode m carries Fock levels 0..dims[m]-1."""

    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if not self.dims:
            raise ValueError("at least one mode is required")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"every truncation must be >= 1, got {self.dims}")

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    def flat_index(self, occupation) -> int:
        """Flat index of the basis state |n_0, n_1, ...>."""
        return int(np.ravel_multi_index(tuple(occupation), self.dims))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        """Occupation numbers of the flat basis index."""
        return tuple(int(n) for n in np.unravel_index(flat, self.dims))

    def restricted(self, keep) -> "FockDims":
        return FockDims(tuple(self.dims[m] for m in keep))


def _as_dims(dims) -> FockDims:
    if isinstance(dims, FockDims):
        return dims
    if isinstance(dims, (int, np.integer)):
        return FockDims((int(dims),))
    return FockDims(tuple(dims))


@dataclass
class PureState:
    """State vector over a truncated multi-mode Fock basis."""

    dims: FockDims
    amplitudes: np.ndarray

    def __post_init__(self):
        self.dims = _as_dims(self.dims)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != self.dims.size:
            raise ValueError(
                f"amplitude vector of length {self.amplitudes.size} does not match "
                f"dims {self.dims.dims}"
            )

    @property
    def n_modes(self) -> int:
        return self.dims.n_modes

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        n = self.norm()
        if n <= 0:
            raise ValueError("cannot normalize a zero state")
        return PureState(self.dims, self.amplitudes / n)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims.dims)

    def to_density(self) -> "DensityOperator":
        return DensityOperator(self.dims, np.outer(self.amplitudes, self.amplitudes.conj()))

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass
class DensityOperator:
    """Hermitian unit-trace operator over a truncated multi-mode Fock basis."""

    dims: FockDims
    matrix: np.ndarray

    def __post_init__(self):
        self.dims = _as_dims(self.dims)
        self.matrix = np.asarray(self.matrix, dtype=complex)
        size = self.dims.size
        if self.matrix.shape != (size, size):
            raise ValueError(
                f"matrix of shape {self.matrix.shape} does not match dims {self.dims.dims}"
            )

    @property
    def n_modes(self) -> int:
        return self.dims.n_modes

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def normalized(self) -> "DensityOperator":
        t = self.trace()
        if t <= 0:
            raise ValueError("cannot normalize an operator with non-positive trace")
        return DensityOperator(self.dims, self.matrix / t)

    def tensor_view(self) -> np.ndarray:
        return self.matrix.reshape(self.dims.dims + self.dims.dims)

    def validate(self, positivity_tol: float = POSITIVITY_TOL):
        """Raise if the operator is not Hermitian, unit-trace and positive within tolerance."""
        h = np.linalg.norm(self.matrix - self.matrix.conj().T, ord="fro")
        if h > HERMITICITY_TOL * max(1.0, np.linalg.norm(self.matrix, ord="fro")):
            raise ValueError(f"matrix is not Hermitian (deviation {h:.3e})")
        if abs(self.trace() - 1.0) > max(NORM_TOL, 1e3 * np.finfo(float).eps * self.dims.size):
            raise ValueError(f"trace {self.trace()} is not 1")
        w = np.linalg.eigvalsh((self.matrix + self.matrix.conj().T) / 2)
        if w.min() < -positivity_tol:
            raise ValueError(f"minimum eigenvalue {w.min():.3e} below -{positivity_tol}")


@dataclass(frozen=True)
class ModeOperator:
    """Single-mode operator on a truncated basis."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))
        if self.matrix.shape != (self.dim, self.dim):
            raise ValueError("matrix does not match the stated dimension")

    @staticmethod
    def annihilation(dim: int) -> "ModeOperator":
        return ModeOperator(dim, destroy(dim))

    @staticmethod
    def creation(dim: int) -> "ModeOperator":
        return ModeOperator(dim, destroy(dim).conj().T)

    @staticmethod
    def number(dim: int) -> "ModeOperator":
        return ModeOperator(dim, np.diag(np.arange(dim, dtype=float)).astype(complex))


def destroy(dim: int) -> np.ndarray:
    """Annihilation operator: a|n> = sqrt(n)|n-1> on the truncated basis."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def fock_ket(dims, occupation) -> PureState:
    """Basis state |n_0, n_1, ...>."""
    fd = _as_dims(dims)
    occupation = tuple(int(n) for n in occupation)
    if len(occupation) != fd.n_modes:
        raise ValueError("occupation length does not match mode count")
    if any(n < 0 or n >= d for n, d in zip(occupation, fd.dims)):
        raise ValueError(f"occupation {occupation} outside truncation {fd.dims}")
    amps = np.zeros(fd.size, dtype=complex)
    amps[fd.flat_index(occupation)] = 1.0
    return PureState(fd, amps)


def vacuum(dims) -> PureState:
    fd = _as_dims(dims)
    return fock_ket(fd, (0,) * fd.n_modes)


def coherent_ket(dim: int, alpha: complex) -> PureState:
    """Truncated coherent state with amplitudes exp(-|a|^2/2) a^n / sqrt(n!).

    The truncated vector is deliberately not renormalized; its norm deficit
    is the weight lost above the cutoff.
    """
    n = np.arange(dim)
    log_fact = np.cumsum(np.concatenate(([0.0], np.log(np.arange(1, dim, dtype=float)))))
    amps = np.exp(-abs(alpha) ** 2 / 2) * alpha ** n / np.exp(log_fact / 2)
    return PureState(FockDims((dim,)), amps)


def two_mode_squeezed_ket(r: float, dim: int) -> PureState:
    """Two-mode squeezed vacuum sum_n tanh(r)^n |n,n> / cosh(r), truncated and normalized."""
    fd = FockDims((dim, dim))
    amps = np.zeros(fd.size, dtype=complex)
    t = math.tanh(r)
    for n in range(dim):
        amps[fd.flat_index((n, n))] = t ** n / math.cosh(r)
    return PureState(fd, amps).normalized()


def tensor(*objects):
    """Kronecker composition of states or operators; dims concatenate.

    Accepts PureState, DensityOperator, ModeOperator or raw matrices. Pure
    states are promoted to density operators when mixed with them.
    """
    if len(objects) == 1 and isinstance(objects[0], (list, tuple)):
        objects = tuple(objects[0])
    if not objects:
        raise ValueError("tensor of an empty sequence")
    if all(isinstance(o, PureState) for o in objects):
        amps = objects[0].amplitudes
        dims = objects[0].dims.dims
        for o in objects[1:]:
            amps = np.kron(amps, o.amplitudes)
            dims = dims + o.dims.dims
        return PureState(FockDims(dims), amps)
    if all(isinstance(o, (PureState, DensityOperator)) for o in objects):
        mats = [o.to_density() if isinstance(o, PureState) else o for o in objects]
        m = mats[0].matrix
        dims = mats[0].dims.dims
        for o in mats[1:]:
            m = np.kron(m, o.matrix)
            dims = dims + o.dims.dims
        return DensityOperator(FockDims(dims), m)
    mats = [o.matrix if isinstance(o, ModeOperator) else np.asarray(o) for o in objects]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out every mode not listed in ``keep``; trace is preserved."""
    keep = sorted(set(int(m) for m in keep))
    n = rho.n_modes
    if not keep:
        raise ValueError("keep must be nonempty")
    if any(m < 0 or m >= n for m in keep):
        raise ValueError(f"mode indices {keep} invalid for {n} modes")
    letters = "abcdefghijklmnopqrstuvwxyz"
    ket = list(letters[:n])
    bra = []
    out = []
    next_free = n
    for m in range(n):
        if m in keep:
            bra.append(letters[next_free])
            next_free += 1
        else:
            bra.append(ket[m])
    for m in keep:
        out.append(ket[m])
    for m in keep:
        out.append(bra[m])
    spec = "".join(ket) + "".join(bra) + "->" + "".join(out)
    reduced = np.einsum(spec, rho.tensor_view())
    new_dims = rho.dims.restricted(keep)
    return DensityOperator(new_dims, reduced.reshape(new_dims.size, new_dims.size))


def beamsplitter_unitary(dim: int, transmissivity: float = 0.5) -> np.ndarray:
    """Two-mode beam-splitter matrix on equal truncations, transmissivity T.

    Convention (Heisenberg picture): a+ -> sqrt(T) a+ + sqrt(1-T) b+ and
    b+ -> -sqrt(1-T) a+ + sqrt(T) b+. The matrix is block diagonal in total
    photon number; blocks are the exact untruncated transformation projected
    onto the retained levels, so blocks with total number < dim are exactly
    unitary and higher blocks lose the weight that would cross the cutoff.
    """
    if not 0.0 < transmissivity <= 1.0:
        raise ValueError("transmissivity must lie in (0, 1]")
    theta = math.acos(math.sqrt(transmissivity))
    U = np.zeros((dim * dim, dim * dim), dtype=complex)
    for total in range(2 * dim - 1):
        size = total + 1
        gen = np.zeros((size, size))
        # generator -theta*(a+ b - b+ a) restricted to the fixed-total block,
        # indexed by the photon number j in the first mode
        for j in range(size - 1):
            g = math.sqrt((j + 1) * (total - j))
            gen[j + 1, j] = -theta * g
            gen[j, j + 1] = theta * g
        block = expm(gen)
        for j_out in range(size):
            if j_out >= dim or total - j_out >= dim:
                continue
            row = j_out * dim + (total - j_out)
            for j_in in range(size):
                if j_in >= dim or total - j_in >= dim:
                    continue
                U[row, j_in * dim + (total - j_in)] = block[j_out, j_in]
    return U


def squeezer_unitary(dim: int, s: float) -> np.ndarray:
    """Single-mode squeezer exp((s/2)(a^2 - a+^2)) via the truncated generator.

    Exactly unitary on the truncated space; faithful to the untruncated
    squeezer on low-photon subspaces.
    """
    a = destroy(dim)
    gen = 0.5 * s * (a @ a - (a @ a).conj().T)
    return expm(gen)


def displacement_unitary(dim: int, alpha: complex) -> np.ndarray:
    """Single-mode displacement exp(alpha a+ - conj(alpha) a) via the truncated generator."""
    a = destroy(dim)
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return expm(gen)


def _apply_to_axes(tensor_arr: np.ndarray, op_tensor: np.ndarray, axes, k: int) -> np.ndarray:
    """Contract op_tensor (rank 2k, outputs first) into the given k axes."""
    moved = np.tensordot(op_tensor, tensor_arr, axes=(tuple(range(k, 2 * k)), tuple(axes)))
    return np.moveaxis(moved, range(k), axes)


def apply_unitary(state, unitary: np.ndarray, modes):
    """Apply a unitary acting on the listed modes; conjugation for density operators."""
    modes = tuple(int(m) for m in modes)
    dims = state.dims.dims
    if any(m < 0 or m >= len(dims) for m in modes):
        raise ValueError(f"mode indices {modes} invalid for {len(dims)} modes")
    tdims = tuple(dims[m] for m in modes)
    target_size = int(np.prod(tdims))
    U = np.asarray(unitary, dtype=complex)
    if U.shape != (target_size, target_size):
        raise ValueError(
            f"unitary of shape {U.shape} does not match target dims {tdims}"
        )
    k = len(modes)
    U_t = U.reshape(tdims + tdims)
    if isinstance(state, PureState):
        out = _apply_to_axes(state.tensor_view(), U_t, modes, k)
        return PureState(state.dims, out.reshape(-1))
    if isinstance(state, DensityOperator):
        n = state.n_modes
        t = state.tensor_view()
        t = _apply_to_axes(t, U_t, modes, k)
        bra_axes = tuple(m + n for m in modes)
        t = _apply_to_axes(t, U_t.conj(), bra_axes, k)
        return DensityOperator(state.dims, t.reshape(state.dims.size, state.dims.size))
    raise TypeError(f"unsupported state type {type(state)!r}")


def apply_single_mode_operator(state, op: np.ndarray, mode: int):
    """Apply a (not necessarily unitary) single-mode operator A: psi -> A psi, rho -> A rho A+."""
    op = np.asarray(op, dtype=complex)
    d = state.dims.dims[mode]
    if op.shape != (d, d):
        raise ValueError("operator does not match the mode dimension")
    if isinstance(state, PureState):
        out = _apply_to_axes(state.tensor_view(), op, (mode,), 1)
        return PureState(state.dims, out.reshape(-1))
    n = state.n_modes
    t = _apply_to_axes(state.tensor_view(), op, (mode,), 1)
    t = _apply_to_axes(t, op.conj(), (mode + n,), 1)
    return DensityOperator(state.dims, t.reshape(state.dims.size, state.dims.size))


def pad(state, new_dims):
    """Embed a state into larger per-mode truncations (zero fill).

    Shrinking a dimension is allowed and simply drops the discarded levels;
    callers are responsible for renormalizing in that case.
    """
    fd = _as_dims(new_dims)
    old = state.dims.dims
    if fd.n_modes != len(old):
        raise ValueError("mode count cannot change when padding")
    slices = tuple(slice(0, min(o, n)) for o, n in zip(old, fd.dims))
    if isinstance(state, PureState):
        out = np.zeros(fd.dims, dtype=complex)
        out[slices] = state.tensor_view()[slices]
        return PureState(fd, out.reshape(-1))
    out = np.zeros(fd.dims + fd.dims, dtype=complex)
    out[slices + slices] = state.tensor_view()[slices + slices]
    return DensityOperator(fd, out.reshape(fd.size, fd.size))
