"""Diagnostics: logarithmic negativity, purity, fidelity, Wigner grids, Gaussianity.

Logarithms are base 2 throughout, so entanglement is reported in ebits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .fock import DensityOperator, PureState
from .gaussian import covariance_of_state, to_fock_density

LOG_BASE = 2


def _as_density(state) -> DensityOperator:
    return state.to_density() if isinstance(state, PureState) else state


def logarithmic_negativity(state) -> float:
    """log2 of the trace norm of the partial transpose over the second mode.

    Accepts a normalized two-mode pure or mixed state; clamps tiny negative
    results (PPT states) to zero.
    """
    rho = _as_density(state)
    if rho.n_modes != 2:
        raise ValueError("logarithmic negativity is defined here for two-mode states")
    da, db = rho.dims.dims
    pt = rho.tensor_view().transpose(0, 3, 2, 1).reshape(da * db, da * db)
    trace_norm = float(np.sum(np.abs(np.linalg.eigvalsh(pt))))
    return max(0.0, math.log2(trace_norm))


def purity(state) -> float:
    """tr rho^2; equals 1 exactly for pure states."""
    if isinstance(state, PureState):
        return float(state.norm() ** 4)
    return float(np.real(np.einsum("ij,ji->", state.matrix, state.matrix)))


def fidelity(state_a, state_b) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2, in [0, 1]."""
    if isinstance(state_a, PureState) and isinstance(state_b, PureState):
        return float(abs(state_a.overlap(state_b)) ** 2)
    if isinstance(state_a, PureState):
        psi = state_a.amplitudes
        return float(np.real(np.vdot(psi, state_b.matrix @ psi)))
    if isinstance(state_b, PureState):
        return fidelity(state_b, state_a)
    w, V = np.linalg.eigh(state_a.matrix)
    sqrt_a = (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T
    inner = sqrt_a @ state_b.matrix @ sqrt_a
    evals = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(min(1.0, np.sum(np.sqrt(np.clip(evals, 0.0, None))) ** 2))


@dataclass
class WignerGrid:
    """W(x, p) sampled on a rectangular grid; values[i, j] = W(xs[i], ps[j])."""

    xs: np.ndarray
    ps: np.ndarray
    values: np.ndarray

    def integral(self) -> float:
        dx = self.xs[1] - self.xs[0] if len(self.xs) > 1 else 1.0
        dp = self.ps[1] - self.ps[0] if len(self.ps) > 1 else 1.0
        return float(np.sum(self.values) * dx * dp)

    def minimum(self) -> float:
        return float(self.values.min())


def _displacement_elements(beta: np.ndarray, dim: int) -> np.ndarray:
    """Exact matrix elements <m|D(beta)|n> for m, n < dim, vectorized over beta.

    Uses the associated-Laguerre closed form; for m >= n,
    <m|D|n> = sqrt(n!/m!) beta^(m-n) exp(-|beta|^2/2) L_n^(m-n)(|beta|^2),
    and the m < n elements follow from <m|D(beta)|n> = conj(<n|D(-beta)|m>).
    """
    u = np.abs(beta) ** 2
    env = np.exp(-u / 2)
    logf = gammaln(np.arange(1, dim + 1, dtype=float))
    out = np.empty((dim, dim) + beta.shape, dtype=complex)
    for m in range(dim):
        for n in range(m + 1):
            pref = math.exp(0.5 * (logf[n] - logf[m]))
            lag = eval_genlaguerre(n, m - n, u)
            out[m, n] = pref * beta ** (m - n) * env * lag
            if m != n:
                out[n, m] = pref * (-np.conj(beta)) ** (m - n) * env * lag
    return out


def wigner(state, x_range, p_range, resolution) -> WignerGrid:
    """Wigner function of a single-mode state via the displaced-parity form.

    W(x, p) = (1/pi) sum_n (-1)^n <n| D+(alpha) rho D(alpha) |n> with
    alpha = (x + i p)/sqrt(2), evaluated through exact displacement matrix
    elements so finite-support states incur no parity-sum truncation error.
    """
    rho = _as_density(state)
    if rho.n_modes != 1:
        raise ValueError("Wigner grids are computed for single-mode states")
    n = int(resolution)
    if n < 2:
        raise ValueError("grid too coarse: need at least 2 points per axis")
    xs = np.linspace(float(x_range[0]), float(x_range[1]), n)
    ps = np.linspace(float(p_range[0]), float(p_range[1]), n)
    if max(xs[1] - xs[0], ps[1] - ps[0]) > 1.0:
        raise ValueError("grid too coarse: spacing exceeds the vacuum width")
    d = rho.dims.dims[0]
    X, P = np.meshgrid(xs, ps, indexing="ij")
    beta = np.sqrt(2.0) * (X + 1j * P)  # 2*alpha
    D = _displacement_elements(beta, d)
    signs = (-1.0) ** np.arange(d)
    w = np.einsum("nm,mnxp->xp", rho.matrix * signs[:, None], D)
    return WignerGrid(xs, ps, np.real(w) / math.pi)


def gaussianity_distance(state) -> float:
    """1 - fidelity to the Gaussian state with identical first and second moments.

    Zero (up to truncation) exactly on Gaussian states; the reference Gaussian
    is built on the same truncated basis.
    """
    rho = _as_density(state)
    gs = covariance_of_state(rho)
    reference = to_fock_density(gs, rho.dims)
    return max(0.0, 1.0 - fidelity(rho, reference))
