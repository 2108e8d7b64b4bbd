"""The iterative two-copy distillation driver.

One step: clone the current state, mix each party's pair of copies on a
balanced beam splitter, condition the second output of each pair on the
detector's success effect, and retain the first outputs. Iterating drives
any input toward a Gaussian state while (for good detectors) raising its
entanglement.

Mode layout inside a two-party step: (A copy-1, A copy-2, B copy-1, B copy-2);
the copy-2 slots are measured, the copy-1 slots are retained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import measures
from .fock import (
    DensityOperator,
    FockDims,
    PureState,
    apply_unitary,
    beamsplitter_unitary,
    pad,
    tensor,
    two_mode_squeezed_ket,
    vacuum,
)
from .measurements import (
    DetectorModel,
    HomodyneFilter,
    IdealVacuum,
    MeasurementOutcome,
    P_FLOOR,
    RareOutcomeError,
    condition_on,
    success_effect,
    vacuum_effect,
)

DEFAULT_TRUNCATION = {1: 10, 2: 6}
DEFAULT_MAX_TRUNCATION = {1: 16, 2: 10}
LEAK_THRESHOLD = 1e-6


@dataclass
class ProtocolConfig:
    """Run parameters for the iterated protocol."""

    steps: int
    epsilon: float = 0.95
    mode_count: int = 2
    truncation: Optional[int] = None
    max_truncation: Optional[int] = None
    detector: DetectorModel = field(default_factory=IdealVacuum)
    leak_threshold: float = LEAK_THRESHOLD
    initial_state: Optional[Union[PureState, DensityOperator]] = None

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.mode_count not in (1, 2):
            raise ValueError("mode_count must be 1 or 2 per copy")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.truncation is None:
            self.truncation = DEFAULT_TRUNCATION[self.mode_count]
        if self.truncation < 2:
            raise ValueError("truncation must be >= 2")
        if self.max_truncation is None:
            self.max_truncation = max(self.truncation, DEFAULT_MAX_TRUNCATION[self.mode_count])
        if self.max_truncation < self.truncation:
            raise ValueError("max_truncation must be >= truncation")


@dataclass
class IterationRecord:
    """Per-step diagnostics; step 0 describes the initial state."""

    step: int
    p_success: float
    p_cumulative: float
    log_negativity: float
    purity: float
    gaussianity: float
    leak: float


@dataclass
class DistillationTrace:
    config: ProtocolConfig
    records: list[IterationRecord]
    final_state: Union[PureState, DensityOperator]
    states: Optional[list] = None


def prepare_epsilon_state(epsilon: float, d: int) -> PureState:
    """Two-mode input family (|0,0> + epsilon |1,1>)/sqrt(1 + epsilon^2)."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if d < 2:
        raise ValueError("truncation must be >= 2")
    fd = FockDims((d, d))
    amps = np.zeros(fd.size, dtype=complex)
    amps[fd.flat_index((0, 0))] = 1.0
    amps[fd.flat_index((1, 1))] = epsilon
    return PureState(fd, amps / math.sqrt(1.0 + epsilon**2))


def prepare_single_mode_state(epsilon: float, d: int) -> PureState:
    """Single-mode input family (|0> + epsilon |1>)/sqrt(1 + epsilon^2)."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if d < 2:
        raise ValueError("truncation must be >= 2")
    amps = np.zeros(d, dtype=complex)
    amps[0] = 1.0
    amps[1] = epsilon
    return PureState(FockDims((d,)), amps / math.sqrt(1.0 + epsilon**2))


def prepare_photon_subtracted(r: float, t: float, d: int) -> MeasurementOutcome:
    """Two-mode squeezed vacuum with a weak tap on each mode, conditioned on
    a click (one or more photons) at both tap detectors.

    Returns the normalized two-mode output together with the joint click
    probability. Non-Gaussian by construction.
    """
    if not r > 0:
        raise ValueError("source squeezing r must be positive")
    if not 0.0 < t < 1.0:
        raise ValueError("tap transmissivity must lie in (0, 1)")
    source = two_mode_squeezed_ket(r, d)
    full = tensor(source, vacuum(d), vacuum(d))  # modes (A, B, tapA, tapB)
    U = beamsplitter_unitary(d, transmissivity=t)
    full = apply_unitary(full, U, (0, 2))
    full = apply_unitary(full, U, (1, 3))
    click = np.eye(d, dtype=complex) - vacuum_effect(d)
    first = condition_on(full, click, 3)
    second = condition_on(first.conditional_state, click, 2)
    joint = first.probability * second.probability
    if joint < P_FLOOR:
        raise RareOutcomeError(f"joint click probability {joint:.3e} below {P_FLOOR}")
    return MeasurementOutcome(second.conditional_state, joint)


def _success_diag(detector: DetectorModel, d: int) -> np.ndarray:
    effect = success_effect(detector, d)
    return np.real(np.diag(effect)).copy()


def _pure_two_party_step(state: PureState, e: np.ndarray) -> MeasurementOutcome:
    d = state.dims.dims[0]
    u = beamsplitter_unitary(d).reshape(d, d, d, d)
    psi = state.tensor_view()
    # phi[a, m, b, n]: (A retained, A measured, B retained, B measured)
    x = np.einsum("amip,ij->ampj", u, psi, optimize=True)
    y = np.einsum("ampj,pq->amjq", x, psi, optimize=True)
    phi = np.einsum("amjq,bnjq->ambn", y, u, optimize=True)
    leak = max(0.0, 1.0 - float(np.sum(np.abs(phi) ** 2)))
    nonzero = np.flatnonzero(e > 1e-14)
    out_dims = FockDims((d, d))
    if nonzero.size == 1:
        z = int(nonzero[0])
        ket = phi[:, z, :, z] * math.sqrt(e[z])
        p = e[z] * float(np.sum(np.abs(phi[:, z, :, z]) ** 2))
        if p < P_FLOOR:
            raise RareOutcomeError(f"outcome probability {p:.3e} below {P_FLOOR}")
        out = PureState(out_dims, ket.reshape(-1)).normalized()
        return MeasurementOutcome(out, p, leak)
    weighted = phi * np.sqrt(e)[None, :, None, None] * np.sqrt(e)[None, None, None, :]
    m = weighted.transpose(0, 2, 1, 3).reshape(d * d, d * d)
    p = float(np.sum(np.abs(m) ** 2))
    if p < P_FLOOR:
        raise RareOutcomeError(f"outcome probability {p:.3e} below {P_FLOOR}")
    rho = (m @ m.conj().T) / p
    return MeasurementOutcome(DensityOperator(out_dims, rho), p, leak)


def _density_two_party_step(state: DensityOperator, e: np.ndarray) -> MeasurementOutcome:
    d = state.dims.dims[0]
    U = beamsplitter_unitary(d)
    u = U.reshape(d, d, d, d)
    r = state.tensor_view()  # [ket A, ket B, bra A, bra B]
    # Fused contraction of the duplicated state through both beam splitters and
    # the diagonal success effects; never materializes the four-mode matrix.
    ka = np.einsum("m,amip,cmIP->aciIpP", e, u, u.conj(), optimize=True)
    t = np.einsum("aciIpP,ijIJ->acpPjJ", ka, r, optimize=True)
    s = np.einsum("acpPjJ,pqPQ->acjJqQ", t, r, optimize=True)
    kb = np.einsum("n,bnjq,dnJQ->bdjJqQ", e, u, u.conj(), optimize=True)
    out = np.einsum("acjJqQ,bdjJqQ->abcd", s, kb, optimize=True)
    # truncation loss of the mixing stage: trace of the post-splitter state
    uu = (U.conj().T @ U).reshape(d, d, d, d)
    x = np.einsum("ipIP,ijIJ->pPjJ", uu, r, optimize=True)
    y = np.einsum("pPjJ,pqPQ->jJqQ", x, r, optimize=True)
    trace_after = float(np.real(np.einsum("jJqQ,jqJQ->", y, uu, optimize=True)))
    leak = max(0.0, 1.0 - trace_after)
    p = float(np.real(np.einsum("abab->", out)))
    if p < P_FLOOR:
        raise RareOutcomeError(f"outcome probability {p:.3e} below {P_FLOOR}")
    D = d * d
    rho = out.reshape(D, D) / p
    rho = (rho + rho.conj().T) / 2
    return MeasurementOutcome(DensityOperator(FockDims((d, d)), rho), p, leak)


def one_step(state, detector: DetectorModel) -> MeasurementOutcome:
    """One distillation step on a two-mode state under the given detector.

    Clones the input, mixes each party's copies on a balanced beam splitter,
    and conditions the measured output of each party on the detector's
    success effect (applied independently at both parties).
    """
    dims = state.dims.dims
    if len(dims) != 2 or dims[0] != dims[1]:
        raise ValueError(f"expected a two-mode state with equal truncations, got {dims}")
    e = _success_diag(detector, dims[0])
    if isinstance(state, PureState):
        return _pure_two_party_step(state, e)
    if isinstance(state, DensityOperator):
        return _density_two_party_step(state, e)
    raise TypeError(f"unsupported state type {type(state)!r}")


def _pure_single_step(state: PureState, e: np.ndarray) -> MeasurementOutcome:
    d = state.dims.dims[0]
    u = beamsplitter_unitary(d).reshape(d, d, d, d)
    psi = state.amplitudes
    phi = np.einsum("amip,i,p->am", u, psi, psi, optimize=True)
    leak = max(0.0, 1.0 - float(np.sum(np.abs(phi) ** 2)))
    nonzero = np.flatnonzero(e > 1e-14)
    out_dims = FockDims((d,))
    if nonzero.size == 1:
        z = int(nonzero[0])
        p = e[z] * float(np.sum(np.abs(phi[:, z]) ** 2))
        if p < P_FLOOR:
            raise RareOutcomeError(f"outcome probability {p:.3e} below {P_FLOOR}")
        out = PureState(out_dims, phi[:, z] * math.sqrt(e[z])).normalized()
        return MeasurementOutcome(out, p, leak)
    m = phi * np.sqrt(e)[None, :]
    p = float(np.sum(np.abs(m) ** 2))
    if p < P_FLOOR:
        raise RareOutcomeError(f"outcome probability {p:.3e} below {P_FLOOR}")
    rho = (m @ m.conj().T) / p
    return MeasurementOutcome(DensityOperator(out_dims, rho), p, leak)


def _density_single_step(state: DensityOperator, e: np.ndarray) -> MeasurementOutcome:
    d = state.dims.dims[0]
    U = beamsplitter_unitary(d)
    u = U.reshape(d, d, d, d)
    r = state.matrix
    x = np.einsum("amip,iI->amIp", u, r, optimize=True)
    y = np.einsum("amIp,pP->amIP", x, r, optimize=True)
    out = np.einsum("amIP,m,cmIP->ac", y, e, u.conj(), optimize=True)
    uu = (U.conj().T @ U).reshape(d, d, d, d)
    trace_after = float(np.real(np.einsum("ipIP,Ii,Pp->", uu, r, r, optimize=True)))
    leak = max(0.0, 1.0 - trace_after)
    p = float(np.real(np.trace(out)))
    if p < P_FLOOR:
        raise RareOutcomeError(f"outcome probability {p:.3e} below {P_FLOOR}")
    rho = out / p
    rho = (rho + rho.conj().T) / 2
    return MeasurementOutcome(DensityOperator(FockDims((d,)), rho), p, leak)


def one_step_single_mode(state, detector: DetectorModel) -> MeasurementOutcome:
    """One step of the single-party variant: two copies, one balanced beam
    splitter, one detector on the second output."""
    dims = state.dims.dims
    if len(dims) != 1:
        raise ValueError(f"expected a single-mode state, got {dims}")
    e = _success_diag(detector, dims[0])
    if isinstance(state, PureState):
        return _pure_single_step(state, e)
    if isinstance(state, DensityOperator):
        return _density_single_step(state, e)
    raise TypeError(f"unsupported state type {type(state)!r}")


def homodyne_step(state, x: float) -> MeasurementOutcome:
    """One two-mode step conditioning on heterodyne outcomes inside |alpha| < x."""
    return one_step(state, HomodyneFilter(x))


def _metrics(state):
    log_neg = (
        measures.logarithmic_negativity(state) if state.dims.n_modes == 2 else math.nan
    )
    pur = measures.purity(state)
    try:
        gauss = measures.gaussianity_distance(state)
    except ValueError:
        gauss = math.nan
    return log_neg, pur, gauss


def _adaptive_step(state, config: ProtocolConfig):
    """Run one step, raising the truncation by 2 (up to the cap) while the
    post-mixing leak exceeds the threshold."""
    step_fn = one_step if config.mode_count == 2 else one_step_single_mode
    current = state
    while True:
        outcome = step_fn(current, config.detector)
        d = current.dims.dims[0]
        if outcome.leak <= config.leak_threshold or d >= config.max_truncation:
            return outcome
        new_d = min(d + 2, config.max_truncation)
        current = pad(current, (new_d,) * current.dims.n_modes)


def run(config: ProtocolConfig, keep_states: bool = False) -> DistillationTrace:
    """Iterate the protocol, recording per-step diagnostics.

    The trace has steps + 1 records; record 0 describes the initial state.
    Truncation is raised adaptively when a step leaks more than the
    threshold, capped at max_truncation (beyond the cap the leak is
    reported in the record rather than raised). With keep_states the state
    after every step is retained on the trace.
    """
    if config.initial_state is not None:
        state = config.initial_state
        if state.dims.n_modes != config.mode_count:
            raise ValueError("initial state mode count does not match the configuration")
    elif config.mode_count == 2:
        state = prepare_epsilon_state(config.epsilon, config.truncation)
    else:
        state = prepare_single_mode_state(config.epsilon, config.truncation)

    log_neg, pur, gauss = _metrics(state)
    records = [IterationRecord(0, 1.0, 1.0, log_neg, pur, gauss, 0.0)]
    states = [state]
    cumulative = 1.0
    for k in range(1, config.steps + 1):
        try:
            outcome = _adaptive_step(state, config)
        except RareOutcomeError as exc:
            raise RareOutcomeError(f"step {k}: {exc}") from exc
        state = outcome.conditional_state
        cumulative *= outcome.probability
        log_neg, pur, gauss = _metrics(state)
        records.append(
            IterationRecord(
                k, outcome.probability, cumulative, log_neg, pur, gauss, outcome.leak
            )
        )
        if keep_states:
            states.append(state)
    return DistillationTrace(config, records, state, states if keep_states else None)
