"""Exact truncated Fock-space engine: states, photon subtraction, statistics.

Single-mode states are dense density matrices over the number basis
|0>..|nmax>.  Multi-mode states are dense density matrices over the
tensor product of such spaces.  All operations are pure functions; the
backing arrays are frozen so values can be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidState,
    NonUnitaryParams,
    OutOfTruncation,
    TailMassExceeded,
    TruncationDegraded,
    UndefinedG2,
    VacuumSubtraction,
)

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
DEFAULT_TAIL_TOL = 1e-8
DEFAULT_NMAX = 40
VACUUM_WEIGHT_FLOOR = 1e-14
UNITARY_PARAM_TOL = 1e-12


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _validate_density(elements: np.ndarray, what: str) -> np.ndarray:
    arr = np.array(elements, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidState(f"{what}: elements must be a square matrix")
    if np.abs(arr - arr.conj().T).max() > HERMITICITY_TOL:
        raise InvalidState(f"{what}: not Hermitian within {HERMITICITY_TOL}")
    tr = arr.trace().real
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidState(f"{what}: trace {tr} differs from 1 beyond {TRACE_TOL}")
    if np.linalg.eigvalsh(arr).min() < -PSD_TOL:
        raise InvalidState(f"{what}: negative eigenvalue below -{PSD_TOL}")
    return _freeze(arr)


@dataclass(frozen=True)
class DensityMatrix:
    """Truncated single-mode quantum state in the Fock basis.

    ``tail_mass`` records the probability the untruncated state carries
    above the cutoff (exact for the constructors, an estimate after
    photon subtraction).
    """

    elements: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "elements", _validate_density(self.elements, "DensityMatrix")
        )

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def nmax(self) -> int:
        return self.dim - 1

    def populations(self) -> np.ndarray:
        return np.diag(self.elements).real.copy()

    def mean_photons(self) -> float:
        n = np.arange(self.dim)
        return float(np.dot(n, self.populations()))


@dataclass(frozen=True)
class StateStats:
    """Mean photon number and normalized second-order correlation."""

    mean_n: float
    g2: float


@dataclass(frozen=True)
class MultiModeState:
    """Dense density matrix over a tensor product of truncated modes.

    The joint index is C-ordered over ``mode_labels``: the first label is
    the slowest-varying factor.
    """

    mode_labels: tuple[str, ...]
    per_mode_dim: tuple[int, ...]
    elements: np.ndarray

    def __post_init__(self):
        labels = tuple(self.mode_labels)
        dims = tuple(int(d) for d in self.per_mode_dim)
        if len(labels) != len(dims) or len(set(labels)) != len(labels):
            raise InvalidState("mode labels must be unique and match dims")
        object.__setattr__(self, "mode_labels", labels)
        object.__setattr__(self, "per_mode_dim", dims)
        arr = _validate_density(self.elements, "MultiModeState")
        if arr.shape[0] != math.prod(dims):
            raise InvalidState("elements size does not match per-mode dims")
        object.__setattr__(self, "elements", arr)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    def axis(self, label: str) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise DimensionMismatch(f"no mode labeled {label!r}") from None

    def as_tensor(self) -> np.ndarray:
        """Elements reshaped to ket axes followed by bra axes."""
        dims = self.per_mode_dim
        return self.elements.reshape(dims + dims)

    def reduced(self, label: str) -> DensityMatrix:
        """Partial trace down to a single mode."""
        keep = self.axis(label)
        t = self.as_tensor()
        m = len(self.per_mode_dim)
        for ax in reversed([i for i in range(m) if i != keep]):
            t = np.trace(t, axis1=ax, axis2=ax + (t.ndim // 2))
        return DensityMatrix(t, tail_mass=0.0)

    def mode_mean_photons(self, label: str) -> float:
        return self.reduced(label).mean_photons()

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.elements, self.elements).real)


def tensor_states(*factors: tuple[str, DensityMatrix]) -> MultiModeState:
    """Tensor labeled single-mode states into one multi-mode state."""
    labels = tuple(lbl for lbl, _ in factors)
    dims = tuple(rho.dim for _, rho in factors)
    joint = factors[0][1].elements
    for _, rho in factors[1:]:
        joint = np.kron(joint, rho.elements)
    return MultiModeState(labels, dims, joint)


# ---------------------------------------------------------------------------
# constructors


def make_thermal(
    nbar: float, nmax: int = DEFAULT_NMAX, tail_tol: float = DEFAULT_TAIL_TOL
) -> DensityMatrix:
    """Thermal state with Bose-Einstein weights, renormalized over 0..nmax."""
    if nbar < 0:
        raise ValueError("nbar must be non-negative")
    if nmax < 1:
        raise ValueError("nmax must be at least 1")
    if nbar == 0:
        return make_fock(0, nmax)
    q = nbar / (1.0 + nbar)
    weights = q ** np.arange(nmax + 1) / (1.0 + nbar)
    tail = q ** (nmax + 1)
    if tail > tail_tol:
        raise TailMassExceeded(
            f"thermal nbar={nbar} at nmax={nmax}: tail {tail:.3e} > {tail_tol:.1e}"
        )
    return DensityMatrix(np.diag(weights / weights.sum()), tail_mass=float(tail))


def make_coherent(
    alpha: complex, nmax: int = DEFAULT_NMAX, tail_tol: float = DEFAULT_TAIL_TOL
) -> DensityMatrix:
    """Pure coherent state, renormalized over 0..nmax."""
    if nmax < 1:
        raise ValueError("nmax must be at least 1")
    if alpha == 0:
        return make_fock(0, nmax)
    n = np.arange(nmax + 1)
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    amp = np.exp(-0.5 * abs(alpha) ** 2 + n * np.log(complex(alpha)) - 0.5 * log_fact)
    norm2 = float(np.vdot(amp, amp).real)
    tail = 1.0 - norm2
    if tail > tail_tol:
        raise TailMassExceeded(
            f"coherent |alpha|={abs(alpha)} at nmax={nmax}: "
            f"tail {tail:.3e} > {tail_tol:.1e}"
        )
    amp = amp / math.sqrt(norm2)
    return DensityMatrix(np.outer(amp, amp.conj()), tail_mass=max(tail, 0.0))


def make_fock(n: int, nmax: int = DEFAULT_NMAX) -> DensityMatrix:
    """Number state |n><n|."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > nmax:
        raise OutOfTruncation(f"Fock level {n} above truncation {nmax}")
    mat = np.zeros((nmax + 1, nmax + 1), dtype=complex)
    mat[n, n] = 1.0
    return DensityMatrix(mat, tail_mass=0.0)


def mix(states: list[DensityMatrix], weights: list[float]) -> DensityMatrix:
    """Convex combination of equal-dimension states."""
    if len(states) != len(weights) or not states:
        raise ValueError("states and weights must be non-empty and equal length")
    dim = states[0].dim
    if any(s.dim != dim for s in states):
        raise DimensionMismatch("mixture components differ in dimension")
    w = np.asarray(weights, dtype=float)
    if (w < 0).any() or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be non-negative and sum to 1")
    mat = sum(wi * s.elements for wi, s in zip(w, states))
    tail = float(np.dot(w, [s.tail_mass for s in states]))
    return DensityMatrix(mat, tail_mass=tail)


# ---------------------------------------------------------------------------
# operators and statistics


def annihilation_matrix(nmax: int) -> np.ndarray:
    """Lowering operator on the truncated space: a[n-1, n] = sqrt(n)."""
    if nmax < 1:
        raise ValueError("nmax must be at least 1")
    return np.diag(np.sqrt(np.arange(1.0, nmax + 1)), k=1).astype(complex)


def stats(rho: DensityMatrix) -> StateStats:
    """Mean photon number and g2 = <a+ a+ a a> / <n>^2."""
    p = rho.populations()
    n = np.arange(rho.dim)
    mean_n = float(np.dot(n, p))
    if mean_n < VACUUM_WEIGHT_FLOOR:
        raise UndefinedG2("g2 undefined: mean photon number is zero")
    second = float(np.dot(n * (n - 1), p))
    return StateStats(mean_n=mean_n, g2=second / mean_n**2)


def subtract_photon(rho: DensityMatrix) -> tuple[DensityMatrix, float]:
    """Heralded single-photon subtraction: a rho a+ renormalized.

    The success weight Tr(a rho a+) equals the input mean photon number.
    The output tail_mass is the estimate (nmax+1) * tail_in / <n>, the
    leading term of the subtracted weight lost above the cutoff.
    """
    weight = rho.mean_photons()
    if weight < VACUUM_WEIGHT_FLOOR:
        raise VacuumSubtraction("cannot subtract a photon from (near-)vacuum")
    a = annihilation_matrix(rho.nmax)
    out = (a @ rho.elements @ a.conj().T) / weight
    tail = rho.tail_mass * rho.dim / weight
    return DensityMatrix(out, tail_mass=tail), float(weight)


def subtract_k(
    rho: DensityMatrix, k: int, tail_tol: float = DEFAULT_TAIL_TOL
) -> DensityMatrix:
    """k successive heralded subtractions, renormalizing after each."""
    if k < 0:
        raise ValueError("k must be non-negative")
    out = rho
    for step in range(k):
        out, _ = subtract_photon(out)
        if out.tail_mass > tail_tol:
            raise TruncationDegraded(
                f"tail estimate {out.tail_mass:.3e} > {tail_tol:.1e} "
                f"after {step + 1} subtractions"
            )
    return out


def fidelity(rho1: DensityMatrix, rho2: DensityMatrix) -> float:
    """Uhlmann fidelity (squared overlap convention), in [0, 1].

    Computed through the eigenbasis of each argument and averaged over
    the two orderings, so the result is exactly symmetric.
    """
    if rho1.dim != rho2.dim:
        raise DimensionMismatch(f"dims {rho1.dim} vs {rho2.dim}")
    a, b = rho1.elements, rho2.elements
    return 0.5 * (_fidelity_arrays(a, b) + _fidelity_arrays(b, a))


def _fidelity_arrays(m1: np.ndarray, m2: np.ndarray) -> float:
    w, v = np.linalg.eigh(m1)
    w = np.clip(w, 0.0, None)  # construction guarantees >= -1e-10
    sq1 = (v * np.sqrt(w)) @ v.conj().T
    inner = sq1 @ m2 @ sq1
    ev = np.linalg.eigvalsh((inner + inner.conj().T) / 2.0)
    root = np.sqrt(np.clip(ev, 0.0, None)).sum()
    return float(min(root * root, 1.0))


# ---------------------------------------------------------------------------
# two-mode unitaries


@lru_cache(maxsize=64)
def _beamsplitter_unitary_cached(dim_i: int, dim_j: int, theta: float) -> np.ndarray:
    ai = annihilation_matrix(dim_i - 1)
    aj = annihilation_matrix(dim_j - 1)
    gen = np.kron(ai.conj().T, aj) - np.kron(ai, aj.conj().T)
    # exp(theta gen) through the eigenbasis of the Hermitian i*gen
    evals, evecs = np.linalg.eigh(1j * gen)
    u = (evecs * np.exp(-1j * theta * evals)) @ evecs.conj().T
    return _freeze(u)


def beamsplitter_unitary(dim_i: int, dim_j: int, t: float, r: float) -> np.ndarray:
    """Two-mode mixing unitary exp(theta (ai+ aj - ai aj+)), t = cos, r = sin."""
    if abs(t * t + r * r - 1.0) > UNITARY_PARAM_TOL:
        raise NonUnitaryParams(f"t^2 + r^2 = {t * t + r * r} != 1")
    return _beamsplitter_unitary_cached(dim_i, dim_j, math.atan2(r, t))


def _apply_pair_unitary(
    tensor: np.ndarray, u: np.ndarray, nmodes: int, i: int, j: int, dims
) -> np.ndarray:
    """U . rho . U+ with U acting on mode axes (i, j) of a 2*nmodes tensor."""
    u4 = u.reshape(dims[i], dims[j], dims[i], dims[j])
    out = np.tensordot(u4, tensor, axes=([2, 3], [i, j]))
    out = np.moveaxis(out, [0, 1], [i, j])
    out = np.tensordot(u4.conj(), out, axes=([2, 3], [nmodes + i, nmodes + j]))
    return np.moveaxis(out, [0, 1], [nmodes + i, nmodes + j])


def beamsplitter_apply(
    state: MultiModeState, mode_i: str, mode_j: str, t: float, r: float
) -> MultiModeState:
    """Mix two labeled modes of a multi-mode state on a t/r beam splitter."""
    i, j = state.axis(mode_i), state.axis(mode_j)
    if i == j:
        raise DimensionMismatch("beam splitter needs two distinct modes")
    dims = state.per_mode_dim
    u = beamsplitter_unitary(dims[i], dims[j], t, r)
    out = _apply_pair_unitary(state.as_tensor(), u, len(dims), i, j, dims)
    return MultiModeState(
        state.mode_labels, dims, out.reshape(state.dim, state.dim)
    )


# ---------------------------------------------------------------------------
# plain-text serialization


def save_state_txt(path, rho: DensityMatrix) -> None:
    """Write a density matrix as plain text: header line 'dim,tail_mass'."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{rho.dim},{float(rho.tail_mass)!r}\n")
        for row in rho.elements:
            fh.write(
                ",".join(f"{float(z.real)!r}{float(z.imag):+}j" for z in row) + "\n"
            )


def load_state_txt(path) -> DensityMatrix:
    """Read a density matrix written by save_state_txt."""
    with open(path, "r", encoding="ascii") as fh:
        head = fh.readline().strip().split(",")
        dim, tail = int(head[0]), float(head[1])
        rows = [
            [complex(tok) for tok in fh.readline().strip().split(",")]
            for _ in range(dim)
        ]
    return DensityMatrix(np.array(rows, dtype=complex), tail_mass=tail)
