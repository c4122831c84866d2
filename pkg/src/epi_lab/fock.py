"""Truncated Fock-basis density operators and their spectral functionals.

Supports one- and two-mode states with per-mode cutoffs up to 128. The
truncation contract is that the top Fock level of every mode carries at most
TAIL_TOL population; constructors enforce it and channels re-check it after
acting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import (
    DimensionMismatchError,
    DomainError,
    LabelError,
    NegativeEigenvalueError,
    StateInvariantError,
    TailError,
)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
EIG_CLAMP = 1e-9
TAIL_TOL = 1e-8
MAX_CUTOFF = 128
SQRT2 = math.sqrt(2.0)


def annihilation(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1.0, d)), 1)


def quadrature_ops(d: int):
    """Q = (a + a^dag)/sqrt(2), P = -i (a - a^dag)/sqrt(2) as dense matrices."""
    a = annihilation(d)
    q = (a + a.T) / SQRT2
    p = -1j * (a - a.T) / SQRT2
    return q, p


def number_op(d: int) -> np.ndarray:
    return np.diag(np.arange(float(d)))


@dataclass
class FockState:
    """Density operator on one or two truncated bosonic modes."""

    mode_dims: tuple
    matrix: np.ndarray
    mode_labels: tuple = None

    def __post_init__(self):
        self.mode_dims = tuple(int(d) for d in self.mode_dims)
        if not 1 <= len(self.mode_dims) <= 2:
            raise DomainError("FockState supports one or two modes")
        if any(d < 1 or d > MAX_CUTOFF for d in self.mode_dims):
            raise DomainError(f"mode cutoffs must be in [1, {MAX_CUTOFF}]")
        if self.mode_labels is None:
            self.mode_labels = ("A",) if len(self.mode_dims) == 1 else ("A", "M")
        self.mode_labels = tuple(self.mode_labels)
        if len(self.mode_labels) != len(self.mode_dims):
            raise LabelError("one label per mode required")
        dim = int(np.prod(self.mode_dims))
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (dim, dim):
            raise DimensionMismatchError(
                f"matrix shape {self.matrix.shape} does not match mode dims {self.mode_dims}"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)

    def mode_index(self, label: str) -> int:
        if label not in self.mode_labels:
            raise LabelError(f"unknown mode label {label!r}")
        return self.mode_labels.index(label)

    def tensor(self) -> np.ndarray:
        """Matrix reshaped to one (row, col) index pair per mode."""
        dims = self.mode_dims
        return self.matrix.reshape(*dims, *dims)

    def tail_mass(self) -> float:
        """Largest top-level population over the modes."""
        t = self.tensor()
        if self.n_modes == 1:
            return float(np.real(t[-1, -1]))
        d0, d1 = self.mode_dims
        top0 = float(np.real(np.trace(t[d0 - 1, :, d0 - 1, :])))
        top1 = float(np.real(np.trace(t[:, d1 - 1, :, d1 - 1])))
        return max(top0, top1)

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def validate(self, full: bool = False):
        scale = max(1.0, float(np.abs(self.matrix).max()))
        if np.abs(self.matrix - self.matrix.conj().T).max() > HERMITICITY_TOL * scale:
            raise StateInvariantError("matrix is not Hermitian within tolerance")
        if abs(self.trace() - 1.0) > TRACE_TOL:
            raise StateInvariantError(f"trace {self.trace()} is not 1 within {TRACE_TOL}")
        if full:
            if eigenvalues(self).min() < -EIG_CLAMP:
                raise NegativeEigenvalueError("state has an eigenvalue below -1e-9")

    def check_tail(self, tol: float = TAIL_TOL):
        tm = self.tail_mass()
        if tm > tol:
            raise TailError(f"top Fock level holds population {tm:.3e} > {tol}")

    def copy(self) -> "FockState":
        return FockState(self.mode_dims, self.matrix.copy(), self.mode_labels)


def _hermitize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.conj().T)


def _eigvalsh(mat: np.ndarray) -> np.ndarray:
    # real-symmetric dispatch: halves the eigensolve cost for real states
    if np.abs(mat.imag).max() < 1e-14 * max(1.0, np.abs(mat.real).max()):
        return np.linalg.eigvalsh(mat.real)
    return np.linalg.eigvalsh(mat)


def eigenvalues(rho: FockState) -> np.ndarray:
    return _eigvalsh(rho.matrix)


# ---------------------------------------------------------------------------
# constructors


def _pure(psi: np.ndarray, dims, labels=None) -> FockState:
    psi = psi / np.linalg.norm(psi)
    return FockState(dims, np.outer(psi, psi.conj()), labels)


def vacuum(d: int, label: str = "A") -> FockState:
    psi = np.zeros(d)
    psi[0] = 1.0
    return _pure(psi, (d,), (label,))


def fock(n: int, d: int, label: str = "A") -> FockState:
    if n < 0:
        raise DomainError("Fock level must be nonnegative")
    if n >= d:
        raise TailError(f"level {n} does not fit below cutoff {d}")
    psi = np.zeros(d)
    psi[n] = 1.0
    state = _pure(psi, (d,), (label,))
    state.check_tail()
    return state


def thermal(N: float, d: int, label: str = "A") -> FockState:
    if N < 0:
        raise DomainError("mean photon number must be nonnegative")
    if N == 0:
        return vacuum(d, label)
    q = N / (N + 1.0)
    p = (1.0 - q) * q ** np.arange(d)
    p /= p.sum()
    state = FockState((d,), np.diag(p.astype(complex)), (label,))
    state.check_tail()
    return state


def coherent(alpha: complex, d: int, label: str = "A") -> FockState:
    n = np.arange(d)
    log_mag = n * math.log(abs(alpha)) if alpha != 0 else np.where(n == 0, 0.0, -np.inf)
    amps = np.exp(log_mag - 0.5 * gammaln(n + 1.0) - 0.5 * abs(alpha) ** 2)
    phase = np.exp(1j * np.angle(alpha) * n) if alpha != 0 else np.ones(d)
    state = _pure(amps * phase, (d,), (label,))
    state.check_tail()
    return state


def cat(alpha: complex, d: int, label: str = "A") -> FockState:
    """Even superposition of +/- alpha coherent states."""
    n = np.arange(d)
    if alpha == 0:
        return vacuum(d, label)
    log_mag = n * math.log(abs(alpha))
    amps = np.exp(log_mag - 0.5 * gammaln(n + 1.0) - 0.5 * abs(alpha) ** 2)
    amps = amps * np.exp(1j * np.angle(alpha) * n)
    amps[1::2] = 0.0
    state = _pure(amps, (d,), (label,))
    state.check_tail()
    return state


def two_mode_squeezed_vacuum(r: float, d: int, labels=("A", "M")) -> FockState:
    """Pure two-mode squeezed state with Schmidt weights (1-q) q^n, q = tanh(r)^2."""
    if r < 0:
        raise DomainError("squeezing parameter must be nonnegative")
    lam = math.tanh(r)
    amps = lam ** np.arange(d)
    psi = np.zeros((d, d))
    psi[np.arange(d), np.arange(d)] = amps
    state = _pure(psi.ravel(), (d, d), labels)
    state.check_tail()
    return state


def tmsv_r_for_k(k: float) -> float:
    """Squeezing parameter realizing diagonal covariance blocks k^2 I,
    through cosh(2r) = 2 k^2."""
    if k < 1 / SQRT2:
        raise DomainError("needs 2 k^2 >= 1")
    return 0.5 * math.acosh(2.0 * k ** 2)


def random_mixed(rank: int, d: int, seed: int, label: str = "A", support: int = None) -> FockState:
    """rho = G G^dag / tr with G an i.i.d. standard-complex-Gaussian matrix.

    G occupies the bottom `support` levels (default d - 2) so the truncation
    tail stays clean at the stated cutoff.
    """
    if rank < 1:
        raise DomainError("rank must be positive")
    if support is None:
        support = d - 2
    if not 1 <= support <= d:
        raise DomainError("support must lie within the cutoff")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((support, rank)) + 1j * rng.standard_normal((support, rank))
    block = g @ g.conj().T
    mat = np.zeros((d, d), dtype=complex)
    mat[:support, :support] = block / np.trace(block).real
    state = FockState((d,), mat, (label,))
    state.check_tail()
    return state


# ---------------------------------------------------------------------------
# displacement operators


def xi_to_alpha(xi) -> complex:
    return complex(xi[0], xi[1]) / SQRT2


def displacement_batch(xis: np.ndarray, d: int) -> np.ndarray:
    """Displacement matrices for a batch of phase-space points.

    Uses the closed-form Laguerre matrix elements
    <m|D|n> = sqrt(n!/m!) alpha^(m-n) e^(-|alpha|^2/2) L_n^(m-n)(|alpha|^2)
    for m >= n, with alpha = (xi_1 + i xi_2)/sqrt(2); the upper triangle
    follows from D(alpha)^dag = D(-alpha).
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    alpha = (xis[:, 0] + 1j * xis[:, 1]) / SQRT2
    N = alpha.size
    x = np.abs(alpha) ** 2
    expo = np.exp(-0.5 * x)
    out = np.zeros((N, d, d), dtype=complex)
    lg = gammaln(np.arange(1, d + 1, dtype=float))  # log n!
    for k in range(d):
        # prefactor sqrt(n!/(n+k)!) alpha^k for the k-th subdiagonal
        pw_lower = alpha ** k
        pw_upper = (-np.conj(alpha)) ** k
        Lprev = np.ones(N)
        Lcur = 1.0 + k - x
        for n in range(d - k):
            Ln = Lprev if n == 0 else Lcur
            if n >= 1:
                Lnext = ((2 * n + 1 + k - x) * Lcur - (n + k) * Lprev) / (n + 1.0)
                Lprev, Lcur = Lcur, Lnext
            c = math.exp(0.5 * (lg[n] - lg[n + k]))
            base = c * expo * Ln
            out[:, n + k, n] = base * pw_lower
            if k:
                out[:, n, n + k] = base * pw_upper
    return out


def displacement_operator(xi, d: int) -> np.ndarray:
    """Single displacement matrix for the phase-space shift xi."""
    if d < 2:
        raise DomainError("cutoff must be at least 2")
    return displacement_batch(np.asarray(xi, dtype=float).reshape(1, 2), d)[0]


def displacement_operator_expm(xi, d: int) -> np.ndarray:
    """Matrix-exponential construction, kept as an independent test oracle."""
    from scipy.linalg import expm

    a = annihilation(d)
    alpha = xi_to_alpha(xi)
    return expm(alpha * a.T.conj().astype(complex) - np.conj(alpha) * a.astype(complex))


def displace_state(rho: FockState, xi, target: str = None) -> FockState:
    """Unitary displacement of one mode of the state."""
    if target is None:
        target = rho.mode_labels[0]
    k = rho.mode_index(target)
    D = displacement_batch(np.asarray(xi, dtype=float).reshape(1, 2), rho.mode_dims[k])[0]
    if rho.n_modes == 1:
        mat = D @ rho.matrix @ D.conj().T
    else:
        d0, d1 = rho.mode_dims
        t = rho.tensor()
        if k == 0:
            t = np.einsum("xa,ambn,yb->xmyn", D, t, D.conj())
        else:
            t = np.einsum("xm,ambn,yn->axby", D, t, D.conj())
        mat = t.reshape(rho.dim, rho.dim)
    return FockState(rho.mode_dims, _hermitize(mat), rho.mode_labels)


# ---------------------------------------------------------------------------
# spectral functionals


def von_neumann_entropy(rho: FockState) -> float:
    """-tr[rho log rho]; eigenvalues in [-1e-9, 0) are clamped to zero."""
    w = eigenvalues(rho)
    if w.min() < -EIG_CLAMP:
        raise NegativeEigenvalueError(
            f"eigenvalue {w.min():.3e} below clamp; cutoff likely insufficient"
        )
    w = np.clip(w, 0.0, None)
    return float(-xlogy(w, w).sum())


def relative_entropy(rho: FockState, sigma: FockState, null_tol: float = 1e-12) -> float:
    """tr[rho (log rho - log sigma)]; +inf if rho weighs sigma's null space."""
    if rho.mode_dims != sigma.mode_dims:
        raise DimensionMismatchError(
            f"dims {rho.mode_dims} vs {sigma.mode_dims} do not match"
        )
    ws, vs = np.linalg.eigh(sigma.matrix)
    null = ws < null_tol
    rho_in_sigma_basis = vs.conj().T @ rho.matrix @ vs
    diag = np.real(np.diagonal(rho_in_sigma_basis))
    if null.any() and diag[null].sum() >= 1e-10:
        return math.inf
    keep = ~null
    cross = float(diag[keep] @ np.log(ws[keep]))
    return -von_neumann_entropy(rho) - cross


def trace_norm_distance(rho: FockState, sigma: FockState) -> float:
    """Trace norm ||rho - sigma||_1."""
    if rho.mode_dims != sigma.mode_dims:
        raise DimensionMismatchError("states live on different spaces")
    return float(np.abs(_eigvalsh(rho.matrix - sigma.matrix)).sum())


def partial_trace(rho: FockState, keep: str) -> FockState:
    if rho.n_modes != 2:
        raise DomainError("partial trace requires a two-mode state")
    k = rho.mode_index(keep)
    t = rho.tensor()
    mat = np.einsum("ambm->ab", t) if k == 0 else np.einsum("aman->mn", t)
    return FockState((rho.mode_dims[k],), _hermitize(mat), (keep,))


def conditional_entropy(rho: FockState, target: str, memory: str) -> float:
    """S(target, memory) - S(memory)."""
    rho.mode_index(target)
    return von_neumann_entropy(rho) - von_neumann_entropy(partial_trace(rho, memory))


def mode_operator(rho_dims, op_1mode: np.ndarray, mode: int) -> np.ndarray:
    """Embed a one-mode operator at position `mode` of the tensor product."""
    if len(rho_dims) == 1:
        return op_1mode
    d0, d1 = rho_dims
    if mode == 0:
        return np.kron(op_1mode, np.eye(d1))
    return np.kron(np.eye(d0), op_1mode)


def expectation(rho: FockState, op: np.ndarray) -> float:
    return float(np.real(np.einsum("ij,ji->", op, rho.matrix)))


def mean_energy(rho: FockState, mode: str = None) -> float:
    """tr[H rho] for one mode with H = (Q^2 + P^2)/2 - 1/2, i.e. the photon number."""
    if mode is None:
        mode = rho.mode_labels[0]
    k = rho.mode_index(mode)
    n_full = mode_operator(rho.mode_dims, number_op(rho.mode_dims[k]), k)
    return expectation(rho, n_full)


def moments_of_state(rho: FockState):
    """First moments and covariance of the quadratures (Q1, P1, ...).

    Works blockwise: same-mode second moments come from the mode marginals,
    cross-mode terms contract one-mode operators against the joint tensor,
    so nothing is ever multiplied at the joint dimension.
    """
    mode_ops = [quadrature_ops(d) for d in rho.mode_dims]
    if rho.n_modes == 1:
        marginals = [rho]
    else:
        marginals = [partial_trace(rho, lab) for lab in rho.mode_labels]
    n2 = 2 * rho.n_modes
    mean = np.zeros(n2)
    cov = np.zeros((n2, n2))
    for k, (q, p) in enumerate(mode_ops):
        red = marginals[k]
        for i, op in enumerate((q, p)):
            mean[2 * k + i] = expectation(red, op)
        for i, a in enumerate((q, p)):
            for j, b in enumerate((q, p)):
                if 2 * k + j < 2 * k + i:
                    continue
                sym = 0.5 * (a @ b + b @ a)
                val = expectation(red, sym) - mean[2 * k + i] * mean[2 * k + j]
                cov[2 * k + i, 2 * k + j] = cov[2 * k + j, 2 * k + i] = val
    if rho.n_modes == 2:
        t = rho.tensor()
        (q0, p0), (q1, p1) = mode_ops
        for i, a in enumerate((q0, p0)):
            for j, b in enumerate((q1, p1)):
                # A on mode 0 and B on mode 1 commute, so no symmetrization needed
                val = float(np.real(np.einsum("ab,mn,bnam->", a, b, t, optimize=True)))
                cov[i, 2 + j] = cov[2 + j, i] = val - mean[i] * mean[2 + j]
    return mean, cov


def tensor_product(rho: FockState, sigma: FockState, labels=None) -> FockState:
    if rho.n_modes != 1 or sigma.n_modes != 1:
        raise DomainError("tensor_product combines two one-mode states")
    if labels is None:
        labels = (rho.mode_labels[0], sigma.mode_labels[0])
        if labels[0] == labels[1]:
            labels = ("A", "B")
    return FockState(
        (rho.mode_dims[0], sigma.mode_dims[0]), np.kron(rho.matrix, sigma.matrix), labels
    )


def thermal_cutoff(N: float, tol: float = TAIL_TOL, margin: int = 2) -> int:
    """Smallest cutoff whose thermal top-level population is below tol."""
    if N <= 0:
        return 2 + margin
    q = N / (N + 1.0)
    d = 1 + int(math.ceil(math.log(tol / (1.0 - q)) / math.log(q)))
    return max(d, 2) + margin
