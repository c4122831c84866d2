"""Exact covariance-matrix calculus for Gaussian bosonic states.

Conventions: [Q, P] = i, vacuum covariance = I/2, natural logarithms.
Quadratures are ordered (Q1, P1, ..., Qn, Pn); each mode label owns one
consecutive (Q, P) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import (
    DomainError,
    LabelError,
    NegativeTimeError,
    NonPositiveError,
    PairingError,
    ParameterError,
    PhysicalityError,
)

SYMMETRY_TOL = 1e-10
PHYSICALITY_TOL = 1e-9
PAIRING_TOL = 1e-8


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form with 2x2 blocks ((0, 1), (-1, 0))."""
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(n_modes), block)


def symplectic_eigenvalues(cov: np.ndarray, pair_tol: float = PAIRING_TOL) -> np.ndarray:
    """Symplectic spectrum of a positive definite covariance matrix.

    The eigenvalues of inv(Delta) @ cov come in +/- conjugate pairs; the
    absolute values are paired by magnitude and one representative (the pair
    mean) is returned per mode, in descending order.
    """
    cov = np.asarray(cov, dtype=float)
    n2 = cov.shape[0]
    if cov.shape != (n2, n2) or n2 % 2:
        raise DomainError(f"covariance must be 2n x 2n, got {cov.shape}")
    scale = max(1.0, float(np.abs(cov).max()))
    if np.abs(cov - cov.T).max() > SYMMETRY_TOL * scale:
        raise DomainError("covariance matrix is not symmetric")
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise NonPositiveError("covariance matrix is not positive definite")
    delta = symplectic_form(n2 // 2)
    # inv(Delta) = -Delta for this block convention
    mags = np.sort(np.abs(np.linalg.eigvals(-delta @ cov)))[::-1]
    nus = []
    for i in range(0, n2, 2):
        a, b = mags[i], mags[i + 1]
        if abs(a - b) > pair_tol * max(a, b, 1e-300):
            raise PairingError(f"cannot pair symplectic spectrum values {a!r} and {b!r}")
        nus.append(0.5 * (a + b))
    return np.array(nus)


def g_function(N: float) -> float:
    """Entropy of a thermal state with mean photon number N (natural log)."""
    if N < 0:
        raise DomainError(f"g is undefined for N = {N} < 0")
    return float(xlogy(N + 1.0, N + 1.0) - xlogy(N, N))


@dataclass
class GaussianState:
    """Mean vector and covariance matrix of an n-mode Gaussian state."""

    mean: np.ndarray
    cov: np.ndarray
    mode_labels: tuple = ("A",)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=float)
        self.mode_labels = tuple(self.mode_labels)
        n2 = self.mean.size
        if n2 % 2 or self.cov.shape != (n2, n2):
            raise DomainError("mean must have length 2n and cov shape (2n, 2n)")
        if len(self.mode_labels) != n2 // 2:
            raise LabelError("mode_labels must name each (Q, P) pair exactly once")
        if len(set(self.mode_labels)) != len(self.mode_labels):
            raise LabelError("mode_labels must be distinct")
        scale = max(1.0, float(np.abs(self.cov).max()))
        if np.abs(self.cov - self.cov.T).max() > SYMMETRY_TOL * scale:
            raise DomainError("covariance matrix is not symmetric")
        self.cov = 0.5 * (self.cov + self.cov.T)
        nu_min = symplectic_eigenvalues(self.cov).min()
        if nu_min < 0.5 - PHYSICALITY_TOL:
            raise PhysicalityError(f"minimum symplectic eigenvalue {nu_min} < 1/2")

    @property
    def n_modes(self) -> int:
        return len(self.mode_labels)

    def indices(self, labels) -> list:
        """Row/column indices owned by the given mode labels (in given order)."""
        if isinstance(labels, str):
            labels = (labels,)
        idx = []
        for lab in labels:
            if lab not in self.mode_labels:
                raise LabelError(f"unknown mode label {lab!r}")
            k = self.mode_labels.index(lab)
            idx.extend([2 * k, 2 * k + 1])
        return idx

    def marginal(self, labels) -> "GaussianState":
        if isinstance(labels, str):
            labels = (labels,)
        idx = self.indices(labels)
        return GaussianState(self.mean[idx], self.cov[np.ix_(idx, idx)], tuple(labels))


def vacuum_state(n_modes: int = 1, labels=None) -> GaussianState:
    if labels is None:
        labels = ("A",) if n_modes == 1 else tuple(f"m{i}" for i in range(n_modes))
    return GaussianState(np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes), tuple(labels))


def thermal_state(N: float, label: str = "A") -> GaussianState:
    if N < 0:
        raise DomainError("mean photon number must be nonnegative")
    return GaussianState(np.zeros(2), (N + 0.5) * np.eye(2), (label,))


def gaussian_entropy(state: GaussianState) -> float:
    """von Neumann entropy, sum of g(nu_k - 1/2) over the symplectic spectrum.

    Thermal occupations below 1e-12 are floored to zero; they are eigenvalue
    noise at the vacuum bound, not physical population.
    """
    nus = symplectic_eigenvalues(state.cov)
    return float(sum(g_function(nu - 0.5) for nu in nus if nu - 0.5 > 1e-12))


def gaussian_conditional_entropy(state: GaussianState, target: str, memory: str) -> float:
    """S(target, memory) - S(memory) from the corresponding covariance blocks."""
    joint = state.marginal((target, memory))
    return gaussian_entropy(joint) - gaussian_entropy(state.marginal(memory))


def gaussian_heat_flow(state: GaussianState, t: float, target: str = None) -> GaussianState:
    """Additive-noise evolution: adds t * I to the target mode's covariance block."""
    if t < 0:
        raise NegativeTimeError(f"heat flow requires t >= 0, got {t}")
    if target is None:
        target = state.mode_labels[0]
    idx = state.indices(target)
    cov = state.cov.copy()
    cov[np.ix_(idx, idx)] += t * np.eye(2)
    return GaussianState(state.mean.copy(), cov, state.mode_labels)


def tmsv_covariance(r: float) -> np.ndarray:
    """Covariance of a two-mode squeezed vacuum: diagonal blocks cosh(2r)/2 I,
    cross block diag(c, -c) with c = sinh(2r)/2."""
    if r < 0:
        raise DomainError("squeezing parameter must be nonnegative")
    a = math.cosh(2.0 * r) / 2.0
    c = math.sinh(2.0 * r) / 2.0
    return np.array(
        [
            [a, 0.0, c, 0.0],
            [0.0, a, 0.0, -c],
            [c, 0.0, a, 0.0],
            [0.0, -c, 0.0, a],
        ]
    )


def tmsv_state(r: float) -> GaussianState:
    return GaussianState(np.zeros(4), tmsv_covariance(r), ("A", "M"))


def tightness_covariance(k: float) -> np.ndarray:
    """Two-mode pure covariance with diagonal blocks k^2 I and cross-correlations
    +/- sqrt(k^4 - 1/4) on the (Q, Q) and (P, P) entries."""
    if k < 1:
        raise DomainError(f"tightness family requires k >= 1, got {k}")
    return tmsv_covariance(0.5 * math.acosh(2.0 * k ** 2))


def tightness_state(k: float) -> GaussianState:
    return GaussianState(np.zeros(4), tightness_covariance(k), ("A", "M"))


def tightness_family(k: float, a: float, b: float, spacing: float = None, extent: float = None):
    """Saturating family for the conditional entropy power inequality.

    Returns (rho_AM, f, rho_CM): the two-mode state heat-flowed by exp(a-1)
    on A, the Gaussian noise density with variance exp(b-1) as a grid pdf,
    and the channel output state whose A-block gains exp(a-1) + exp(b-1).
    """
    from .phase_space import gaussian_pdf

    if k < 1:
        raise DomainError(f"tightness family requires k >= 1, got {k}")
    ta, tb = math.exp(a - 1.0), math.exp(b - 1.0)
    rho_am = gaussian_heat_flow(tightness_state(k), ta, "A")
    f = gaussian_pdf(tb, spacing=spacing, extent=extent)
    rho_cm = gaussian_heat_flow(rho_am, tb, "A")
    return rho_am, f, rho_cm


def qou_steady_covariance(mu: float, lam: float) -> np.ndarray:
    """Covariance of the damping-semigroup fixed point, (1/2)(lam^2+mu^2)/(mu^2-lam^2) I."""
    _check_qou_params(mu, lam)
    return 0.5 * (lam ** 2 + mu ** 2) / (mu ** 2 - lam ** 2) * np.eye(2)


def qou_mean_photon(mu: float, lam: float) -> float:
    """Mean photon number of the fixed point, lam^2 / (mu^2 - lam^2)."""
    _check_qou_params(mu, lam)
    return lam ** 2 / (mu ** 2 - lam ** 2)


def _check_qou_params(mu: float, lam: float):
    if not (mu > lam > 0):
        raise ParameterError(f"requires mu > lambda > 0, got mu={mu}, lambda={lam}")


def gaussian_qou_evolution(
    state: GaussianState, t: float, mu: float, lam: float, target: str = None
) -> GaussianState:
    """Damping-semigroup evolution of one mode, as a beam splitter of
    transmissivity eta = exp(-(mu^2 - lam^2) t) against the thermal fixed point.

    The target covariance block becomes eta * block + (1 - eta) * steady,
    cross blocks scale by sqrt(eta) and the target mean by sqrt(eta).
    """
    _check_qou_params(mu, lam)
    if t < 0:
        raise NegativeTimeError(f"qOU evolution requires t >= 0, got {t}")
    if target is None:
        target = state.mode_labels[0]
    eta = math.exp(-(mu ** 2 - lam ** 2) * t)
    idx = state.indices(target)
    rest = [i for i in range(2 * state.n_modes) if i not in idx]
    cov = state.cov.copy()
    cov[np.ix_(idx, idx)] = eta * cov[np.ix_(idx, idx)] + (1 - eta) * qou_steady_covariance(mu, lam)
    if rest:
        cov[np.ix_(idx, rest)] *= math.sqrt(eta)
        cov[np.ix_(rest, idx)] *= math.sqrt(eta)
    mean = state.mean.copy()
    mean[idx] *= math.sqrt(eta)
    return GaussianState(mean, cov, state.mode_labels)


def mean_photon_number(state: GaussianState, label: str = None) -> float:
    """tr[n_hat rho] for one mode: (tr block)/2 - 1/2 + |mean|^2 / 2."""
    if label is None:
        label = state.mode_labels[0]
    idx = state.indices(label)
    block = state.cov[np.ix_(idx, idx)]
    return float(np.trace(block) / 2.0 - 0.5 + np.dot(state.mean[idx], state.mean[idx]) / 2.0)


def relative_entropy_to_thermal_product(
    state: GaussianState, mu: float, lam: float, target: str = None
) -> float:
    """D(rho_AM || omega_A x rho_M) against the damping-semigroup fixed point.

    Because log omega is affine in the number operator, the divergence reduces
    to -S(A|M) - log(1 - q) - <n_hat>_A log q with q = lam^2 / mu^2.
    """
    _check_qou_params(mu, lam)
    if target is None:
        target = state.mode_labels[0]
    q = (lam / mu) ** 2
    if state.n_modes == 1:
        s_cond = gaussian_entropy(state)
    else:
        memory = [lab for lab in state.mode_labels if lab != target]
        if len(memory) != 1:
            raise LabelError("expected exactly one memory mode")
        s_cond = gaussian_conditional_entropy(state, target, memory[0])
    n_avg = mean_photon_number(state, target)
    return float(-s_cond - math.log1p(-q) - n_avg * math.log(q))
