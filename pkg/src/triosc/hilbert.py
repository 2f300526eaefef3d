"""Truncated Hilbert space and Hamiltonian construction.

The system is a spin-1 (three levels, S_z eigenvalues +1, 0, -1) coupled to
two truncated harmonic oscillators `a` and `b`.  All frequencies are expressed
in units of the oscillator-`a` frequency (omega_a = 1 by default) and times in
its inverse.  Basis states |m, k, l> are ordered spin-major with m in
(+1, 0, -1), then the `a` Fock index k, then the `b` Fock index l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidTruncationError

SPIN_M_VALUES = (1, 0, -1)

# Phase convention: the |-1> basis vector carries a sign such that
# <-1|S_x^2 - S_y^2|+1> = -1.  This fixes the sign of every quadrupolar
# coupling relative to the linear ones and makes (|0,1,0> + |-1,0,1>)/sqrt(2)
# the decoupled eigenvector when sin(phi_a) = sqrt(2) g_b/g_a with
# gamma_b = theta_a.  The su(2) relations [S_i, S_j] = i eps_ijk S_k are
# unaffected by basis phases.
_SQ2 = 1.0 / math.sqrt(2.0)
_SX = np.array([[0, 1, 0], [1, 0, -1], [0, -1, 0]], dtype=complex) * _SQ2
_SY = np.array([[0, -1j, 0], [1j, 0, 1j], [0, -1j, 0]], dtype=complex) * _SQ2
_SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)


def spin1_operators() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the spin-1 matrices (S_x, S_y, S_z) in the ordered (+1, 0, -1) basis."""
    return _SX.copy(), _SY.copy(), _SZ.copy()


def ladder_operators(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated annihilation/creation operators on n Fock levels.

    a|k> = sqrt(k)|k-1>; a^dag is its conjugate transpose.  The commutator
    [a, a^dag] equals the identity except for the unavoidable (1 - n) entry in
    the last diagonal slot.
    """
    if n < 2:
        raise InvalidTruncationError(f"need at least 2 Fock levels, got {n}")
    a = np.zeros((n, n), dtype=complex)
    ks = np.arange(1, n)
    a[ks - 1, ks] = np.sqrt(ks)
    return a, a.conj().T


@dataclass(frozen=True)
class SystemParams:
    """Static Hamiltonian parameters, all in units of omega_a.

    alpha selects the second-oscillator coupling type: 1 for a linear
    (photon-photon) coupling, 0 for a quadrupolar (photon-phonon) coupling.
    Angles are wrapped canonically: theta/gamma into [0, 2pi), phi into
    [0, pi] (with theta shifted by pi when phi reflects).
    """

    omega_b: float
    D: float
    omega_z: float
    g_a: float
    g_b: float
    alpha: int = 0
    theta_a: float = 0.0
    phi_a: float = 0.0
    theta_b: float = 0.0
    phi_b: float = 0.0
    gamma_b: float = 0.0
    omega_a: float = 1.0

    def __post_init__(self):
        if self.omega_a <= 0 or self.omega_b <= 0:
            raise ValueError("oscillator frequencies must be positive")
        if self.alpha not in (0, 1):
            raise ValueError(f"alpha must be exactly 0 or 1, got {self.alpha}")
        for theta_name, phi_name in (("theta_a", "phi_a"), ("theta_b", "phi_b")):
            theta, phi = getattr(self, theta_name), getattr(self, phi_name)
            phi = phi % (2.0 * math.pi)
            if phi > math.pi:
                phi = 2.0 * math.pi - phi
                theta = theta + math.pi
            object.__setattr__(self, phi_name, phi)
            object.__setattr__(self, theta_name, theta % (2.0 * math.pi))
        object.__setattr__(self, "gamma_b", self.gamma_b % (2.0 * math.pi))


@dataclass(frozen=True)
class TruncationSpec:
    """Number of Fock levels kept for each oscillator (total dim 3*n_a*n_b)."""

    n_a: int
    n_b: int

    def __post_init__(self):
        if self.n_a < 2 or self.n_b < 2:
            raise InvalidTruncationError(
                f"need at least 2 levels per oscillator, got ({self.n_a}, {self.n_b})"
            )

    @property
    def dim(self) -> int:
        return 3 * self.n_a * self.n_b


@dataclass(frozen=True)
class BasisIndex:
    """Label |m, k, l> of a product basis state."""

    m: int
    k: int
    l: int

    def __post_init__(self):
        if self.m not in SPIN_M_VALUES:
            raise ValueError(f"m must be one of {SPIN_M_VALUES}")
        if self.k < 0 or self.l < 0:
            raise ValueError("Fock indices must be non-negative")


def flat_index(trunc: TruncationSpec, m: int, k: int, l: int) -> int:
    """Flat position of |m, k, l> with m mapped (+1, 0, -1) -> (0, 1, 2)."""
    m_idx = SPIN_M_VALUES.index(m)
    if not (0 <= k < trunc.n_a and 0 <= l < trunc.n_b):
        raise ValueError(f"Fock indices ({k}, {l}) outside truncation {trunc}")
    return (m_idx * trunc.n_a + k) * trunc.n_b + l


def basis_labels(trunc: TruncationSpec) -> list[BasisIndex]:
    """All basis labels in flat-index order."""
    return [
        BasisIndex(m, k, l)
        for m in SPIN_M_VALUES
        for k in range(trunc.n_a)
        for l in range(trunc.n_b)
    ]


def basis_state(trunc: TruncationSpec, m: int, k: int, l: int) -> np.ndarray:
    """Unit state vector for |m, k, l>."""
    psi = np.zeros(trunc.dim, dtype=complex)
    psi[flat_index(trunc, m, k, l)] = 1.0
    return psi


def superposition_state(trunc: TruncationSpec, terms) -> np.ndarray:
    """Normalized superposition from (amplitude, m, k, l) terms."""
    psi = np.zeros(trunc.dim, dtype=complex)
    for amp, m, k, l in terms:
        psi[flat_index(trunc, m, k, l)] += amp
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("superposition has zero norm")
    return psi / norm


def build_coupling_ops(p: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """3x3 spin operators H_a and H_b entering the oscillator couplings.

    H_a = cos(theta_a) sin(phi_a) S_x + sin(theta_a) sin(phi_a) S_y
          + cos(phi_a) S_z  (a rotated spin operator, eigenvalues -1, 0, +1).
    H_b is the alpha-weighted mix of the analogous rotated spin operator and
    the quadrupolar combination cos(gamma_b)(S_x^2 - S_y^2)
    + sin(gamma_b)(S_x S_y + S_y S_x).
    """
    sx, sy, sz = _SX, _SY, _SZ
    ha = (
        math.cos(p.theta_a) * math.sin(p.phi_a) * sx
        + math.sin(p.theta_a) * math.sin(p.phi_a) * sy
        + math.cos(p.phi_a) * sz
    )
    hb_lin = (
        math.cos(p.theta_b) * math.sin(p.phi_b) * sx
        + math.sin(p.theta_b) * math.sin(p.phi_b) * sy
        + math.cos(p.phi_b) * sz
    )
    hb_quad = math.cos(p.gamma_b) * (sx @ sx - sy @ sy) + math.sin(p.gamma_b) * (
        sx @ sy + sy @ sx
    )
    hb = p.alpha * hb_lin + (1 - p.alpha) * hb_quad
    return ha, hb


def h0_energies(p: SystemParams, trunc: TruncationSpec) -> np.ndarray:
    """Diagonal of the uncoupled Hamiltonian, in flat-index order."""
    m = np.array(SPIN_M_VALUES, dtype=float)
    e_spin = p.D * m**2 + 0.5 * p.omega_z * m
    e_a = p.omega_a * np.arange(trunc.n_a)
    e_b = p.omega_b * np.arange(trunc.n_b)
    return (e_spin[:, None, None] + e_a[None, :, None] + e_b[None, None, :]).ravel()


def build_h0(p: SystemParams, trunc: TruncationSpec) -> np.ndarray:
    """Uncoupled Hamiltonian D S_z^2 + (omega_z/2) S_z + omega_a n_a + omega_b n_b."""
    return np.diag(h0_energies(p, trunc)).astype(complex)


def build_coupling_h(p: SystemParams, trunc: TruncationSpec) -> np.ndarray:
    """Spin-oscillator coupling g_a H_a (a + a^dag) + g_b H_b (b + b^dag)."""
    ha, hb = build_coupling_ops(p)
    a, adag = ladder_operators(trunc.n_a)
    b, bdag = ladder_operators(trunc.n_b)
    ia, ib = np.eye(trunc.n_a), np.eye(trunc.n_b)
    xa = a + adag
    xb = b + bdag
    return p.g_a * np.kron(ha, np.kron(xa, ib)) + p.g_b * np.kron(
        hb, np.kron(ia, xb)
    )


def control_ops(trunc: TruncationSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full-space spin operators (S_x, S_y, S_z) tensored with oscillator identities."""
    iosc = np.eye(trunc.n_a * trunc.n_b)
    return tuple(np.kron(s, iosc) for s in (_SX, _SY, _SZ))


def build_total_h(p: SystemParams, trunc: TruncationSpec, omega=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Total Hamiltonian for instantaneous control amplitudes (Omega_x, Omega_y, Omega_z)."""
    h = build_h0(p, trunc) + build_coupling_h(p, trunc)
    if any(omega):
        for amp, s in zip(omega, control_ops(trunc)):
            if amp:
                h = h + amp * s
    return h


def resonance_params(preset: str, omega_b: float, omega_a: float = 1.0) -> tuple[float, float]:
    """(D, omega_z) pairs that make a three-state manifold of H_0 degenerate.

    R1 degenerates |0,1,0>, |-1,0,1>, |1,0,0> at energy omega_a
    (one-excitation exchange); R2 degenerates |0,2,0>, |-1,1,1>, |1,0,2> at
    2 omega_a (two-excitation exchange); R1alt degenerates |1,1,0>, |0,1,1>,
    |-1,0,1> at omega_a + omega_b.
    """
    if omega_b <= 0:
        raise ValueError("omega_b must be positive")
    if preset == "R1":
        return omega_a - 0.5 * omega_b, omega_b
    if preset == "R2":
        return 1.5 * (omega_a - omega_b), omega_a - omega_b
    if preset == "R1alt":
        return 0.5 * (omega_a + omega_b), omega_b - omega_a
    raise ValueError(f"unknown resonance preset {preset!r}")


def resonant_system(
    preset: str,
    omega_b: float,
    g_a: float,
    g_b: float,
    *,
    alpha: int = 0,
    theta_a: float = 0.0,
    phi_a: float = 0.0,
    theta_b: float = 0.0,
    phi_b: float = 0.0,
    gamma_b: float = 0.0,
) -> SystemParams:
    """SystemParams with (D, omega_z) filled in from a resonance preset."""
    d, omega_z = resonance_params(preset, omega_b)
    return SystemParams(
        omega_b=omega_b,
        D=d,
        omega_z=omega_z,
        g_a=g_a,
        g_b=g_b,
        alpha=alpha,
        theta_a=theta_a,
        phi_a=phi_a,
        theta_b=theta_b,
        phi_b=phi_b,
        gamma_b=gamma_b,
    )


def leakage_mask(trunc: TruncationSpec) -> np.ndarray:
    """Boolean mask selecting states in the top two Fock levels of either oscillator."""
    mask = np.zeros((3, trunc.n_a, trunc.n_b), dtype=bool)
    mask[:, max(trunc.n_a - 2, 0):, :] = True
    mask[:, :, max(trunc.n_b - 2, 0):] = True
    return mask.ravel()
