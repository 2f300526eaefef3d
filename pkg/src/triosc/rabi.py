"""Closed-form eigensystem of a single oscillator coupled to the spin.

With only one oscillator coupled, each spin sector m decouples and the
oscillator Hamiltonian omega n + g m (a + a^dag) is diagonalized exactly by
displaced Fock states.  The eigenvalues omega k - (g m / sqrt(omega))^2 ...
more precisely E_{m,k} = omega k - g^2 m^2 / omega show the polaron shift,
and the displaced eigenvectors quantify how the excitation disperses over
bare Fock states as g/omega grows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import TailMassError
from .hilbert import ladder_operators

_LOG_TAIL_TOL = 1e-10


@dataclass(frozen=True)
class RabiParams:
    """Single-oscillator sector parameters: frequency, coupling, truncation."""

    omega: float
    g: float
    n: int

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be positive")
        if self.n < 2:
            raise ValueError("need at least 2 Fock levels")


def rabi_eigenvalue(m: int, k: int, p: RabiParams) -> float:
    """Exact eigenvalue omega k - g^2 m^2 / omega of the m-sector Hamiltonian."""
    return p.omega * k - (p.g**2 / p.omega) * m**2


def sector_hamiltonian(m: int, p: RabiParams) -> np.ndarray:
    """Truncated oscillator Hamiltonian omega a^dag a + g m (a + a^dag) for fixed m."""
    a, adag = ladder_operators(p.n)
    return p.omega * adag @ a + p.g * m * (a + adag)


def _laguerre(n: int, alpha: int, x: float) -> float:
    """Generalized Laguerre L_n^(alpha)(x) by the ascending recurrence."""
    if n == 0:
        return 1.0
    l_prev, l_cur = 1.0, 1.0 + alpha - x
    for i in range(2, n + 1):
        l_prev, l_cur = l_cur, ((2 * i - 1 + alpha - x) * l_cur - (i - 1 + alpha) * l_prev) / i
    return l_cur


def _displaced_fock_coefficients(beta: float, k: int, n: int) -> np.ndarray:
    """Coefficients <p|D(beta)|k> of a displaced Fock state, real beta.

    Uses the associated-Laguerre closed form with log-space factorial ratios,
    stable for k up to a few tens:
      <p|D(beta)|k> = sqrt(lo!/hi!) s^d |beta|^d e^{-beta^2/2} L_lo^(d)(beta^2)
    with lo = min(p, k), hi = max(p, k), d = hi - lo, and s the signed
    direction of the displacement (+beta for p > k, -beta for p < k).
    """
    out = np.zeros(n)
    if beta == 0.0:
        out[k] = 1.0
        return out
    b2 = beta * beta
    log_abs_beta = math.log(abs(beta))
    for p_idx in range(n):
        lo, hi = min(p_idx, k), max(p_idx, k)
        d = hi - lo
        s = beta if p_idx >= k else -beta
        lag = _laguerre(lo, d, b2)
        if lag == 0.0:
            continue
        log_mag = (
            0.5 * (math.lgamma(lo + 1) - math.lgamma(hi + 1))
            + d * log_abs_beta
            - 0.5 * b2
            + math.log(abs(lag))
        )
        sign = (math.copysign(1.0, s) ** d) * math.copysign(1.0, lag)
        out[p_idx] = sign * math.exp(log_mag)
    return out


def rabi_eigenvector(m: int, k: int, p: RabiParams) -> np.ndarray:
    """Normalized eigenvector |m, k) in the m sector, as bare-Fock amplitudes.

    This is the Fock state k displaced by -g m / omega.  Raises TailMassError
    when the truncation discards more than 1e-10 of the norm.
    """
    if not 0 <= k < p.n:
        raise ValueError(f"k={k} outside truncation {p.n}")
    beta = -p.g * m / p.omega
    coeffs = _displaced_fock_coefficients(beta, k, p.n)
    tail = abs(1.0 - float(np.sum(coeffs**2)))
    if tail > _LOG_TAIL_TOL:
        raise TailMassError(
            f"truncated tail mass {tail:.2e} for (m={m}, k={k}, n={p.n}); increase n"
        )
    v = coeffs.astype(complex)
    return v / np.linalg.norm(v)


def rabi_eigenvector_series(m: int, k: int, p: RabiParams) -> np.ndarray:
    """Same eigenvector from the explicit double-series expansion (cross-check path).

    Unnormalized amplitude on |q>:
      e^{-(gm/omega)^2/2} sum_{j<=min(k,q)} (-1)^{q-j} sqrt(k! q!) r^{k+q-2j}
                                            / (j! (k-j)! (q-j)!),  r = gm/omega.
    """
    r = p.g * m / p.omega
    out = np.zeros(p.n)
    if r == 0.0:
        out[k] = 1.0
        return out.astype(complex)
    logr = math.log(abs(r))
    sign_r = math.copysign(1.0, r)
    for q in range(p.n):
        total = 0.0
        for j in range(min(k, q) + 1):
            power = k + q - 2 * j
            log_mag = (
                0.5 * (math.lgamma(k + 1) + math.lgamma(q + 1))
                - math.lgamma(j + 1)
                - math.lgamma(k - j + 1)
                - math.lgamma(q - j + 1)
                + power * logr
            )
            term = (-1.0) ** (q - j) * (sign_r**power) * math.exp(log_mag)
            total += term
        out[q] = total * math.exp(-0.5 * r * r)
    return out.astype(complex)


def overlap_scan(m: int, k: int, p: RabiParams, n_range) -> np.ndarray:
    """Overlaps <(k+n)|m, k) of the eigenvector with nearby bare Fock states."""
    vec = rabi_eigenvector(m, k, p)
    out = []
    for off in n_range:
        q = k + off
        if q < 0:
            raise ValueError(f"offset {off} reaches below the vacuum")
        out.append(vec[q].real if q < p.n else 0.0)
    return np.array(out)


def weak_expansion(m: int, k: int, p: RabiParams) -> np.ndarray:
    """Second-order weak-coupling eigenvector, unnormalized.

    (1 - (2k+1) g^2 m^2 / (2 omega^2)) |k>
      + (g m / omega) (sqrt(k) |k-1> - sqrt(k+1) |k+1>).
    """
    r = p.g * m / p.omega
    out = np.zeros(p.n, dtype=complex)
    out[k] = 1.0 - (2 * k + 1) * r * r / 2.0
    if k - 1 >= 0:
        out[k - 1] = r * math.sqrt(k)
    if k + 1 < p.n:
        out[k + 1] = -r * math.sqrt(k + 1)
    return out


def overlap_grid_to_csv(
    m: int,
    k: int,
    omega: float,
    n: int,
    g_over_omega_values,
    n_offsets,
    path,
) -> None:
    """Write (g_over_omega, n_offset, overlap) rows over a coupling grid."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["g_over_omega", "n_offset", "overlap"])
        for gw in g_over_omega_values:
            p = RabiParams(omega=omega, g=float(gw) * omega, n=n)
            overlaps = overlap_scan(m, k, p, n_offsets)
            for off, val in zip(n_offsets, overlaps):
                writer.writerow([f"{gw:.12g}", off, f"{val:.12g}"])
