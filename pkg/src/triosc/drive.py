"""Sinusoidal spin drives and their period-averaged effective Hamiltonians.

A drive A_c cos(Omega_c t) applied along (0, cos theta_c, sin theta_c)
dresses the spin.  Averaging the rotating-frame Hamiltonian over one carrier
period rescales the oscillator couplings by Bessel factors of x = A_c/Omega_c:
at theta_c = pi/2 a linear S_x coupling picks up J_0(x) and the quadrupolar
S_x^2 - S_y^2 coupling picks up J_0(2x).  Because J_0(2x)/J_0(x) changes sign,
the drive can realize effective coupling ratios that are impossible with bare
couplings, which is what enables the one-excitation exchange when
g_b/g_a > 1/sqrt(2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ControlField, propagate
from .hilbert import (
    SystemParams,
    TruncationSpec,
    build_coupling_h,
    build_h0,
    basis_state,
    resonant_system,
    spin1_operators,
    superposition_state,
)

_SX, _SY, _SZ = spin1_operators()


# ---------------------------------------------------------------------------
# Bessel functions of the first kind
# ---------------------------------------------------------------------------

def bessel_j(n: int, x: float) -> float:
    """J_n(x) to better than 1e-12 absolute error for |x| <= 50.

    Small arguments use the ascending power series; otherwise Miller's
    backward recurrence with the J_0 + 2 sum_k J_2k = 1 normalization.
    """
    n = int(n)
    x = float(x)
    if n < 0:
        return (-1.0) ** (-n) * bessel_j(-n, x)
    if x < 0:
        return (-1.0) ** n * bessel_j(n, abs(x))
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    if x <= 6.0:
        return _bessel_series(n, x)
    return _bessel_miller(n, x)


def _bessel_series(n: int, x: float) -> float:
    # sum_k (-1)^k (x/2)^(n+2k) / (k! (n+k)!)
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    k = 0
    while abs(term) > 1e-18 * max(1.0, abs(total)) and k < 200:
        k += 1
        term *= -(half * half) / (k * (n + k))
        total += term
    return total


def _bessel_miller(n: int, x: float) -> float:
    m_start = 2 * ((int(x) + n) // 2 + 26)
    jp, j = 0.0, 1.0
    result = 0.0
    norm = 0.0
    for m in range(m_start, -1, -1):
        jm = (2.0 * (m + 1) / x) * j - jp
        jp, j = j, jm
        if abs(j) > 1e10:
            scale = 1e-10
            j *= scale
            jp *= scale
            result *= scale
            norm *= scale
        if m == n:
            result = j
        if m % 2 == 0:
            norm += j if m == 0 else 2.0 * j
    return result / norm


def bessel_product_maxima(x_max: float = 8.0, n_scan: int = 4000) -> list[tuple[float, float]]:
    """Local maxima of J_0(x) J_1(x) on (0, x_max], sorted by decreasing value.

    Returns (x, J_0(x) J_1(x)) pairs refined by golden-section search.
    """
    xs = np.linspace(1e-6, x_max, n_scan)
    f = np.array([bessel_j(0, x) * bessel_j(1, x) for x in xs])
    maxima = []
    for i in range(1, n_scan - 1):
        if f[i] >= f[i - 1] and f[i] >= f[i + 1]:
            lo, hi = xs[i - 1], xs[i + 1]
            x_star = _golden_max(lambda x: bessel_j(0, x) * bessel_j(1, x), lo, hi)
            maxima.append((x_star, bessel_j(0, x_star) * bessel_j(1, x_star)))
    maxima.sort(key=lambda t: -t[1])
    return maxima


def _golden_max(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# Drive definition and rotating-frame averaging
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SinusoidalDrive:
    """Drive vector A_c cos(Omega_c t) (0, cos theta_c, sin theta_c)."""

    amplitude: float
    carrier: float
    theta_c: float

    def __post_init__(self):
        if self.carrier <= 0:
            raise ValueError("carrier frequency must be positive")

    @property
    def x(self) -> float:
        """Modulation index A_c / Omega_c."""
        return self.amplitude / self.carrier

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.carrier

    def axis_operator(self) -> np.ndarray:
        """cos(theta_c) S_y + sin(theta_c) S_z."""
        return math.cos(self.theta_c) * _SY + math.sin(self.theta_c) * _SZ

    def values(self, times: np.ndarray) -> np.ndarray:
        """(n, 3) samples of the drive vector at the given times."""
        envelope = self.amplitude * np.cos(self.carrier * np.asarray(times))
        out = np.zeros((len(envelope), 3))
        out[:, 1] = envelope * math.cos(self.theta_c)
        out[:, 2] = envelope * math.sin(self.theta_c)
        return out


def control_propagator(drive: SinusoidalDrive, t: float) -> np.ndarray:
    """3x3 unitary exp(-i (A_c/Omega_c) sin(Omega_c t) [cos th_c S_y + sin th_c S_z])."""
    axis = drive.axis_operator()
    evals, vecs = np.linalg.eigh(axis)
    b = drive.x * math.sin(drive.carrier * t)
    return (vecs * np.exp(-1j * b * evals)) @ vecs.conj().T


def numeric_average(drive: SinusoidalDrive, op: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Average of U_c(t)^dag op U_c(t) over one carrier period.

    Uses the periodic trapezoidal rule with doubling until the result changes
    by less than tol (spectrally convergent for the smooth periodic
    integrand).
    """
    axis = drive.axis_operator()
    evals, vecs = np.linalg.eigh(axis)
    op_axis = vecs.conj().T @ op @ vecs  # rotate once; U_c is diagonal here
    delta = np.subtract.outer(evals, evals)  # U^dag op U = op * exp(i b (e_p - e_q))

    def average(n_samples: int) -> np.ndarray:
        phases = drive.x * np.sin(2.0 * math.pi * np.arange(n_samples) / n_samples)
        acc = np.zeros_like(op_axis)
        for b in phases:
            acc += op_axis * np.exp(1j * b * delta)
        return acc / n_samples

    n = 64
    prev = average(n)
    while n <= 16384:
        n *= 2
        cur = average(n)
        if np.abs(cur - prev).max() < tol:
            prev = cur
            break
        prev = cur
    out = vecs @ prev @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


def effective_couplings_closed(drive: SinusoidalDrive) -> tuple[float, float]:
    """Bessel rescalings (J_0(x), J_0(2x)) of the S_x and S_x^2 - S_y^2 couplings.

    Valid only at theta_c = pi/2, where the dressing commutes with S_z and
    leaves the static spin Hamiltonian unchanged.
    """
    if abs(drive.theta_c - math.pi / 2) > 1e-12:
        raise ValueError(
            "closed-form rescaling requires theta_c = pi/2; use numeric_average"
        )
    return bessel_j(0, drive.x), bessel_j(0, 2.0 * drive.x)


def solve_drive_ratio(
    target_ratio: float,
    x_max: float = 6.0,
    tol: float = 1e-8,
    n_scan: int = 20000,
) -> list[float]:
    """All x in (0, x_max] with J_0(2x)/J_0(x) = target_ratio.

    Roots of J_0(2x) - r J_0(x) located by sign-change bracketing and refined
    by bisection; points where J_0(x) = 0 are excluded (the ratio diverges).
    """

    def g(x: float) -> float:
        return bessel_j(0, 2.0 * x) - target_ratio * bessel_j(0, x)

    xs = np.linspace(x_max / n_scan, x_max, n_scan)
    vals = np.array([g(x) for x in xs])
    roots = []
    for i in range(n_scan - 1):
        if vals[i] == 0.0:
            roots.append(xs[i])
            continue
        if vals[i] * vals[i + 1] < 0.0:
            lo, hi = xs[i], xs[i + 1]
            flo = g(lo)
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                fmid = g(mid)
                if flo * fmid <= 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
            roots.append(0.5 * (lo + hi))
    return [r for r in roots if abs(bessel_j(0, r)) > 1e-6]


# ---------------------------------------------------------------------------
# Effective-model fidelity map and full-model validation
# ---------------------------------------------------------------------------

def default_drive_system(g: float = 0.01) -> SystemParams:
    """The weak-coupling one-excitation scenario the drive analysis targets.

    R1 resonance at omega_b = 0.3 with equal couplings and a bare coupling
    geometry H_a = S_x, H_b = S_x^2 - S_y^2 (alpha = 0, phi_a = pi/2,
    theta_a = gamma_b = 0), for which the bare ratio condition has no
    solution.
    """
    return resonant_system("R1", omega_b=0.3, g_a=g, g_b=g, alpha=0, phi_a=math.pi / 2)


def exchange_target(trunc: TruncationSpec) -> np.ndarray:
    """(|0,1,0> + |-1,0,1>)/sqrt(2): one excitation shared between the oscillators."""
    return superposition_state(trunc, [(1.0, 0, 1, 0), (1.0, -1, 0, 1)])


def effective_hamiltonian(
    p: SystemParams, trunc: TruncationSpec, drive: SinusoidalDrive
) -> np.ndarray:
    """Full-space first-order averaged Hamiltonian for the driven system.

    The oscillator terms commute with the dressing; the spin Hamiltonian and
    both coupling operators are replaced by their period averages.
    """
    from .hilbert import build_coupling_ops, ladder_operators

    hs_spin = p.D * (_SZ @ _SZ) + 0.5 * p.omega_z * _SZ
    ha, hb = build_coupling_ops(p)
    hs_eff = numeric_average(drive, hs_spin)
    ha_eff = numeric_average(drive, ha)
    hb_eff = numeric_average(drive, hb)

    a, adag = ladder_operators(trunc.n_a)
    b, bdag = ladder_operators(trunc.n_b)
    ia, ib = np.eye(trunc.n_a), np.eye(trunc.n_b)
    iosc = np.eye(trunc.n_a * trunc.n_b)
    h = (
        np.kron(hs_eff, iosc)
        + np.kron(np.eye(3), np.kron(p.omega_a * adag @ a, ib))
        + np.kron(np.eye(3), np.kron(ia, p.omega_b * bdag @ b))
        + p.g_a * np.kron(ha_eff, np.kron(a + adag, ib))
        + p.g_b * np.kron(hb_eff, np.kron(ia, b + bdag))
    )
    return h


def fidelity_map_drive(
    p: SystemParams,
    trunc: TruncationSpec,
    theta_c_values: np.ndarray,
    x_values: np.ndarray,
    target: np.ndarray | None = None,
    threads: int = 1,
) -> np.ndarray:
    """F_eig of the exchange target against the averaged Hamiltonian.

    Entry [i, j] corresponds to (theta_c_values[i], x_values[j]).  The map
    depends on the drive only through theta_c and x = A_c/Omega_c.  Grid
    points are independent; threads > 1 evaluates them concurrently.
    """
    if target is None:
        target = exchange_target(trunc)

    def point(args):
        theta_c, x = args
        drive = SinusoidalDrive(amplitude=float(x), carrier=1.0, theta_c=float(theta_c))
        h = effective_hamiltonian(p, trunc, drive)
        _, vecs = np.linalg.eigh(h)
        return float(np.max(np.abs(vecs.conj().T @ target) ** 2))

    grid = [(tc, x) for tc in theta_c_values for x in x_values]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(point, grid))
    else:
        values = [point(g) for g in grid]
    return np.array(values).reshape(len(theta_c_values), len(x_values))


def drive_map_to_csv(theta_c_values, x_values, f_map, path) -> None:
    """Write (theta_c, x, F_eig) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_c", "x", "F_eig"])
        for i, theta_c in enumerate(theta_c_values):
            for j, x in enumerate(x_values):
                writer.writerow([f"{theta_c:.12g}", f"{x:.12g}", f"{f_map[i, j]:.12g}"])


def sample_drive(
    drive: SinusoidalDrive, t_max: float, samples_per_period: int = 64
) -> ControlField:
    """Discretize the drive into a midpoint-sampled piecewise-constant field.

    The step is an exact fraction of the carrier period so the sample values
    repeat after one period, letting the propagator reuse cached step
    unitaries.
    """
    dt = drive.period / samples_per_period
    n_steps = int(math.ceil(t_max / dt))
    one_period = drive.values((np.arange(samples_per_period) + 0.5) * dt)
    reps = int(math.ceil(n_steps / samples_per_period))
    samples = np.tile(one_period, (reps, 1))[:n_steps]
    return ControlField(dt=dt, samples=samples, active_mask=(False, True, True))


def validate_drive_full_model(
    p: SystemParams,
    trunc: TruncationSpec,
    drive: SinusoidalDrive,
    t_max: float,
    psi0: np.ndarray | None = None,
    target: np.ndarray | None = None,
    samples_per_period: int = 64,
) -> tuple[float, float]:
    """Maximum fidelity to the target under the exact cosine drive.

    Propagates the full (not averaged) Hamiltonian.  Defaults: start from
    |1,0,0> (the spin excited, both oscillators empty) and target the shared
    one-excitation state, as in the weak-coupling exchange scenario.  Returns
    (max fidelity, time of the maximum).
    """
    if psi0 is None:
        psi0 = basis_state(trunc, 1, 0, 0)
    if target is None:
        target = exchange_target(trunc)
    field = sample_drive(drive, t_max, samples_per_period)
    traj = propagate(p, trunc, field, psi0)
    f = np.abs(traj.states @ np.conj(target)) ** 2
    j = int(np.argmax(f))
    return float(f[j]), float(traj.times[j])


# ---------------------------------------------------------------------------
# Magnus second-order error estimate
# ---------------------------------------------------------------------------

def rotating_frame_fourier(
    p: SystemParams,
    trunc: TruncationSpec,
    drive: SinusoidalDrive,
    n_max: int,
    n_samples: int = 256,
) -> dict[int, np.ndarray]:
    """Fourier coefficients H'_n of the rotating-frame Hamiltonian.

    H'(t) = U_c(t)^dag [H_0 + couplings] U_c(t) is periodic with the carrier
    period; the coefficients are extracted by FFT over uniform samples.
    """
    h_static = build_h0(p, trunc) + build_coupling_h(p, trunc)
    axis = drive.axis_operator()
    evals, vecs = np.linalg.eigh(axis)
    iosc = np.eye(trunc.n_a * trunc.n_b)
    w_full = np.kron(vecs, iosc)
    h_axis = w_full.conj().T @ h_static @ w_full
    delta = np.subtract.outer(evals, evals)
    delta_full = np.kron(delta, np.ones((trunc.n_a * trunc.n_b,) * 2))

    ts = np.arange(n_samples) / n_samples  # in units of the period
    samples = np.empty((n_samples,) + h_axis.shape, dtype=complex)
    for i, tau in enumerate(ts):
        b = drive.x * math.sin(2.0 * math.pi * tau)
        samples[i] = h_axis * np.exp(1j * b * delta_full)
    coeffs = np.fft.ifft(samples, axis=0)
    out = {}
    for n in range(-n_max, n_max + 1):
        h_n_axis = coeffs[n % n_samples]
        out[n] = w_full @ h_n_axis @ w_full.conj().T
    return out


def magnus_error_estimate(
    drive: SinusoidalDrive,
    t: float,
    n_max: int = 4,
    k_max: int = 4,
    p: SystemParams | None = None,
    trunc: TruncationSpec | None = None,
) -> tuple[float, float]:
    """Estimate of the neglected second-order Magnus term.

    Sums spectral norms of the Fourier-coefficient commutators weighted by
    bounds on the corresponding double time integrals.  Also returns the
    leading large-carrier contribution (t/Omega_c) ||[H'_0, H'_1]||.  This is
    a magnitude estimate, not a certified bound: the overall constant of the
    underlying inequality is not tracked.
    """
    if n_max < 1 or k_max < 1:
        raise ValueError("n_max and k_max must be >= 1")
    if p is None:
        p = default_drive_system()
    if trunc is None:
        trunc = TruncationSpec(4, 4)
    coeffs = rotating_frame_fourier(p, trunc, drive, n_max + k_max)
    omega_c = drive.carrier

    def bracket_bound(n: int, k: int) -> float:
        if n == 0 or n + k == 0:
            kk = k if n == 0 else abs(n)
            return (2.0 / (kk * omega_c) + t) / (kk * omega_c)
        return (
            1.0 / (k * abs(n))
            + 1.0 / abs(n * (k + n))
            + 1.0 / (k * abs(k + n))
        ) / omega_c

    total = 0.0
    for n in range(-n_max, n_max + 1):
        for k in range(1, k_max + 1):
            if n + k > n_max + k_max:
                continue
            comm = coeffs[n] @ coeffs[n + k] - coeffs[n + k] @ coeffs[n]
            norm = np.linalg.norm(comm, 2)
            if norm > 0:
                total += norm * bracket_bound(n, k)
    comm01 = coeffs[0] @ coeffs[1] - coeffs[1] @ coeffs[0]
    leading = (t / omega_c) * np.linalg.norm(comm01, 2)
    return float(total), float(leading)
