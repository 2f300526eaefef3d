"""Time evolution, fidelities, participation ratios, and spectral scans."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolationError
from .hilbert import (
    SystemParams,
    TruncationSpec,
    basis_labels,
    build_coupling_h,
    build_h0,
    build_total_h,
    control_ops,
    leakage_mask,
)

LEAKAGE_THRESHOLD = 1e-6


class TruncationLeakageWarning(UserWarning):
    """Population reached the top Fock levels; the truncation may be too small."""


@dataclass(frozen=True)
class ControlField:
    """Piecewise-constant control samples (Omega_x, Omega_y, Omega_z).

    samples has shape (n_steps, 3); dt is the step length in 1/omega_a.
    Components switched off in active_mask must be identically zero.
    """

    dt: float
    samples: np.ndarray
    active_mask: tuple[bool, bool, bool] = (True, True, True)

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if samples.ndim != 2 or samples.shape[1] != 3:
            raise ValueError("samples must have shape (n_steps, 3)")
        object.__setattr__(self, "samples", samples)
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        for c, active in enumerate(self.active_mask):
            if not active and np.any(samples[:, c] != 0.0):
                raise ValueError(f"masked control component {c} has nonzero samples")

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.dt * self.n_steps

    @property
    def times(self) -> np.ndarray:
        """Sample-boundary times, 0 .. duration inclusive."""
        return self.dt * np.arange(self.n_steps + 1)

    @classmethod
    def zero(cls, dt: float, n_steps: int) -> "ControlField":
        return cls(dt=dt, samples=np.zeros((n_steps, 3)))

    def with_samples(self, samples: np.ndarray) -> "ControlField":
        return replace(self, samples=samples)


@dataclass
class Trajectory:
    """States and derived observables sampled on step boundaries."""

    times: np.ndarray
    states: np.ndarray  # (n_times, dim)
    populations: np.ndarray  # (n_times, dim)
    ipr_series: np.ndarray
    leakage_max: float
    leakage_flagged: bool


@dataclass
class EigenSystem:
    """Eigen-decomposition of a Hermitian operator plus per-vector IPR."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ipr_per_vector: np.ndarray


def _check_hermitian(h: np.ndarray, rtol: float = 1e-10) -> None:
    scale = max(1.0, np.abs(h).max())
    dev = np.abs(h - h.conj().T).max()
    if dev > rtol * scale:
        raise ContractViolationError(
            f"matrix is not Hermitian: max|H - H^dag| = {dev:.3e} (scale {scale:.3e})"
        )


def expm_skew(h: np.ndarray, dt: float) -> np.ndarray:
    """Unitary step propagator exp(-i dt H) of a Hermitian H via eigendecomposition."""
    _check_hermitian(h)
    evals, vecs = np.linalg.eigh(h)
    phases = np.exp(-1j * dt * evals)
    return (vecs * phases) @ vecs.conj().T


def fidelity(target: np.ndarray, psi: np.ndarray) -> float:
    """Squared overlap |<target|psi>|^2."""
    if target.shape != psi.shape:
        raise ValueError(f"dimension mismatch: {target.shape} vs {psi.shape}")
    return float(abs(np.vdot(target, psi)) ** 2)


def fidelity_eig(target: np.ndarray, h: np.ndarray) -> float:
    """Largest squared overlap of target with any eigenvector of Hermitian h.

    In an exactly degenerate subspace the eigenvector basis returned by the
    solver is arbitrary, so this can understate the overlap achievable with
    an optimized basis choice inside that subspace; the maximum is taken over
    the raw eigenvectors as computed.
    """
    _check_hermitian(h)
    _, vecs = np.linalg.eigh(h)
    return float(np.max(np.abs(vecs.conj().T @ target) ** 2))


def ipr(psi: np.ndarray) -> float:
    """Inverse participation ratio (sum_n |psi_n|^4)^-1, in [1, dim]."""
    return float(1.0 / np.sum(np.abs(psi) ** 4))


def _ipr_rows(states: np.ndarray) -> np.ndarray:
    return 1.0 / np.sum(np.abs(states) ** 4, axis=1)


def propagate(
    p: SystemParams,
    trunc: TruncationSpec,
    field: ControlField,
    psi0: np.ndarray,
    store_every: int = 1,
) -> Trajectory:
    """Evolve psi0 under the piecewise-constant field, storing boundary states.

    Each step applies exp(-i dt H_k) exactly.  Steps whose sample triple
    repeats reuse a cached propagator.  A flagged-truncation warning is issued
    (and recorded on the trajectory) if the population of the top two Fock
    levels of either oscillator exceeds the leakage threshold.
    """
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    if psi0.shape != (trunc.dim,):
        raise ValueError("psi0 dimension incompatible with truncation")

    h_static = build_h0(p, trunc) + build_coupling_h(p, trunc)
    s_ops = control_ops(trunc)

    states = [psi0.astype(complex)]
    times = [0.0]
    psi = psi0.astype(complex)
    cache: dict[bytes, np.ndarray] = {}
    for k in range(field.n_steps):
        sample = field.samples[k]
        key = sample.tobytes()
        u = cache.get(key)
        if u is None:
            h = h_static
            for amp, s in zip(sample, s_ops):
                if amp:
                    h = h + amp * s
            u = expm_skew(h, field.dt)
            cache[key] = u
        psi = u @ psi
        if (k + 1) % store_every == 0 or k == field.n_steps - 1:
            states.append(psi)
            times.append((k + 1) * field.dt)

    states = np.array(states)
    populations = np.abs(states) ** 2
    leak = populations[:, leakage_mask(trunc)].sum(axis=1)
    leakage_max = float(leak.max())
    flagged = leakage_max > LEAKAGE_THRESHOLD
    if flagged:
        warnings.warn(
            f"truncation leakage {leakage_max:.2e} exceeds {LEAKAGE_THRESHOLD:.0e}; "
            f"increase (n_a, n_b) = ({trunc.n_a}, {trunc.n_b})",
            TruncationLeakageWarning,
            stacklevel=2,
        )
    return Trajectory(
        times=np.array(times),
        states=states,
        populations=populations,
        ipr_series=_ipr_rows(states),
        leakage_max=leakage_max,
        leakage_flagged=flagged,
    )


def free_states(
    p: SystemParams,
    trunc: TruncationSpec,
    psi0: np.ndarray,
    times: np.ndarray,
) -> np.ndarray:
    """States exp(-i H t)|psi0> of the uncontrolled Hamiltonian, one row per time."""
    h = build_total_h(p, trunc)
    evals, vecs = np.linalg.eigh(h)
    c = vecs.conj().T @ psi0
    phases = np.exp(-1j * np.outer(np.asarray(times), evals))
    return (phases * c) @ vecs.T


def eigensystem(h: np.ndarray) -> EigenSystem:
    """Eigendecomposition with per-eigenvector IPR."""
    _check_hermitian(h)
    evals, vecs = np.linalg.eigh(h)
    return EigenSystem(
        eigenvalues=evals,
        eigenvectors=vecs,
        ipr_per_vector=_ipr_rows(vecs.T),
    )


def spectrum_scan(
    p: SystemParams,
    trunc: TruncationSpec,
    g_values: np.ndarray,
    g_ratio: float,
    threads: int = 1,
) -> list[EigenSystem]:
    """Eigen-systems of the uncontrolled Hamiltonian along a coupling scan.

    For each g_a in g_values the second coupling is set to g_b = g_ratio*g_a.
    Scan points are independent; threads > 1 evaluates them concurrently.
    """

    def point(g_a: float) -> EigenSystem:
        pg = replace(p, g_a=float(g_a), g_b=float(g_ratio * g_a))
        return eigensystem(build_total_h(pg, trunc))

    gs = [float(g) for g in np.asarray(g_values, dtype=float)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(point, gs))
    return [point(g) for g in gs]


@dataclass(frozen=True)
class EnvelopeGrid:
    """Sampling resolution for the no-control fidelity envelope.

    Couplings are log-spaced over [g_max/g_span, g_max]; times are uniform
    on [0, t_max].
    """

    n_g: int = 32
    n_t: int = 512
    g_span: float = 100.0


@dataclass
class EnvelopeResult:
    value: float
    g_at_max: float
    t_at_max: float


def no_control_envelope(
    p: SystemParams,
    trunc: TruncationSpec,
    psi0: np.ndarray,
    target: np.ndarray,
    g_max: float,
    t_max: float,
    grid: EnvelopeGrid = EnvelopeGrid(),
) -> EnvelopeResult:
    """Best uncontrolled fidelity over couplings g_a <= g_max and times t <= t_max.

    The ratio g_b/g_a is held at its value in p.  Returns the maximum together
    with the arg-max coupling and time.
    """
    if p.g_a <= 0:
        raise ValueError("p.g_a must be positive to define the g_b/g_a ratio")
    ratio = p.g_b / p.g_a
    g_values = np.exp(
        np.linspace(np.log(g_max / grid.g_span), np.log(g_max), grid.n_g)
    )
    times = np.linspace(0.0, t_max, grid.n_t)
    best = EnvelopeResult(value=fidelity(target, psi0), g_at_max=0.0, t_at_max=0.0)
    for g_a in g_values:
        pg = replace(p, g_a=float(g_a), g_b=float(ratio * g_a))
        evals, vecs = np.linalg.eigh(build_total_h(pg, trunc))
        c = vecs.conj().T @ psi0
        w = vecs.conj().T @ target
        amp = np.exp(-1j * np.outer(times, evals)) @ (np.conj(w) * c)
        f = np.abs(amp) ** 2
        j = int(np.argmax(f))
        if f[j] > best.value:
            best = EnvelopeResult(value=float(f[j]), g_at_max=float(g_a), t_at_max=float(times[j]))
    return best


def population_column_labels(trunc: TruncationSpec) -> list[str]:
    return [f"pop_{b.m:+d}_{b.k}_{b.l}" for b in basis_labels(trunc)]


def trajectory_to_csv(traj: Trajectory, trunc: TruncationSpec, path) -> None:
    """Write (t, populations..., ipr) rows with basis-labelled headers."""
    header = ["t"] + population_column_labels(trunc) + ["ipr"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, t in enumerate(traj.times):
            row = [f"{t:.12g}"]
            row += [f"{x:.12g}" for x in traj.populations[i]]
            row.append(f"{traj.ipr_series[i]:.12g}")
            writer.writerow(row)


def spectrum_to_csv(scans: list[EigenSystem], g_values: np.ndarray, path) -> None:
    """Write (g_a, eigen_index, energy, ipr) rows for a coupling scan."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["g_a", "eigen_index", "energy", "ipr"])
        for g_a, es in zip(np.asarray(g_values, dtype=float), scans):
            for idx, (e, r) in enumerate(zip(es.eigenvalues, es.ipr_per_vector)):
                writer.writerow([f"{g_a:.12g}", idx, f"{e:.12g}", f"{r:.12g}"])
