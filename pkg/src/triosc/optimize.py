"""Numerical optimizers: multi-start scalar optimization and GRAPE pulse design."""

from __future__ import annotations

import json
import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .dynamics import ControlField, propagate
from .hilbert import (
    SystemParams,
    TruncationSpec,
    build_coupling_h,
    build_h0,
    control_ops,
)

CONTROL_NAMES = ("x", "y", "z")


# ---------------------------------------------------------------------------
# Global scalar optimization
# ---------------------------------------------------------------------------

def multistart_minimize(
    objective,
    bounds,
    n_grid: int = 24,
    n_random: int = 0,
    seed: int = 0,
    top_k: int = 8,
    xatol: float = 1e-9,
) -> list[tuple[np.ndarray, float]]:
    """Polished candidate minima from a coarse grid plus Nelder-Mead refinement.

    Deterministic for a fixed seed.  Returns (point, value) pairs for every
    refined start, so callers can apply their own tie-breaking.
    """
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    ndim = len(bounds)
    axes = [np.linspace(lo, hi, n_grid) for lo, hi in bounds]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    if n_random:
        rng = np.random.default_rng(seed)
        extra = rng.uniform(
            [lo for lo, _ in bounds], [hi for _, hi in bounds], size=(n_random, ndim)
        )
        points = np.vstack([points, extra])

    values = np.array([objective(x) for x in points])
    order = np.argsort(values, kind="stable")[: max(top_k, 1)]

    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def clipped(x):
        return objective(np.clip(x, lo, hi))

    candidates = []
    for idx in order:
        res = minimize(
            clipped,
            points[idx],
            method="Nelder-Mead",
            options={"xatol": xatol, "fatol": 1e-12, "maxiter": 2000},
        )
        x = np.clip(res.x, lo, hi)
        candidates.append((x, float(objective(x))))
    return candidates


def global_minimize(objective, bounds, n_grid: int = 24, seed: int = 0):
    """Best (arg, value) over the multi-start strategy; reproducible for a seed."""
    candidates = multistart_minimize(objective, bounds, n_grid=n_grid, seed=seed)
    x, f = min(candidates, key=lambda c: c[1])
    return x, f


# ---------------------------------------------------------------------------
# GRAPE
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GrapeProblem:
    """A state-transfer pulse-design problem on the truncated model."""

    params: SystemParams
    trunc: TruncationSpec
    psi0: np.ndarray
    target: np.ndarray
    duration: float
    n_steps: int
    active_controls: tuple[str, ...] = ("y", "z")
    max_iters: int = 500
    convergence_tol: float = 1e-10

    def __post_init__(self):
        for c in self.active_controls:
            if c not in CONTROL_NAMES:
                raise ValueError(f"unknown control axis {c!r}")
        if abs(np.linalg.norm(self.psi0) - 1) > 1e-10:
            raise ValueError("psi0 must be normalized")
        if self.psi0.shape != (self.trunc.dim,) or self.target.shape != (self.trunc.dim,):
            raise ValueError("state dimensions incompatible with truncation")

    @property
    def dt(self) -> float:
        return self.duration / self.n_steps

    @property
    def active_mask(self) -> tuple[bool, bool, bool]:
        return tuple(name in self.active_controls for name in CONTROL_NAMES)

    def zero_field(self) -> ControlField:
        return ControlField(
            dt=self.dt, samples=np.zeros((self.n_steps, 3)), active_mask=self.active_mask
        )

    def initial_field(self, amplitude: float = 1e-3, frequency: float = 1.0, seed: int = 0) -> ControlField:
        """Near-zero sinusoidal seed field with seed-controlled phases."""
        rng = np.random.default_rng(seed)
        times = (np.arange(self.n_steps) + 0.5) * self.dt
        samples = np.zeros((self.n_steps, 3))
        for c, active in enumerate(self.active_mask):
            if active:
                samples[:, c] = amplitude * np.sin(frequency * times + rng.uniform(0, 2 * math.pi))
        return ControlField(dt=self.dt, samples=samples, active_mask=self.active_mask)


@dataclass
class GrapeResult:
    field: ControlField
    fidelity: float
    fidelity_history: np.ndarray
    gradient_norm_final: float
    converged: bool
    iterations: int


def _sinc(x: np.ndarray) -> np.ndarray:
    return np.sinc(x / math.pi)


def grape_fidelity_and_gradient(prob: GrapeProblem, field: ControlField):
    """Transfer fidelity and its exact gradient w.r.t. every control sample.

    Forward-propagates psi0 and back-propagates the target through the
    piecewise-constant steps.  The step-propagator derivative is exact
    (eigenbasis divided-difference form), so the gradient is correct at any
    dt.  Returns (F, gradient) with gradient shaped like field.samples;
    inactive components are zero.
    """
    if field.samples.shape != (prob.n_steps, 3):
        raise ValueError(
            f"field shape {field.samples.shape} does not match problem ({prob.n_steps}, 3)"
        )
    dt = prob.dt
    h_static = build_h0(prob.params, prob.trunc) + build_coupling_h(prob.params, prob.trunc)
    s_ops = control_ops(prob.trunc)
    active = [c for c in range(3) if prob.active_mask[c]]
    n = prob.n_steps

    evals_list = []
    vecs_list = []
    fwd = np.empty((n + 1, prob.trunc.dim), dtype=complex)
    fwd[0] = prob.psi0
    for k in range(n):
        h = h_static
        for c in active:
            amp = field.samples[k, c]
            if amp:
                h = h + amp * s_ops[c]
        evals, vecs = np.linalg.eigh(h)
        evals_list.append(evals)
        vecs_list.append(vecs)
        coeff = vecs.conj().T @ fwd[k]
        fwd[k + 1] = vecs @ (np.exp(-1j * dt * evals) * coeff)

    bwd = np.empty((n + 1, prob.trunc.dim), dtype=complex)
    bwd[n] = prob.target
    for k in range(n - 1, -1, -1):
        # chi_k = U_{k+1}^dag ... U_n^dag target, with U = V e^{-i dt L} V^dag
        coeff = vecs_list[k].conj().T @ bwd[k + 1]
        bwd[k] = vecs_list[k] @ (np.exp(1j * dt * evals_list[k]) * coeff)

    overlap = np.vdot(prob.target, fwd[n])
    fid = float(abs(overlap) ** 2)

    grad = np.zeros((n, 3))
    for k in range(n):
        evals, vecs = evals_list[k], vecs_list[k]
        a = vecs.conj().T @ fwd[k]
        b = vecs.conj().T @ bwd[k + 1]
        delta = np.subtract.outer(evals, evals)
        mean = 0.5 * np.add.outer(evals, evals)
        # exact divided difference of e^{-i dt lambda}
        phi = -1j * dt * np.exp(-1j * dt * mean) * _sinc(0.5 * dt * delta)
        for c in active:
            m = vecs.conj().T @ (s_ops[c] @ vecs)
            d_overlap = np.conj(b) @ ((m * phi) @ a)
            grad[k, c] = 2.0 * np.real(np.conj(overlap) * d_overlap)
    return fid, grad


def grape_optimize(
    prob: GrapeProblem,
    seed: int = 0,
    method: str = "ascent",
    init_amplitude: float = 1e-3,
    step_init: float = 1.0,
    history_window: int = 50,
    history_gain_tol: float = 1e-9,
    amplitude_limit: float | None = None,
    callback=None,
) -> GrapeResult:
    """Iteratively deform a near-zero sinusoidal field to maximize the fidelity.

    method="ascent" is gradient ascent with a backtracking (Armijo) line
    search, so the recorded fidelity history is non-decreasing.  "adam" is an
    adaptive-moment variant (not strictly monotone).  "lbfgs" delegates the
    ascent to scipy's L-BFGS-B using the exact gradient; its history is the
    accepted-iterate sequence.  Non-convergence returns the best field found
    with converged=False.
    """
    field = prob.initial_field(amplitude=init_amplitude, seed=seed)
    if method == "lbfgs":
        return _grape_lbfgs(prob, field, amplitude_limit, callback)
    if method == "adam":
        return _grape_adam(prob, field, amplitude_limit, callback)
    if method != "ascent":
        raise ValueError(f"unknown method {method!r}")

    samples = field.samples.copy()
    fid, grad = grape_fidelity_and_gradient(prob, field)
    history = [fid]
    alpha = step_init
    g_norm = float(np.linalg.norm(grad))
    it = 0
    for it in range(1, prob.max_iters + 1):
        if g_norm < prob.convergence_tol:
            return GrapeResult(field.with_samples(samples), fid, np.array(history), g_norm, True, it - 1)
        accepted = False
        for _ in range(60):
            trial = samples + alpha * grad
            if amplitude_limit is not None:
                trial = np.clip(trial, -amplitude_limit, amplitude_limit)
            trial_field = field.with_samples(trial)
            f_new, g_new = grape_fidelity_and_gradient(prob, trial_field)
            if f_new >= fid + 1e-4 * alpha * g_norm**2 or f_new >= fid:
                if f_new >= fid - 1e-12:
                    samples, fid, grad = trial, f_new, g_new
                    g_norm = float(np.linalg.norm(grad))
                    accepted = True
                    alpha *= 1.5
                    break
            alpha *= 0.5
        history.append(fid)
        if callback is not None:
            callback(it, fid, g_norm)
        if not accepted:
            break
        if len(history) > history_window:
            gain = history[-1] - history[-1 - history_window]
            if gain < history_gain_tol * max(history[-1], 1e-30):
                return GrapeResult(field.with_samples(samples), fid, np.array(history), g_norm, True, it)
    converged = g_norm < prob.convergence_tol
    return GrapeResult(field.with_samples(samples), fid, np.array(history), g_norm, converged, it)


def _grape_lbfgs(prob: GrapeProblem, field: ControlField, amplitude_limit, callback):
    active = [c for c in range(3) if prob.active_mask[c]]
    n = prob.n_steps
    history = []

    def unpack(theta):
        samples = np.zeros((n, 3))
        for j, c in enumerate(active):
            samples[:, c] = theta[j * n:(j + 1) * n]
        return samples

    def fun(theta):
        f, g = grape_fidelity_and_gradient(prob, field.with_samples(unpack(theta)))
        jac = np.concatenate([-g[:, c] for c in active])
        return -f, jac

    theta0 = np.concatenate([field.samples[:, c] for c in active])
    bounds = None
    if amplitude_limit is not None:
        bounds = [(-amplitude_limit, amplitude_limit)] * theta0.size

    def cb(theta):
        f, _ = grape_fidelity_and_gradient(prob, field.with_samples(unpack(theta)))
        history.append(f)
        if callback is not None:
            callback(len(history), f, float("nan"))

    res = minimize(
        fun,
        theta0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        callback=cb,
        options={"maxiter": prob.max_iters, "ftol": 1e-14, "gtol": prob.convergence_tol},
    )
    samples = unpack(res.x)
    fid, grad = grape_fidelity_and_gradient(prob, field.with_samples(samples))
    if not history or history[-1] != fid:
        history.append(fid)
    return GrapeResult(
        field.with_samples(samples),
        fid,
        np.array(history),
        float(np.linalg.norm(grad)),
        bool(res.success),
        int(res.nit),
    )


def _grape_adam(prob: GrapeProblem, field: ControlField, amplitude_limit, callback,
                lr: float = 0.05, beta1: float = 0.9, beta2: float = 0.999):
    samples = field.samples.copy()
    m = np.zeros_like(samples)
    v = np.zeros_like(samples)
    history = []
    fid, grad = grape_fidelity_and_gradient(prob, field)
    history.append(fid)
    best = (fid, samples.copy())
    it = 0
    for it in range(1, prob.max_iters + 1):
        m = beta1 * m + (1 - beta1) * grad
        v = beta2 * v + (1 - beta2) * grad**2
        mhat = m / (1 - beta1**it)
        vhat = v / (1 - beta2**it)
        samples = samples + lr * mhat / (np.sqrt(vhat) + 1e-12)
        if amplitude_limit is not None:
            samples = np.clip(samples, -amplitude_limit, amplitude_limit)
        fid, grad = grape_fidelity_and_gradient(prob, field.with_samples(samples))
        history.append(fid)
        if callback is not None:
            callback(it, fid, float(np.linalg.norm(grad)))
        if fid > best[0]:
            best = (fid, samples.copy())
        if np.linalg.norm(grad) < prob.convergence_tol:
            break
    fid, samples = best
    _, grad = grape_fidelity_and_gradient(prob, field.with_samples(samples))
    return GrapeResult(
        field.with_samples(samples),
        fid,
        np.array(history),
        float(np.linalg.norm(grad)),
        False,
        it,
    )


# ---------------------------------------------------------------------------
# Post-optimization analysis
# ---------------------------------------------------------------------------

def transfer_fidelity(prob: GrapeProblem, field: ControlField) -> float:
    """Fidelity of the transfer produced by a fixed field (no gradient)."""
    traj = propagate(prob.params, prob.trunc, field, prob.psi0)
    return float(abs(np.vdot(prob.target, traj.states[-1])) ** 2)


def robustness_scan(
    prob: GrapeProblem,
    field: ControlField,
    param_names=("g_a", "g_b", "D", "omega_z"),
    deltas=(-0.1, -0.05, -0.02, 0.0, 0.02, 0.05, 0.1),
) -> dict[str, list[tuple[float, float]]]:
    """Fidelity change under relative parameter perturbations with a fixed field.

    Returns {param: [(delta, F(delta) - F(0)), ...]}.
    """
    f0 = transfer_fidelity(prob, field)
    table: dict[str, list[tuple[float, float]]] = {}
    for name in param_names:
        base = getattr(prob.params, name)
        rows = []
        for delta in deltas:
            perturbed = replace(prob.params, **{name: base * (1.0 + delta)})
            f = transfer_fidelity(replace(prob, params=perturbed), field)
            rows.append((float(delta), float(f - f0)))
        table[name] = rows
    return table


@dataclass
class FieldSpectrum:
    frequencies: np.ndarray  # angular frequencies, units of omega_a
    amplitudes: np.ndarray  # (n_freq, 3) magnitudes


def spectral_analysis(field: ControlField) -> FieldSpectrum:
    """One-sided discrete amplitude spectrum of each control component."""
    n = field.n_steps
    amps = np.abs(np.fft.rfft(field.samples, axis=0)) / n
    freqs = 2.0 * math.pi * np.fft.rfftfreq(n, d=field.dt)
    return FieldSpectrum(frequencies=freqs, amplitudes=amps)


def spectral_weight_below(spectrum: FieldSpectrum, cutoff: float) -> float:
    """Fraction of total spectral power at angular frequencies below cutoff."""
    power = np.sum(spectrum.amplitudes**2, axis=1)
    total = power.sum()
    if total == 0:
        return 1.0
    return float(power[spectrum.frequencies < cutoff].sum() / total)


def field_to_csv(field: ControlField, path) -> None:
    """Write (t, Omega_x, Omega_y, Omega_z) rows at sample midpoints."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "Omega_x", "Omega_y", "Omega_z"])
        times = (np.arange(field.n_steps) + 0.5) * field.dt
        for t, row in zip(times, field.samples):
            writer.writerow([f"{t:.12g}"] + [f"{x:.12g}" for x in row])


def result_to_json(result: GrapeResult, path, extra: dict | None = None) -> None:
    """Serialize a GRAPE result (metadata plus fidelity history) as JSON."""
    payload = {
        "fidelity": result.fidelity,
        "gradient_norm_final": result.gradient_norm_final,
        "converged": result.converged,
        "iterations": result.iterations,
        "dt": result.field.dt,
        "n_steps": result.field.n_steps,
        "active_mask": list(result.field.active_mask),
        "fidelity_history": [float(f) for f in result.fidelity_history],
    }
    if extra:
        payload.update(extra)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
