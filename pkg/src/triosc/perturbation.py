"""Degenerate perturbation theory on resonant three-state manifolds.

Provides a generic first/second-order effective-Hamiltonian builder for any
degenerate subspace of the uncoupled Hamiltonian, closed-form blocks for the
one-excitation (R1) and two-excitation (R2) resonances, and the angle
optimization that makes the shared two-excitation state an eigenvector.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularResonanceError
from .hilbert import (
    SystemParams,
    TruncationSpec,
    basis_labels,
    build_coupling_h,
    flat_index,
    h0_energies,
    resonant_system,
)

R1_LABELS = ((0, 1, 0), (-1, 0, 1), (1, 0, 0))
R2_LABELS = ((-1, 1, 1), (0, 2, 0), (1, 0, 2))

_DEGENERACY_TOL = 1e-10
_DENOMINATOR_TOL = 1e-9


@dataclass(frozen=True)
class DegenerateSubspace:
    """A set of basis states sharing one unperturbed energy."""

    labels: tuple[tuple[int, int, int], ...]
    energy: float
    indices: tuple[int, ...]


def degenerate_subspace(
    p: SystemParams, trunc: TruncationSpec, labels
) -> DegenerateSubspace:
    """Validate that the labelled states are degenerate under H_0 and wrap them."""
    labels = tuple(tuple(lbl) for lbl in labels)
    energies = h0_energies(p, trunc)
    indices = tuple(flat_index(trunc, *lbl) for lbl in labels)
    e = energies[indices[0]]
    for lbl, idx in zip(labels, indices):
        if abs(energies[idx] - e) > _DEGENERACY_TOL:
            raise ValueError(
                f"state {lbl} has energy {energies[idx]:.12g}, expected {e:.12g}"
            )
    return DegenerateSubspace(labels=labels, energy=float(e), indices=indices)


def r1_subspace(p: SystemParams, trunc: TruncationSpec) -> DegenerateSubspace:
    return degenerate_subspace(p, trunc, R1_LABELS)


def r2_subspace(p: SystemParams, trunc: TruncationSpec) -> DegenerateSubspace:
    return degenerate_subspace(p, trunc, R2_LABELS)


@dataclass(frozen=True)
class EffectiveBlock:
    """Effective Hamiltonian restricted to a degenerate subspace."""

    matrix: np.ndarray
    basis: DegenerateSubspace
    order: int


def generic_pt(
    h0: np.ndarray,
    v: np.ndarray,
    sub: DegenerateSubspace,
    order: int,
) -> EffectiveBlock:
    """First- or second-order effective block of h0 + v on the subspace.

    Order 1 is the bare restriction <i|v|j>.  Order 2 sums over intermediate
    states m outside the subspace with denominators E_sub - E_m; a coupled
    intermediate state degenerate with the subspace raises
    SingularResonanceError.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    idx = np.array(sub.indices)
    if order == 1:
        block = v[np.ix_(idx, idx)].copy()
        return EffectiveBlock(matrix=block, basis=sub, order=1)

    energies = np.real(np.diag(h0))
    dim = h0.shape[0]
    outside = np.setdiff1d(np.arange(dim), idx)
    denom = sub.energy - energies[outside]
    v_sub_out = v[np.ix_(idx, outside)]

    coupled = np.any(np.abs(v_sub_out) > 1e-15, axis=0)
    singular = (np.abs(denom) < _DENOMINATOR_TOL) & coupled
    if np.any(singular):
        bad = outside[singular][0]
        raise SingularResonanceError(
            f"intermediate state index {bad} is degenerate with the subspace "
            f"(energy {energies[bad]:.12g}) and coupled to it",
            state=int(bad),
        )
    safe = np.abs(denom) >= _DENOMINATOR_TOL
    weights = np.zeros_like(denom)
    weights[safe] = 1.0 / denom[safe]
    block = (v_sub_out * weights) @ v_sub_out.conj().T
    block = 0.5 * (block + block.conj().T)
    return EffectiveBlock(matrix=block, basis=sub, order=2)


def closed_form_r1(p: SystemParams) -> EffectiveBlock:
    """First-order R1 block on {|0,1,0>, |-1,0,1>, |1,0,0>}.

    Couplings (the constant omega_a shift is dropped):
      <0,1,0|H|1,0,0>  = (g_a/sqrt 2) sin(phi_a) e^{+i theta_a}
      <-1,0,1|H|1,0,0> = -(1-alpha) g_b e^{+i gamma_b}
    The phases follow this package's spin-basis convention (see
    hilbert.spin1_operators); they are complex-conjugate relabelings of the
    usual ones and carry no physical content.
    """
    block = np.zeros((3, 3), dtype=complex)
    c = (p.g_a / math.sqrt(2.0)) * math.sin(p.phi_a) * np.exp(1j * p.theta_a)
    d = -(1 - p.alpha) * p.g_b * np.exp(1j * p.gamma_b)
    block[0, 2] = c
    block[1, 2] = d
    block[2, 0] = np.conj(c)
    block[2, 1] = np.conj(d)
    sub = DegenerateSubspace(labels=R1_LABELS, energy=1.0, indices=(0, 1, 2))
    return EffectiveBlock(matrix=block, basis=sub, order=1)


def r1_analytic_angles(g_a: float, g_b: float) -> list[float]:
    """All phi_a in [0, pi] with sin(phi_a) = sqrt(2) g_b / g_a.

    These make (|0,1,0> + |-1,0,1>)/sqrt(2) an eigenvector of the R1 block
    when alpha = 0 and gamma_b = theta_a.  Empty when sqrt(2) g_b > g_a.
    """
    if g_a <= 0:
        raise ValueError("g_a must be positive")
    s = math.sqrt(2.0) * g_b / g_a
    if s > 1.0:
        return []
    phi = math.asin(s)
    if abs(phi - math.pi / 2) < 1e-15:
        return [math.pi / 2]
    return [phi, math.pi - phi]


def r2_coefficients(
    omega_a: float,
    omega_b: float,
    g_a: float,
    g_b: float,
    phi_a: float,
    phi_b: float,
) -> tuple[float, float, float, float, float]:
    """The five independent entries of the second-order R2 block.

    Returns (v11, v12, v13, v22, v33) on the ordered basis
    {|-1,1,1>, |0,2,0>, |1,0,2>}; v23 vanishes identically.  Every entry is
    pi-periodic in both angles.
    """
    wa, wb = omega_a, omega_b
    ratio = wb / wa
    for bad, what in (
        (0.5, "omega_b = omega_a/2"),
        (2.0 / 3.0, "omega_b = 2 omega_a/3"),
        (1.5, "omega_b = 3 omega_a/2"),
        (2.0, "omega_b = 2 omega_a"),
    ):
        if abs(ratio - bad) < 1e-9:
            raise SingularResonanceError(
                f"frequency ratio {what} makes a second-order denominator vanish"
            )
    sa, ca = math.sin(phi_a), math.cos(phi_a)
    sb, cb = math.sin(phi_b), math.cos(phi_b)
    ga2, gb2, gab = g_a**2, g_b**2, g_a * g_b

    v11 = 0.5 * (
        ga2 * sa**2 * (3 * wb - 4 * wa) / (wb * (2 * wa - wb))
        - 2 * ga2 * ca**2 / wa
        + gb2 * sb**2 * (3 * wa - 2 * wb) / (wa * (wa - 2 * wb))
        - 2 * gb2 * cb**2 / wb
    )
    v12 = gab * (ca * sb / wa - sa * cb / wb)
    v13 = 3 * gab * sa * sb * (wa - wb) / (math.sqrt(2.0) * (wa - 2 * wb) * (2 * wa - wb))
    v22 = 0.5 * (
        ga2
        * sa**2
        * (3 / (wb - 2 * wa) + 3 / (2 * wb - 3 * wa) - 2 / (wa - 2 * wb) + 2 / wb)
        + gb2 * sb**2 * (1 / (wb - 2 * wa) - 1 / wa)
    )
    v33 = (
        ga2 * sa**2 / (2 * wa - 4 * wb)
        - ga2 * ca**2 / wa
        + gb2 * sb**2 * (10 * wa - 9 * wb) / (8 * wa**2 - 16 * wa * wb + 6 * wb**2)
        - gb2 * cb**2 / wb
    )
    return v11, v12, v13, v22, v33


def closed_form_r2(p: SystemParams) -> EffectiveBlock:
    """Second-order R2 block on {|-1,1,1>, |0,2,0>, |1,0,2>}.

    Requires theta_a = theta_b = 0 and alpha = 1 (both couplings are then
    sin(phi) S_x + cos(phi) S_z).  The |0,2,0> <-> |1,0,2> entry is zero at
    this order.  The off-diagonal entries involving |-1,1,1> carry a minus
    sign relative to their textbook form, consistently with the spin-basis
    phase convention used everywhere in this package.
    """
    if p.alpha != 1:
        raise ValueError("closed_form_r2 requires alpha = 1")
    for theta in (p.theta_a, p.theta_b):
        wrapped = theta % (2 * math.pi)
        if min(wrapped, 2 * math.pi - wrapped) > 1e-12:
            raise ValueError("closed_form_r2 requires theta_a = theta_b = 0")
    v11, v12, v13, v22, v33 = r2_coefficients(
        p.omega_a, p.omega_b, p.g_a, p.g_b, p.phi_a, p.phi_b
    )
    block = np.array(
        [
            [v11, -v12, -v13],
            [-v12, v22, 0.0],
            [-v13, 0.0, v33],
        ],
        dtype=complex,
    )
    sub = DegenerateSubspace(labels=R2_LABELS, energy=2.0, indices=(0, 1, 2))
    return EffectiveBlock(matrix=block, basis=sub, order=2)


def r2_block_fidelity(omega_ratio: float, g_ratio: float, phi_a: float, phi_b: float) -> float:
    """F_eig of (|0,2,0> + |1,0,2>)/sqrt(2) against the closed-form R2 block.

    Second-order entries scale uniformly with g_a^2, so the result only
    depends on omega_b/omega_a and g_b/g_a.
    """
    p = resonant_system(
        "R2",
        omega_b=omega_ratio,
        g_a=1.0,
        g_b=g_ratio,
        alpha=1,
        phi_a=phi_a,
        phi_b=phi_b,
    )
    block = closed_form_r2(p).matrix
    _, vecs = np.linalg.eigh(block)
    target = np.array([0.0, 1.0, 1.0]) / math.sqrt(2.0)
    return float(np.max(np.abs(vecs.conj().T @ target) ** 2))


def optimize_r2_angles(
    omega_ratio: float,
    g_ratio: float,
    n_grid: int = 24,
    seed: int = 0,
) -> tuple[float, float, float]:
    """Globally maximize the R2 block fidelity over (phi_a, phi_b) in [0, pi]^2.

    Returns (phi_a, phi_b, F_eig) for the global maximum; among equally good
    maxima the one with the smallest phi_a (then phi_b) is returned.
    """
    from .optimize import multistart_minimize

    if not (0 < omega_ratio < 1) or abs(omega_ratio - 0.5) < 1e-9:
        raise SingularResonanceError(
            f"omega_ratio {omega_ratio} outside the admissible range (0,1) \\ {{1/2, 2/3}}"
        )

    def objective(x):
        return -r2_block_fidelity(omega_ratio, g_ratio, x[0], x[1])

    bounds = [(0.0, math.pi), (0.0, math.pi)]
    candidates = multistart_minimize(objective, bounds, n_grid=n_grid, seed=seed)
    best_f = min(f for _, f in candidates)
    ties = [x for x, f in candidates if f <= best_f + 1e-9]
    ties.sort(key=lambda x: (x[0], x[1]))
    phi_a, phi_b = ties[0]
    return float(phi_a), float(phi_b), -best_f


def r2_fidelity_map(
    omega_ratios: np.ndarray,
    g_ratios: np.ndarray,
    n_grid: int = 24,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Optimized F_eig and arg-max angles on an (omega_ratio, g_ratio) grid."""
    omega_ratios = np.asarray(omega_ratios, dtype=float)
    g_ratios = np.asarray(g_ratios, dtype=float)
    f = np.zeros((len(omega_ratios), len(g_ratios)))
    pa = np.zeros_like(f)
    pb = np.zeros_like(f)
    for i, wr in enumerate(omega_ratios):
        for j, gr in enumerate(g_ratios):
            phi_a, phi_b, feig = optimize_r2_angles(wr, gr, n_grid=n_grid)
            f[i, j], pa[i, j], pb[i, j] = feig, phi_a, phi_b
    return f, pa, pb


def r2_map_to_csv(omega_ratios, g_ratios, f, pa, pb, path) -> None:
    """Write (omega_ratio, g_ratio, F_eig, phi_a_opt, phi_b_opt) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega_ratio", "g_ratio", "F_eig", "phi_a_opt", "phi_b_opt"])
        for i, wr in enumerate(omega_ratios):
            for j, gr in enumerate(g_ratios):
                writer.writerow(
                    [
                        f"{wr:.12g}",
                        f"{gr:.12g}",
                        f"{f[i, j]:.12g}",
                        f"{pa[i, j]:.12g}",
                        f"{pb[i, j]:.12g}",
                    ]
                )


def coupling_perturbation(p: SystemParams, trunc: TruncationSpec) -> np.ndarray:
    """The full-space perturbation used by the cross-path checks."""
    return build_coupling_h(p, trunc)


def label_of_index(trunc: TruncationSpec, index: int):
    """Basis label (m, k, l) of a flat index; convenience for error reporting."""
    b = basis_labels(trunc)[index]
    return (b.m, b.k, b.l)
