"""Dynamical Lie-algebra rank and controllability of the truncated model.

The real Lie algebra generated by i x (drift and control Hamiltonians) is
grown by iterated commutators with Gram-Schmidt insertion until closure.  A
truncated model is pure-state controllable when the rank reaches
dim(su(d)) = d^2 - 1 (the drift is rendered traceless first, so the identity
direction never enters).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .hilbert import (
    SystemParams,
    TruncationSpec,
    build_total_h,
    control_ops,
)

_RANK_TOL = 1e-8


@dataclass
class LieBasis:
    """Orthonormal (Hilbert-Schmidt) basis of the generated Lie algebra."""

    elements: np.ndarray  # (rank, d, d) skew-Hermitian
    rank: int
    saturated: bool


@dataclass
class ControllabilityReport:
    controllable: bool
    rank: int
    expected: int
    generators_used: int
    saturated: bool

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(
                {
                    "controllable": self.controllable,
                    "rank": self.rank,
                    "expected": self.expected,
                    "generators_used": self.generators_used,
                    "saturated": self.saturated,
                },
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")


def _to_skew(g: np.ndarray) -> np.ndarray:
    """Accept iH (skew-Hermitian) directly or H (Hermitian) and convert."""
    if np.abs(g + g.conj().T).max() <= 1e-12 * max(1.0, np.abs(g).max()):
        return g.astype(complex)
    if np.abs(g - g.conj().T).max() <= 1e-12 * max(1.0, np.abs(g).max()):
        return 1j * g.astype(complex)
    raise ValueError("generator is neither Hermitian nor skew-Hermitian")


def lie_closure(generators, max_dim: int | None = None, tol: float = _RANK_TOL) -> LieBasis:
    """Grow the real Lie algebra spanned by the generators to closure.

    Each sweep commutes the newest directions with every generator (iterated
    right-nested brackets span the generated algebra), projects the results
    off the current span, and adds the orthonormalized remainder.  Stops at
    closure or when max_dim elements have been collected (saturated=True).

    All generators and candidates are projected onto traceless
    skew-Hermitian matrices: the identity direction is central and never
    affects controllability, and enforcing the structure keeps round-off
    from leaking outside the algebra's ambient space.  Ranks are therefore
    reported within su(d).
    """
    gens = [_to_skew(np.asarray(g, dtype=complex)) for g in generators]
    d = gens[0].shape[0]
    if max_dim is None:
        max_dim = d * d
    dim2 = d * d

    # The algebra is a REAL vector space: represent each skew-Hermitian
    # matrix as the real vector [Re(M), Im(M)] and work with real
    # coefficients (inner product Re tr(A^dag B)).  Complex coefficients
    # would count complex dimensions and let roundoff leave the
    # skew-Hermitian cone.
    def to_real(mats: np.ndarray) -> np.ndarray:
        flat = mats.reshape(len(mats), dim2)
        return np.hstack([flat.real, flat.imag])

    def to_matrices(rows: np.ndarray) -> np.ndarray:
        return (rows[:, :dim2] + 1j * rows[:, dim2:]).reshape(-1, d, d)

    def enforce_structure(mats: np.ndarray) -> np.ndarray:
        """Project onto traceless skew-Hermitian matrices.

        Exact commutators already live there; this strips the floating-point
        dust that would otherwise be amplified into spurious directions when
        a small residual is normalized.
        """
        mats = 0.5 * (mats - np.conj(np.transpose(mats, (0, 2, 1))))
        traces = np.einsum("nii->n", mats) / d
        return mats - traces[:, None, None] * np.eye(d)

    seeds = enforce_structure(np.stack(gens))
    seed_norms = np.sqrt(np.abs(np.einsum("nij,nij->n", seeds, seeds.conj())))
    seeds = seeds[seed_norms > 1e-14] / seed_norms[seed_norms > 1e-14, None, None]
    if not len(seeds):
        return LieBasis(elements=np.zeros((0, d, d), complex), rank=0, saturated=False)
    basis_rows = np.zeros((0, 2 * dim2))
    saturated = False

    def new_directions(mats: np.ndarray) -> np.ndarray:
        """Orthonormal directions in the candidates outside the current span.

        Candidates are projected off the basis twice; an SVD of the residual
        block proposes new directions (singular values are backward-stable,
        and normalized seeds keep candidate norms of order one).  Proposed
        directions are then re-projected onto the traceless skew-Hermitian
        structure and accepted only if they survive at order-one scale, which
        caps the round-off amplification a small singular value could cause;
        a direction rejected here is re-proposed by a later sweep once its
        commutators carry more weight.
        """
        nonlocal basis_rows
        rows = to_real(enforce_structure(mats))
        for _ in range(2):
            if len(basis_rows):
                rows = rows - (rows @ basis_rows.T) @ basis_rows
        if not len(rows):
            return np.zeros((0, 2 * dim2))
        _, sv, vt = np.linalg.svd(rows, full_matrices=False)
        keep = sv > tol * max(1.0, sv[0] if len(sv) else 0.0)
        if not np.any(keep):
            return np.zeros((0, 2 * dim2))
        cand = to_real(enforce_structure(to_matrices(vt[keep])))
        for _ in range(2):
            if len(basis_rows):
                cand = cand - (cand @ basis_rows.T) @ basis_rows
        _, sv2, vt2 = np.linalg.svd(cand, full_matrices=False)
        keep2 = sv2 > 0.5
        if not np.any(keep2):
            return np.zeros((0, 2 * dim2))
        return vt2[keep2]

    frontier = new_directions(seeds)
    basis_rows = frontier.copy()
    while len(frontier) and not saturated:
        if len(basis_rows) >= max_dim:
            saturated = True
            break
        frontier_mats = to_matrices(frontier)
        cands = []
        for g in seeds:
            cands.append(frontier_mats @ g - g @ frontier_mats)
        fresh = new_directions(np.concatenate(cands))
        if len(basis_rows) + len(fresh) > max_dim:
            fresh = fresh[: max_dim - len(basis_rows)]
            saturated = True
        if len(fresh):
            basis_rows = np.vstack([basis_rows, fresh])
        frontier = fresh
    elements = to_matrices(basis_rows) if len(basis_rows) else np.zeros((0, d, d), complex)
    return LieBasis(elements=elements, rank=len(basis_rows), saturated=saturated)


def lie_rank(generators, max_dim: int | None = None, tol: float = _RANK_TOL) -> int:
    """Dimension of the real Lie algebra generated by the given matrices."""
    return lie_closure(generators, max_dim=max_dim, tol=tol).rank


def is_controllable(
    p: SystemParams,
    trunc: TruncationSpec,
    controls: tuple[str, ...] = ("x", "y", "z"),
) -> ControllabilityReport:
    """Lie-rank controllability test of the truncated model.

    Generators are the traceless drift i H(Omega=0) and i S_c for each
    requested control axis.  Controllable iff the rank reaches d^2 - 1.
    """
    d = trunc.dim
    drift = build_total_h(p, trunc)
    drift = drift - (np.trace(drift) / d) * np.eye(d)
    gens = [1j * drift]
    names = ("x", "y", "z")
    full_controls = control_ops(trunc)
    for c in controls:
        gens.append(1j * full_controls[names.index(c)])
    closure = lie_closure(gens, max_dim=d * d)
    expected = d * d - 1
    return ControllabilityReport(
        controllable=closure.rank == expected,
        rank=closure.rank,
        expected=expected,
        generators_used=len(gens),
        saturated=closure.saturated,
    )


def rabi_controllability(
    omega: float,
    g: float,
    n_levels: int,
    D: float,
    omega_z: float,
    controls: tuple[str, ...] = ("y", "z"),
) -> ControllabilityReport:
    """Controllability of the single-oscillator model with spin controls.

    Drift is H_S + omega a^dag a + g S_x (a + a^dag) on 3 x n_levels states.
    """
    from .hilbert import ladder_operators, spin1_operators

    sx, sy, sz = spin1_operators()
    a, adag = ladder_operators(n_levels)
    iosc = np.eye(n_levels)
    hs = D * (sz @ sz) + 0.5 * omega_z * sz
    drift = (
        np.kron(hs, iosc)
        + np.kron(np.eye(3), omega * adag @ a)
        + g * np.kron(sx, a + adag)
    )
    d = 3 * n_levels
    drift = drift - (np.trace(drift) / d) * np.eye(d)
    spin_full = {"x": np.kron(sx, iosc), "y": np.kron(sy, iosc), "z": np.kron(sz, iosc)}
    gens = [1j * drift] + [1j * spin_full[c] for c in controls]
    closure = lie_closure(gens, max_dim=d * d)
    expected = d * d - 1
    return ControllabilityReport(
        controllable=closure.rank == expected,
        rank=closure.rank,
        expected=expected,
        generators_used=len(gens),
        saturated=closure.saturated,
    )
