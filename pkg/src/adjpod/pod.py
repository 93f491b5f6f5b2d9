"""Snapshot POD via the method of snapshots.

Snapshots are collected from a time-stepping trajectory as the M+1 states
plus the M difference quotients (u(t_k) - u(t_{k-1})) / dt.  The basis
comes from the eigendecomposition of the (2M+1) x (2M+1) correlation
matrix K_ij = (y_i, y_j)_{L2} in the mass-weighted inner product — never
from the node-dimension Gram matrix — so the cost is mesh independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .fem import DiscreteOperators, Trajectory

RANK_CUTOFF = 1e-12  # discard correlation eigenvalues below RANK_CUTOFF * lambda_1


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """States y_1..y_{M+1} followed by difference quotients y_{M+2}..y_{2M+1}."""

    snapshots: np.ndarray       # (2M+1, n_nodes), states first
    ops: DiscreteOperators
    m_steps: int                # M of the (possibly subsampled) time grid
    times: np.ndarray           # sample times of the states

    @property
    def count(self) -> int:
        return self.snapshots.shape[0]

    @property
    def states(self) -> np.ndarray:
        return self.snapshots[: self.m_steps + 1]

    @property
    def quotients(self) -> np.ndarray:
        return self.snapshots[self.m_steps + 1:]


@dataclass(frozen=True, eq=False)
class PodBasis:
    """Mass-orthonormal modes with the correlation spectrum they came from."""

    psi: np.ndarray             # (n_nodes, n_pod)
    eigenvalues: np.ndarray     # all correlation eigenvalues, non-increasing
    rho: float                  # tail energy ratio beyond n_pod
    n_pod: int
    retained_rank: int          # eigenvalues above the rank cutoff
    ops: DiscreteOperators
    provenance: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.ops.grid

    def coefficients(self, values: np.ndarray) -> np.ndarray:
        """Mass-weighted coefficients (values, psi_k)."""
        return self.psi.T @ (self.ops.mass @ np.asarray(values, dtype=float))

    def expand(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal field sum_k coeffs_k * psi_k."""
        return self.psi @ np.asarray(coeffs, dtype=float)

    def truncated(self, n: int) -> "PodBasis":
        """Leading-n sub-basis with the tail ratio recomputed."""
        if not 1 <= n <= self.n_pod:
            raise ValueError(f"truncation count must lie in [1, {self.n_pod}]")
        return PodBasis(psi=self.psi[:, :n], eigenvalues=self.eigenvalues,
                        rho=_tail_ratio(self.eigenvalues, n), n_pod=n,
                        retained_rank=self.retained_rank, ops=self.ops,
                        provenance=dict(self.provenance, truncated_from=self.n_pod))


def collect_snapshots(traj: Trajectory, ops: DiscreteOperators,
                      max_snapshots: int = 201) -> SnapshotSet:
    """States plus difference quotients, subsampled to fit ``max_snapshots``.

    When 2M+1 exceeds the budget the time grid is thinned uniformly to M'
    steps with 2M'+1 <= max_snapshots and the quotients are formed on the
    thinned grid (scaled by the actual time gaps).
    """
    if max_snapshots < 3 or max_snapshots % 2 == 0:
        raise ValueError(f"max_snapshots must be odd and >= 3, got {max_snapshots}")
    m_full = traj.n_states - 1
    if m_full < 1:
        raise ValueError("trajectory must contain at least two states")

    if 2 * m_full + 1 <= max_snapshots:
        idx = np.arange(m_full + 1)
    else:
        m_sub = (max_snapshots - 1) // 2
        idx = np.rint(np.linspace(0, m_full, m_sub + 1)).astype(int)
    times = traj.tg.times[idx]
    states = traj.states[idx]
    gaps = np.diff(times)
    quotients = np.diff(states, axis=0) / gaps[:, None]
    return SnapshotSet(snapshots=np.vstack([states, quotients]), ops=ops,
                       m_steps=len(idx) - 1, times=times)


def _as_matrix(snapshots) -> np.ndarray:
    if isinstance(snapshots, SnapshotSet):
        return snapshots.snapshots
    return np.asarray(snapshots, dtype=float)


def _ops_of(snapshots, ops: Optional[DiscreteOperators]) -> DiscreteOperators:
    if isinstance(snapshots, SnapshotSet):
        return snapshots.ops
    if ops is None:
        raise ValueError("operators must be supplied for raw snapshot arrays")
    return ops


def correlation_matrix(snapshots, ops: Optional[DiscreteOperators] = None) -> np.ndarray:
    """Dense symmetric K with K_ij = (y_i, y_j) in the mass inner product."""
    Y = _as_matrix(snapshots)
    mass = _ops_of(snapshots, ops).mass
    K = Y @ (mass @ Y.T)
    return 0.5 * (K + K.T)


def _tail_ratio(lams: np.ndarray, n: int) -> float:
    total = float(lams.sum())
    if total <= 0:
        return 0.0
    return float(max(lams[n:].sum() / total, 0.0))


def compute_pod_basis(snapshots, n_modes: Optional[int] = None,
                      energy_tol: Optional[float] = None,
                      states_only: bool = False,
                      ops: Optional[DiscreteOperators] = None,
                      provenance: Optional[dict] = None) -> PodBasis:
    """Method-of-snapshots basis.

    Exactly one of ``n_modes`` (fixed count, clipped to the retained rank)
    and ``energy_tol`` (smallest count whose tail ratio is <= the
    threshold) selects the basis size.  ``states_only`` drops the
    difference quotients before building (ablation switch).
    """
    if (n_modes is None) == (energy_tol is None):
        raise ValueError("select the basis size with exactly one of n_modes / energy_tol")
    if n_modes is not None and n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    if energy_tol is not None and energy_tol < 0:
        raise ValueError("energy_tol must be >= 0")

    the_ops = _ops_of(snapshots, ops)
    Y = _as_matrix(snapshots)
    if states_only:
        if not isinstance(snapshots, SnapshotSet):
            raise ValueError("states_only requires a SnapshotSet")
        Y = snapshots.states

    K = correlation_matrix(Y, the_ops)
    lams, vecs = scipy.linalg.eigh(K)
    order = np.argsort(lams)[::-1]
    lams = np.maximum(lams[order], 0.0)
    vecs = vecs[:, order]
    if lams[0] <= 0.0:
        raise ValueError("snapshot set carries no energy (all snapshots zero)")

    rank = int(np.sum(lams >= RANK_CUTOFF * lams[0]))
    psi = Y.T @ (vecs[:, :rank] / np.sqrt(lams[:rank]))

    # one stabilized re-orthonormalization pass (modified Gram-Schmidt in
    # the mass inner product) to repair drift from the small eigenvalues
    mass = the_ops.mass
    mpsi = np.empty_like(psi)
    for a in range(rank):
        v = psi[:, a].copy()
        mv = mass @ v
        for b in range(a):
            coeff = psi[:, b] @ mv
            v -= coeff * psi[:, b]
            mv -= coeff * mpsi[:, b]
        nrm = np.sqrt(max(v @ mv, 0.0))
        if nrm == 0.0:  # pragma: no cover - excluded by the rank cutoff
            raise RuntimeError("internal error: rank-deficient mode survived the cutoff")
        psi[:, a] = v / nrm
        mpsi[:, a] = mv / nrm

    if n_modes is not None:
        n_pod = min(n_modes, rank)
    else:
        tails = 1.0 - np.cumsum(lams) / lams.sum()
        hits = np.flatnonzero(tails[:rank] <= energy_tol)
        n_pod = int(hits[0]) + 1 if hits.size else rank

    return PodBasis(psi=psi[:, :n_pod], eigenvalues=lams, rho=_tail_ratio(lams, n_pod),
                    n_pod=n_pod, retained_rank=rank, ops=the_ops,
                    provenance=provenance or {})


def projection_error_ratio(snapshots, basis: PodBasis):
    """Both sides of the snapshot-energy error identity.

    lhs = sum_i ||y_i - P y_i||^2 / sum_i ||y_i||^2 with P the projector
    onto the basis; rhs = the basis tail ratio.  The two agree (up to
    eigensolver noise) exactly when the basis was built from this very
    snapshot set; with a foreign basis only lhs is meaningful.
    """
    Y = _as_matrix(snapshots)
    mass = basis.ops.mass
    den = float(np.sum(Y * (mass @ Y.T).T))
    if den <= 0:
        raise ValueError("snapshot set carries no energy")
    C = (mass @ Y.T).T @ basis.psi            # (count, n_pod) coefficients
    R = Y - C @ basis.psi.T
    num = float(np.sum(R * (mass @ R.T).T))
    return max(num, 0.0) / den, basis.rho


def principal_angles(a: PodBasis, b: PodBasis) -> np.ndarray:
    """Principal angles (radians, non-decreasing) between the two spans.

    Both bases are mass-orthonormal by construction, so the cosines are
    the singular values of Psi_a^T M Psi_b.
    """
    if a.grid.n_nodes != b.grid.n_nodes:
        raise ValueError("bases live on different grids")
    G = a.psi.T @ (a.ops.mass @ b.psi)
    s = scipy.linalg.svd(G, compute_uv=False)
    s = np.clip(s, 0.0, 1.0)
    return np.sort(np.arccos(s))
