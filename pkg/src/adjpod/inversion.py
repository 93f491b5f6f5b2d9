"""Measurement noise, scattered-data denoising, and Tikhonov inversion.

Noisy point readings are smoothed by a penalized least-squares fit with a
discrete bi-Laplacian penalty; the inversion itself runs in the reduced
POD coordinates, either by gradient descent on

    J(f) = 1/2 ( ||S f - m||^2 + lambda ||f||^2 )

or by the closed-form normal equations (S^T S + lambda I) f = S^T m.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.spatial import cKDTree

from .fem import DiscreteOperators
from .grid import Grid2D
from .reduced import ReducedModel, spod_matrix

ALPHA_FLOOR = 1e-14
_SNAP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Point detectors with (possibly noisy) readings of the final state."""

    detectors: np.ndarray     # (n, 2) positions inside the closed domain
    readings: np.ndarray      # (n,) measured values
    sigma: float              # absolute noise scale
    p: float                  # nominal relative noise level
    seed: Optional[int]
    quasi_uniformity: Optional[float]   # d_max / d_min fill/separation ratio

    @property
    def n(self) -> int:
        return self.detectors.shape[0]


def _quasi_uniformity(detectors: np.ndarray) -> Optional[float]:
    """Fill-to-separation ratio d_max/d_min, probed on a fixed lattice."""
    if detectors.shape[0] < 2:
        return None
    tree = cKDTree(detectors)
    side = np.linspace(0.0, np.pi, 101)
    X, Y = np.meshgrid(side, side, indexing="xy")
    probes = np.column_stack([X.ravel(), Y.ravel()])
    d_max = float(tree.query(probes)[0].max())
    d_min = float(tree.query(detectors, k=2)[0][:, 1].min())
    return d_max / d_min if d_min > 0 else None


def add_noise(detectors: np.ndarray, clean: np.ndarray, p: float,
              seed: Optional[int] = None) -> MeasurementSet:
    """Perturb clean readings by sigma * N(0,1) with sigma = p * max|clean|."""
    if p < 0:
        raise ValueError(f"noise level must be >= 0, got {p}")
    detectors = np.asarray(detectors, dtype=float).reshape(-1, 2)
    clean = np.asarray(clean, dtype=float)
    if clean.shape != (detectors.shape[0],):
        raise ValueError("one reading per detector required")
    sigma = float(p * np.max(np.abs(clean))) if clean.size else 0.0
    readings = clean.copy()
    if sigma > 0:
        rng = np.random.default_rng(seed)
        readings = readings + sigma * rng.standard_normal(clean.shape)
    return MeasurementSet(detectors=detectors, readings=readings, sigma=sigma,
                          p=float(p), seed=seed,
                          quasi_uniformity=_quasi_uniformity(detectors))


def snap_detectors_to_nodes(grid: Grid2D, detectors: np.ndarray) -> np.ndarray:
    """Node indices of detectors that sit on grid nodes; off-grid is an error."""
    detectors = np.asarray(detectors, dtype=float).reshape(-1, 2)
    jx = np.clip(np.rint(detectors[:, 0] / grid.hx).astype(int), 0, grid.nx - 1)
    jy = np.clip(np.rint(detectors[:, 1] / grid.hy).astype(int), 0, grid.ny - 1)
    nearest = np.column_stack([grid.xs[jx], grid.ys[jy]])
    dist = np.linalg.norm(detectors - nearest, axis=1)
    if np.any(dist > _SNAP_TOL):
        worst = detectors[int(np.argmax(dist))]
        raise ValueError(f"detector {tuple(worst)} does not coincide with a grid node")
    return jy * grid.nx + jx


def laplacian_stencil(grid: Grid2D) -> sp.csr_matrix:
    """Five-point Laplacian rows at interior nodes (one row per interior node)."""
    n = grid.n_nodes
    rows, cols, vals = [], [], []
    ax = 1.0 / grid.hx ** 2
    ay = 1.0 / grid.hy ** 2
    for r, node in enumerate(grid.interior):
        rows.extend([r] * 5)
        cols.extend([node, node - 1, node + 1, node - grid.nx, node + grid.nx])
        vals.extend([-2.0 * (ax + ay), ax, ax, ay, ay])
    return sp.coo_matrix((vals, (rows, cols)), shape=(len(grid.interior), n)).tocsr()


def denoise(ms: MeasurementSet, grid: Grid2D, alpha: float) -> np.ndarray:
    """Penalized least-squares fit of the readings over the grid.

    Minimizes (1/n) sum_i (u(d_i) - m_i)^2 + alpha * ||Lap_h u||^2_{L2}
    with the five-point Laplacian restricted to interior nodes.  The fit
    imposes the known homogeneous boundary values, which makes the
    interior normal system positive-definite for alpha > 0 (a discrete
    harmonic function vanishing on the boundary is zero); readings at
    boundary detectors therefore do not influence the fit.
    """
    if not alpha > 0:
        raise ValueError(f"denoising weight alpha must be positive, got {alpha}")
    nodes = snap_detectors_to_nodes(grid, ms.detectors)
    n = ms.n
    N = grid.n_nodes
    P = sp.coo_matrix((np.ones(n), (np.arange(n), nodes)), shape=(n, N)).tocsr()
    B = laplacian_stencil(grid)
    cell = grid.hx * grid.hy
    H = (P.T @ P) / n + (alpha * cell) * (B.T @ B)
    rhs = P.T @ ms.readings / n
    idx = grid.interior
    u = np.zeros(N)
    try:
        u[idx] = splu(H[np.ix_(idx, idx)].tocsc()).solve(rhs[idx])
    except RuntimeError as exc:  # pragma: no cover - PD by construction
        raise RuntimeError(f"internal error: denoise system not solvable ({exc})")
    return u


def select_alpha(sigma: float, n: int, h2_norm_estimate: float) -> float:
    """Smoothing weight from the noise-per-sample to signal-smoothness ratio.

    alpha = (sigma / sqrt(n) / ||u||_{H2})^(4/3), floored at 1e-14 so the
    noise-free limit still yields a positive-definite denoise system.
    """
    if sigma < 0:
        raise ValueError(f"noise scale must be >= 0, got {sigma}")
    if n < 1:
        raise ValueError(f"need at least one detector, got {n}")
    if not h2_norm_estimate > 0:
        raise ValueError("smoothness-norm estimate must be positive")
    ratio = sigma / np.sqrt(n) / h2_norm_estimate
    return max(float(ratio ** (4.0 / 3.0)), ALPHA_FLOOR)


def h2_norm_estimate(grid: Grid2D, ops: DiscreteOperators, values: np.ndarray) -> float:
    """Discrete surrogate for the H2 norm: L2 + energy + bi-Laplacian terms."""
    values = np.asarray(values, dtype=float)
    l2 = ops.inner(values, values)
    h1 = max(ops.energy(values, values), 0.0)
    lap = laplacian_stencil(grid) @ values
    h2 = grid.hx * grid.hy * float(lap @ lap)
    return float(np.sqrt(l2 + h1 + h2))


@dataclass(frozen=True)
class InverseConfig:
    """Knobs of the reduced-space Tikhonov solve."""

    lam: float = 1e-10
    beta: Optional[float] = None          # step size; default 1/(s_max^2 + lam)
    max_iters: int = 5000
    grad_tol: Optional[float] = None      # default 1e-10 * (initial grad norm + 1)
    mode: str = "direct"                  # "direct" | "gradient"
    initial: Optional[np.ndarray] = None  # reduced-coordinate start, default 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"Tikhonov weight must be >= 0, got {self.lam}")
        if self.beta is not None and not self.beta > 0:
            raise ValueError(f"step size must be positive, got {self.beta}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.mode not in ("direct", "gradient"):
            raise ValueError(f"unknown solver mode {self.mode!r}")


def tikhonov_objective(model: ReducedModel, f_r: np.ndarray, m_r: np.ndarray,
                       lam: float) -> float:
    """J(f) = 1/2 (||S f - m||^2 + lam ||f||^2) in reduced coordinates."""
    S = spod_matrix(model)
    r = S @ f_r - m_r
    return 0.5 * (float(r @ r) + lam * float(f_r @ f_r))


def gradient_of_J(model: ReducedModel, f_r: np.ndarray, m_r: np.ndarray,
                  lam: float) -> np.ndarray:
    """Gradient S^T (S f - m) + lam f; S^T is exact in orthonormal coordinates."""
    f_r = np.asarray(f_r, dtype=float)
    m_r = np.asarray(m_r, dtype=float)
    if f_r.shape != (model.n_pod,) or m_r.shape != (model.n_pod,):
        raise ValueError("coefficient vectors must match the basis size")
    if lam < 0:
        raise ValueError(f"Tikhonov weight must be >= 0, got {lam}")
    S = spod_matrix(model)
    return S.T @ (S @ f_r - m_r) + lam * f_r


def descent_step_bound(model: ReducedModel, lam: float) -> float:
    """Stability bound 2 / (s_max^2 + lam) for the gradient iteration."""
    s_max = scipy.linalg.svd(spod_matrix(model), compute_uv=False)[0]
    return 2.0 / (s_max ** 2 + lam)


def tikhonov_gradient_descent_reduced(model: ReducedModel, m_r: np.ndarray,
                                      cfg: InverseConfig):
    """Gradient iteration in reduced coordinates; returns (f_r, J history)."""
    S = spod_matrix(model)
    s_max = scipy.linalg.svd(S, compute_uv=False)[0]
    bound = 2.0 / (s_max ** 2 + cfg.lam)
    beta = cfg.beta if cfg.beta is not None else 1.0 / (s_max ** 2 + cfg.lam)
    if not beta < bound:
        raise ValueError(
            f"step size {beta} violates the stability bound: need beta < {bound}")

    f = np.array(cfg.initial, dtype=float) if cfg.initial is not None \
        else np.zeros(model.n_pod)
    if f.shape != (model.n_pod,):
        raise ValueError("initial guess must match the basis size")

    grad = gradient_of_J(model, f, m_r, cfg.lam)
    tol = cfg.grad_tol if cfg.grad_tol is not None \
        else 1e-10 * (float(np.linalg.norm(grad)) + 1.0)
    history = [tikhonov_objective(model, f, m_r, cfg.lam)]
    for _ in range(cfg.max_iters):
        if np.linalg.norm(grad) <= tol:
            break
        f = f - beta * grad
        history.append(tikhonov_objective(model, f, m_r, cfg.lam))
        grad = gradient_of_J(model, f, m_r, cfg.lam)
    return f, np.asarray(history)


def tikhonov_gradient_descent(model: ReducedModel, m: np.ndarray,
                              cfg: InverseConfig):
    """Recover the unknown from a full measurement field; returns (field, history)."""
    m_r = model.basis.coefficients(np.asarray(m, dtype=float))
    f_r, history = tikhonov_gradient_descent_reduced(model, m_r, cfg)
    return model.basis.expand(f_r), history


def tikhonov_direct_reduced(model: ReducedModel, m_r: np.ndarray,
                            lam: float) -> np.ndarray:
    """Closed-form reduced minimizer (S^T S + lam I)^{-1} S^T m."""
    if lam < 0:
        raise ValueError(f"Tikhonov weight must be >= 0, got {lam}")
    S = spod_matrix(model)
    if lam == 0.0:
        svals = scipy.linalg.svd(S, compute_uv=False)
        if svals[-1] <= 1e-14 * svals[0]:
            raise ValueError("normal matrix is singular: lam = 0 with rank-deficient S")
    H = S.T @ S + lam * np.eye(model.n_pod)
    return scipy.linalg.solve(H, S.T @ m_r, assume_a="pos")


def tikhonov_direct(model: ReducedModel, m: np.ndarray, lam: float) -> np.ndarray:
    """Direct Tikhonov recovery from a full measurement field."""
    m_r = model.basis.coefficients(np.asarray(m, dtype=float))
    return model.basis.expand(tikhonov_direct_reduced(model, m_r, lam))
