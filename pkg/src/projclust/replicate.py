"""Mixed predictive replicate mathematics.

For a shared column set A of the random-effect design, the replicate shares
b_iA with the observation while the complement is redrawn from its
conditional prior. Integrating that remainder out gives a Gaussian
predictive whose mean is linear in b_iA; the per-subject matrix Qinv turns
the KL divergence between two replicate predictives (same covariance,
different shared values) into a quadratic form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import cho_solve

from .errors import NumericalError, ValidationError
from .linalg import jittered_cholesky

if TYPE_CHECKING:
    from .dataset import LongitudinalDataset, ModelSpec
    from .sampler import PosteriorDraw

KL_NEGATIVE_TOL = 1e-12


@dataclass
class GPartition:
    """Blocks of the random-effect covariance under the A/B column split."""

    a_idx: np.ndarray  # shared columns, sorted
    b_idx: np.ndarray  # complement columns, sorted
    G_A: np.ndarray
    G_AB: np.ndarray
    G_B: np.ndarray
    gain: np.ndarray  # G_AB^T G_A^-1, maps b_iA to the conditional mean
    schur: np.ndarray  # G_B - G_AB^T G_A^-1 G_AB

    def reassemble(self) -> np.ndarray:
        """Rebuild the full covariance in original column order."""
        q = len(self.a_idx) + len(self.b_idx)
        G = np.empty((q, q))
        G[np.ix_(self.a_idx, self.a_idx)] = self.G_A
        G[np.ix_(self.a_idx, self.b_idx)] = self.G_AB
        G[np.ix_(self.b_idx, self.a_idx)] = self.G_AB.T
        G[np.ix_(self.b_idx, self.b_idx)] = self.G_B
        return G


def partition_G(G: np.ndarray, shared) -> GPartition:
    """Split a covariance into A/B blocks and precompute gain and Schur
    complement via Cholesky solves."""
    G = np.asarray(G, dtype=float)
    q = G.shape[0]
    a_idx = np.array(sorted(int(i) for i in shared), dtype=int)
    if len(a_idx) == 0:
        raise ValidationError("shared set must be nonempty")
    if a_idx[0] < 0 or a_idx[-1] >= q:
        raise ValidationError("shared indices out of range")
    b_idx = np.array([i for i in range(q) if i not in set(a_idx.tolist())], dtype=int)

    G_A = G[np.ix_(a_idx, a_idx)]
    G_AB = G[np.ix_(a_idx, b_idx)]
    G_B = G[np.ix_(b_idx, b_idx)]
    if len(b_idx) == 0:
        gain = np.zeros((0, len(a_idx)))
        schur = np.zeros((0, 0))
    else:
        L = jittered_cholesky(G_A)
        gain = cho_solve((L, True), G_AB).T  # (|B|, |A|)
        schur = G_B - gain @ G_AB
        schur = 0.5 * (schur + schur.T)
    return GPartition(a_idx, b_idx, G_A, G_AB, G_B, gain, schur)


def conditional_prior(gp: GPartition, b_iA: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the unshared block given the shared values."""
    b_iA = np.asarray(b_iA, dtype=float)
    if b_iA.shape != (len(gp.a_idx),):
        raise ValidationError("b_iA length does not match shared set")
    return gp.gain @ b_iA, gp.schur


def replicate_predictive(
    ds: "LongitudinalDataset",
    spec: "ModelSpec",
    draw: "PosteriorDraw",
    gp: GPartition,
    i: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian predictive of subject i's replicate after integrating out
    the unshared random effects: returns (mean, covariance)."""
    subj = ds.subjects[i]
    X = spec.fixed_design(subj.times, subj.x_covariates)
    Z = spec.random_design(subj.times)
    Z_A = Z[:, gp.a_idx]
    Z_B = Z[:, gp.b_idx]
    b_iA = draw.b[i][gp.a_idx]
    mean = X @ draw.beta + Z_A @ b_iA + Z_B @ (gp.gain @ b_iA)
    cov = Z_B @ gp.schur @ Z_B.T + draw.sigma2 * np.eye(subj.n_obs)
    return mean, 0.5 * (cov + cov.T)


def projection_metric(
    ds: "LongitudinalDataset",
    spec: "ModelSpec",
    draw: "PosteriorDraw",
    gp: GPartition,
    i: int,
) -> np.ndarray:
    """Per-subject metric Qinv_i = M^T C^-1 M where M is the mean loading
    of b_iA in the replicate predictive and C its covariance."""
    subj = ds.subjects[i]
    Z = spec.random_design(subj.times)
    Z_A = Z[:, gp.a_idx]
    Z_B = Z[:, gp.b_idx]
    M = Z_A + Z_B @ gp.gain
    cov = Z_B @ gp.schur @ Z_B.T + draw.sigma2 * np.eye(subj.n_obs)
    L = jittered_cholesky(cov)
    Qinv = M.T @ cho_solve((L, True), M)
    return 0.5 * (Qinv + Qinv.T)


def kl_term(b_iA: np.ndarray, d: np.ndarray, Qinv: np.ndarray) -> float:
    """Closed-form KL between the replicate predictives at shared values
    b_iA and d: half the Qinv-quadratic form of the displacement."""
    diff = np.asarray(d, dtype=float) - np.asarray(b_iA, dtype=float)
    if diff.shape[0] != Qinv.shape[0]:
        raise ValidationError("dimension mismatch in kl_term")
    val = 0.5 * float(diff @ Qinv @ diff)
    if val < 0.0:
        if val < -KL_NEGATIVE_TOL:
            raise NumericalError(f"KL term significantly negative: {val:.3e}")
        val = 0.0
    return val


def subject_metrics(
    ds: "LongitudinalDataset", spec: "ModelSpec", draw: "PosteriorDraw"
) -> tuple[np.ndarray, np.ndarray]:
    """Shared-effect values and metrics for all subjects under one draw.

    Returns (b_A of shape (n, |A|), Qinv of shape (n, |A|, |A|)).
    """
    gp = partition_G(draw.G, spec.shared)
    n = ds.n
    a = len(gp.a_idx)
    b_A = np.empty((n, a))
    Qinv = np.empty((n, a, a))
    for i in range(n):
        b_A[i] = draw.b[i][gp.a_idx]
        Qinv[i] = projection_metric(ds, spec, draw, gp, i)
    return b_A, Qinv
