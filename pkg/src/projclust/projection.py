"""K-means-style greedy minimizer of the summed replicate-KL objective.

Each subject carries its own metric Qinv_i, so centroids are
precision-weighted generalized means and assignments use per-subject
Mahalanobis-type distances. Labels are 1-based, matching the serialized
partition format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import solve_psd


@dataclass
class Partition:
    labels: np.ndarray  # (n,), entries in 1..K
    centroids: np.ndarray  # (K, |A|)
    objective: float
    iterations: int
    converged: bool

    @property
    def k(self) -> int:
        return len(self.centroids)

    def to_json(self, draw_index: int) -> str:
        return json.dumps(
            {
                "draw_index": draw_index,
                "K": self.k,
                "labels": self.labels.tolist(),
                "objective": self.objective,
                "converged": self.converged,
            }
        )


def centroid_update(
    labels: np.ndarray, b_A: np.ndarray, Qinv: np.ndarray, K: int
) -> np.ndarray:
    """Precision-weighted cluster means; every cluster must be nonempty."""
    a = b_A.shape[1]
    centroids = np.empty((K, a))
    for j in range(1, K + 1):
        members = np.flatnonzero(labels == j)
        if len(members) == 0:
            raise ValidationError(f"cluster {j} has no members")
        prec = Qinv[members].sum(axis=0)
        rhs = np.einsum("nab,nb->a", Qinv[members], b_A[members])
        centroids[j - 1] = solve_psd(prec, rhs)
    return centroids


def _distances(b_A: np.ndarray, Qinv: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Half-quadratic-form distances, shape (n, K)."""
    diff = centroids[None, :, :] - b_A[:, None, :]
    return 0.5 * np.einsum("nka,nab,nkb->nk", diff, Qinv, diff)


def assign(b_A: np.ndarray, Qinv: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Nearest centroid under each subject's own metric; ties go to the
    lowest cluster index."""
    dist = _distances(b_A, Qinv, centroids)
    return np.argmin(dist, axis=1) + 1


def objective_kl(
    b_A: np.ndarray, Qinv: np.ndarray, labels: np.ndarray, centroids: np.ndarray
) -> float:
    diff = centroids[labels - 1] - b_A
    val = 0.5 * float(np.einsum("na,nab,nb->", diff, Qinv, diff))
    return max(val, 0.0)


def _contributions(b_A, Qinv, labels, centroids) -> np.ndarray:
    diff = centroids[labels - 1] - b_A
    return 0.5 * np.einsum("na,nab,nb->n", diff, Qinv, diff)


def _centroids_with_repair(b_A, Qinv, K, labels):
    """Optimal centroids for a labeling, reseating each empty cluster at
    the subject with the largest current KL contribution. Returns the
    (possibly repaired) labels and centroids; all clusters end nonempty."""
    labels = labels.copy()
    counts = np.bincount(labels, minlength=K + 1)[1:]
    centroids = np.zeros((K, b_A.shape[1]))
    for j in np.flatnonzero(counts > 0) + 1:
        members = np.flatnonzero(labels == j)
        prec = Qinv[members].sum(axis=0)
        rhs = np.einsum("nab,nb->a", Qinv[members], b_A[members])
        centroids[j - 1] = solve_psd(prec, rhs)
    empty = np.flatnonzero(counts == 0) + 1
    if len(empty):
        contrib = _contributions(b_A, Qinv, labels, centroids)
        for j in empty:
            # only subjects whose departure leaves their cluster nonempty
            eligible = counts[labels - 1] > 1
            candidates = np.where(eligible, contrib, -np.inf)
            worst = int(np.argmax(candidates))
            counts[labels[worst] - 1] -= 1
            counts[j - 1] += 1
            centroids[j - 1] = b_A[worst]
            labels[worst] = j
            contrib[worst] = -np.inf
    return labels, centroids


def _single_run(b_A, Qinv, K, labels, max_iter):
    """Greedy descent from an initial labeling, with empty-cluster repair."""
    labels = labels.copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        labels, centroids = _centroids_with_repair(b_A, Qinv, K, labels)
        new_labels = assign(b_A, Qinv, centroids)
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
    # final centroids consistent with the returned (repaired) labels
    labels, _ = _centroids_with_repair(b_A, Qinv, K, labels)
    centroids = centroid_update(labels, b_A, Qinv, K)
    obj = objective_kl(b_A, Qinv, labels, centroids)
    return Partition(labels, centroids, obj, it, converged)


def project_cluster(
    b_A: np.ndarray,
    Qinv: np.ndarray,
    K: int,
    init_labels: np.ndarray | None = None,
    max_iter: int = 100,
    n_restarts: int = 10,
    seed: int = 0,
) -> Partition:
    """Best-of-restarts greedy KL projection onto K shared values.

    Runs ``n_restarts`` random initializations (plus ``init_labels`` if
    given, and the identity labeling when K == n) and returns the
    partition with the smallest objective. Each restart seeds the
    centroids at K distinct subjects' shared-effect values and assigns
    from there, which explores far better than random labelings.
    """
    b_A = np.asarray(b_A, dtype=float)
    Qinv = np.asarray(Qinv, dtype=float)
    n = len(b_A)
    if not 1 <= K <= n:
        raise ValidationError(f"K must satisfy 1 <= K <= n, got K={K}, n={n}")

    inits: list[np.ndarray] = []
    if init_labels is not None:
        init_labels = np.asarray(init_labels, dtype=int)
        if init_labels.shape != (n,) or init_labels.min() < 1 or init_labels.max() > K:
            raise ValidationError("init_labels must be length n with entries in 1..K")
        inits.append(init_labels)
    if K == n:
        inits.append(np.arange(1, n + 1))
    rng = np.random.default_rng(seed)
    for _ in range(n_restarts):
        idx = rng.choice(n, size=K, replace=False)
        inits.append(assign(b_A, Qinv, b_A[idx]))

    best = None
    for labels0 in inits:
        part = _single_run(b_A, Qinv, K, labels0, max_iter)
        if best is None or part.objective < best.objective:
            best = part
    return best


def split_worst(partition: Partition, b_A: np.ndarray, Qinv: np.ndarray) -> np.ndarray:
    """Warm-start labels for K+1 clusters: move the subject with the
    largest KL contribution into a new singleton cluster."""
    contrib = _contributions(b_A, Qinv, partition.labels, partition.centroids)
    labels = partition.labels.copy()
    labels[int(np.argmax(contrib))] = partition.k + 1
    return labels
