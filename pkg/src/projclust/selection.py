"""Choosing the number of clusters.

Two rules: (a) the KL-ratio rule on the average optimized projection
objective over posterior draws, and (b) bootstrap clustering instability
on fitted replicate means, with the half-maximum rule.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning

from .errors import ValidationError
from .projection import project_cluster, split_worst
from .replicate import subject_metrics
from .sampler import fitted_mean_replicate

if TYPE_CHECKING:
    from .dataset import LongitudinalDataset, ModelSpec
    from .sampler import PosteriorDraw


@dataclass
class KlCurve:
    k_values: np.ndarray  # 1..K_max
    kl: np.ndarray  # mean optimized objective per K


@dataclass
class InstabilityCurve:
    k_values: np.ndarray  # 2..K_max
    instability: np.ndarray  # mean pairwise disagreement per K


def kl_curve(
    ds: "LongitudinalDataset",
    spec: "ModelSpec",
    draws: list["PosteriorDraw"],
    K_max: int,
    S: int,
    seed: int = 0,
    n_restarts: int = 10,
) -> KlCurve:
    """Average optimized projection objective for K = 1..K_max over the
    first S draws, with nested warm starts so the curve is nonincreasing."""
    if S > len(draws):
        raise ValidationError("S exceeds the number of available draws")
    if not 1 <= K_max <= ds.n:
        raise ValidationError("K_max must lie in [1, n]")
    kl = np.zeros(K_max)
    ss = np.random.SeedSequence(seed)
    for s, draw in enumerate(draws[:S]):
        b_A, Qinv = subject_metrics(ds, spec, draw)
        child = np.random.SeedSequence(entropy=(seed, s))
        prev = None
        for K in range(1, K_max + 1):
            init = split_worst(prev, b_A, Qinv) if prev is not None else None
            part = project_cluster(
                b_A,
                Qinv,
                K,
                init_labels=init,
                n_restarts=n_restarts,
                seed=int(child.generate_state(1)[0]) + K,
            )
            kl[K - 1] += part.objective
            prev = part
    kl /= S
    return KlCurve(np.arange(1, K_max + 1), kl)


def choose_k_kl(curve: KlCurve, epsilon: float = 0.1) -> int:
    """Smallest K with KL_K / KL_1 below epsilon."""
    if curve.k_values[0] != 1:
        raise ValidationError("KL curve must start at K = 1")
    kl1 = curve.kl[0]
    if kl1 <= 0.0:
        raise ValidationError("KL_1 is zero: all subjects identical (degenerate data)")
    ratios = curve.kl / kl1
    hits = np.flatnonzero(ratios < epsilon)
    if len(hits) == 0:
        raise ValidationError(
            f"no K up to {curve.k_values[-1]} reaches the KL ratio cutoff {epsilon}"
        )
    return int(curve.k_values[hits[0]])


def fitted_mean_matrix(
    ds: "LongitudinalDataset",
    spec: "ModelSpec",
    draws: list["PosteriorDraw"],
    max_draws: int = 200,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-averaged replicate fitted means on the union of all
    observation times. Returns (times, matrix of shape (n, T))."""
    times = ds.union_times()
    used = draws[: min(len(draws), max_draws)]
    if not used:
        raise ValidationError("no draws supplied")
    fitted = np.zeros((ds.n, len(times)))
    for draw in used:
        for i in range(ds.n):
            fitted[i] += fitted_mean_replicate(draw, spec, i, times)
    fitted /= len(used)
    return times, fitted


def _pair_disagreement(labels1: np.ndarray, labels2: np.ndarray) -> float:
    same1 = labels1[:, None] == labels1[None, :]
    same2 = labels2[:, None] == labels2[None, :]
    iu = np.triu_indices(len(labels1), k=1)
    return float(np.mean(same1[iu] != same2[iu]))


def instability(
    fitted: np.ndarray,
    K: int,
    B: int = 100,
    seed: int = 0,
    n_restarts: int = 10,
) -> float:
    """Bootstrap clustering instability of Euclidean K-means on fitted
    means: mean disagreement over original pairs between clusterings
    learned on two independent bootstrap resamples."""
    fitted = np.asarray(fitted, dtype=float)
    n = fitted.shape[0]
    if not 2 <= K <= n:
        raise ValidationError(f"K must satisfy 2 <= K <= n, got K={K}")
    ss = np.random.SeedSequence(entropy=(seed, K))
    rng = np.random.default_rng(ss)
    total = 0.0
    for _ in range(B):
        labels = []
        for _side in range(2):
            idx = rng.integers(0, n, size=n)
            km_seed = int(rng.integers(0, 2**31 - 1))
            with warnings.catch_warnings():
                # bootstrap resamples duplicate rows, which can leave fewer
                # than K distinct points; that is expected, not an error
                warnings.simplefilter("ignore", ConvergenceWarning)
                km = KMeans(
                    n_clusters=K, n_init=n_restarts, algorithm="lloyd",
                    random_state=km_seed,
                ).fit(fitted[idx])
            labels.append(km.predict(fitted))  # nearest-centroid extension
        total += _pair_disagreement(labels[0], labels[1])
    return total / B


def instability_curve(
    fitted: np.ndarray,
    K_max: int = 30,
    B: int = 100,
    seed: int = 0,
    n_restarts: int = 10,
) -> InstabilityCurve:
    n = fitted.shape[0]
    K_max = min(K_max, n)
    ks = np.arange(2, K_max + 1)
    vals = np.array(
        [instability(fitted, int(k), B=B, seed=seed, n_restarts=n_restarts) for k in ks]
    )
    return InstabilityCurve(ks, vals)


def choose_k_bootstrap(curve: InstabilityCurve) -> int:
    """Smallest K whose instability is at least half the curve maximum;
    K = 1 is never returned."""
    if len(curve.k_values) == 0:
        raise ValidationError("empty instability curve")
    peak = curve.instability.max()
    if peak == 0.0:
        warnings.warn("instability curve is identically zero; returning K = 2")
        return int(curve.k_values[0])
    hits = np.flatnonzero(curve.instability >= 0.5 * peak)
    return int(curve.k_values[hits[0]])
