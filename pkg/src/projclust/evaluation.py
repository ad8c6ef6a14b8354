"""Cluster-uncertainty summaries and external validation indices."""

from __future__ import annotations

import warnings
from fractions import Fraction
from math import comb

import numpy as np

from .errors import ValidationError


def coincidence(label_sets: list[np.ndarray]) -> np.ndarray:
    """n x n matrix of empirical pair-together frequencies across draws."""
    if not label_sets:
        raise ValidationError("no partitions supplied")
    arrays = [np.asarray(ls) for ls in label_sets]
    n = len(arrays[0])
    for a in arrays:
        if len(a) != n:
            raise ValidationError("partitions cover different numbers of subjects")
    C = np.zeros((n, n))
    for a in arrays:
        C += a[:, None] == a[None, :]
    C /= len(arrays)
    np.fill_diagonal(C, 1.0)
    return C


def threshold_summary(C: np.ndarray) -> dict:
    """Counts of subject pairs in the weak (0.5, 0.8] and solid (> 0.8)
    coincidence bands."""
    iu = np.triu_indices(C.shape[0], k=1)
    vals = C[iu]
    return {
        "n_pairs": int(len(vals)),
        "weak_pairs": int(np.sum((vals > 0.5) & (vals <= 0.8))),
        "solid_pairs": int(np.sum(vals > 0.8)),
    }


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _pair_counts(a: np.ndarray, b: np.ndarray):
    table = _contingency(a, b)
    nij = sum(comb(int(v), 2) for v in table.ravel())
    ai = sum(comb(int(v), 2) for v in table.sum(axis=1))
    bj = sum(comb(int(v), 2) for v in table.sum(axis=0))
    return nij, ai, bj


def _check_labels(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("label vectors must be 1-D with equal length")
    if len(a) < 2:
        raise ValidationError("need at least two subjects")
    return a, b


def rand_index(a, b) -> float:
    """Fraction of unordered pairs on which the two labelings agree."""
    a, b = _check_labels(a, b)
    n = len(a)
    total = comb(n, 2)
    nij, ai, bj = _pair_counts(a, b)
    agreements = total + 2 * nij - ai - bj
    return float(Fraction(agreements, total))


def adjusted_rand(a, b) -> float:
    """Hubert-Arabie chance-corrected Rand index via the contingency table."""
    a, b = _check_labels(a, b)
    n = len(a)
    total = comb(n, 2)
    nij, ai, bj = _pair_counts(a, b)
    expected = Fraction(ai * bj, total)
    maximum = Fraction(ai + bj, 2)
    if maximum == expected:
        # both partitions trivial (all-together or all-apart)
        identical = rand_index(a, b) == 1.0
        warnings.warn("degenerate partitions in adjusted_rand")
        return 1.0 if identical else 0.0
    return float((nij - expected) / (maximum - expected))


def index_report(partition_labels: list[np.ndarray], truth: np.ndarray) -> dict:
    """Mean/sd of Rand and adjusted Rand across per-draw partitions."""
    rand_vals = np.array([rand_index(lab, truth) for lab in partition_labels])
    ari_vals = np.array([adjusted_rand(lab, truth) for lab in partition_labels])
    sd = lambda v: float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return {
        "rand_mean": float(rand_vals.mean()),
        "rand_sd": sd(rand_vals),
        "ari_mean": float(ari_vals.mean()),
        "ari_sd": sd(ari_vals),
    }
