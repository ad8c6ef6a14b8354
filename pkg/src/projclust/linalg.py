"""Cholesky-based linear algebra helpers with a shared jitter-retry policy.

Every inverse in the package is realized as a Cholesky solve. When a
factorization fails on a matrix that should be positive definite, we add
``JITTER_SCALE * trace / dim`` to the diagonal and retry up to
``MAX_JITTER_TRIES`` times before giving up.
"""

import logging

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.stats import invwishart

from .errors import NumericalError

logger = logging.getLogger(__name__)

JITTER_SCALE = 1e-8
MAX_JITTER_TRIES = 3


def jittered_cholesky(mat: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of ``mat``, with diagonal jitter on failure."""
    mat = np.asarray(mat, dtype=float)
    dim = mat.shape[0]
    jitter = JITTER_SCALE * np.trace(mat) / max(dim, 1)
    if jitter <= 0.0:
        jitter = JITTER_SCALE
    work = mat
    for attempt in range(MAX_JITTER_TRIES + 1):
        try:
            return cholesky(work, lower=True)
        except np.linalg.LinAlgError:
            pass
        except ValueError as exc:  # NaN/inf entries
            raise NumericalError(f"non-finite matrix in Cholesky: {exc}") from exc
        if attempt < MAX_JITTER_TRIES:
            logger.warning(
                "Cholesky failed (attempt %d); adding jitter %.3e", attempt + 1, jitter
            )
            work = work + jitter * np.eye(dim)
    raise NumericalError(
        f"Cholesky factorization failed after {MAX_JITTER_TRIES} jitter retries"
    )


def solve_psd(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``mat @ x = rhs`` for symmetric positive definite ``mat``."""
    L = jittered_cholesky(mat)
    return cho_solve((L, True), rhs)


def sample_gaussian_from_precision(
    precision: np.ndarray, linear: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw from N(P^-1 h, P^-1) given precision P and linear term h."""
    L = jittered_cholesky(precision)
    mean = cho_solve((L, True), linear)
    z = rng.standard_normal(len(linear))
    return mean + solve_triangular(L.T, z, lower=False)


def sample_invwishart(
    df: float, scale: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Inverse-Wishart draw, symmetrized."""
    draw = invwishart.rvs(df=df, scale=scale, random_state=rng)
    draw = np.atleast_2d(draw)
    return 0.5 * (draw + draw.T)
