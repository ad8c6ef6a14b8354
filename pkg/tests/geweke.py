"""Successive-conditional simulator for checking the Gibbs kernels.

Alternates one Gibbs sweep with a data redraw from the model; the
stationary distribution of the parameters is then the prior, so chain
moments can be checked against analytic prior moments.
"""

import numpy as np

from projclust.dataset import BasisSpec, LongitudinalDataset, ModelSpec, SubjectRecord
from projclust.linalg import sample_invwishart
from projclust.sampler import PriorSpec, _SubjectDesign, build_designs, gibbs_sweep

# Test priors with finite second moments (the package defaults are too
# heavy-tailed for moment checks).
GEWEKE_PRIOR = PriorSpec(
    beta_var=4.0, sigma2_shape=4.0, sigma2_rate=3.0, g_df=7.0
)


def tiny_model(n=5, n_i=4, q=2, seed=0):
    rng = np.random.default_rng(seed)
    subjects = [
        SubjectRecord(f"s{i}", np.sort(rng.uniform(0, 1, n_i)), np.zeros(n_i))
        for i in range(n)
    ]
    ds = LongitudinalDataset(subjects)
    spec = ModelSpec(random=BasisSpec("fourier", q - 1), shared=tuple(range(q)))
    return ds, spec


def prior_moments(prior: PriorSpec, q: int) -> dict:
    a, b = prior.sigma2_shape, prior.sigma2_rate
    nu = prior.resolved_g_df(q)
    g_mean = 1.0 / (nu - q - 1)
    g_var = 2.0 / ((nu - q - 1) ** 2 * (nu - q - 3))
    return {
        "beta": 0.0,
        "beta_sq": prior.beta_var,
        "sigma2": b / (a - 1),
        "sigma2_sq": b**2 / ((a - 1) * (a - 2)),
        "g_diag": g_mean,
        "g_diag_sq": g_var + g_mean**2,
    }


def draw_prior_state(prior: PriorSpec, n, p, q, rng):
    beta = rng.normal(0.0, np.sqrt(prior.beta_var), size=p)
    sigma2 = prior.sigma2_rate / rng.gamma(prior.sigma2_shape)
    G = sample_invwishart(prior.resolved_g_df(q), prior.resolved_g_scale(q), rng)
    b = rng.multivariate_normal(np.zeros(q), G, size=n)
    return beta, b, sigma2, G


def run_successive_conditional(n_cycles, seed=0, prior=GEWEKE_PRIOR):
    """Returns chains of the monitored statistics, one row per cycle."""
    ds, spec = tiny_model()
    designs = build_designs(ds, spec)
    n = ds.n
    p = designs[0].X.shape[1]
    q = designs[0].Z.shape[1]
    rng = np.random.default_rng(seed)

    beta, b, sigma2, G = draw_prior_state(prior, n, p, q, rng)
    stats = np.empty((n_cycles, 4))
    for cycle in range(n_cycles):
        # redraw data given the current parameters
        subjects = []
        for sd, b_i in zip(designs, b):
            y = sd.X @ beta + sd.Z @ b_i + rng.normal(
                0.0, np.sqrt(sigma2), size=len(sd.y)
            )
            subjects.append(_SubjectDesign(y=y, X=sd.X, Z=sd.Z))
        beta, b, sigma2, G = gibbs_sweep(
            subjects, beta, b, sigma2, G, prior, rng, [rng] * n
        )
        stats[cycle] = [beta[0], sigma2, G[0, 0], G[1, 1]]
    return stats


def batch_means_se(chain, n_batches=50):
    chain = np.asarray(chain, dtype=float)
    usable = len(chain) - len(chain) % n_batches
    batches = chain[:usable].reshape(n_batches, -1).mean(axis=1)
    return batches.std(ddof=1) / np.sqrt(n_batches)


def geweke_z_scores(stats, prior=GEWEKE_PRIOR, q=2):
    """Z-scores of first and second chain moments against prior moments."""
    truth = prior_moments(prior, q)
    beta_c, sigma2_c, g11_c, g22_c = stats.T
    checks = {
        "beta_mean": (beta_c, truth["beta"]),
        "beta_sq": (beta_c**2, truth["beta_sq"]),
        "sigma2_mean": (sigma2_c, truth["sigma2"]),
        "sigma2_sq": (sigma2_c**2, truth["sigma2_sq"]),
        "g11_mean": (g11_c, truth["g_diag"]),
        "g11_sq": (g11_c**2, truth["g_diag_sq"]),
        "g22_mean": (g22_c, truth["g_diag"]),
        "g22_sq": (g22_c**2, truth["g_diag_sq"]),
    }
    z = {}
    for name, (chain, target) in checks.items():
        se = batch_means_se(chain)
        z[name] = (chain.mean() - target) / se
    return z
