"""Blocked Gibbs sampler for the Gaussian linear mixed model

    y_i = X_i beta + Z_i b_i + eps_i,   b_i ~ N(0, G),  eps_i ~ N(0, sigma2 I).

The cycle updates beta, each b_i, sigma2 and G from their exact conjugate
conditionals. All solves go through Cholesky factorizations with the shared
jitter-retry policy; explicit inverses are never formed.

Determinism: each chain gets its own RNG stream and each subject a
substream keyed by (seed, chain, subject id), so pooled results do not
depend on the order subjects appear in the dataset or on how chains are
scheduled across threads.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .dataset import LongitudinalDataset, ModelSpec
from .errors import ValidationError
from .linalg import (
    jittered_cholesky,
    sample_gaussian_from_precision,
    sample_invwishart,
)
from .replicate import partition_G


@dataclass
class PriorSpec:
    """Weakly informative conjugate priors.

    beta ~ N(0, beta_var I); sigma2 ~ InvGamma(sigma2_shape, sigma2_rate);
    G ~ InvWishart(g_df, g_scale) with defaults g_df = q + 2, g_scale = I,
    or independent InvGamma(g_shape, g_rate) per diagonal component when
    g_prior = "diag-invgamma".
    """

    beta_var: float = 100.0
    sigma2_shape: float = 0.01
    sigma2_rate: float = 0.01
    g_prior: str = "invwishart"  # or "diag-invgamma"
    g_df: float | None = None
    g_scale: np.ndarray | None = None
    g_shape: float = 0.01
    g_rate: float = 0.01

    def __post_init__(self):
        if self.beta_var <= 0 or self.sigma2_shape <= 0 or self.sigma2_rate <= 0:
            raise ValidationError("prior hyperparameters must be positive")
        if self.g_prior not in ("invwishart", "diag-invgamma"):
            raise ValidationError(f"unknown G prior {self.g_prior!r}")
        if self.g_shape <= 0 or self.g_rate <= 0:
            raise ValidationError("G prior hyperparameters must be positive")

    def resolved_g_df(self, q: int) -> float:
        df = self.g_df if self.g_df is not None else q + 2.0
        if df <= q - 1:
            raise ValidationError("inverse-Wishart df must exceed q - 1")
        return float(df)

    def resolved_g_scale(self, q: int) -> np.ndarray:
        if self.g_scale is None:
            return np.eye(q)
        scale = np.asarray(self.g_scale, dtype=float)
        if scale.shape != (q, q):
            raise ValidationError("G prior scale has wrong shape")
        return scale


@dataclass
class McmcConfig:
    n_chains: int = 4
    n_iter: int = 2000
    burn_in: int = 1000
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_chains < 1 or self.n_iter < 1:
            raise ValidationError("n_chains and n_iter must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValidationError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValidationError("thin must be >= 1")


@dataclass
class PosteriorDraw:
    beta: np.ndarray  # (p,)
    sigma2: float
    G: np.ndarray  # (q, q)
    b: np.ndarray  # (n, q), rows in dataset subject order
    chain: int = 0


@dataclass
class _SubjectDesign:
    """Per-subject design matrices and cached cross products."""

    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray
    XtX: np.ndarray = field(init=False)
    ZtZ: np.ndarray = field(init=False)

    def __post_init__(self):
        self.XtX = self.X.T @ self.X
        self.ZtZ = self.Z.T @ self.Z


def build_designs(ds: LongitudinalDataset, spec: ModelSpec) -> list[_SubjectDesign]:
    return [
        _SubjectDesign(
            y=s.y,
            X=spec.fixed_design(s.times, s.x_covariates),
            Z=spec.random_design(s.times),
        )
        for s in ds.subjects
    ]


def _subject_key(subject_id: str) -> int:
    digest = hashlib.blake2b(subject_id.encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def update_beta(subjects, b, sigma2, prior: PriorSpec, rng) -> np.ndarray:
    p = subjects[0].X.shape[1]
    precision = np.eye(p) / prior.beta_var
    linear = np.zeros(p)
    for sd, b_i in zip(subjects, b):
        precision += sd.XtX / sigma2
        linear += sd.X.T @ (sd.y - sd.Z @ b_i) / sigma2
    return sample_gaussian_from_precision(precision, linear, rng)


def update_b(subjects, beta, sigma2, G, rngs) -> np.ndarray:
    q = G.shape[0]
    L_G = jittered_cholesky(G)
    Ginv = cho_solve((L_G, True), np.eye(q))
    b = np.empty((len(subjects), q))
    for i, (sd, rng) in enumerate(zip(subjects, rngs)):
        precision = Ginv + sd.ZtZ / sigma2
        linear = sd.Z.T @ (sd.y - sd.X @ beta) / sigma2
        b[i] = sample_gaussian_from_precision(precision, linear, rng)
    return b


def update_sigma2(subjects, beta, b, prior: PriorSpec, rng) -> float:
    n_total = sum(len(sd.y) for sd in subjects)
    ssr = 0.0
    for sd, b_i in zip(subjects, b):
        resid = sd.y - sd.X @ beta - sd.Z @ b_i
        ssr += float(resid @ resid)
    shape = prior.sigma2_shape + 0.5 * n_total
    rate = prior.sigma2_rate + 0.5 * ssr
    return rate / rng.gamma(shape)


def update_G(b, prior: PriorSpec, rng) -> np.ndarray:
    n, q = b.shape
    if prior.g_prior == "diag-invgamma":
        shape = prior.g_shape + 0.5 * n
        rates = prior.g_rate + 0.5 * np.sum(b * b, axis=0)
        diag = rates / rng.gamma(shape, size=q)
        return np.diag(diag)
    df = prior.resolved_g_df(q) + n
    scale = prior.resolved_g_scale(q) + b.T @ b
    return sample_invwishart(df, scale, rng)


def gibbs_sweep(subjects, beta, b, sigma2, G, prior, rng_chain, rngs_subjects):
    """One full Gibbs cycle; returns updated (beta, b, sigma2, G)."""
    beta = update_beta(subjects, b, sigma2, prior, rng_chain)
    b = update_b(subjects, beta, sigma2, G, rngs_subjects)
    sigma2 = update_sigma2(subjects, beta, b, prior, rng_chain)
    G = update_G(b, prior, rng_chain)
    return beta, b, sigma2, G


def _run_chain(
    subjects, subject_ids, cfg: McmcConfig, prior: PriorSpec, chain: int
) -> list[PosteriorDraw]:
    rng_chain = np.random.default_rng(
        np.random.SeedSequence(entropy=(int(cfg.seed), chain, 0xC4A1))
    )
    rngs_subjects = [
        np.random.default_rng(
            np.random.SeedSequence(entropy=(int(cfg.seed), chain, _subject_key(sid)))
        )
        for sid in subject_ids
    ]
    p = subjects[0].X.shape[1]
    q = subjects[0].Z.shape[1]
    n = len(subjects)

    beta = np.zeros(p)
    b = np.zeros((n, q))
    sigma2 = 1.0
    G = np.eye(q)

    draws = []
    for it in range(cfg.n_iter):
        beta, b, sigma2, G = gibbs_sweep(
            subjects, beta, b, sigma2, G, prior, rng_chain, rngs_subjects
        )
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            draws.append(
                PosteriorDraw(beta.copy(), float(sigma2), G.copy(), b.copy(), chain)
            )
    return draws


def gibbs_fit(
    ds: LongitudinalDataset,
    spec: ModelSpec,
    cfg: McmcConfig,
    threads: int = 1,
) -> list[PosteriorDraw]:
    """Run the blocked Gibbs sampler; returns pooled post-burn-in draws.

    Subjects are processed in sorted-id order internally so that floating
    point accumulation, and hence the draw sequence, is independent of the
    order subjects appear in the dataset. Chains may run in parallel;
    results are identical to sequential execution.
    """
    prior = spec.priors if spec.priors is not None else PriorSpec()
    order = sorted(range(ds.n), key=lambda i: ds.subjects[i].id)
    inverse = np.argsort(order)
    designs = build_designs(ds, spec)
    subjects = [designs[i] for i in order]
    subject_ids = [ds.subjects[i].id for i in order]

    def run(chain):
        return _run_chain(subjects, subject_ids, cfg, prior, chain)

    if threads > 1 and cfg.n_chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_chain = list(pool.map(run, range(cfg.n_chains)))
    else:
        per_chain = [run(c) for c in range(cfg.n_chains)]

    draws = []
    for chain_draws in per_chain:
        for d in chain_draws:
            d.b = d.b[inverse]  # back to dataset subject order
            draws.append(d)
    return draws


def fitted_mean_replicate(
    draw: PosteriorDraw,
    spec: ModelSpec,
    i: int,
    times: np.ndarray,
    x_covariates: np.ndarray | None = None,
) -> np.ndarray:
    """Mean of subject i's replicate predictive on an arbitrary time grid."""
    times = np.asarray(times, dtype=float)
    gp = partition_G(draw.G, spec.shared)
    X = spec.fixed_design(times, x_covariates)
    if spec.fixed is None and x_covariates is None and X.shape[1] != len(draw.beta):
        raise ValidationError(
            "model includes covariates; supply x_covariates on the evaluation grid"
        )
    Z = spec.random_design(times)
    b_iA = draw.b[i][gp.a_idx]
    mean = X @ draw.beta + Z[:, gp.a_idx] @ b_iA
    if len(gp.b_idx):
        mean = mean + Z[:, gp.b_idx] @ (gp.gain @ b_iA)
    return mean


# --- draw-file serialization (JSON lines) ---------------------------------

DRAW_FIELD_ORDER = (
    "beta[p], sigma2, G lower triangle row-major (q*(q+1)/2), "
    "b concatenated subject-major (n*q) in subject_ids order"
)


def save_draws(path, draws: list[PosteriorDraw], subject_ids: list[str]) -> None:
    """Write draws as JSON lines. The first record is a header documenting
    the flat field order of each draw record."""
    if not draws:
        raise ValidationError("no draws to save")
    p = len(draws[0].beta)
    q = draws[0].G.shape[0]
    tril = np.tril_indices(q)
    header = {
        "record": "header",
        "version": 1,
        "p": p,
        "q": q,
        "n_subjects": len(subject_ids),
        "subject_ids": list(subject_ids),
        "fields": DRAW_FIELD_ORDER,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for d in draws:
            values = np.concatenate(
                [d.beta, [d.sigma2], d.G[tril], d.b.ravel()]
            ).tolist()
            fh.write(
                json.dumps({"record": "draw", "chain": d.chain, "values": values})
                + "\n"
            )


def load_draws(path) -> tuple[list[PosteriorDraw], list[str]]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("record") != "header":
            raise ValidationError(f"{path}: missing draw-file header")
        p, q, n = header["p"], header["q"], header["n_subjects"]
        tril = np.tril_indices(q)
        n_tril = len(tril[0])
        draws = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            rec = json.loads(line)
            values = np.asarray(rec["values"], dtype=float)
            if len(values) != p + 1 + n_tril + n * q:
                raise ValidationError(f"{path}: bad record length at line {lineno}")
            beta = values[:p]
            sigma2 = float(values[p])
            G = np.zeros((q, q))
            G[tril] = values[p + 1 : p + 1 + n_tril]
            G = G + np.tril(G, -1).T
            b = values[p + 1 + n_tril :].reshape(n, q)
            draws.append(PosteriorDraw(beta, sigma2, G, b, int(rec.get("chain", 0))))
    return draws, list(header["subject_ids"])


def split_rhat(chains: list[np.ndarray]) -> float:
    """Split-Rhat convergence diagnostic for one scalar quantity."""
    halves = []
    for c in chains:
        c = np.asarray(c, dtype=float)
        m = len(c) // 2
        if m < 2:
            raise ValidationError("chains too short for split-Rhat")
        halves.extend([c[:m], c[m : 2 * m]])
    m = len(halves)
    length = len(halves[0])
    means = np.array([h.mean() for h in halves])
    variances = np.array([h.var(ddof=1) for h in halves])
    W = variances.mean()
    B = length * means.var(ddof=1)
    var_plus = (length - 1) / length * W + B / length
    if W == 0.0:
        return 1.0
    return float(np.sqrt(var_plus / W))
