"""Four-group synthetic dataset generator.

Each subject's mean is one low-frequency plus one high-frequency cosine,
with strong (1) or weak (0.1) coefficients depending on the group:
group 1 strong/strong, 2 strong/weak, 3 weak/strong, 4 weak/weak.
Frequencies are drawn once per subject, uniformly from {1,2,3} (low) and
{7,8,9} (high).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import LongitudinalDataset, SubjectRecord
from .errors import ValidationError

GROUP_COEFFS = {1: (1.0, 1.0), 2: (1.0, 0.1), 3: (0.1, 1.0), 4: (0.1, 0.1)}
GROUP_NAMES = {1: "SLSH", 2: "SLWH", 3: "WLSH", 4: "WLWH"}
LOW_FREQS = (1, 2, 3)
HIGH_FREQS = (7, 8, 9)


@dataclass
class SynthConfig:
    n_per_group: int = 10
    n_times: int = 40
    noise_var: float = 0.1  # variance of the observation noise
    seed: int = 0

    def __post_init__(self):
        if self.n_per_group < 1:
            raise ValidationError("n_per_group must be >= 1")
        if self.n_times < 2:
            raise ValidationError("n_times must be >= 2")
        if self.noise_var <= 0:
            raise ValidationError("noise_var must be positive")


def generate_example1(cfg: SynthConfig) -> tuple[LongitudinalDataset, np.ndarray]:
    """Generate the four-group dataset; returns (dataset, group labels).

    Labels are for evaluation only and are never fed to the clustering.
    """
    rng = np.random.default_rng(cfg.seed)
    times = np.arange(1, cfg.n_times + 1) / cfg.n_times
    noise_sd = np.sqrt(cfg.noise_var)
    subjects = []
    labels = []
    for group in (1, 2, 3, 4):
        b_low, b_high = GROUP_COEFFS[group]
        for s in range(cfg.n_per_group):
            w_low = rng.choice(LOW_FREQS)
            w_high = rng.choice(HIGH_FREQS)
            mean = b_low * np.cos(np.pi * w_low * times) + b_high * np.cos(
                np.pi * w_high * times
            )
            y = mean + rng.normal(0.0, noise_sd, size=cfg.n_times)
            subjects.append(
                SubjectRecord(f"g{group}_s{s:03d}", times.copy(), y)
            )
            labels.append(group)
    return LongitudinalDataset(subjects), np.array(labels)
