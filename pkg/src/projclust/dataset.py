"""Longitudinal dataset handling: CSV ingestion, standardization and
design-matrix builders (Fourier cosine, clamped cubic B-spline) plus the
power-spectrum preprocessing transform.

The CSV schema is long format, one row per observation:

    subject,time,y[,x1,...,xm]

Rows are grouped by subject and sorted by time within subject; unbalanced
series lengths are permitted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy.interpolate import BSpline

from .errors import ParseError, ValidationError

if TYPE_CHECKING:
    from .sampler import PriorSpec


@dataclass
class SubjectRecord:
    """One subject's observation series."""

    id: str
    times: np.ndarray
    y: np.ndarray
    x_covariates: np.ndarray | None = None  # (n_i, m) extra fixed-effect columns

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.times.ndim != 1 or self.y.shape != self.times.shape:
            raise ValidationError(f"subject {self.id}: times/y shape mismatch")
        if len(self.times) < 1:
            raise ValidationError(f"subject {self.id}: empty series")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError(
                f"subject {self.id}: times must be strictly increasing"
            )
        if self.x_covariates is not None:
            self.x_covariates = np.asarray(self.x_covariates, dtype=float)
            if self.x_covariates.shape[0] != len(self.times):
                raise ValidationError(
                    f"subject {self.id}: covariate rows do not match series length"
                )

    @property
    def n_obs(self) -> int:
        return len(self.times)


@dataclass
class LongitudinalDataset:
    subjects: list[SubjectRecord]

    def __post_init__(self):
        ids = [s.id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate subject ids")
        ncov = {0 if s.x_covariates is None else s.x_covariates.shape[1]
                for s in self.subjects}
        if len(ncov) > 1:
            raise ValidationError("subjects disagree on number of covariate columns")

    @property
    def n(self) -> int:
        return len(self.subjects)

    @property
    def n_covariates(self) -> int:
        if not self.subjects or self.subjects[0].x_covariates is None:
            return 0
        return self.subjects[0].x_covariates.shape[1]

    @property
    def n_total(self) -> int:
        return sum(s.n_obs for s in self.subjects)

    def union_times(self) -> np.ndarray:
        """Sorted union of all observation times."""
        return np.unique(np.concatenate([s.times for s in self.subjects]))


@dataclass
class ScaleTransform:
    """Affine maps applied by `standardize`; kept for inverse mapping."""

    t_min: float
    t_range: float
    y_mean: float
    y_sd: float

    def inverse_time(self, t: np.ndarray) -> np.ndarray:
        return np.asarray(t) * self.t_range + self.t_min

    def inverse_y(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y) * self.y_sd + self.y_mean


def load_csv(path) -> LongitudinalDataset:
    """Read a long-format CSV into a dataset.

    Raises ParseError for non-numeric time/y values (naming the line) and
    ValidationError for an empty file or duplicate (subject, time) rows.
    """
    groups: dict[str, list[tuple[float, float, list[float]]]] = {}
    n_cov = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[:3] != ["subject", "time", "y"]:
            raise ParseError(f"{path}: header must start with subject,time,y", line=1)
        expected_cols = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != expected_cols:
                raise ParseError(f"{path}: expected {expected_cols} fields", line=lineno)
            subj = row[0].strip()
            try:
                t = float(row[1])
                yv = float(row[2])
                xs = [float(v) for v in row[3:]]
            except ValueError as exc:
                raise ParseError(f"{path}: non-numeric value ({exc})", line=lineno) from None
            if not np.isfinite(t) or not np.isfinite(yv) or not all(np.isfinite(xs)):
                raise ParseError(f"{path}: non-finite time/y/covariate", line=lineno)
            groups.setdefault(subj, []).append((t, yv, xs))
        n_cov = expected_cols - 3
    if not groups:
        raise ValidationError(f"{path}: no data rows")

    subjects = []
    for subj, rows in groups.items():
        rows.sort(key=lambda r: r[0])
        times = [r[0] for r in rows]
        if len(set(times)) != len(times):
            raise ValidationError(f"subject {subj}: duplicate observation times")
        xcov = np.array([r[2] for r in rows]) if n_cov else None
        subjects.append(
            SubjectRecord(subj, np.array(times), np.array([r[1] for r in rows]), xcov)
        )
    return LongitudinalDataset(subjects)


def write_csv(ds: LongitudinalDataset, path) -> None:
    """Write a dataset in the long-format CSV schema (exact repr floats)."""
    n_cov = ds.n_covariates
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["subject", "time", "y"] + [f"x{i+1}" for i in range(n_cov)])
        for s in ds.subjects:
            for j in range(s.n_obs):
                row = [s.id, repr(float(s.times[j])), repr(float(s.y[j]))]
                if n_cov:
                    row += [repr(float(v)) for v in s.x_covariates[j]]
                writer.writerow(row)


def standardize(ds: LongitudinalDataset) -> tuple[LongitudinalDataset, ScaleTransform]:
    """Map pooled times to [0, 1] and pooled y to mean 0, variance 1.

    Variance uses denominator n_total - 1. Degenerate scales (all times
    equal, or all y equal) raise ValidationError.
    """
    all_t = np.concatenate([s.times for s in ds.subjects])
    all_y = np.concatenate([s.y for s in ds.subjects])
    if len(all_t) < 2 or len(all_y) < 2:
        raise ValidationError("standardize needs at least two observations")
    t_min, t_max = float(all_t.min()), float(all_t.max())
    t_range = t_max - t_min
    y_mean = float(all_y.mean())
    y_sd = float(all_y.std(ddof=1))
    if t_range == 0.0:
        raise ValidationError("degenerate time scale: all times equal")
    if y_sd == 0.0:
        raise ValidationError("degenerate response scale: all y equal")
    subjects = [
        replace(
            s,
            times=(s.times - t_min) / t_range,
            y=(s.y - y_mean) / y_sd,
        )
        for s in ds.subjects
    ]
    return LongitudinalDataset(subjects), ScaleTransform(t_min, t_range, y_mean, y_sd)


def fourier_design(times: np.ndarray, order: int) -> np.ndarray:
    """Cosine basis matrix with entries cos(pi * j * t), j = 0..order."""
    if order < 0:
        raise ValidationError("fourier order must be >= 0")
    t = np.asarray(times, dtype=float)
    return np.cos(np.pi * np.outer(t, np.arange(order + 1)))


def bspline_design(
    points: np.ndarray, num_basis: int, degree: int = 3
) -> np.ndarray:
    """Clamped uniform B-spline basis matrix on [0, 1].

    Produces exactly ``num_basis`` columns ordered by knot position, so
    lower-index columns fit locally near 0. Rows are a partition of unity.
    """
    if num_basis < degree + 1:
        raise ValidationError("num_basis must be at least degree + 1")
    x = np.asarray(points, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValidationError("B-spline evaluation points must lie in [0, 1]")
    interior = np.linspace(0.0, 1.0, num_basis - degree + 1)
    knots = np.concatenate([np.zeros(degree), interior, np.ones(degree)])
    return BSpline.design_matrix(x, knots, degree).toarray()


def power_spectrum(signal: np.ndarray, n_freq: int = 40, h: float = 0.5) -> np.ndarray:
    """Squared-modulus spectrum of the first ``n_freq`` DFT bins.

    DFT(k) = sum_j Y(j) exp(-2 pi i (j-1)(k-1)/J). Each output bin averages
    the DFT over integer bins within +-h of k before taking the squared
    modulus; with the default h = 0.5 this is the plain periodogram bin.
    """
    y = np.asarray(signal, dtype=float)
    if y.size == 0:
        raise ValidationError("empty signal")
    J = len(y)
    if J < n_freq:
        raise ValidationError("signal shorter than requested number of frequencies")
    dft = np.fft.fft(y)
    ps = np.empty(n_freq)
    for k in range(1, n_freq + 1):
        lo = max(1, int(np.ceil(k - h)))
        hi = min(J, int(np.floor(k + h)))
        window = dft[lo - 1 : hi]
        ps[k - 1] = np.abs(window.mean()) ** 2
    return ps


@dataclass
class BasisSpec:
    """Configuration of a design-matrix builder."""

    kind: str  # "fourier" | "bspline"
    order: int  # fourier: frequencies 0..order; bspline: number of basis functions
    degree: int = 3  # bspline only

    def __post_init__(self):
        if self.kind not in ("fourier", "bspline"):
            raise ValidationError(f"unknown basis kind {self.kind!r}")
        if self.kind == "fourier" and self.order < 0:
            raise ValidationError("fourier order must be >= 0")
        if self.kind == "bspline" and self.order < self.degree + 1:
            raise ValidationError("bspline needs order >= degree + 1")

    @property
    def n_columns(self) -> int:
        return self.order + 1 if self.kind == "fourier" else self.order

    def build(self, times: np.ndarray) -> np.ndarray:
        if self.kind == "fourier":
            return fourier_design(times, self.order)
        return bspline_design(times, self.order, self.degree)


@dataclass
class ModelSpec:
    """Model structure: design builders, shared-column set and priors.

    ``shared`` holds 0-based column indices of the random-effect design;
    the complement is integrated out when forming predictive replicates.
    ``fixed`` of None means intercept plus any dataset covariates.
    """

    random: BasisSpec
    shared: tuple[int, ...]
    fixed: BasisSpec | None = None
    priors: "PriorSpec | None" = None

    def __post_init__(self):
        q = self.random.n_columns
        shared = tuple(sorted(int(i) for i in self.shared))
        if not shared:
            raise ValidationError("shared set must be nonempty")
        if len(set(shared)) != len(shared):
            raise ValidationError("shared set has duplicate indices")
        if shared[0] < 0 or shared[-1] >= q:
            raise ValidationError(
                f"shared indices must lie in [0, {q - 1}], got {shared}"
            )
        self.shared = shared

    @property
    def q(self) -> int:
        return self.random.n_columns

    @property
    def complement(self) -> tuple[int, ...]:
        a = set(self.shared)
        return tuple(i for i in range(self.q) if i not in a)

    def n_fixed(self, n_covariates: int = 0) -> int:
        if self.fixed is None:
            return 1 + n_covariates
        return self.fixed.n_columns

    def random_design(self, times: np.ndarray) -> np.ndarray:
        return self.random.build(times)

    def fixed_design(
        self, times: np.ndarray, x_covariates: np.ndarray | None = None
    ) -> np.ndarray:
        if self.fixed is not None:
            return self.fixed.build(times)
        ones = np.ones((len(np.atleast_1d(times)), 1))
        if x_covariates is None:
            return ones
        return np.hstack([ones, np.asarray(x_covariates, dtype=float)])
