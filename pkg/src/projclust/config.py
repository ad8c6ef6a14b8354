"""Declarative run configuration (YAML) shared by the CLI commands.

Key names are documented in docs/config.md. CLI flags override file
values. The normalized config is echoed (with a hash) into every output
directory; runtime-only knobs (threads, output paths, force) are excluded
from the echo so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .dataset import BasisSpec, ModelSpec
from .errors import ValidationError
from .sampler import McmcConfig

_BAND_RE = re.compile(r"^(all|low|mid|high)(?::(\d+)\.\.(\d+))?$")


def parse_shared(value, q: int) -> tuple[int, ...]:
    """Parse a shared-set spec: explicit index list, "all", or a named
    band "low:j1..j2" / "mid:j1..j2" / "high:j1..j2" (0-based, inclusive)."""
    if isinstance(value, (list, tuple)):
        idx = tuple(int(v) for v in value)
    elif isinstance(value, str):
        m = _BAND_RE.match(value.strip())
        if m is None:
            raise ValidationError(f"cannot parse shared set {value!r}")
        name, lo, hi = m.groups()
        if name == "all":
            idx = tuple(range(q))
        elif lo is None or hi is None:
            raise ValidationError(f"band {name!r} needs an index range, e.g. {name}:0..3")
        else:
            idx = tuple(range(int(lo), int(hi) + 1))
    else:
        raise ValidationError(f"cannot parse shared set {value!r}")
    if not idx:
        raise ValidationError("shared set is empty")
    if min(idx) < 0 or max(idx) >= q:
        raise ValidationError(
            f"shared indices {idx} outside random-basis columns [0, {q - 1}]"
        )
    return idx


def _parse_basis(raw) -> BasisSpec:
    if not isinstance(raw, dict) or "kind" not in raw or "order" not in raw:
        raise ValidationError("basis must be a mapping with 'kind' and 'order'")
    return BasisSpec(
        kind=str(raw["kind"]),
        order=int(raw["order"]),
        degree=int(raw.get("degree", 3)),
    )


@dataclass
class RunConfig:
    raw: dict = field(default_factory=dict)

    @property
    def input(self) -> str:
        if "input" not in self.raw:
            raise ValidationError("config is missing 'input'")
        return str(self.raw["input"])

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def restarts(self) -> int:
        return int(self.raw.get("restarts", 10))

    def basis(self) -> BasisSpec:
        if "basis" not in self.raw:
            raise ValidationError("config is missing 'basis'")
        return _parse_basis(self.raw["basis"])

    def fixed_basis(self) -> BasisSpec | None:
        raw = self.raw.get("fixed", "intercept")
        if raw in ("intercept", None):
            return None
        return _parse_basis(raw)

    def shared(self) -> tuple[int, ...]:
        if "shared" not in self.raw:
            raise ValidationError("config is missing 'shared'")
        return parse_shared(self.raw["shared"], self.basis().n_columns)

    def model_spec(self) -> ModelSpec:
        return ModelSpec(
            random=self.basis(), shared=self.shared(), fixed=self.fixed_basis()
        )

    def mcmc(self) -> McmcConfig:
        raw = self.raw.get("mcmc", {})
        return McmcConfig(
            n_chains=int(raw.get("chains", 4)),
            n_iter=int(raw.get("iterations", 2000)),
            burn_in=int(raw.get("burn_in", 1000)),
            thin=int(raw.get("thin", 1)),
            seed=self.seed,
        )

    def k_or_selection(self):
        """Return ('k', K) or ('selection', dict); exactly one must be set."""
        has_k = "k" in self.raw
        has_sel = "selection" in self.raw
        if has_k == has_sel:
            raise ValidationError("config must set exactly one of 'k' or 'selection'")
        if has_k:
            return "k", int(self.raw["k"])
        sel = self.raw["selection"]
        if not isinstance(sel, dict) or "method" not in sel:
            raise ValidationError("'selection' must be a mapping with a 'method'")
        if sel["method"] not in ("kl", "bootstrap", "both"):
            raise ValidationError(f"unknown selection method {sel['method']!r}")
        return "selection", sel


def load_config(path: str | None, overrides: dict) -> RunConfig:
    raw = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh)
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValidationError(f"{path}: config must be a YAML mapping")
        raw.update(loaded)
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    return RunConfig(raw)


def echo_config(cfg: RunConfig, out_dir: Path) -> str:
    """Write the normalized config and its hash into the output directory;
    returns the hash."""
    canonical = json.dumps(cfg.raw, sort_keys=True, default=str)
    digest = hashlib.sha256(canonical.encode()).hexdigest()
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config_echo.yaml", "w") as fh:
        yaml.safe_dump(cfg.raw, fh, sort_keys=True)
        fh.write(f"# sha256: {digest}\n")
    return digest
