"""Numerical tolerances shared by every module.

All thresholds live in one frozen :class:`ToleranceConfig`; functions take an
optional ``tol`` argument and fall back to :data:`DEFAULT_TOLERANCES`.
"""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path
from typing import Mapping

ENV_VAR = "REVEMBED_TOL_CONFIG"


@dataclasses.dataclass(frozen=True)
class ToleranceConfig:
    entry_tol: float = 1e-12    # negative entries above -entry_tol are clamped to 0
    row_tol: float = 1e-10      # row-sum deviation
    edge_tol: float = 1e-12     # M_ij > edge_tol counts as a transition
    pos_tol: float = 1e-12      # p_i > pos_tol counts as strictly positive
    db_tol: float = 1e-9        # detailed-balance residual
    cluster_tol: float = 1e-8   # absolute eigenvalue clustering
    spec_tol: float = 1e-10     # eigenvalue cluster is positive iff center > spec_tol
    emb_tol: float = 1e-9       # ||expm(Q) - M|| accepted for an embedding witness
    sym_rtol: float = 1e-9      # symmetry check, relative to max|S|
    rho_margin: float = 1e-6    # Mercator series needs rho(M - 1) < 1 - rho_margin
    probe_tol: float = 1e-9     # theta-set probe hit threshold

    def replace(self, **changes) -> "ToleranceConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, values: Mapping[str, object], base: "ToleranceConfig | None" = None) -> "ToleranceConfig":
        base = base or cls()
        known = set(cls.names())
        changes = {}
        for key, value in values.items():
            if key not in known:
                raise KeyError(f"unknown tolerance {key!r}; expected one of {sorted(known)}")
            v = float(value)
            if not v >= 0.0:
                raise ValueError(f"tolerance {key} must be a nonnegative number, got {value!r}")
            changes[key] = v
        return dataclasses.replace(base, **changes)

    @classmethod
    def load(cls, path, base: "ToleranceConfig | None" = None) -> "ToleranceConfig":
        """Read a tolerance file: a JSON object, or ``NAME=VALUE`` lines."""
        text = Path(path).read_text(encoding="utf-8")
        try:
            values = json.loads(text)
        except json.JSONDecodeError:
            values = {}
            for raw in text.splitlines():
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise ValueError(f"bad tolerance line {raw!r}; expected NAME=VALUE")
                values[key.strip()] = value.strip()
        if not isinstance(values, dict):
            raise ValueError("tolerance file must hold a JSON object or NAME=VALUE lines")
        return cls.from_mapping(values, base)

    @classmethod
    def from_env(cls) -> "ToleranceConfig":
        path = os.environ.get(ENV_VAR)
        return cls.load(path) if path else cls()


DEFAULT_TOLERANCES = ToleranceConfig()
