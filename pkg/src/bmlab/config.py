"""Experiment configuration: JSON schema, parsing of observables and validation."""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass
from dataclasses import field as dc_field
from importlib import resources
from typing import Any

import numpy as np

from .chaos import TestFunction
from .covariance import CovarianceModel
from .errors import ConfigError
from .hermite import HermiteExpansion, expand_polynomial, from_hermite_coeffs

SCHEMA_VERSION = 1
EXPERIMENTS = ("clt", "gff", "tightness")
CHECKS = ("variance", "ks", "fourth_moment", "covariance", "components")


def parse_observable(spec: str, variance_base: float = 1.0, q_max: int | None = None) -> HermiteExpansion:
    """Observable from a short string.

    ``x^p`` or ``x`` (monomial), ``He5`` (a single Hermite polynomial),
    ``poly:a0,a1,...`` (monomial coefficients) or ``hermite:1=3,3=1``.
    """
    s = spec.strip().replace(" ", "")
    m = re.fullmatch(r"x(?:\^(\d+)|\*\*(\d+))?", s)
    if m:
        p = int(m.group(1) or m.group(2) or 1)
        return expand_polynomial([0.0] * p + [1.0], variance_base, q_max)
    m = re.fullmatch(r"H[e]?(\d+)", s)
    if m:
        return from_hermite_coeffs({int(m.group(1)): 1.0}, variance_base)
    if s.startswith("poly:"):
        coeffs = [float(v) for v in s[5:].split(",")]
        return expand_polynomial(coeffs, variance_base, q_max)
    if s.startswith("hermite:"):
        pairs = {}
        for item in s[8:].split(","):
            q, c = item.split("=")
            pairs[int(q)] = float(c)
        return from_hermite_coeffs(pairs, variance_base)
    raise ConfigError(f"cannot parse observable {spec!r}; use x^p, He<q>, poly:... or hermite:q=c,...")


@dataclass
class ExperimentConfig:
    experiment: str
    d: int
    model: dict
    observable: dict
    test_functions: list
    N_list: list
    replicas: int
    seed: int
    M: int | None = None
    alpha: float | None = None
    q_max: int = 10
    field: str = "value"  # "value" | "gradient"
    gradient_axis: int = 0
    components: list = dc_field(default_factory=list)
    checks: list = dc_field(default_factory=lambda: list(CHECKS))
    verdict_N: list | None = None  # window sizes with pass/fail verdicts; None means all
    K_max: int = 16
    radius: int = 16
    k_se: float = 3.0
    prediction: str = "exact"  # "exact" | "limit"
    fourth_moment_floor: float = 0.1
    ks_level: float = 0.01
    ratio_tolerance: float = 0.15
    name: str = ""
    schema_version: int = SCHEMA_VERSION

    # serialisation ---------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version} (expected {SCHEMA_VERSION})")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        missing = [k for k in ("experiment", "d", "model", "observable", "test_functions",
                               "N_list", "replicas", "seed") if k not in data]
        if missing:
            raise ConfigError(f"config is missing required fields: {missing}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())

    # derived objects -------------------------------------------------------
    @property
    def is_gff(self) -> bool:
        return self.model.get("kind") in ("gff", "gff_green")

    def build_model(self) -> CovarianceModel:
        spec = dict(self.model)
        spec.setdefault("d", self.d)
        return CovarianceModel.from_dict(spec)

    def build_test_functions(self) -> list[TestFunction]:
        out = []
        for spec in self.test_functions:
            if spec.get("kind") == "lattice_box":
                out.append(TestFunction.lattice_box(int(spec["N"]), spec["lo"], spec["hi"],
                                                    spec.get("normalized", True), spec.get("name", "")))
            else:
                out.append(TestFunction.from_dict(spec, self.d))
        return out

    def build_observable(self, variance_base: float) -> HermiteExpansion:
        obs = self.observable
        vb = float(obs.get("variance_base", variance_base))
        if "power" in obs:
            p = int(obs["power"])
            return expand_polynomial([0.0] * p + [1.0], vb)
        if "polynomial" in obs:
            return expand_polynomial(obs["polynomial"], vb)
        if "hermite" in obs:
            return from_hermite_coeffs({int(q): float(c) for q, c in dict(obs["hermite"]).items()}, vb)
        if "spec" in obs:
            return parse_observable(obs["spec"], vb)
        raise ConfigError("observable needs one of: power, polynomial, hermite, spec")

    def asserts(self, check: str, N: int) -> bool:
        """Whether ``check`` yields a pass/fail verdict at window size ``N``."""
        return check in self.checks and (self.verdict_N is None or N in self.verdict_N)

    @property
    def max_N(self) -> int:
        return max(self.N_list)

    # validation --------------------------------------------------------------
    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if self.d < 1:
            raise ConfigError("dimension d must be >= 1")
        if self.replicas < 1:
            raise ConfigError(f"replica count must be >= 1, got {self.replicas}")
        if not self.N_list or any(int(n) < 2 for n in self.N_list):
            raise ConfigError("N_list must be a non-empty list of integers >= 2")
        if not self.test_functions and self.experiment != "tightness":
            raise ConfigError("at least one test function is required")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.field not in ("value", "gradient"):
            raise ConfigError("field must be 'value' or 'gradient'")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise ConfigError(f"unknown checks {bad}; choose from {CHECKS}")
        if self.verdict_N is not None and not set(self.verdict_N) <= set(self.N_list):
            raise ConfigError("verdict_N must be a subset of N_list")
        if self.prediction not in ("exact", "limit"):
            raise ConfigError("prediction must be 'exact' or 'limit'")
        if self.is_gff:
            if self.d < 3:
                raise ConfigError(f"the lattice GFF needs d >= 3, got d={self.d}")
            M = self.M
            if M is None or M < 8:
                raise ConfigError("GFF experiments need an explicit box size M >= 8")
            h = self.max_N // 2
            if M // 2 - h < M // 4:
                raise ConfigError(
                    f"GFF window N={self.max_N} reaches the outer quarter of the M={M} box; "
                    f"need N/2 <= M/4")
        else:
            if self.field == "gradient":
                raise ConfigError("gradient fields are only supported for GFF experiments")
            if self.M is not None:
                if self.M % 2:
                    raise ConfigError(f"torus size M must be even, got {self.M}")
                if self.M < 2 * self.max_N:
                    raise ConfigError(f"torus size M={self.M} must be >= 2N = {2 * self.max_N}")
        if self.experiment == "tightness":
            if self.alpha is None:
                raise ConfigError("tightness experiments need alpha")
            if self.alpha <= self.d / 2:
                raise ConfigError(f"alpha={self.alpha} must exceed d/2={self.d / 2}")
        if self.alpha is not None and self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        try:
            model = self.build_model()
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid covariance model: {exc}") from exc
        if model.d != self.d:
            raise ConfigError(f"model dimension {model.d} does not match d={self.d}")
        try:
            fs = self.build_test_functions()
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"invalid test function: {exc}") from exc
        if any(f.d != self.d for f in fs):
            raise ConfigError("test function dimension does not match d")
        return self


def shipped_config(name: str) -> ExperimentConfig:
    """Load one of the configs bundled under ``bmlab/configs``."""
    text = resources.files("bmlab").joinpath("configs", name).read_text()
    return ExperimentConfig.from_json(text)


def canonical_json(obj: Any) -> str:
    def default(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not serialisable: {type(o)}")

    return json.dumps(obj, sort_keys=True, indent=2, default=default)
