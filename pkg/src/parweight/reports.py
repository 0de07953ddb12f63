"""Report records emitted by the constant estimators and the verifiers."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field


def _clean(x):
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return _clean(x.item())
    return x


def to_json(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, separators=(",", ":"))


@dataclass
class ConstantReport:
    value: float
    witness: dict | None
    family_size: int
    name: str = ""

    def as_dict(self) -> dict:
        return {"value": self.value, "witness": self.witness, "family_size": self.family_size}

    def to_json(self) -> str:
        return to_json(self.as_dict())


@dataclass
class VerificationReport:
    """``passed`` is ``lhs <= paper_constant * rhs * (1 + slack)``, unless ``checks``
    carries extra exact conditions, all of which must hold too."""

    theorem: str
    lhs: float
    rhs: float
    paper_constant: float
    slack: float = 1e-9
    meta: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    skipped: bool = False
    note: str = ""

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs

    @property
    def bound_holds(self) -> bool:
        return self.lhs <= self.paper_constant * self.rhs * (1 + self.slack)

    @property
    def passed(self) -> bool:
        if self.skipped:
            return True
        return self.bound_holds and all(self.checks.values())

    def as_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return to_json(self.as_dict())

    def csv_row(self) -> list:
        return [self.theorem, self.meta.get("seed", ""), repr(self.lhs), repr(self.rhs),
                repr(self.paper_constant), repr(self.ratio), "pass" if self.passed else "FAIL"]

    def line(self) -> str:
        tag = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        return (f"{tag} {self.theorem} seed={self.meta.get('seed', '-')} "
                f"lhs={self.lhs:.6g} rhs={self.rhs:.6g} C={self.paper_constant:.6g} "
                f"ratio={self.ratio:.6g}")


CSV_HEADER = ["theorem", "seed", "lhs", "rhs", "constant", "ratio", "pass"]
