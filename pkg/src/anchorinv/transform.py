"""Monotone coordinate transforms between natural and model units.

Three kinds: identity, log (positive quantities), and logit for doubly
bounded quantities, f(x) = log((x - lower) / (upper - x)). Domain violations
raise ValueError; nothing is clamped silently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = ["Transform"]

_KINDS = ("identity", "log", "logit")


@dataclass(frozen=True)
class Transform:
    kind: str
    lower: float = float("nan")
    upper: float = float("nan")

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == "logit":
            if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
                raise ValueError("logit transform needs finite bounds")
            if not self.lower < self.upper:
                raise ValueError("logit transform needs lower < upper")

    @classmethod
    def identity(cls) -> "Transform":
        return cls("identity")

    @classmethod
    def log(cls) -> "Transform":
        return cls("log")

    @classmethod
    def logit(cls, lower: float, upper: float) -> "Transform":
        return cls("logit", float(lower), float(upper))

    def apply(self, x):
        """Natural unit to model unit. Scalar in, scalar out."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            out = x.copy()
        elif self.kind == "log":
            if np.any(x <= 0.0):
                raise ValueError("log transform requires positive input")
            out = np.log(x)
        else:
            if np.any(x <= self.lower) or np.any(x >= self.upper):
                raise ValueError(
                    f"logit transform requires input strictly inside "
                    f"({self.lower}, {self.upper})"
                )
            out = np.log((x - self.lower) / (self.upper - x))
        return float(out) if out.ndim == 0 else out

    def invert(self, u):
        """Model unit back to natural unit. Inverse of :meth:`apply`."""
        u = np.asarray(u, dtype=np.float64)
        if not np.all(np.isfinite(u)):
            raise ValueError("transform inversion requires finite input")
        if self.kind == "identity":
            out = u.copy()
        elif self.kind == "log":
            out = np.exp(u)
        else:
            # stable logistic form; rounding can land exactly on a bound
            # (upper-bound spacing can exceed the logistic tail), so pull
            # boundary hits one ulp inside
            out = self.lower + (self.upper - self.lower) * expit(u)
            out = np.clip(
                out,
                np.nextafter(self.lower, self.upper),
                np.nextafter(self.upper, self.lower),
            )
        return float(out) if out.ndim == 0 else out

    def spec_str(self) -> str:
        """Config-file representation, parseable by :meth:`parse`."""
        if self.kind == "logit":
            return f"logit {self.lower:.17g} {self.upper:.17g}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "Transform":
        parts = text.split()
        if not parts:
            raise ValueError("empty transform spec")
        kind = parts[0]
        if kind in ("identity", "log"):
            if len(parts) != 1:
                raise ValueError(f"transform {kind!r} takes no bounds")
            return cls(kind)
        if kind == "logit":
            if len(parts) != 3:
                raise ValueError("logit transform needs two bounds")
            return cls.logit(float(parts[1]), float(parts[2]))
        raise ValueError(f"unknown transform kind {kind!r}")
