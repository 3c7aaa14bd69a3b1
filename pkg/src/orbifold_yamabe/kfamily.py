"""Radial curvature candidates ``K(s)`` with exact data at the orbifold point.

``s`` is the distance-like coordinate centered at the orbifold point (``s = 0``);
``s = inf`` is the far end (the P^1 for LeBrun). All families are even in
``s``, so ``K'(0) = 0``, and expose ``K(0)``, ``K''(0)`` and ``K(inf)``
exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class KKind(str, Enum):
    CONSTANT = "Constant"
    BUMP = "Bump"
    RATIONAL_DECAY = "RationalDecay"
    K_MINUS = "KMinusTransform"


class KFamilyError(ValueError):
    pass


@dataclass(frozen=True)
class KFamily:
    kind: KKind
    params: dict = field(default_factory=dict)
    inner: "KFamily | None" = None

    def __post_init__(self):
        object.__setattr__(self, "kind", KKind(self.kind))
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        self._validate()

    def _validate(self):
        p = self.params
        if self.kind is KKind.CONSTANT:
            low = p["c"]
        elif self.kind in (KKind.BUMP, KKind.RATIONAL_DECAY):
            if p["width"] <= 0:
                raise KFamilyError("width must be positive")
            # extremes are at s = 0 and s = inf
            low = min(p["base"], p["base"] + p["amplitude"])
        else:
            if self.inner is None:
                raise KFamilyError("KMinusTransform needs an inner family")
            n = p["n"]
            if n < 1 or n != int(n):
                raise KFamilyError("n must be a positive integer")
            low = min(self.inner.value(0.0), self.inner.at_infinity)
        if not np.isfinite(low) or low <= 0:
            raise KFamilyError(f"{self.kind.value} family is not positive (infimum {low!r}, possibly at s = inf)")

    # evaluation -------------------------------------------------------------
    def value(self, s):
        s = np.asarray(s, dtype=float)
        p = self.params
        with np.errstate(over="ignore", invalid="ignore"):
            if self.kind is KKind.CONSTANT:
                out = np.full_like(s, p["c"])
            elif self.kind is KKind.BUMP:
                out = p["base"] + p["amplitude"] * np.exp(-((s / p["width"]) ** 2))
            elif self.kind is KKind.RATIONAL_DECAY:
                out = p["base"] + p["amplitude"] / (1.0 + (s / p["width"]) ** 2)
            else:
                n = p["n"]
                s2 = s * s
                pref = np.where(np.isinf(s), 1.0, (2.0 + n * s2) / (n + n * s2))
                out = pref * self.inner.value(s)
        return float(out) if out.ndim == 0 else out

    __call__ = value

    def derivative(self, s):
        """``dK/ds`` (finite ``s`` only)."""
        s = np.asarray(s, dtype=float)
        p = self.params
        if self.kind is KKind.CONSTANT:
            out = np.zeros_like(s)
        elif self.kind is KKind.BUMP:
            w = p["width"]
            out = -2.0 * p["amplitude"] * s / w**2 * np.exp(-((s / w) ** 2))
        elif self.kind is KKind.RATIONAL_DECAY:
            w = p["width"]
            out = -2.0 * p["amplitude"] * s / w**2 / (1.0 + (s / w) ** 2) ** 2
        else:
            n = p["n"]
            pref = (2.0 + n * s * s) / (n + n * s * s)
            dpref = 2.0 * (n - 2.0) * s / (n * (1.0 + s * s) ** 2)
            out = dpref * self.inner.value(s) + pref * self.inner.derivative(s)
        return float(out) if out.ndim == 0 else out

    @property
    def at_zero(self) -> float:
        return float(self.value(0.0))

    @property
    def d1_at_zero(self) -> float:
        return 0.0

    @property
    def d2_at_zero(self) -> float:
        p = self.params
        if self.kind is KKind.CONSTANT:
            return 0.0
        if self.kind is KKind.BUMP:
            return -2.0 * p["amplitude"] / p["width"] ** 2
        if self.kind is KKind.RATIONAL_DECAY:
            return -2.0 * p["amplitude"] / p["width"] ** 2
        n = p["n"]
        # prefactor (2 + n s^2)/(n + n s^2) = 2/n + (n-2)/n s^2 + O(s^4)
        return 2.0 * (n - 2.0) / n * self.inner.at_zero + 2.0 / n * self.inner.d2_at_zero

    @property
    def at_infinity(self) -> float:
        p = self.params
        if self.kind is KKind.CONSTANT:
            return p["c"]
        if self.kind in (KKind.BUMP, KKind.RATIONAL_DECAY):
            return p["base"]
        return self.inner.at_infinity

    def sup_estimate(self, samples: int = 2001) -> float:
        s = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, samples)])
        return float(max(np.max(self.value(s)), self.at_infinity))

    def scaled(self, c: float) -> "KFamily":
        """``c K`` in the same family."""
        c = float(c)
        if c <= 0:
            raise KFamilyError("scale must be positive")
        p = dict(self.params)
        if self.kind is KKind.CONSTANT:
            p["c"] *= c
        elif self.kind in (KKind.BUMP, KKind.RATIONAL_DECAY):
            p["base"] *= c
            p["amplitude"] *= c
        else:
            return KFamily(self.kind, p, self.inner.scaled(c))
        return KFamily(self.kind, p)

    def is_nonincreasing(self, samples: int = 4001, tol: float = 1e-12) -> bool:
        s = np.concatenate([[0.0], np.geomspace(1e-4, 1e4, samples)])
        v = self.value(s)
        scale = max(1.0, float(np.max(np.abs(v))))
        return bool(np.all(np.diff(v) <= tol * scale) and self.at_infinity <= v[-1] + tol * scale)

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "params": dict(self.params)}
        if self.inner is not None:
            d["inner"] = self.inner.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KFamily":
        kind = KKind(d["kind"])
        params = dict(d.get("params", {}))
        if kind is KKind.K_MINUS:
            if "inner" not in d:
                raise KFamilyError("KMinusTransform needs an 'inner' family")
            inner = cls.from_dict(d["inner"])
            return make_K_minus(int(params["n"]), inner)
        defaults = {KKind.CONSTANT: {"c": 1.0}, KKind.BUMP: {"base": 1.0, "width": 1.0},
                    KKind.RATIONAL_DECAY: {"base": 1.0, "width": 1.0}}[kind]
        params = {**defaults, **params}
        if kind is not KKind.CONSTANT and "amplitude" not in params:
            raise KFamilyError(f"{kind.value} needs an 'amplitude'")
        return cls(kind, params)


def constant(c: float = 1.0) -> KFamily:
    return KFamily(KKind.CONSTANT, {"c": c})


def bump(amplitude: float, base: float = 1.0, width: float = 1.0) -> KFamily:
    """``base + amplitude * exp(-(s/width)^2)``."""
    return KFamily(KKind.BUMP, {"base": base, "amplitude": amplitude, "width": width})


def rational_decay(amplitude: float, base: float = 1.0, width: float = 1.0) -> KFamily:
    """``base + amplitude / (1 + (s/width)^2)``."""
    return KFamily(KKind.RATIONAL_DECAY, {"base": base, "amplitude": amplitude, "width": width})


def make_K_minus(n: int, k2minus: KFamily) -> KFamily:
    """``(2 + n s^2)/(n + n s^2) * k2minus(s)`` for a nonincreasing positive ``k2minus``."""
    if not k2minus.is_nonincreasing():
        raise KFamilyError("the inner family must be monotonically nonincreasing in s")
    return KFamily(KKind.K_MINUS, {"n": n}, k2minus)
