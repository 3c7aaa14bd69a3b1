"""Truncated Taylor arithmetic for exact low-order derivatives.

A :class:`Jet` stores normalized Taylor coefficients ``c[k] = f^(k)(x) / k!``
of a function around a point, so composing jets propagates derivatives
exactly (up to rounding) without symbolic algebra.
"""

from __future__ import annotations

import math

import numpy as np


class Jet:
    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @classmethod
    def variable(cls, x, order: int = 3) -> "Jet":
        x = np.asarray(x, dtype=float)
        c = np.zeros((order + 1,) + x.shape)
        c[0] = x
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, like: "Jet") -> "Jet":
        c = np.zeros_like(like.c)
        c[0] = value
        return cls(c)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @property
    def value(self):
        return self.c[0]

    def d(self, k: int):
        """k-th derivative at the expansion point."""
        return self.c[k] * math.factorial(k)

    def derivative(self) -> "Jet":
        k = np.arange(1, self.order + 1).reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Jet(self.c[1:] * k)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.order != self.order:
                m = min(self.order, other.order)
                return Jet(other.c[: m + 1])
            return other
        return Jet.constant(other, self)

    def _trim(self, other: "Jet") -> tuple["Jet", "Jet"]:
        m = min(self.order, other.order)
        return Jet(self.c[: m + 1]), Jet(other.c[: m + 1])

    def __add__(self, other):
        a, b = self._trim(self._coerce(other))
        return Jet(a.c + b.c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        a, b = self._trim(self._coerce(other))
        return Jet(a.c - b.c)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        a, b = self._trim(other)
        out = np.zeros_like(a.c * b.c)
        for k in range(a.order + 1):
            for j in range(k + 1):
                out[k] = out[k] + a.c[j] * b.c[k - j]
        return Jet(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        a, b = self._trim(other)
        out = np.zeros_like(a.c * b.c)
        for k in range(a.order + 1):
            acc = a.c[k]
            for j in range(1, k + 1):
                acc = acc - b.c[j] * out[k - j]
            out[k] = acc / b.c[0]
        return Jet(out)

    def __rtruediv__(self, other):
        return Jet.constant(other, self) / self

    def __pow__(self, alpha):
        if isinstance(alpha, (int, np.integer)) and alpha >= 0:
            out = Jet.constant(1.0, self)
            for _ in range(int(alpha)):
                out = out * self
            return out
        alpha = float(alpha)
        f = self.c
        out = np.zeros_like(f)
        out[0] = f[0] ** alpha
        for k in range(1, self.order + 1):
            acc = np.zeros_like(f[0])
            for j in range(1, k + 1):
                acc = acc + (alpha * j - (k - j)) * f[j] * out[k - j]
            out[k] = acc / (k * f[0])
        return Jet(out)


def _exp_like(f: Jet, zeroth) -> Jet:
    out = np.zeros_like(f.c)
    out[0] = zeroth
    e0 = np.exp(f.c[0])
    # the recurrence needs exp itself, not expm1, for the higher terms
    full = np.zeros_like(f.c)
    full[0] = e0
    for k in range(1, f.order + 1):
        acc = np.zeros_like(f.c[0])
        for j in range(1, k + 1):
            acc = acc + j * f.c[j] * full[k - j]
        full[k] = acc / k
        out[k] = full[k]
    return Jet(out)


def exp(f: Jet) -> Jet:
    return _exp_like(f, np.exp(f.c[0]))


def expm1(f: Jet) -> Jet:
    return _exp_like(f, np.expm1(f.c[0]))


def log(f: Jet) -> Jet:
    out = np.zeros_like(f.c)
    out[0] = np.log(f.c[0])
    for k in range(1, f.order + 1):
        acc = f.c[k]
        for j in range(1, k):
            acc = acc - (j / k) * out[j] * f.c[k - j]
        out[k] = acc / f.c[0]
    return Jet(out)


def sqrt(f: Jet) -> Jet:
    return f ** 0.5


def sin_cos(f: Jet) -> tuple[Jet, Jet]:
    s = np.zeros_like(f.c)
    c = np.zeros_like(f.c)
    s[0] = np.sin(f.c[0])
    c[0] = np.cos(f.c[0])
    for k in range(1, f.order + 1):
        acc_s = np.zeros_like(f.c[0])
        acc_c = np.zeros_like(f.c[0])
        for j in range(1, k + 1):
            acc_s = acc_s + j * f.c[j] * c[k - j]
            acc_c = acc_c - j * f.c[j] * s[k - j]
        s[k] = acc_s / k
        c[k] = acc_c / k
    return Jet(s), Jet(c)
