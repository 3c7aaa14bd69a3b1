"""Radial Pohozaev identity for ``a^ij d_ij u + b^i d_i u + c u + K u^p = 0`` on ``B_r / Gamma``.

In a chart centered at the singular point with flat radius ``rho``, a radial
equation ``alpha u'' + (3/rho + b) u' + c u + K u^p = 0`` has
``a - delta = (alpha - 1) nu nu`` and ``b^i = b nu^i``. Testing the flat
Laplacian against ``rho u' + u`` gives, with ``omega = 2 pi^2 / |Gamma|``,

    P(r) = omega r^3 (u u' + r u'^2 / 2)
         = coefficient_deviation + c_volume + c_boundary
           + k_gradient + exponent_deficit + k_boundary

where (integrals over ``0 < rho < r`` with weight ``omega rho^3``)

* coefficient_deviation = -int (rho u' + u) ((alpha - 1) u'' + b u')
* c_volume = int (c + rho c'/2) u^2
* c_boundary = -omega r^4 c(r) u(r)^2 / 2
* k_gradient = int rho K' u^(p+1) / (p+1)
* exponent_deficit = (4/(p+1) - 1) int K u^(p+1)
* k_boundary = -omega r^4 K(r) u(r)^(p+1) / (p+1)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import _io
from .geometry import VOL_S3
from .kfamily import KFamily

EPS = 1e-6
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------------------
# radial data


class AnalyticRadial:
    """Radial data from callables ``u, u', u''``."""

    def __init__(self, u: Callable, du: Callable, d2u: Callable, r_max: float = math.inf):
        self._u, self._du, self._d2u = u, du, d2u
        self.r_min, self.r_max = 0.0, r_max

    def u(self, r):
        return self._u(np.asarray(r, dtype=float))

    def du(self, r):
        return self._du(np.asarray(r, dtype=float))

    def d2u(self, r):
        return self._d2u(np.asarray(r, dtype=float))

    def breakpoints(self, lo, hi):
        return np.linspace(lo, hi, 257)


class RadialSamples:
    """Grid samples ``(rho_i, u_i, u'_i)`` interpolated by a C^1 cubic Hermite spline.

    ``u''`` is the spline's second derivative, so identity residuals
    measure the sampling resolution.
    """

    def __init__(self, grid, u, du):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or len(grid) < 3 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing with at least three nodes")
        self.grid = grid
        self.values = np.asarray(u, dtype=float)
        self.derivs = np.asarray(du, dtype=float)
        self._spl = CubicHermiteSpline(grid, self.values, self.derivs)
        self._d1 = self._spl.derivative(1)
        self._d2 = self._spl.derivative(2)
        self.r_min, self.r_max = float(grid[0]), float(grid[-1])

    @classmethod
    def from_solution(cls, solution, points: int, r_max: float | None = None, r_min: float = EPS):
        """Sample a solver solution on a uniform grid in the distance coordinate (``s`` or ``theta``)."""
        if r_max is None:
            r_max = 1.0 if solution.geom.is_lebrun else 0.5 * math.pi
        grid = np.linspace(r_min, r_max, points)
        return cls(grid, solution.u_of_s(grid), solution.du_of_s(grid))

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < self.r_min - 1e-15) or np.any(r > self.r_max + 1e-12 * self.r_max):
            raise ValueError(f"r outside the sampled range [{self.r_min}, {self.r_max}]")
        return r

    def u(self, r):
        return self._spl(self._check(r))

    def du(self, r):
        return self._d1(self._check(r))

    def d2u(self, r):
        return self._d2(self._check(r))

    def breakpoints(self, lo, hi):
        inner = self.grid[(self.grid > lo) & (self.grid < hi)]
        return np.concatenate([[lo], inner, [hi]])


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class PohozaevCoefficients:
    """Radial coefficients in the centered chart; all callables of ``rho``."""

    alpha: Callable
    b: Callable
    c: Callable
    dc: Callable
    K: Callable
    dK: Callable
    p: float
    label: str = ""


def _zero(r):
    return np.zeros_like(np.asarray(r, dtype=float))


def _one(r):
    return np.ones_like(np.asarray(r, dtype=float))


def _k_callables(K):
    if isinstance(K, KFamily):
        return K.value, K.derivative
    c = float(K)
    return (lambda r: c * _one(r)), _zero


def flat_coefficients(K, p: float = 3.0) -> PohozaevCoefficients:
    """Flat cone ``R^4 / Gamma``: ``alpha = 1``, ``b = c = 0``."""
    k, dk = _k_callables(K)
    return PohozaevCoefficients(_one, _zero, _zero, _zero, k, dk, float(p), "flat")


def lebrun_coefficients(n: int, K, p: float = 3.0) -> PohozaevCoefficients:
    """Compactified LeBrun metric around the orbifold point, in ``s``.

    ``alpha = (1+n s^2)^3/(1+s^2)``, ``b = s (7n - 3 + 5 n^2 s^2 + n^3 s^4)/(1+s^2)``,
    ``c = -R/6 = -4n (1+n s^2)/(1+s^2)``.
    """
    k, dk = _k_callables(K)

    def alpha(s):
        s = np.asarray(s, dtype=float)
        return (1.0 + n * s * s) ** 3 / (1.0 + s * s)

    def b(s):
        s = np.asarray(s, dtype=float)
        s2 = s * s
        return s * (7.0 * n - 3.0 + 5.0 * n * n * s2 + n**3 * s2 * s2) / (1.0 + s2)

    def c(s):
        s = np.asarray(s, dtype=float)
        return -4.0 * n * (1.0 + n * s * s) / (1.0 + s * s)

    def dc(s):
        s = np.asarray(s, dtype=float)
        return -8.0 * n * (n - 1.0) * s / (1.0 + s * s) ** 2

    return PohozaevCoefficients(alpha, b, c, dc, k, dk, float(p), f"lebrun-{n}")


def football_coefficients(K, p: float = 3.0) -> PohozaevCoefficients:
    """Round S^4 around a pole, in ``theta``: ``b = 3 cot(theta) - 3/theta``, ``c = -2``."""
    k, dk = _k_callables(K)

    def b(th):
        th = np.asarray(th, dtype=float)
        small = np.abs(th) < 1e-3
        safe = np.where(small, 1.0, th)
        # 3 cot x - 3/x = -x - x^3/15 + ...
        return np.where(small, -th - th**3 / 15.0, 3.0 / np.tan(safe) - 3.0 / safe)

    return PohozaevCoefficients(_one, b, lambda r: -2.0 * _one(r), _zero, k, dk, float(p), "football")


# ---------------------------------------------------------------------------
# identity


def pohozaev_boundary(data, r: float, gamma_order: int = 1) -> float:
    """``P(r, u) = (2 pi^2/|Gamma|) r^3 (u u' + r u'^2 / 2)`` for radial ``u`` in dimension 4."""
    if not data.r_min <= r <= data.r_max or r <= 0:
        raise ValueError(f"r={r} outside the data range ({data.r_min}, {data.r_max}]")
    u, du = float(data.u(r)), float(data.du(r))
    return VOL_S3 / gamma_order * r**3 * (u * du + 0.5 * r * du * du)


def _quad(data, f, lo, hi):
    bp = data.breakpoints(lo, hi)
    a, b = bp[:-1], bp[1:]
    x = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * _GL_X[None, :]
    vals = f(x.ravel()).reshape(x.shape)
    return float(np.sum((0.5 * (b - a))[:, None] * vals * _GL_W[None, :]))


def pohozaev_volume_terms(data, coeffs: PohozaevCoefficients, r: float, gamma_order: int = 1,
                          eps: float = EPS) -> dict:
    """The six right-hand groups at radius ``r`` (integrals on ``[eps, r]``)."""
    lo = max(eps, data.r_min)
    if not lo < r <= data.r_max:
        raise ValueError(f"r={r} outside the data range ({lo}, {data.r_max}]")
    om = VOL_S3 / gamma_order
    p = coeffs.p

    def dev(x):
        u, du, d2u = data.u(x), data.du(x), data.d2u(x)
        return -(x * du + u) * ((coeffs.alpha(x) - 1.0) * d2u + coeffs.b(x) * du) * x**3

    def cvol(x):
        return (coeffs.c(x) + 0.5 * x * coeffs.dc(x)) * data.u(x) ** 2 * x**3

    def kgrad(x):
        return x * coeffs.dK(x) * np.abs(data.u(x)) ** (p + 1) / (p + 1) * x**3

    def kvol(x):
        return coeffs.K(x) * np.abs(data.u(x)) ** (p + 1) * x**3

    ur = float(data.u(r))
    return {
        "coefficient_deviation": om * _quad(data, dev, lo, r),
        "c_volume": om * _quad(data, cvol, lo, r),
        "c_boundary": -0.5 * om * r**4 * float(coeffs.c(r)) * ur * ur,
        "k_gradient": om * _quad(data, kgrad, lo, r),
        "exponent_deficit": (4.0 / (p + 1.0) - 1.0) * om * _quad(data, kvol, lo, r),
        "k_boundary": -om * r**4 * float(coeffs.K(r)) * abs(ur) ** (p + 1) / (p + 1.0),
    }


@dataclass
class PohozaevReport:
    r: float
    boundary_P: float
    volume_terms: dict
    residual: float
    scale: float
    gamma_order: int = 1

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "boundary_P": self.boundary_P,
            "volume_terms": dict(self.volume_terms),
            "residual": self.residual,
            "scale": self.scale,
            "relative_residual": self.relative_residual,
            "gamma_order": self.gamma_order,
        }

    def to_json(self, path=None) -> str:
        if path is not None:
            _io.write_json(path, self.to_dict())
        return _io.json_text(self.to_dict())


TERM_NAMES = ("coefficient_deviation", "c_volume", "c_boundary", "k_gradient", "exponent_deficit", "k_boundary")


def pohozaev_report(data, coeffs: PohozaevCoefficients, r: float, gamma_order: int = 1) -> PohozaevReport:
    P = pohozaev_boundary(data, r, gamma_order)
    terms = pohozaev_volume_terms(data, coeffs, r, gamma_order)
    total = sum(terms.values())
    scale = max([abs(P)] + [abs(v) for v in terms.values()])
    return PohozaevReport(r, P, terms, abs(P - total), scale, gamma_order)


def reports_csv(reports, path=None) -> str:
    header = ("r", "boundary_P") + TERM_NAMES + ("residual", "scale")
    rows = [(rep.r, rep.boundary_P, *[rep.volume_terms[k] for k in TERM_NAMES], rep.residual, rep.scale)
            for rep in reports]
    if path is not None:
        _io.write_csv(path, header, rows)
    return _io.csv_text(header, rows)


@dataclass
class RefinementStudy:
    points: list
    residuals: list
    scales: list

    @property
    def relative(self) -> list:
        return [r / s for r, s in zip(self.residuals, self.scales)]

    @property
    def observed_order(self) -> float:
        """Least-squares slope of ``log residual`` against ``log h`` over the levels."""
        h = 1.0 / (np.asarray(self.points, dtype=float) - 1.0)
        res = np.asarray(self.residuals, dtype=float)
        return float(np.polyfit(np.log(h), np.log(res), 1)[0])


def pohozaev_refinement(solution, coeffs: PohozaevCoefficients, r: float, levels=(41, 81, 161, 321),
                        r_max: float | None = None, gamma_order: int = 1) -> RefinementStudy:
    """Identity residual of a solver solution sampled at successively doubled resolutions."""
    r_max = r if r_max is None else r_max
    res, sc = [], []
    for m in levels:
        data = RadialSamples.from_solution(solution, m, r_max)
        rep = pohozaev_report(data, coeffs, r, gamma_order)
        res.append(rep.residual)
        sc.append(rep.scale)
    return RefinementStudy(list(levels), res, sc)
