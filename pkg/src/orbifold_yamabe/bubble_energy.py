"""Bubbles, sphere constants and the Yamabe-type energy on radial backgrounds.

All dimension-4 evaluations use ``c(4) = 1/6`` for the conformal Laplacian
``Delta - c(4) R``. Radial integrals over a background carry the slice volume
``2 pi^2 / |Gamma|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import gamma as gamma_fn

from . import _io
from .geometry import VOL_S3, Coordinate, Kind, RadialGeometry, coord_transform, metric_coeffs
from .geometry import scalar_curvature, volume_density
from .kfamily import KFamily

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def conformal_constant(n: int = 4) -> float:
    return (n - 2.0) / (4.0 * (n - 1.0))


def sphere_volume(n: int) -> float:
    """Volume of the unit round ``S^n``."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / gamma_fn((n + 1) / 2.0)


# ---------------------------------------------------------------------------
# bubble


def bubble_eval(c: float, y_radius, n: int = 4):
    """``U_c(y) = (n(n-2)/c)^((n-2)/4) (1+|y|^2)^((2-n)/2)``."""
    if c <= 0:
        raise ValueError("c must be positive")
    y = np.asarray(y_radius, dtype=float)
    if np.any(y < 0):
        raise ValueError("radius must be nonnegative")
    out = (n * (n - 2.0) / c) ** ((n - 2.0) / 4.0) * (1.0 + y * y) ** ((2.0 - n) / 2.0)
    return float(out) if out.ndim == 0 else out


def bubble_derivatives(c: float, r, scale: float = 1.0):
    """``(U, U', U'')`` of ``scale * U_c`` in dimension 4, analytic."""
    r = np.asarray(r, dtype=float)
    a = scale * math.sqrt(8.0 / c)
    q = 1.0 + r * r
    return a / q, -2.0 * a * r / q**2, a * (6.0 * r * r - 2.0) / q**3


def bubble_residual(c: float, grid, scale: float = 1.0) -> float:
    """``max |Delta U + c U^3|`` with the flat radial Laplacian ``U'' + 3U'/r``.

    ``scale`` multiplies the bubble (a value other than 1 is a negative control).
    At ``r = 0`` the Laplacian is ``4 U''(0)``.
    """
    r = np.asarray(grid, dtype=float)
    if np.any(r < 0):
        raise ValueError("grid must be nonnegative")
    u, du, d2u = bubble_derivatives(c, r, scale)
    with np.errstate(invalid="ignore", divide="ignore"):
        lap = np.where(r > 0, d2u + 3.0 * du / np.where(r > 0, r, 1.0), 4.0 * d2u)
    return float(np.max(np.abs(lap + c * u**3)))


# ---------------------------------------------------------------------------
# constants


def sobolev_quotient(n: int) -> float:
    """``Q(S^n) = n(n-2)/4 * Vol(S^n)^(2/n)``."""
    if n < 3:
        raise ValueError("n must be at least 3")
    return n * (n - 2.0) / 4.0 * sphere_volume(n) ** (2.0 / n)


def _half_line(f, panels: int = 64) -> float:
    """``int_0^inf f(r) dr`` via ``r = tan(z)`` and composite Gauss-Legendre on ``[0, pi/2)``."""
    edges = np.linspace(0.0, 0.5 * math.pi, panels + 1)
    a, b = edges[:-1], edges[1:]
    z = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * _GL_X[None, :]
    r = np.tan(z)
    vals = f(r) / np.cos(z) ** 2
    return float(np.sum((0.5 * (b - a))[:, None] * vals * _GL_W[None, :]))


@dataclass(frozen=True)
class HatConstants:
    n: int
    c0: float
    c2: float
    d1: float
    quadrature_error: float

    @property
    def c_times_c0(self) -> float:
        return conformal_constant(self.n) * self.c0


def hat_constants(n: int = 4, tol: float = 1e-10) -> HatConstants:
    """``(c0_hat, c2_hat, d1_hat)`` by quadrature over ``R^n`` (measure ``|S^(n-1)| r^(n-1) dr``).

    The error estimate compares 64 and 128 panels; a value above ``tol``
    raises.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    area = sphere_volume(n - 1)

    def integrals(panels):
        i0 = area * _half_line(lambda r: r ** (n - 1) * (1 + r * r) ** (-n), panels)
        i2 = area * _half_line(lambda r: r ** (n + 1) * (1 + r * r) ** (-n), panels)
        i1 = area * _half_line(lambda r: r ** (2 * n - 1) * (1 + r * r) ** (-(n + 1)), panels)
        return np.array([i0, i2, i1])

    lo, hi = integrals(64), integrals(128)
    err = float(np.max(np.abs(hi - lo) / np.abs(hi)))
    if err > tol:
        raise RuntimeError(f"hat-constant quadrature did not converge (relative change {err:.2e})")
    i0, i2, i1 = hi
    c0 = 4.0 * n * (n - 1.0) * i0 ** (2.0 / n)
    c2 = i2 / (2.0 * n * i0)
    d1 = 2.0 * n * i1 / ((n - 2.0) * i0)
    return HatConstants(n, c0, c2, d1, err)


# ---------------------------------------------------------------------------
# energy functional


@dataclass
class EnergyReport:
    p: float
    numerator: float
    denominator: float
    value: float
    gamma_order: int
    gradient_term: float = math.nan
    curvature_term: float = math.nan

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "value": self.value,
            "gamma_order": self.gamma_order,
            "gradient_term": self.gradient_term,
            "curvature_term": self.curvature_term,
        }

    def to_json(self, path=None) -> str:
        if path is not None:
            _io.write_json(path, self.to_dict())
        return _io.json_text(self.to_dict())


def _derivative(f, x):
    h = 1e-4 * np.maximum(np.abs(x), 1e-3)
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def _quadrature_nodes(geom: RadialGeometry, bounds=None, panels_per_unit: int = 4):
    """Nodes and weights covering the geometry's interior.

    LeBrun coordinates live on ``(0, inf)`` and are integrated in ``log x``;
    the Football on ``(0, pi)`` directly.
    """
    if geom.kind is Kind.FOOTBALL:
        lo, hi = bounds if bounds is not None else (0.0, math.pi)
        edges = np.linspace(lo, hi, 65)
        a, b = edges[:-1], edges[1:]
        x = ((0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * _GL_X[None, :]).ravel()
        w = ((0.5 * (b - a))[:, None] * _GL_W[None, :]).ravel()
        return x, w
    lo, hi = bounds if bounds is not None else (1e-9, 1e9)
    la, lb = math.log(lo), math.log(hi)
    m = max(8, int(math.ceil((lb - la) * panels_per_unit)))
    edges = np.linspace(la, lb, m + 1)
    a, b = edges[:-1], edges[1:]
    y = ((0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * _GL_X[None, :]).ravel()
    w = ((0.5 * (b - a))[:, None] * _GL_W[None, :]).ravel()
    x = np.exp(y)
    return x, w * x


def _k_argument(geom: RadialGeometry, x):
    if geom.kind is Kind.FOOTBALL:
        return x
    return coord_transform(geom, x, geom.coordinate, Coordinate.S)


def energy_J(u, K: KFamily, p: float, geom: RadialGeometry, gamma_order: int | None = None,
             du: Callable | None = None, bounds=None) -> EnergyReport:
    """``J_p(u) = int(|grad u|^2 + c(4) R u^2) / (int K |u|^(p+1))^(2/(p+1))``.

    ``u`` is a callable of the geometry's radial coordinate (or a
    :class:`RadialSolution`); ``du`` defaults to ``u.derivative`` when
    present, else 4th-order finite differences. ``bounds`` restricts the
    radial interval (default: essentially the whole domain).
    """
    from .solver import RadialSolution

    if isinstance(u, RadialSolution):
        sol = u
        geom = sol.geom if sol.geom.kind is Kind.FOOTBALL else RadialGeometry(sol.geom.kind, sol.geom.n, Coordinate.T)
        if bounds is None:
            bounds = (sol.grid[0], sol.grid[-1])
        u, du = sol.u, sol.du
    gamma_order = geom.group_order if gamma_order is None else int(gamma_order)
    if gamma_order < 1:
        raise ValueError("gamma_order must be a positive integer")
    if du is None:
        du = getattr(u, "derivative", None) or (lambda x: _derivative(u, x))
    x, w = _quadrature_nodes(geom, bounds)
    J = volume_density(geom, x)
    A = metric_coeffs(geom, x).coeff_radial
    R = scalar_curvature(geom, x)
    uv = np.asarray(u(x), dtype=float)
    dv = np.asarray(du(x), dtype=float)
    vol = VOL_S3 / gamma_order
    grad = vol * float(np.sum(w * J * dv * dv / A))
    curv = vol * float(np.sum(w * J * conformal_constant(4) * R * uv * uv))
    mass = vol * float(np.sum(w * J * K.value(_k_argument(geom, x)) * np.abs(uv) ** (p + 1.0)))
    if not mass > 0:
        raise ZeroDivisionError("the denominator of J vanishes (u identically zero?)")
    num = grad + curv
    den = mass ** (2.0 / (p + 1.0))
    return EnergyReport(p, num, den, num / den, gamma_order, grad, curv)


def modified_max_BK(K: KFamily, geom: RadialGeometry) -> float:
    """``max(sup K, max_i |Gamma_i| K(q_i))`` over the orbifold points (dimension 4)."""
    sup = K.sup_estimate()
    g = geom.group_order
    if geom.kind is Kind.FOOTBALL:
        if g == 1:
            return sup
        return max(sup, g * max(K.at_zero, float(K.value(math.pi))))
    if g == 1:
        return sup
    return max(sup, g * K.at_zero)


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """``phi_lam(s) = lam / (1 + lam^2 (s^-2 + H)^-1)`` on a LeBrun compactification."""

    __test__ = False  # not a pytest class

    lam: float
    H: float

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        q = s * s / (1.0 + self.H * s * s)
        return self.lam / (1.0 + self.lam**2 * q)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        q = s * s / (1.0 + self.H * s * s)
        dq = 2.0 * s / (1.0 + self.H * s * s) ** 2
        return -self.lam**3 * dq / (1.0 + self.lam**2 * q) ** 2

    def samples(self, grid):
        grid = np.asarray(grid, dtype=float)
        return grid, self(grid), self.derivative(grid)


def test_function(geom: RadialGeometry, lam: float, psi=None) -> TestFunction:
    """Test function centered at the orbifold point with ``H`` the regular term of ``psi``."""
    if geom.kind is not Kind.LEBRUN_COMPACT:
        raise ValueError("test functions are built on a LeBrun compactification")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if psi is None:
        from .asymptotics import green_function_radial

        psi = green_function_radial(geom)
    H = psi.regular_term_s if hasattr(psi, "regular_term_s") else float(psi)
    return TestFunction(float(lam), float(H))


test_function.__test__ = False


@dataclass
class EnergyExpansion:
    lambdas: np.ndarray
    values: np.ndarray
    limit: float
    coefficient: float
    order: float
    fit_r2: float
    fitted: np.ndarray = field(default=None)
    r2_min: float = 0.99

    @property
    def good_fit(self) -> bool:
        """The pure ``1/lam^2`` model explains the data (R^2 at least ``r2_min``)."""
        return self.fit_r2 >= self.r2_min

    @property
    def slope_sign(self) -> int:
        return int(np.sign(self.coefficient))

    def to_rows(self):
        return list(zip(self.lambdas, self.values, self.fitted))

    def to_csv(self, path=None) -> str:
        header = ("lambda", "J", "fitted")
        if path is not None:
            _io.write_csv(path, header, self.to_rows())
        return _io.csv_text(header, self.to_rows())

    def to_dict(self) -> dict:
        return {
            "lambda": self.lambdas,
            "J": self.values,
            "limit": self.limit,
            "coefficient": self.coefficient,
            "slope_sign": self.slope_sign,
            "order": self.order,
            "fit_r2": self.fit_r2,
            "good_fit": self.good_fit,
        }


def fit_inverse_square(lambdas, values, r2_min: float = 0.99) -> EnergyExpansion:
    """Least squares ``J = J_inf + b / lam^2``, plus a free-order fit ``J_inf + b lam^-q``.

    A poor ``1/lam^2`` fit is reported through ``good_fit``, not raised:
    when the ``1/lam^2`` coefficient vanishes the data decay faster.
    """
    lam = np.asarray(lambdas, dtype=float)
    J = np.asarray(values, dtype=float)
    if len(lam) < 4 or np.any(np.diff(lam) <= 0):
        raise ValueError("need at least four increasing lambda values")
    X = np.column_stack([np.ones_like(lam), lam**-2])
    (Jinf, b), *_ = np.linalg.lstsq(X, J, rcond=None)
    fitted = X @ np.array([Jinf, b])
    ss_res = float(np.sum((J - fitted) ** 2))
    ss_tot = float(np.sum((J - J.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    order = math.nan
    if ss_tot > 0:
        try:
            popt, _ = curve_fit(lambda l, a, c, q: a + c * l ** (-q), lam, J, p0=(Jinf, b, 2.0), maxfev=20000)
            order = float(popt[2])
        except RuntimeError:
            pass
    return EnergyExpansion(lam, J, float(Jinf), float(b), order, r2, fitted, r2_min)


def energy_expansion_check(geom: RadialGeometry, K: KFamily, lambdas, psi=None, p: float = 3.0) -> EnergyExpansion:
    """``J(phi_lam)`` over ``lambdas`` with the ``1/lam^2`` fit."""
    if geom.kind is not Kind.LEBRUN_COMPACT:
        raise ValueError("the expansion check runs on a LeBrun compactification")
    geom = RadialGeometry(Kind.LEBRUN_COMPACT, geom.n, Coordinate.S)
    if psi is None:
        from .asymptotics import green_function_radial

        psi = green_function_radial(geom)
    vals = [energy_J(test_function(geom, lam, psi), K, p, geom).value for lam in lambdas]
    return fit_inverse_square(lambdas, vals)
