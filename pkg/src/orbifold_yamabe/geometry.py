"""Closed-form cohomogeneity-one backgrounds.

Three radial geometries are supported, each written as

    g = A(x) dx^2 + B(x) (sigma_1^2 + sigma_2^2) + C(x) sigma_3^2

with ``{sigma_i}`` the left-invariant coframe on S^3 normalized so that the
flat metric is ``d rho^2 + rho^2 (sigma_1^2 + sigma_2^2 + sigma_3^2)`` and the
round unit S^3 has volume ``2 pi^2``:

* ``LebrunALE``: LeBrun's scalar-flat ALE metric on O(-n),
  ``A = (1+r^2)/(n+r^2)``, ``B = 1+r^2``, ``C = r^2 (n+r^2)/(1+r^2)`` in the
  coordinate ``r = hat_r``.
* ``LebrunCompact``: the orbifold compactification ``(n+r^2)^-2`` times the
  above, with orbifold point (group Z/n) at ``r = inf``.
* ``Football``: the round S^4 as ``d theta^2 + sin^2(theta) g_{S^3}``, with the
  group only entering volume normalizations.

LeBrun geometries can be parametrized by ``hat_r``, ``s = 1/hat_r`` or
``t = log(n s^2 + 1)``; the Football only by ``theta``. Coefficients are always
those of ``dx^2`` in the geometry's own coordinate.

The Laplacian is the trace of the Hessian (nonpositive spectrum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import _jets
from ._jets import Jet

VOL_S3 = 2.0 * math.pi**2


class Kind(str, Enum):
    LEBRUN_ALE = "LebrunALE"
    LEBRUN_COMPACT = "LebrunCompact"
    FOOTBALL = "Football"


class Coordinate(str, Enum):
    HAT_R = "hat_r"
    S = "s"
    T = "t"
    THETA = "theta"


class Endpoint(str, Enum):
    REGULAR_CENTER = "regular-center"
    ORBIFOLD_POINT = "orbifold-point"
    ALE_END = "ALE-end"


class DomainError(ValueError):
    """A radial value lies outside (or too close to the edge of) the domain."""


@dataclass(frozen=True)
class MetricSample:
    radial_value: float
    coeff_radial: float
    coeff_s12: float
    coeff_s3: float


_LEBRUN_COORDS = (Coordinate.HAT_R, Coordinate.S, Coordinate.T)


@dataclass(frozen=True)
class RadialGeometry:
    kind: Kind
    n_or_gamma: int
    coordinate: Coordinate | None = None

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.n_or_gamma) != self.n_or_gamma or self.n_or_gamma < 1:
            raise ValueError(f"n_or_gamma must be a positive integer, got {self.n_or_gamma!r}")
        object.__setattr__(self, "n_or_gamma", int(self.n_or_gamma))
        coord = self.coordinate
        if coord is None:
            coord = Coordinate.THETA if kind is Kind.FOOTBALL else Coordinate.HAT_R
        coord = Coordinate(coord)
        if kind is Kind.FOOTBALL and coord is not Coordinate.THETA:
            raise ValueError("Football geometry only supports the theta coordinate")
        if kind is not Kind.FOOTBALL and coord not in _LEBRUN_COORDS:
            raise ValueError(f"LeBrun geometries do not support coordinate {coord.value}")
        object.__setattr__(self, "coordinate", coord)

    # constructors -----------------------------------------------------------
    @classmethod
    def lebrun_ale(cls, n: int, coordinate: str | Coordinate = Coordinate.HAT_R):
        return cls(Kind.LEBRUN_ALE, n, Coordinate(coordinate))

    @classmethod
    def lebrun_compact(cls, n: int, coordinate: str | Coordinate = Coordinate.S):
        return cls(Kind.LEBRUN_COMPACT, n, Coordinate(coordinate))

    @classmethod
    def football(cls, gamma: int = 1):
        return cls(Kind.FOOTBALL, gamma, Coordinate.THETA)

    def with_coordinate(self, coordinate) -> "RadialGeometry":
        return replace(self, coordinate=Coordinate(coordinate))

    # basic data -------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.n_or_gamma

    @property
    def is_lebrun(self) -> bool:
        return self.kind is not Kind.FOOTBALL

    @property
    def group_order(self) -> int:
        """Order of the orbifold group at the singular point(s) / ALE end."""
        return self.n_or_gamma

    @property
    def slice_volume(self) -> float:
        """Volume of the unit-radius orbit ``S^3/Gamma`` in the sigma normalization."""
        return VOL_S3 / self.group_order

    @property
    def domain(self) -> tuple[float, float]:
        if self.kind is Kind.FOOTBALL:
            return (0.0, math.pi)
        return (0.0, math.inf)

    @property
    def endpoints(self) -> tuple[Endpoint, Endpoint]:
        if self.kind is Kind.FOOTBALL:
            return (Endpoint.ORBIFOLD_POINT, Endpoint.ORBIFOLD_POINT)
        far = Endpoint.ALE_END if self.kind is Kind.LEBRUN_ALE else Endpoint.ORBIFOLD_POINT
        if self.coordinate is Coordinate.HAT_R:
            return (Endpoint.REGULAR_CENTER, far)
        return (far, Endpoint.REGULAR_CENTER)

    def check_interior(self, x, margin: float = 0.0):
        lo, hi = self.domain
        x = np.asarray(x, dtype=float)
        ends = self.endpoints
        if np.any(np.isnan(x)):
            raise DomainError("radial value is NaN")
        if np.any(x - margin <= lo):
            raise DomainError(
                f"{self.coordinate.value}={np.min(x)!r} is not inside the domain: "
                f"too close to the {ends[0].value} endpoint at {lo}"
            )
        if np.any(x + margin >= hi):
            raise DomainError(
                f"{self.coordinate.value}={np.max(x)!r} is not inside the domain: "
                f"too close to the {ends[1].value} endpoint at {hi}"
            )
        return x


def lebrun_ale(n, coordinate=Coordinate.HAT_R) -> RadialGeometry:
    return RadialGeometry.lebrun_ale(n, coordinate)


def lebrun_compact(n, coordinate=Coordinate.S) -> RadialGeometry:
    return RadialGeometry.lebrun_compact(n, coordinate)


def football(gamma=1) -> RadialGeometry:
    return RadialGeometry.football(gamma)


# ---------------------------------------------------------------------------
# coordinates


def _to_s(n, value, source: Coordinate):
    with np.errstate(divide="ignore", over="ignore"):
        if source is Coordinate.S:
            return value
        if source is Coordinate.HAT_R:
            return 1.0 / value
        return np.sqrt(np.expm1(value) / n)


def _from_s(n, s, target: Coordinate):
    with np.errstate(divide="ignore", over="ignore"):
        if target is Coordinate.S:
            return s
        if target is Coordinate.HAT_R:
            return 1.0 / s
        return np.log1p(n * s * s)


def coord_transform(geom: RadialGeometry, value, source, target):
    """Map a radial value between the ``hat_r``, ``s`` and ``t`` coordinates.

    ``s = 1/hat_r`` and ``t = log(n s^2 + 1)``; endpoints (0 and inf) map to
    endpoints. Values outside ``[0, inf]`` raise :class:`DomainError`.
    """
    source, target = Coordinate(source), Coordinate(target)
    scalar = np.ndim(value) == 0
    value = np.asarray(value, dtype=float)
    if source == target:
        return float(value) if scalar else value
    if not geom.is_lebrun:
        raise ValueError("coordinate changes are only defined for LeBrun geometries")
    for c in (source, target):
        if c not in _LEBRUN_COORDS:
            raise ValueError(f"unknown LeBrun coordinate {c.value}")
    if np.any(np.isnan(value)) or np.any(value < 0):
        raise DomainError(f"{source.value} must lie in [0, inf], got {value!r}")
    out = _from_s(geom.n, _to_s(geom.n, value, source), target)
    return float(out) if scalar else out


# ---------------------------------------------------------------------------
# coefficient jets


def _coefficient_jets(geom: RadialGeometry, x, order: int = 3):
    """(A, B, C) as jets in the geometry coordinate; A has one order less."""
    X = Jet.variable(x, order)
    n = geom.n
    if geom.kind is Kind.FOOTBALL:
        sn, _ = _jets.sin_cos(X)
        B = sn * sn
        return Jet.constant(1.0, X.derivative()), B, B
    if geom.coordinate is Coordinate.HAT_R:
        r2 = X * X
        A = (1.0 + r2) / (n + r2)
        B = 1.0 + r2
        C = r2 * (n + r2) / (1.0 + r2)
        if geom.kind is Kind.LEBRUN_COMPACT:
            w = (n + r2) ** -2
            A, B, C = A * w, B * w, C * w
        return Jet(A.c[:-1]), B, C
    if geom.coordinate is Coordinate.S:
        S = X
    else:
        S = _jets.sqrt(_jets.expm1(X) / n)
    s2 = S * S
    if geom.kind is Kind.LEBRUN_COMPACT:
        A = (1.0 + s2) / (1.0 + n * s2) ** 3
        B = s2 * (s2 + 1.0) / (n * s2 + 1.0) ** 2
        C = s2 / ((n * s2 + 1.0) * (s2 + 1.0))
    else:
        A = (s2 + 1.0) / ((n * s2 + 1.0) * s2 * s2)
        B = (s2 + 1.0) / s2
        C = (n * s2 + 1.0) / (s2 * (s2 + 1.0))
    dS = S.derivative()
    A = Jet(A.c[:-1]) * dS * dS
    return A, B, C


def metric_coeffs(geom: RadialGeometry, x) -> MetricSample:
    x = geom.check_interior(x)
    A, B, C = _coefficient_jets(geom, x, order=1)
    return MetricSample(
        radial_value=_unwrap(x),
        coeff_radial=_unwrap(A.value),
        coeff_s12=_unwrap(B.value),
        coeff_s3=_unwrap(C.value),
    )


def _unwrap(a):
    a = np.asarray(a, dtype=float)
    return float(a) if a.ndim == 0 else a


# ---------------------------------------------------------------------------
# curvature


def frame_curvature(A, A1, B, B1, B2, C, C1, C2):
    """Scalar curvature of ``A dx^2 + B(s1^2+s2^2) + C s3^2`` from coefficient derivatives.

    Orthonormal-frame form: ``R = R_slice - 2 dH/dtau - H^2 - |II|^2`` with
    ``d tau = sqrt(A) dx``, the Berger-sphere curvature ``8/B - 2C/B^2`` of
    the orbit, mean curvature ``H`` and second fundamental form ``II``.
    """
    sqA = np.sqrt(A)
    lb = B1 / B
    lc = C1 / (2.0 * C)
    H = (lb + lc) / sqA
    dH = ((B2 / B - lb * lb + C2 / (2.0 * C) - 2.0 * lc * lc) / sqA - (lb + lc) * A1 / (2.0 * A * sqA)) / sqA
    II2 = (0.5 * lb * lb + lc * lc) / A
    return 8.0 / B - 2.0 * C / (B * B) - 2.0 * dH - H * H - II2


def frame_scalar_curvature(geom: RadialGeometry, x):
    """Scalar curvature from the frame formula with exact (Taylor-mode) derivatives."""
    x = geom.check_interior(x)
    A, B, C = _coefficient_jets(geom, x, order=2)
    R = frame_curvature(A.value, A.d(1), B.value, B.d(1), B.d(2), C.value, C.d(1), C.d(2))
    return _unwrap(R)


def scalar_curvature(geom: RadialGeometry, x):
    """Scalar curvature.

    Closed form ``24 n (n + hat_r^2)/(1 + hat_r^2)`` for LebrunCompact (valid on
    the closed interval, including the orbifold point and the P^1), 12 for the
    Football, and the frame formula for LebrunALE.
    """
    if geom.kind is Kind.LEBRUN_ALE:
        return frame_scalar_curvature(geom, x)
    x = np.asarray(x, dtype=float)
    lo, hi = geom.domain
    if np.any(np.isnan(x)) or np.any(x < lo) or np.any(x > hi):
        raise DomainError(f"{geom.coordinate.value}={x!r} outside [{lo}, {hi}]")
    if geom.kind is Kind.FOOTBALL:
        return _unwrap(np.full_like(x, 12.0))
    n = geom.n
    s = coord_transform(geom, x, geom.coordinate, Coordinate.S)
    s = np.asarray(s, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        R = np.where(np.isinf(s), 24.0 * n * n, 24.0 * n * (n * s * s + 1.0) / (s * s + 1.0))
    return _unwrap(R)


_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
# sixth order, for the curvature (the cancellation near the regular center needs the larger step)
_D1_6 = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0
_D2_6 = np.array([2.0, -27.0, 270.0, -490.0, 270.0, -27.0, 2.0]) / 180.0


def _adaptive_step(geom: RadialGeometry, x: float, step: float) -> float:
    lo, hi = geom.domain
    return step * min(x - lo, hi - x)


def numeric_scalar_curvature(geom: RadialGeometry, x: float, step: float = 5e-3) -> float:
    """Scalar curvature from 6th-order central differences of sampled coefficients.

    The stencil spacing is ``step`` times the distance to the nearest
    endpoint, so the coefficients are resolved on their natural scale. The
    error is ``O(step^6)`` truncation plus ``O(eps/step^2)`` rounding, and the
    rounding is amplified by cancellation toward the regular center. The
    default keeps both below 2e-7 relative on the LeBrun family in ``hat_r``
    and ``s``, and in ``t`` up to ``t ~ 8`` (beyond that the regular center is
    squeezed into coefficients of size ``e^-t`` and rounding takes over).
    Only coefficient values (never derivatives) are used.
    """
    x = float(x)
    if not 0.0 < step < 0.25:
        raise ValueError("step must lie in (0, 0.25)")
    geom.check_interior(x)
    h = _adaptive_step(geom, x, step)
    nodes = x + h * np.arange(-3, 4)
    m = metric_coeffs(geom, nodes)
    A, B, C = m.coeff_radial, m.coeff_s12, m.coeff_s3
    d1 = lambda f: float(_D1_6 @ f) / h  # noqa: E731
    d2 = lambda f: float(_D2_6 @ f) / (h * h)  # noqa: E731
    return float(frame_curvature(A[3], d1(A), B[3], d1(B), d2(B), C[3], d1(C), d2(C)))


# ---------------------------------------------------------------------------
# volume and Laplacian


def volume_density(geom: RadialGeometry, x):
    """``sqrt(A) B sqrt(C)``: volume form is this times ``dx`` times the S^3/Gamma form.

    Integrating a radial function over the space means multiplying by
    ``geom.slice_volume`` (= 2 pi^2 / |Gamma|) after the ``dx`` integral.
    """
    x = geom.check_interior(x)
    A, B, C = _coefficient_jets(geom, x, order=1)
    return _unwrap(np.sqrt(A.value) * B.value * np.sqrt(C.value))


def laplacian_coefficients(geom: RadialGeometry, x):
    """``(p, q)`` with ``Delta u = p u' + q u''`` for radial ``u`` (exact derivatives)."""
    x = geom.check_interior(x)
    A, B, C = _coefficient_jets(geom, x, order=2)
    J = _jets.sqrt(A) * Jet(B.c[:-1]) * _jets.sqrt(Jet(C.c[:-1]))
    F = J / A
    return _unwrap(F.d(1) / J.value), _unwrap(1.0 / A.value)


def _fornberg_weights(z: float, nodes: np.ndarray, m: int) -> np.ndarray:
    n = len(nodes)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, nodes[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, nodes[i] - z
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def radial_laplacian(geom: RadialGeometry, u, x: float, step: float = 1e-3) -> float:
    """Laplacian of a radial function at ``x``.

    ``u`` is either a callable (differentiated with a 5-point central stencil
    whose spacing is ``step`` times the distance to the nearest endpoint) or a pair ``(grid, values)`` of samples,
    differentiated with 5-point Fornberg weights on the nearest nodes.
    """
    x = float(x)
    p, q = laplacian_coefficients(geom, x)
    if callable(u):
        geom.check_interior(x)
        h = _adaptive_step(geom, x, step)
        f = np.array([u(x + k * h) for k in range(-2, 3)], dtype=float)
        du = float(_D1 @ f) / h
        d2u = float(_D2 @ f) / (h * h)
    else:
        grid, values = (np.asarray(a, dtype=float) for a in u)
        i = int(np.argmin(np.abs(grid - x)))
        lo, hi = i - 2, i + 3
        if lo < 0 or hi > len(grid):
            raise DomainError(f"stencil around {x} runs past the sample grid")
        idx = np.arange(lo, hi)
        w = _fornberg_weights(x, grid[idx], 2)
        du = float(w[:, 1] @ values[idx])
        d2u = float(w[:, 2] @ values[idx])
    return p * du + q * d2u


def delta_t_closed_form(n: int, t) -> np.ndarray:
    """Coefficient of ``d^2/dt^2`` in the LeBrun ALE Laplacian in the t-coordinate."""
    e = np.exp(-np.asarray(t, dtype=float))
    return 4.0 * (-np.expm1(-np.asarray(t, dtype=float))) ** 3 / (e * (1.0 + (n - 1) * e))
