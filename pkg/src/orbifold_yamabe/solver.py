"""Radial prescribed scalar curvature problems by shooting.

The compact LeBrun problem ``-Delta u + (R/6) u = K u^p`` is solved through
``v = u / (n + s^-2)`` written in ``t = log(n s^2 + 1)``. Conformal covariance
and scalar-flatness of the ALE metric reduce it to

    v'' = -K(t) e^-t (1 + (n-1) e^-t) / (4 n^3) * u^p,   u = n v / (1 - e^-t),

which at ``p = 3`` is ``v'' = -K w_n v^3`` with
``w_n = e^-t (1 + (n-1) e^-t) / (4 (1 - e^-t)^3)``. Shots start at the
orbifold point (``t = 0``) with ``v ~ slope * t`` (so ``u(q) = n * slope``) and
run to ``t = T``; the regular-center condition is ``v'(T) = 0``.

The Football (round S^4) problem ``u'' + 3 cot(theta) u' = 2u - K u^p`` is
shot from ``theta = 0`` on ``u(0)`` toward ``theta = pi``.

Positive parts ``max(u, 0)^p`` keep shots defined after a zero crossing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import _io
from .geometry import Coordinate, Kind, RadialGeometry
from .kfamily import KFamily

log = logging.getLogger(__name__)

FAR_END_T = 25.0
POLE_GAP = 1e-3
SCAN_RTOL = 1e-10
FINAL_RTOL = 1e-12
RESIDUAL_TOL = 1e-8
GROWTH_THRESHOLD = 10.0
DEDUP_TOL = 1e-6
SIGN_FLOOR = 1e-13  # |F| below this times the parameter is roundoff from the slope cancellation

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class NotFound(RuntimeError):
    """No accepted solution; carries the slope-scan evidence."""

    def __init__(self, message: str, scan: "ScanResult | None" = None, rejected=()):
        super().__init__(message)
        self.scan = scan
        self.rejected = list(rejected)


class WallLabel(str, Enum):
    PLUS = "Plus"
    ZERO = "Zero"
    MINUS = "Minus"


@dataclass(frozen=True)
class WallClass:
    label: WallLabel
    margin: float


def classify_wall(K: KFamily, n: int, tol: float = 1e-12) -> WallClass:
    """Side of the wall ``K''(0)/K(0) = n - 2`` (``Delta K = 4 K''`` at the orbifold point)."""
    margin = K.d2_at_zero / K.at_zero - (n - 2)
    if abs(margin) <= tol:
        return WallClass(WallLabel.ZERO, margin)
    return WallClass(WallLabel.PLUS if margin > 0 else WallLabel.MINUS, margin)


# ---------------------------------------------------------------------------
# right-hand sides


def _check_p(p):
    if not 1.0 < p <= 3.0:
        raise ValueError(f"exponent p must lie in (1, 3], got {p}")


def lebrun_weight(n: int, t):
    """``w_n(t) = e^-t (1 + (n-1) e^-t) / (4 (1 - e^-t)^3)``."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-t)
    return e * (1.0 + (n - 1) * e) / (4.0 * (-np.expm1(-t)) ** 3)


def s_of_t(n: int, t):
    return np.sqrt(np.expm1(np.asarray(t, dtype=float)) / n)


def u_from_v(n: int, t, v):
    """Undo ``v = u / (n + s^-2)``; ``n + s^-2 = n / (1 - e^-t)``."""
    return n * np.asarray(v) / (-np.expm1(-np.asarray(t, dtype=float)))


def ode_rhs(geom: RadialGeometry, K: KFamily, p: float, x, v, dv):
    """Second derivative of the shooting unknown.

    LebrunALE (``p = 3`` only): ``v'' = -K w_n v^p`` in ``t``.
    LebrunCompact: the reduced form above, in ``t``.
    Football: ``u'' = -3 cot(theta) u' + 2u - K u^p`` in ``theta``.
    """
    _check_p(p)
    x = np.asarray(x, dtype=float)
    if geom.kind is Kind.FOOTBALL:
        if np.any((x <= 0) | (x >= math.pi)):
            raise ValueError("theta must lie strictly between the poles")
        return -3.0 * np.cos(x) / np.sin(x) * dv + 2.0 * v - K.value(x) * np.maximum(v, 0.0) ** p
    if np.any(x <= 0):
        raise ValueError("t must be positive (t = 0 is the orbifold point)")
    n = geom.n
    Kt = K.value(s_of_t(n, x))
    if geom.kind is Kind.LEBRUN_ALE:
        if p != 3.0:
            raise ValueError("the ALE form is the critical equation (p = 3)")
        return -Kt * lebrun_weight(n, x) * np.maximum(v, 0.0) ** p
    e = np.exp(-x)
    u = u_from_v(n, x, np.maximum(v, 0.0))
    return -Kt * e * (1.0 + (n - 1) * e) / (4.0 * n**3) * u**p


def _lebrun_system(n: int, K: KFamily, p: float):
    c = 1.0 / (4.0 * n**3)

    def rhs(t, y):
        m = y.shape[0] // 2
        e = math.exp(-t)
        Kt = K.value(math.sqrt(math.expm1(t) / n))
        u = n * np.maximum(y[:m], 0.0) / (-math.expm1(-t))
        return np.concatenate([y[m:], -Kt * c * e * (1.0 + (n - 1) * e) * u**p])

    return rhs


def _football_system(K: KFamily, p: float):
    def rhs(th, y):
        m = y.shape[0] // 2
        u, du = y[:m], y[m:]
        f = -3.0 * math.cos(th) / math.sin(th) * du + 2.0 * u - K.value(th) * np.maximum(u, 0.0) ** p
        return np.concatenate([du, f])

    return rhs


# ---------------------------------------------------------------------------
# series starts


def _lebrun_start(n, K, p, slope):
    slope = np.asarray(slope, dtype=float)
    k0 = K.at_zero
    t0 = 1e-6 * min(1.0, 1.0 / (k0 * (n * float(np.max(slope))) ** (p - 1.0)))
    a2 = -k0 * n ** (p - 2.0) * slope**p / 8.0
    return t0, slope * t0 + a2 * t0 * t0, slope + 2.0 * a2 * t0, a2


def _football_start(K, p, a):
    a = np.asarray(a, dtype=float)
    k0 = K.at_zero
    th0 = 1e-4 * min(1.0, 1.0 / math.sqrt(max(1.0, k0 * float(np.max(a)) ** (p - 1.0))))
    c2 = (2.0 * a - k0 * np.maximum(a, 0.0) ** p) / 8.0
    return th0, a + c2 * th0 * th0, 2.0 * c2 * th0, c2


# ---------------------------------------------------------------------------
# shooting


@dataclass
class ScanResult:
    """Terminal diagnostics for a batch of shots."""

    parameters: np.ndarray
    terminal_value: np.ndarray
    terminal_slope: np.ndarray
    shooting_function: np.ndarray
    crossed: np.ndarray
    crossing: np.ndarray
    diverged: np.ndarray

    @property
    def brackets(self) -> list[tuple[int, int]]:
        F = self.shooting_function
        return [(i, i + 1) for i in range(len(F) - 1) if np.isfinite(F[i]) and np.isfinite(F[i + 1])
                and F[i] * F[i + 1] < 0]

    @property
    def exact_roots(self) -> list[int]:
        return [i for i, f in enumerate(self.shooting_function) if f == 0.0]

    def terminations(self) -> list[str]:
        out = []
        for c, d, F in zip(self.crossed, self.diverged, self.shooting_function):
            out.append("zero-crossing" if c else "divergence" if d else "regular" if F == 0 else "undetermined")
        return out

    def to_rows(self):
        return [
            (a, v, dv, F, bool(c), x, bool(d))
            for a, v, dv, F, c, x, d in zip(self.parameters, self.terminal_value, self.terminal_slope,
                                            self.shooting_function, self.crossed, self.crossing, self.diverged)
        ]

    def to_dict(self) -> dict:
        return {
            "parameters": self.parameters,
            "shooting_function": self.shooting_function,
            "crossed": self.crossed,
            "diverged": self.diverged,
            "crossing": self.crossing,
            "brackets": len(self.brackets),
        }


def _far_end(geom: RadialGeometry, T: float) -> float:
    return math.pi - POLE_GAP if geom.kind is Kind.FOOTBALL else T


def _integrate(geom, K, p, params, T=FAR_END_T, rtol=SCAN_RTOL, dense=False):
    params = np.atleast_1d(np.asarray(params, dtype=float))
    if np.any(params <= 0):
        raise ValueError("shooting parameters must be positive")
    if geom.kind is Kind.FOOTBALL:
        x0, y0, dy0, _ = _football_start(K, p, params)
        rhs = _football_system(K, p)
    else:
        if geom.kind is Kind.LEBRUN_ALE and p != 3.0:
            raise ValueError("the ALE form is the critical equation (p = 3)")
        x0, y0, dy0, _ = _lebrun_start(geom.n, K, p, params)
        rhs = _lebrun_system(geom.n, K, p)
    end = _far_end(geom, T)
    scale = float(np.max(np.abs(np.concatenate([y0, dy0]))))
    sol = solve_ivp(rhs, (x0, end), np.concatenate([y0, dy0]), method="DOP853", rtol=rtol,
                    atol=1e-14 * max(scale, 1.0), dense_output=dense)
    return sol, x0


def _terminal(geom, K, p, x_end, y, dy):
    """Shooting function at the far end (zero for regular solutions)."""
    if geom.kind is Kind.FOOTBALL:
        gap = math.pi - x_end
        # subtract the regular part u' ~ -(pi - theta) (2u - K u^p)/4 near the pole
        reg = gap * (2.0 * y - K.value(x_end) * np.maximum(y, 0.0) ** p) / 4.0
        return math.sin(x_end) ** 3 * (dy + reg)
    return dy


def scan(geom: RadialGeometry, K: KFamily, p: float, parameters, T: float = FAR_END_T,
         rtol: float = SCAN_RTOL) -> ScanResult:
    """Shoot a batch of parameters (slopes at the orbifold point, or ``u(0)``) together."""
    _check_p(p)
    params = np.atleast_1d(np.asarray(parameters, dtype=float))
    sol, _ = _integrate(geom, K, p, params, T, rtol)
    m = len(params)
    if sol.status != 0:
        bad = np.full(m, np.nan)
        return ScanResult(params, bad, bad, bad, np.zeros(m, bool), bad, np.ones(m, bool))
    y, dy = sol.y[:m, -1], sol.y[m:, -1]
    x_end = sol.t[-1]
    F = _terminal(geom, K, p, x_end, y, dy)
    crossed = np.any(sol.y[:m] < 0, axis=1)
    crossing = np.full(m, np.nan)
    for i in np.nonzero(crossed)[0]:
        j = int(np.argmax(sol.y[i] < 0))
        a, b = sol.t[j - 1], sol.t[j]
        ya, yb = sol.y[i, j - 1], sol.y[i, j]
        crossing[i] = a + (b - a) * ya / (ya - yb)
    F, undetermined = _confirm_sign_changes(geom, K, p, params, F, crossed, T)
    nonfinite = ~np.isfinite(F) & ~undetermined
    if geom.kind is Kind.FOOTBALL:
        diverged = ~crossed & (nonfinite | (np.abs(F) > 0))
    else:
        # slope still positive at the far end: u grows like t, a log singularity at the P^1
        diverged = ~crossed & (nonfinite | (F > 0))
    return ScanResult(params, y, dy, F, crossed, crossing, diverged)


def _confirm_sign_changes(geom, K, p, params, F, crossed, T):
    """Re-shoot both ends of every batch sign change on its own at the final tolerance.

    The batch shares one step-size sequence; at large slopes the terminal
    value is a small remainder of a large cancellation and its sign can be
    noise. Individual shots settle it; a value still inside the roundoff
    floor is reported as undetermined (NaN) rather than as a sign.
    """
    F = F.copy()
    done = np.zeros(len(F), bool)
    undetermined = np.zeros(len(F), bool)
    for _ in range(len(F)):
        idx = set()
        for i in range(len(F) - 1):
            if np.isfinite(F[i]) and np.isfinite(F[i + 1]) and F[i] * F[i + 1] < 0:
                idx.update(j for j in (i, i + 1) if not done[j] and not crossed[j])
        if not idx:
            break
        for j in sorted(idx):
            sol, _ = _integrate(geom, K, p, [params[j]], T, FINAL_RTOL)
            F[j] = math.nan
            if sol.status == 0:
                val = _terminal(geom, K, p, sol.t[-1], sol.y[:1, -1], sol.y[1:, -1])[0]
                if abs(val) > SIGN_FLOOR * params[j]:
                    F[j] = val
                else:
                    undetermined[j] = True
            done[j] = True
    return F, undetermined


@dataclass
class Shot:
    parameter: float
    terminal_value: float
    terminal_slope: float
    shooting_function: float
    crossing: float | None
    diverged: bool
    x: np.ndarray
    y: np.ndarray
    dy: np.ndarray


def shoot(geom: RadialGeometry, K: KFamily, p: float, slope: float, T: float = FAR_END_T,
          rtol: float = SCAN_RTOL) -> Shot:
    """One shot with its trajectory and terminal diagnostics."""
    _check_p(p)
    if slope <= 0:
        raise ValueError("slope must be positive")
    sol, _ = _integrate(geom, K, p, [slope], T, rtol)
    if sol.status != 0:
        return Shot(slope, math.nan, math.nan, math.nan, None, True, sol.t, sol.y[0], sol.y[1])
    y, dy = sol.y[0], sol.y[1]
    F = float(_terminal(geom, K, p, sol.t[-1], y[-1:], dy[-1:])[0])
    crossing = None
    if np.any(y < 0):
        j = int(np.argmax(y < 0))
        crossing = float(sol.t[j - 1] + (sol.t[j] - sol.t[j - 1]) * y[j - 1] / (y[j - 1] - y[j]))
    diverged = crossing is None and (not math.isfinite(F) or (F > 0 if geom.is_lebrun else F != 0))
    return Shot(float(slope), float(y[-1]), float(dy[-1]), F, crossing, bool(diverged), sol.t, y, dy)


# ---------------------------------------------------------------------------
# solutions


@dataclass
class RadialSolution:
    geom: RadialGeometry
    p: float
    grid: np.ndarray
    u_values: np.ndarray
    u_derivs: np.ndarray
    max_u: float
    residual_sup: float
    shooting_parameter: float
    K: KFamily = None
    v_values: np.ndarray | None = None
    argmax: float = math.nan
    seam_jump: float = 0.0
    classification: str = "accepted"
    _dense: Callable | None = field(default=None, repr=False)
    _series: tuple | None = field(default=None, repr=False)
    _node_residuals: np.ndarray | None = field(default=None, repr=False)

    @property
    def coordinate(self) -> Coordinate:
        return Coordinate.THETA if self.geom.kind is Kind.FOOTBALL else Coordinate.T

    @property
    def s_values(self) -> np.ndarray:
        if self.geom.kind is Kind.FOOTBALL:
            return self.grid.copy()
        return s_of_t(self.geom.n, self.grid)

    @property
    def residual_scale(self) -> float:
        return 1.0 + self.max_u**self.p

    @property
    def accepted(self) -> bool:
        return self.residual_sup <= RESIDUAL_TOL * self.residual_scale and bool(np.all(self.u_values > 0))

    def _state(self, x):
        """``(y, y')`` of the integrated unknown; the series start covers ``x < grid[0]``."""
        x = np.asarray(x, dtype=float)
        lo, hi = self.grid[0], self.grid[-1]
        if np.any(x > hi * (1 + 1e-12)) or np.any(x < 0):
            raise ValueError(f"coordinate outside the solved range [0, {hi}]")
        y, dy = self._dense(np.clip(x, lo, hi))
        if self._series is not None and np.any(x < lo):
            c0, c1, c2 = self._series
            below = x < lo
            y = np.where(below, c0 + c1 * x + c2 * x * x, y)
            dy = np.where(below, c1 + 2.0 * c2 * x, dy)
        return y, dy

    def u(self, x):
        """``u`` at coordinate values (``t`` or ``theta``)."""
        x = np.asarray(x, dtype=float)
        y, _ = self._state(x)
        if self.geom.kind is Kind.FOOTBALL:
            return y
        E = -np.expm1(-x)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = self.geom.n * y / E
        return np.where(x > 0, out, self.geom.n * self.shooting_parameter)

    def du(self, x):
        """``du/dt`` (or ``du/dtheta``)."""
        x = np.asarray(x, dtype=float)
        y, dy = self._state(x)
        if self.geom.kind is Kind.FOOTBALL:
            return dy
        E = -np.expm1(-x)
        return self.geom.n * (dy * E - y * np.exp(-x)) / E**2

    def v(self, x):
        return self._state(x)[0]

    def dv(self, x):
        return self._state(x)[1]

    def u_of_s(self, s):
        """``u`` as a function of the distance-like coordinate ``s`` (``theta`` on the Football)."""
        s = np.asarray(s, dtype=float)
        if self.geom.kind is Kind.FOOTBALL:
            return self.u(s)
        return self.u(np.log1p(self.geom.n * s * s))

    def du_of_s(self, s):
        s = np.asarray(s, dtype=float)
        if self.geom.kind is Kind.FOOTBALL:
            return self.du(s)
        n = self.geom.n
        return self.du(np.log1p(n * s * s)) * 2.0 * n * s / (1.0 + n * s * s)

    def metadata(self) -> dict:
        return {
            "geometry": {"kind": self.geom.kind.value, "n_or_gamma": self.geom.n_or_gamma},
            "K": self.K.to_dict() if self.K is not None else None,
            "p": self.p,
            "slope": self.shooting_parameter,
            "max_u": self.max_u,
            "argmax": self.argmax,
            "residual_sup": self.residual_sup,
            "residual_scale": self.residual_scale,
            "seam_jump": self.seam_jump,
            "classification": self.classification,
        }

    def csv_rows(self):
        res = self._node_residuals if self._node_residuals is not None else np.zeros_like(self.grid)
        name = self.coordinate.value
        v = self.v_values if self.v_values is not None else self.u_values
        s = self.s_values
        return [(name, x, si, u, vi, r) for x, si, u, vi, r in zip(self.grid, s, self.u_values, v, res)]

    def to_csv(self, path=None) -> str:
        header = ("coordinate", "t", "s", "u", "v", "residual")
        if path is not None:
            _io.write_csv(path, header, self.csv_rows())
        return _io.csv_text(header, self.csv_rows())

    def to_json(self, path=None) -> str:
        if path is not None:
            _io.write_json(path, self.metadata())
        return _io.json_text(self.metadata())


def _cell_residuals(rhs2, dense, nodes):
    """Per-cell ``|dy' - int f| / h`` and ``|dy - int y'| / h`` with Gauss-Legendre."""
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    mid, half = 0.5 * (a + b), 0.5 * h
    xq = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    Y = dense(xq)
    f = rhs2(xq, Y[0], Y[1]).reshape(len(a), -1)
    dyq = Y[1].reshape(len(a), -1)
    int_f = half * (f @ _GL_W)
    int_dy = half * (dyq @ _GL_W)
    Ya, Yb = dense(a), dense(b)
    r1 = np.abs((Yb[1] - Ya[1]) - int_f) / h
    r0 = np.abs((Yb[0] - Ya[0]) - int_dy) / h
    return np.maximum(r0, r1)


def _refine(grid):
    mid = 0.5 * (grid[:-1] + grid[1:])
    out = np.empty(2 * len(grid) - 1)
    out[0::2], out[1::2] = grid, mid
    return out


def build_solution(geom: RadialGeometry, K: KFamily, p: float, parameter: float, T: float = FAR_END_T,
                   rtol: float = FINAL_RTOL) -> RadialSolution:
    """Integrate one shot accurately and evaluate the residual contract on a 2x refined grid."""
    sol, x0 = _integrate(geom, K, p, [parameter], T, rtol, dense=True)
    if sol.status != 0:
        raise NotFound(f"integration failed: {sol.message}")
    grid = _refine(sol.t)
    dense = sol.sol
    if geom.kind is Kind.FOOTBALL:
        rhs2 = lambda x, y, dy: ode_rhs(geom, K, p, x, y, dy)  # noqa: E731
    else:
        cgeom = RadialGeometry(Kind.LEBRUN_COMPACT, geom.n, Coordinate.T)
        rhs2 = lambda x, y, dy: ode_rhs(cgeom, K, p, x, y, dy)  # noqa: E731
    cell = _cell_residuals(rhs2, dense, grid)
    node_res = np.concatenate([[cell[0]], np.maximum(cell[:-1], cell[1:]), [cell[-1]]])
    Y = dense(grid)
    if geom.kind is Kind.FOOTBALL:
        u, du = Y[0], Y[1]
        seam_x = 2.0 * x0
        c2 = (2.0 * parameter - K.at_zero * parameter**p) / 8.0
        ser = np.array([parameter + c2 * seam_x**2, 2.0 * c2 * seam_x])
        series = (float(parameter), 0.0, float(c2))
        v_vals = None
        u_origin = parameter
    else:
        n = geom.n
        E = -np.expm1(-grid)
        u = u_from_v(n, grid, Y[0])
        du = n * (Y[1] * E - Y[0] * np.exp(-grid)) / E**2
        _, _, _, a2 = _lebrun_start(n, K, p, [parameter])
        seam_x = 2.0 * x0
        ser = np.array([parameter * seam_x + a2[0] * seam_x**2, parameter + 2.0 * a2[0] * seam_x])
        series = (0.0, float(parameter), float(a2[0]))
        v_vals = Y[0]
        u_origin = n * parameter
    got = dense(seam_x)
    seam = float(np.max(np.abs(got - ser) / np.maximum(np.abs(ser), 1e-300)))
    i = int(np.argmax(u))
    max_u, argmax = float(u[i]), float(grid[i])
    if u_origin >= max_u:
        max_u, argmax = float(u_origin), 0.0
    out = RadialSolution(
        geom=geom, p=p, grid=grid, u_values=u, u_derivs=du, max_u=max_u,
        residual_sup=float(np.max(cell)), shooting_parameter=float(parameter), K=K,
        v_values=v_vals, argmax=argmax, seam_jump=seam, _dense=dense, _series=series,
        _node_residuals=node_res,
    )
    out.classification = "accepted" if out.accepted else "rejected"
    return out


def _root(geom, K, p, lo, hi, T):
    def f(a):
        sol, _ = _integrate(geom, K, p, [a], T, FINAL_RTOL)
        if sol.status != 0:
            return math.nan
        return float(_terminal(geom, K, p, sol.t[-1], sol.y[:1, -1], sol.y[1:, -1])[0])

    return brentq(f, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=200)


def default_parameters(geom: RadialGeometry, count: int = 200) -> np.ndarray:
    if geom.kind is Kind.FOOTBALL:
        return np.geomspace(1e-2, 1e2, count)
    return np.geomspace(1e-3, 1e4, count)


def _constant_guess(geom, K, p):
    """Parameter of the constant solution ``u = (2/K)^(1/(p-1))`` on the round sphere."""
    if geom.kind is not Kind.FOOTBALL:
        return None
    return (2.0 / K.at_zero) ** (1.0 / (p - 1.0))


def find_roots(geom: RadialGeometry, K: KFamily, p: float, parameters=None, T: float = FAR_END_T):
    """Scan, then refine every sign change with Brent's method. Returns (roots, scan)."""
    if parameters is None:
        parameters = default_parameters(geom)
    sc = scan(geom, K, p, parameters, T)
    roots = [float(sc.parameters[i]) for i in sc.exact_roots]
    for i, j in sc.brackets:
        roots.append(float(_root(geom, K, p, sc.parameters[i], sc.parameters[j], T)))
    return sorted(roots), sc


def solve_bvp(geom: RadialGeometry, K: KFamily, p: float, parameters=None, T: float = FAR_END_T,
              prefer: float | None = None) -> RadialSolution:
    """Positive radial solution, or :class:`NotFound` with the scan evidence.

    Among several roots the one closest (in log scale) to ``prefer`` is
    returned; without ``prefer`` the smallest accepted one.
    """
    _check_p(p)
    if geom.kind is Kind.LEBRUN_ALE:
        geom = RadialGeometry(Kind.LEBRUN_COMPACT, geom.n, Coordinate.T)
    guess = _constant_guess(geom, K, p)
    if guess is not None:
        sc = scan(geom, K, p, [guess], T)
        if abs(sc.shooting_function[0]) <= 1e-13:
            sol = build_solution(geom, K, p, guess, T)
            if sol.accepted:
                return sol
    roots, sc = find_roots(geom, K, p, parameters, T)
    if prefer is not None:
        roots.sort(key=lambda r: abs(math.log(r / prefer)))
    rejected = []
    for r in roots:
        sol = build_solution(geom, K, p, r, T)
        if sol.accepted:
            return sol
        rejected.append(sol)
    raise NotFound(
        f"no accepted solution: {len(sc.brackets)} sign changes over {len(sc.parameters)} shots",
        sc,
        rejected,
    )


def multi_start_count(geom: RadialGeometry, K: KFamily, p: float, parameters=None, T: float = FAR_END_T):
    """Number of distinct accepted solutions found from a scan of at least 100 parameters."""
    if parameters is None:
        parameters = default_parameters(geom)
    parameters = np.asarray(parameters, dtype=float)
    if len(parameters) < 100:
        raise ValueError("a multi-start scan needs at least 100 parameters")
    if geom.kind is Kind.LEBRUN_ALE:
        geom = RadialGeometry(Kind.LEBRUN_COMPACT, geom.n, Coordinate.T)
    roots, sc = find_roots(geom, K, p, parameters, T)
    found: list[RadialSolution] = []
    for r in roots:
        sol = build_solution(geom, K, p, r, T)
        if not sol.accepted:
            continue
        if any(_distance(sol, other) <= DEDUP_TOL for other in found):
            continue
        found.append(sol)
    return len(found), found, sc


def _distance(a: RadialSolution, b: RadialSolution) -> float:
    lo = max(a.grid[0], b.grid[0])
    hi = min(a.grid[-1], b.grid[-1])
    x = np.linspace(lo, hi, 2001)
    return float(np.max(np.abs(a.u(x) - b.u(x))))


# ---------------------------------------------------------------------------
# continuation in the exponent


@dataclass
class ContinuationResult:
    p_values: list
    solutions: list
    max_u: list
    argmax: list
    failures: list
    growth_threshold: float = GROWTH_THRESHOLD

    @property
    def growth_ratio(self) -> float:
        vals = [m for m in self.max_u if np.isfinite(m)]
        return vals[-1] / vals[0] if len(vals) >= 2 else math.nan

    @property
    def monotone(self) -> bool:
        vals = np.asarray(self.max_u, dtype=float)
        return bool(np.all(np.isfinite(vals)) and np.all(np.diff(vals) > 0))

    @property
    def classification(self) -> str:
        if self.monotone and self.growth_ratio > self.growth_threshold:
            return "blow-up evidence"
        if np.isfinite(self.growth_ratio) and self.growth_ratio <= self.growth_threshold and not self.failures:
            return "compact"
        return "inconclusive"

    def argmax_on_orbifold_side(self, geom: RadialGeometry) -> bool:
        """Every maximum sits in the half of the domain nearer the orbifold point (``s < 1``)."""
        half = 0.5 * math.pi if geom.kind is Kind.FOOTBALL else math.log1p(geom.n)
        return all(np.isfinite(a) and a < half for a in self.argmax)

    def to_rows(self):
        return [(p, m, a, (s.shooting_parameter if s is not None else math.nan),
                 (s.residual_sup if s is not None else math.nan))
                for p, m, a, s in zip(self.p_values, self.max_u, self.argmax, self.solutions)]

    def to_dict(self) -> dict:
        return {
            "p": self.p_values,
            "max_u": self.max_u,
            "argmax": self.argmax,
            "growth_ratio": self.growth_ratio,
            "monotone": self.monotone,
            "classification": self.classification,
            "failures": self.failures,
        }


def continuation_in_p(geom: RadialGeometry, K: KFamily, p_grid, parameters=None,
                      T: float = FAR_END_T) -> ContinuationResult:
    """Solve along an increasing exponent grid, warm-starting on the previous root."""
    p_grid = [float(p) for p in p_grid]
    if np.any(np.diff(p_grid) <= 0):
        raise ValueError("p_grid must be increasing")
    for p in p_grid:
        _check_p(p)
    sols, mx, am, failures = [], [], [], []
    prefer = None
    for p in p_grid:
        try:
            sol = solve_bvp(geom, K, p, parameters, T, prefer=prefer)
        except NotFound as exc:
            log.info("continuation: no solution at p=%s (%s)", p, exc)
            failures.append(p)
            sols.append(None)
            mx.append(math.nan)
            am.append(math.nan)
            continue
        prefer = sol.shooting_parameter
        sols.append(sol)
        mx.append(sol.max_u)
        am.append(sol.argmax)
    return ContinuationResult(p_grid, sols, mx, am, failures)


# ---------------------------------------------------------------------------
# reduction of O(-n) to O(-2)


def k2_from_kn(n: int, t, kn_t):
    """``(1 + (n-1) e^-t) K_n(t) / (1 + e^-t)``: the O(-2) curvature in the same ``t``."""
    e = np.exp(-np.asarray(t, dtype=float))
    return (1.0 + (n - 1) * e) * np.asarray(kn_t) / (1.0 + e)


def residual_on_form(n: int, t, w, w2, kn_t):
    """``w'' + K_n w_n w^3``: the O(-n) scalar-flat equation in ``t``."""
    return np.asarray(w2) + np.asarray(kn_t) * lebrun_weight(n, t) * np.asarray(w) ** 3


def residual_split_form(n: int, t, w, w2, kn_t):
    """``w'' + [(1+(n-1)e^-t) K_n/(1+e^-t)] [e^-t (1+e^-t)/(4(1-e^-t)^3)] w^3``."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-t)
    factor = (1.0 + (n - 1) * e) * np.asarray(kn_t) / (1.0 + e)
    return w2 + factor * (e * (1.0 + e) / (4.0 * (-np.expm1(-t)) ** 3)) * np.asarray(w) ** 3


def residual_o2_form(t, w, w2, k2_t):
    """``w'' + K_2 w_2 w^3``: the O(-2) scalar-flat equation in ``t``."""
    return np.asarray(w2) + np.asarray(k2_t) * lebrun_weight(2, t) * np.asarray(w) ** 3


@dataclass
class TransformResult:
    n: int
    s2: np.ndarray
    v2: np.ndarray
    k2: Callable
    residual_in: float
    residual_out: float


def transform_n_to_2(solution: RadialSolution, K_n: KFamily, n: int | None = None) -> TransformResult:
    """Carry an O(-n) solution to O(-2): ``v_2(s) = v_n(log(2 s^2 + 1))`` with the adjusted curvature.

    In the shared ``t`` coordinate the two equations have identical right
    hand sides, so the O(-2) residual (evaluated with the O(-2) weight and
    curvature) must match the input residual.
    """
    geom = solution.geom
    if geom.kind is Kind.FOOTBALL:
        raise ValueError("the transform applies to LeBrun solutions")
    n = geom.n if n is None else n
    if n != geom.n:
        raise ValueError("n does not match the solution's geometry")
    grid = solution.grid
    dense = solution._dense

    def rhs_n(x, y, dy):
        return -K_n.value(s_of_t(n, x)) * lebrun_weight(n, x) * np.maximum(y, 0.0) ** 3

    def rhs_2(x, y, dy):
        k2 = k2_from_kn(n, x, K_n.value(s_of_t(n, x)))
        return -k2 * lebrun_weight(2, x) * np.maximum(y, 0.0) ** 3

    if solution.p != 3.0:
        raise ValueError("the transform is an identity of the critical equation")
    res_in = float(np.max(_cell_residuals(rhs_n, dense, grid)))
    res_out = float(np.max(_cell_residuals(rhs_2, dense, grid)))
    s2 = np.sqrt(np.expm1(grid) / 2.0)
    v2 = dense(grid)[0]

    def k2(s):
        # K_2(s) = (n + 2 s^2)/(2 + 2 s^2) K_n(sqrt(2/n) s)
        s = np.asarray(s, dtype=float)
        return (n + 2.0 * s * s) / (2.0 + 2.0 * s * s) * K_n.value(math.sqrt(2.0 / n) * s)

    return TransformResult(n, s2, v2, k2, res_in, res_out)
