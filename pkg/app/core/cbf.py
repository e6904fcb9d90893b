"""Pass-lane control barrier functions and the closed-form safety filter.

The ellipse has the two attackers as major-axis vertices and a fixed minor height ``d``:

    h(X, X1, X2) = 1 - (X - Xo)^T P (X - Xo)

With single-integrator defenders the filter is one affine constraint ``g . u + r >= 0``
and the QP ``min |u - u_nom|^2`` reduces to a projection onto a half-space. All functions
here broadcast over leading dimensions of the point and input arrays.

The line-based barrier is kept as a comparison baseline only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field

from app.core.field import FloatArray, Point2, as_point

_G_EPS = 1e-12


class DegenerateLaneError(ValueError):
    pass


class IncalculableLineError(ValueError):
    pass


class CbfParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    d: float = Field(0.01, gt=0)
    l_min: float = Field(1e-6, gt=0)

    def alpha(self, h: ArrayLike) -> FloatArray:
        # class-K function; the identity
        return np.asarray(h, dtype=float)


@dataclass(frozen=True)
class EllipseCBF:
    center: Point2
    length: float
    d: float
    cos_theta: float
    sin_theta: float
    x1: Point2
    x2: Point2
    v1: Point2
    v2: Point2

    @property
    def semi_major(self) -> float:
        return self.length / 2.0

    @property
    def semi_minor(self) -> float:
        return self.d / 2.0

    @property
    def axis(self) -> Point2:
        return np.array([self.cos_theta, self.sin_theta])

    @property
    def normal(self) -> Point2:
        return np.array([-self.sin_theta, self.cos_theta])


@dataclass(frozen=True)
class LineCbf:
    delta: float
    a: float
    b: float
    x1: Point2
    x2: Point2


class FilterResult(NamedTuple):
    u: FloatArray
    active: np.ndarray
    infeasible: np.ndarray


def ellipse_from_players(
    X_1: ArrayLike,
    X_2: ArrayLike,
    params: CbfParams | None = None,
    *,
    v_1: ArrayLike = (0.0, 0.0),
    v_2: ArrayLike = (0.0, 0.0),
) -> EllipseCBF:
    params = params or CbfParams()
    p1, p2 = as_point(X_1), as_point(X_2)
    delta = p2 - p1
    length = float(math.hypot(delta[0], delta[1]))
    if length <= params.l_min:
        raise DegenerateLaneError(f"players {p1.tolist()} and {p2.tolist()} give no pass lane")
    return EllipseCBF(
        center=(p1 + p2) / 2.0,
        length=length,
        d=params.d,
        cos_theta=float(delta[0] / length),
        sin_theta=float(delta[1] / length),
        x1=p1,
        x2=p2,
        v1=as_point(v_1),
        v2=as_point(v_2),
    )


def ellipse_matrix(e: EllipseCBF) -> FloatArray:
    inv_a2 = 1.0 / e.semi_major**2
    inv_b2 = 1.0 / e.semi_minor**2
    c, s = e.cos_theta, e.sin_theta
    off = s * c * (inv_a2 - inv_b2)
    return np.array(
        [
            [c * c * inv_a2 + s * s * inv_b2, off],
            [off, s * s * inv_a2 + c * c * inv_b2],
        ]
    )


def _lane_coordinates(X: ArrayLike, e: EllipseCBF) -> Tuple[FloatArray, FloatArray]:
    r = np.asarray(X, dtype=float) - e.center
    along = r[..., 0] * e.cos_theta + r[..., 1] * e.sin_theta
    across = -r[..., 0] * e.sin_theta + r[..., 1] * e.cos_theta
    return along, across


def h_ellipse(X: ArrayLike, e: EllipseCBF) -> FloatArray | float:
    along, across = _lane_coordinates(X, e)
    h = 1.0 - (along / e.semi_major) ** 2 - (across / e.semi_minor) ** 2
    return float(h) if np.ndim(h) == 0 else h


def h_gradients(X: ArrayLike, e: EllipseCBF) -> Tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """Coefficients (a, b, c, d) of the expansion

        dh/dt = a(x1' + x2' - 2x') + b(x1' - x2') + c(y1' + y2' - 2y') + d(y2' - y1')

    so that dh/dX = (-2a, -2c), dh/dX1 = (a + b, c - d) and dh/dX2 = (a - b, c + d).

    a and c are the components of P (X - Xo). b and d come from differentiating P with
    respect to the lane vector v = X2 - X1 at fixed X - Xo:
    d(r^T P r)/dv = (2 along / l) [k across n - (4 / l^2) along u], k = 1/A^2 - 1/B^2,
    where u is the lane axis and n its normal.
    """
    along, across = _lane_coordinates(X, e)
    inv_a2 = 1.0 / e.semi_major**2
    inv_b2 = 1.0 / e.semi_minor**2
    c_t, s_t = e.cos_theta, e.sin_theta

    pr_along = along * inv_a2
    pr_across = across * inv_b2
    a = pr_along * c_t - pr_across * s_t
    c = pr_along * s_t + pr_across * c_t

    kappa = inv_a2 - inv_b2
    scale = 2.0 * along / e.length
    g_along = -scale * (4.0 / e.length**2) * along
    g_across = scale * kappa * across
    dv_x = g_along * c_t - g_across * s_t
    dv_y = g_along * s_t + g_across * c_t
    b = dv_x
    d = -dv_y
    return a, b, c, d


def constraint_terms(X: ArrayLike, e: EllipseCBF, params: CbfParams | None = None) -> Tuple[FloatArray, FloatArray]:
    """Return (g, r) of the constraint g . u + r >= 0 at X."""
    params = params or CbfParams()
    a, b, c, d = h_gradients(X, e)
    g = np.stack([-2.0 * a, -2.0 * c], axis=-1)
    (x1d, y1d), (x2d, y2d) = e.v1, e.v2
    drift = a * (x1d + x2d) + b * (x1d - x2d) + c * (y1d + y2d) + d * (y2d - y1d)
    r = drift + params.alpha(h_ellipse(X, e))
    return g, r


def half_space_project(u_nom: ArrayLike, g: ArrayLike, r: ArrayLike) -> FilterResult:
    """argmin |u - u_nom|^2 subject to g . u + r >= 0."""
    u_nom = np.asarray(u_nom, dtype=float)
    g = np.asarray(g, dtype=float)
    r = np.asarray(r, dtype=float)
    value = np.sum(g * u_nom, axis=-1) + r
    gg = np.sum(g * g, axis=-1)
    active = value < 0.0
    infeasible = active & (gg < _G_EPS**2)
    project = active & ~infeasible
    step = np.divide(value, gg, out=np.zeros_like(value), where=project)
    u = u_nom - step[..., None] * g
    return FilterResult(u=u, active=project, infeasible=infeasible)


def qp_filter(
    u_nom: ArrayLike, X: ArrayLike, e: EllipseCBF, params: CbfParams | None = None
) -> FilterResult:
    g, r = constraint_terms(X, e, params)
    return half_space_project(u_nom, g, r)


def constraint_residual(
    u: ArrayLike, X: ArrayLike, e: EllipseCBF, params: CbfParams | None = None
) -> FloatArray | float:
    """dh/dt + alpha(h) for input u at X."""
    g, r = constraint_terms(X, e, params)
    value = np.sum(g * np.asarray(u, dtype=float), axis=-1) + r
    return float(value) if np.ndim(value) == 0 else value


def line_from_players(X_1: ArrayLike, X_2: ArrayLike, delta: float) -> LineCbf:
    p1, p2 = as_point(X_1), as_point(X_2)
    dx = p1[0] - p2[0]
    if abs(dx) < 1e-12:
        raise IncalculableLineError("line barrier is incalculable for a vertical pass lane")
    a = (p1[1] - p2[1]) / dx
    b = (p1[0] * p2[1] - p2[0] * p1[1]) / dx
    return LineCbf(delta=float(delta), a=float(a), b=float(b), x1=p1, x2=p2)


def _line_residual(X: ArrayLike, lc: LineCbf) -> FloatArray:
    X = np.asarray(X, dtype=float)
    return lc.a * X[..., 0] - X[..., 1] + lc.b


def h_line(X: ArrayLike, lc: LineCbf) -> FloatArray | float:
    h = lc.delta**2 - _line_residual(X, lc) ** 2 / (lc.a**2 + 1.0)
    return float(h) if np.ndim(h) == 0 else h


def line_gradient(X: ArrayLike, lc: LineCbf) -> FloatArray:
    res = _line_residual(X, lc)
    scale = -2.0 * res / (lc.a**2 + 1.0)
    return np.stack([scale * lc.a, -scale], axis=-1)


def line_qp_filter(u_nom: ArrayLike, X: ArrayLike, lc: LineCbf) -> FilterResult:
    # static players only; the baseline never sees moving endpoints
    return half_space_project(u_nom, line_gradient(X, lc), h_line(X, lc))
