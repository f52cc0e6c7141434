"""Proximity operators for the joint reconstruction solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator

CHAMBOLLE_STEP = 0.248


@dataclass(frozen=True)
class TvConfig:
    inner_iterations: int = 30
    dual_step: float = CHAMBOLLE_STEP

    def __post_init__(self):
        if not 0 < self.dual_step <= 0.25:
            raise ValueError("dual_step must lie in (0, 0.25]")
        if self.inner_iterations < 1:
            raise ValueError("inner_iterations must be positive")


@dataclass(frozen=True)
class FrameBounds:
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if self.gamma1 < 0 or self.gamma2 <= 0 or self.gamma1 > self.gamma2:
            raise ValueError("need 0 <= gamma1 <= gamma2 and gamma2 > 0")

    @property
    def step(self) -> float:
        return 2.0 / (self.gamma1 + self.gamma2)


# --------------------------------------------------------------------------
# Total variation
# --------------------------------------------------------------------------


def gradient(u: np.ndarray):
    """Forward differences; zero across the last column / row."""
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def divergence(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Negative adjoint of :func:`gradient`."""
    d = np.zeros_like(px)
    d[:, :-1] += px[:, :-1]
    d[:, 1:] -= px[:, :-1]
    d[:-1, :] += py[:-1, :]
    d[1:, :] -= py[:-1, :]
    return d


def tv_norm(image: np.ndarray) -> float:
    """Isotropic total variation."""
    gx, gy = gradient(np.asarray(image, dtype=np.float64))
    return float(np.sum(np.sqrt(gx * gx + gy * gy)))


def prox_tv(x: np.ndarray, weight: float, config: TvConfig = TvConfig(), shape=None,
            dual=None, return_dual: bool = False):
    """Approximate ``argmin_z weight * TV(z) + 0.5 * ||z - x||^2``.

    Chambolle's fixed-point iteration on the dual field. ``x`` is an image,
    or a flat vector together with ``shape``. ``dual`` warm-starts the dual
    field from a previous call.
    """
    flat = np.ndim(x) == 1
    g = np.asarray(x, dtype=np.float64)
    if flat:
        if shape is None:
            raise ValueError("shape is required for flat input")
        g = g.reshape(shape)
    if weight <= 0:
        raise ValueError("weight must be positive")
    if dual is None:
        px = np.zeros_like(g)
        py = np.zeros_like(g)
    else:
        px, py = (d.copy() for d in dual)
    tau = config.dual_step
    scaled = g / weight
    for _ in range(config.inner_iterations):
        gx, gy = gradient(divergence(px, py) - scaled)
        norm = 1.0 + tau * np.sqrt(gx * gx + gy * gy)
        px = (px + tau * gx) / norm
        py = (py + tau * gy) / norm
    z = g - weight * divergence(px, py)
    if flat:
        z = z.reshape(-1)
    return (z, (px, py)) if return_dual else z


# --------------------------------------------------------------------------
# Balls
# --------------------------------------------------------------------------


def project_ball(y: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto the centred ball of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    y = np.asarray(y, dtype=np.float64)
    norm = np.linalg.norm(y)
    if norm <= radius:
        return y.copy()
    return y * (radius / norm)


def prox_selector_ball(x: np.ndarray, selector: int, center: np.ndarray, radius: float) -> np.ndarray:
    """Project block ``selector`` of a stacked ``(J, N)`` array onto the ball
    of ``radius`` around the same block of ``center``; other blocks stay put.
    """
    x = np.asarray(x, dtype=np.float64)
    out = x.copy()
    g = x[selector] - center[selector]
    out[selector] = x[selector] + (project_ball(g, radius) - g)
    return out


# --------------------------------------------------------------------------
# Ball composed with a non-tight linear operator
# --------------------------------------------------------------------------


def _as_operator(op) -> LinearOperator:
    if isinstance(op, LinearOperator):
        return op
    return aslinearoperator(op)


def estimate_frame_bounds(op, iterations: int = 100, seed: int = 0) -> FrameBounds:
    """Upper frame bound from power iteration on ``B B*`` (inflated by 1%).

    The lower bound is reported as 0.
    """
    op = _as_operator(op)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iterations):
        w = op.matvec(op.rmatvec(v))
        lam = float(v @ w)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            lam = 0.0
            break
        v = w / norm
    return FrameBounds(0.0, max(1.01 * lam, 1e-12))


def prox_affine_ball(x: np.ndarray, op, eps2: float, bounds: FrameBounds = None,
                     iterations: int = 50, dual=None, return_dual: bool = False,
                     history: list = None):
    """Project ``x`` onto ``{z : ||B z||^2 <= eps2}`` by dual forward-backward.

    ``dual`` warm-starts the dual variable. When ``history`` is a list, the
    primal iterate after each step is appended to it.
    """
    if eps2 <= 0:
        raise ValueError("eps2 must be positive")
    op = _as_operator(op)
    bounds = bounds or estimate_frame_bounds(op)
    mu = bounds.step
    radius = np.sqrt(eps2)
    x = np.asarray(x, dtype=np.float64)
    u = np.zeros(op.shape[0]) if dual is None else np.array(dual, dtype=np.float64)
    p = x - op.rmatvec(u)
    for _ in range(iterations):
        v = u / mu + op.matvec(p)
        u = mu * (v - project_ball(v, radius))
        p = x - op.rmatvec(u)
        if history is not None:
            history.append(p.copy())
    return (p, u) if return_dual else p
