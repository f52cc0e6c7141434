"""Independent reference implementations used as test oracles.

Everything here is written in the most direct way possible (explicit loops,
generic solvers) and shares no code with the package beyond plain data.
"""

import itertools
import statistics

import numba
import numpy as np
from scipy.optimize import minimize


def forward_warp(image, horizontal, vertical):
    """Push every pixel to its destination in raster order.

    Returns the warped image (0 in holes) and a boolean hole map.
    """
    n1, n2 = image.shape
    out = np.zeros((n1, n2))
    written = np.zeros((n1, n2), bool)
    for m in range(n1):
        for n in range(n2):
            dm, dn = m + vertical[m, n], n + horizontal[m, n]
            if 0 <= dm < n1 and 0 <= dn < n2:
                out[dm, dn] = image[m, n]
                written[dm, dn] = True
    return out, ~written


def rectified_cost_volume(ref, targets, baselines, disparities, lam, tau):
    """Scalar double-loop data cost with the out-of-frame penalty."""
    n1, n2 = ref.shape
    vol = np.zeros((n1, n2, len(disparities)))
    for tgt, b in zip(targets, baselines):
        for m in range(n1):
            for n in range(n2):
                entries = []
                for d in disparities:
                    col = int(np.floor(n - b * d + 0.5))
                    if 0 <= col < n2:
                        entries.append((tgt[m, col] - ref[m, n]) ** 2)
                    else:
                        entries.append(None)
                finite = [e for e in entries if e is not None]
                med = statistics.median(finite) if finite else 0.0
                for k, e in enumerate(entries):
                    vol[m, n, k] += e if e is not None else tau * lam + med
    return vol


def grid_energy(cost, labels, lam, tau):
    n1, n2, _ = cost.shape
    e = 0.0
    for m in range(n1):
        for n in range(n2):
            e += cost[m, n, labels[m, n]]
            if n + 1 < n2:
                e += lam * min(abs(labels[m, n] - labels[m, n + 1]), tau)
            if m + 1 < n1:
                e += lam * min(abs(labels[m, n] - labels[m + 1, n]), tau)
    return e


def brute_force_labeling(cost, lam, tau):
    """Exhaustive minimum energy and a minimizing labeling."""
    n1, n2, n_labels = cost.shape
    best, best_labels = np.inf, None
    for combo in itertools.product(range(n_labels), repeat=n1 * n2):
        labels = np.array(combo).reshape(n1, n2)
        e = grid_energy(cost, labels, lam, tau)
        if e < best:
            best, best_labels = e, labels
    return best, best_labels


def project_constrained(x, constraint, grad):
    """Nearest point to ``x`` with ``constraint(z) >= 0`` by SLSQP."""
    res = minimize(lambda z: 0.5 * np.sum((z - x) ** 2), x, jac=lambda z: z - x,
                   constraints=[{"type": "ineq", "fun": constraint, "jac": grad}],
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
    return res.x


def project_quadratic_set(x, B, eps2, tol=1e-14):
    """Projection onto ``{z : ||B z||^2 <= eps2}``.

    Stationarity gives ``z = (I + 2 nu B^T B)^{-1} x``; the multiplier ``nu``
    is found by bisection on the active constraint.
    """
    B = np.asarray(B, dtype=np.float64)
    if np.sum((B @ x) ** 2) <= eps2:
        return x.copy()
    G = B.T @ B
    eye = np.eye(x.size)

    def z(nu):
        return np.linalg.solve(eye + 2.0 * nu * G, x)

    lo, hi = 0.0, 1.0
    while np.sum((B @ z(hi)) ** 2) > eps2:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if np.sum((B @ z(mid)) ** 2) > eps2:
            lo = mid
        else:
            hi = mid
    return z(hi)


def chambolle_like_objective(z, x, weight):
    """``weight * TV(z) + 0.5 ||z - x||^2`` with isotropic forward differences."""
    gx = np.zeros_like(z)
    gy = np.zeros_like(z)
    gx[:, :-1] = z[:, 1:] - z[:, :-1]
    gy[:-1, :] = z[1:, :] - z[:-1, :]
    return weight * np.sum(np.sqrt(gx**2 + gy**2)) + 0.5 * np.sum((z - x) ** 2)


def tv_loop(image):
    n1, n2 = image.shape
    total = 0.0
    for m in range(n1):
        for n in range(n2):
            dx = image[m, n + 1] - image[m, n] if n + 1 < n2 else 0.0
            dy = image[m + 1, n] - image[m, n] if m + 1 < n1 else 0.0
            total += np.hypot(dx, dy)
    return total


@numba.njit(cache=True)
def _tv_subgradient(x, n1, n2, g):
    val = 0.0
    for i in range(n1):
        for j in range(n2):
            k = i * n2 + j
            gx = x[k + 1] - x[k] if j < n2 - 1 else 0.0
            gy = x[k + n2] - x[k] if i < n1 - 1 else 0.0
            r = np.sqrt(gx * gx + gy * gy)
            val += r
            if r > 1e-12:
                if j < n2 - 1:
                    g[k + 1] += gx / r
                    g[k] -= gx / r
                if i < n1 - 1:
                    g[k + n2] += gy / r
                    g[k] -= gy / r
    return val


@numba.njit(cache=True)
def _subgradient_run(x0, y, H, radius, bound, n1, n2, iterations, scale):
    x = x0.copy()
    views = y.shape[0]
    npix = n1 * n2
    best = np.inf
    k = 0
    for _ in range(iterations):
        hx = H @ x
        excess = hx @ hx - bound
        if excess > 1e-9 * bound:
            # Polyak step towards the quadratic constraint
            grad = 2.0 * (H.T @ hx)
            x -= excess / (grad @ grad) * grad
        else:
            g = np.zeros(views * npix)
            val = 0.0
            for j in range(views):
                gj = np.zeros(npix)
                val += _tv_subgradient(x[j * npix:(j + 1) * npix], n1, n2, gj)
                g[j * npix:(j + 1) * npix] = gj
            if val < best:
                best = val
            k += 1
            x -= scale / np.sqrt(k) * g / np.sqrt(g @ g + 1e-300)
        for j in range(views):
            d = x[j * npix:(j + 1) * npix] - y[j]
            nd = np.sqrt(d @ d)
            if nd > radius:
                x[j * npix:(j + 1) * npix] = y[j] + d * (radius / nd)
    return best


def subgradient_oracle(decoded, H, radius, bound, iterations=10**6, scale=2.0):
    """Best feasible objective of a switching subgradient method.

    Minimizes the summed TV of the stacked views subject to per-view balls of
    ``radius`` around ``decoded`` and ``||H x||^2 <= bound``.
    """
    y = np.stack([np.asarray(v, dtype=np.float64).ravel() for v in decoded])
    n1, n2 = np.asarray(decoded[0]).shape
    return _subgradient_run(y.ravel().copy(), y, np.asarray(H, dtype=np.float64),
                            float(radius), float(bound), n1, n2, iterations, scale)


def bd_rate_reference(rates_a, psnr_a, rates_b, psnr_b):
    """Delta-rate (percent) via numpy Polynomial fits and numerical quadrature."""
    from numpy.polynomial import Polynomial
    from scipy.integrate import quad

    fa = Polynomial.fit(psnr_a, np.log10(rates_a), 3)
    fb = Polynomial.fit(psnr_b, np.log10(rates_b), 3)
    lo = max(min(psnr_a), min(psnr_b))
    hi = min(max(psnr_a), max(psnr_b))
    ia, _ = quad(fa, lo, hi, epsabs=1e-13)
    ib, _ = quad(fb, lo, hi, epsabs=1e-13)
    return (10.0 ** ((ib - ia) / (hi - lo)) - 1.0) * 100.0
