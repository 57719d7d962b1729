"""Vectorized safeguarded root finding for increasing scalar maps.

Every root problem in this package has the form ``g(x) = 0`` with ``g``
strictly increasing (slope bounded below by a positive constant), applied
elementwise to a whole array of independent problems at once.  A bracket is
guaranteed to exist, so the solver expands geometrically until it has one
and then alternates regula-falsi steps with bisection: a secant step is only
taken when it lands strictly inside the bracket and the previous step at
least halved the bracket width.
"""

import numpy as np

from .errors import BracketFailure, ToleranceFailure

MAX_EXPANSIONS = 80
MAX_ITERATIONS = 400


def _check_finite(values, what):
    bad = ~np.isfinite(values)
    if bad.any():
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise BracketFailure(f"non-finite residual during {what} (element {idx})")


def solve_increasing(residual, center, radius, tol, max_expansions=MAX_EXPANSIONS,
                     max_iter=MAX_ITERATIONS):
    """Solve ``residual(x) = 0`` elementwise for an increasing ``residual``.

    Parameters
    ----------
    residual : callable
        Maps an array shaped like ``center`` to residuals of the same shape.
        It is always called with the full array.
    center, radius : array_like
        Initial bracket ``[center - radius, center + radius]``; ``radius`` is
        doubled on the failing side until the residual changes sign.
    tol : float
        Absolute tolerance on the residual.  If the bracket collapses to a few
        ulps first (the residual cannot be resolved further in floating point)
        the better endpoint is accepted.

    Returns
    -------
    x, fx, iterations
    """
    center = np.array(center, dtype=float)
    radius = np.broadcast_to(np.maximum(np.asarray(radius, dtype=float), 1e-300),
                             center.shape).copy()
    shape = center.shape
    center = center.ravel()
    radius = radius.ravel()

    def g(x):
        return np.asarray(residual(x.reshape(shape)), dtype=float).reshape(-1)

    lo = center - radius
    hi = center + radius
    f_lo = g(lo)
    f_hi = g(hi)
    _check_finite(f_lo, "bracketing")
    _check_finite(f_hi, "bracketing")
    r_lo = radius.copy()
    r_hi = radius.copy()
    for _ in range(max_expansions):
        need_lo = f_lo > 0
        need_hi = f_hi < 0
        if not (need_lo.any() or need_hi.any()):
            break
        # the root lies beyond the failing endpoint, which becomes the other side
        hi = np.where(need_lo, lo, hi)
        f_hi = np.where(need_lo, f_lo, f_hi)
        lo = np.where(need_hi, hi, lo)
        f_lo = np.where(need_hi, f_hi, f_lo)
        r_lo = np.where(need_lo, 2.0 * r_lo, r_lo)
        r_hi = np.where(need_hi, 2.0 * r_hi, r_hi)
        lo = np.where(need_lo, center - r_lo, lo)
        hi = np.where(need_hi, center + r_hi, hi)
        f_new = g(np.where(need_lo, lo, hi))
        _check_finite(f_new, "bracketing")
        f_lo = np.where(need_lo, f_new, f_lo)
        f_hi = np.where(need_hi, f_new, f_hi)
    else:
        if (f_lo > 0).any() or (f_hi < 0).any():
            raise BracketFailure("bracket expansion exceeded its bound; the map is not "
                                 "increasing or the evaluator is not finite")

    a, b, fa, fb = lo, hi, f_lo, f_hi
    x = np.where(np.abs(fa) <= np.abs(fb), a, b)
    fx = np.where(np.abs(fa) <= np.abs(fb), fa, fb)
    # the center is usually the best first guess; keep it exactly when it already solves
    f_c = g(center)
    inside = np.isfinite(f_c) & (center > a) & (center < b)
    a = np.where(inside & (f_c < 0), center, a)
    fa = np.where(inside & (f_c < 0), f_c, fa)
    b = np.where(inside & (f_c > 0), center, b)
    fb = np.where(inside & (f_c > 0), f_c, fb)
    take = inside & (np.abs(f_c) <= np.abs(fx))
    x = np.where(take, center, x)
    fx = np.where(take, f_c, fx)
    done = np.abs(fx) <= tol
    use_secant = np.ones_like(done)
    iterations = 0
    while not done.all():
        if iterations >= max_iter:
            worst = float(np.max(np.abs(fx[~done])))
            raise ToleranceFailure(f"iteration cap {max_iter} reached, residual {worst:.3e}")
        iterations += 1
        width = b - a
        mid = a + 0.5 * width
        denom = fb - fa
        with np.errstate(divide="ignore", invalid="ignore"):
            sec = b - fb * (width / denom)
        ok = use_secant & (denom > 0) & (sec > a) & (sec < b)
        c = np.where(done, x, np.where(ok, sec, mid))
        fc = g(c)
        _check_finite(fc[~done], "iteration")

        left = ~done & (fc < 0)
        right = ~done & (fc > 0)
        a = np.where(left, c, a)
        fa = np.where(left, fc, fa)
        b = np.where(right, c, b)
        fb = np.where(right, fc, fb)

        better = ~done & (np.abs(fc) <= np.abs(fx))
        x = np.where(better, c, x)
        fx = np.where(better, fc, fx)

        hit = ~done & (np.abs(fc) <= tol)
        x = np.where(hit, c, x)
        fx = np.where(hit, fc, fx)
        new_width = b - a
        scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.finfo(float).tiny)
        collapsed = ~done & ((new_width <= 4.0 * np.finfo(float).eps * scale)
                             | (a + 0.5 * new_width == a) | (a + 0.5 * new_width == b))
        use_secant = new_width <= 0.5 * width
        done = done | hit | collapsed

    return x.reshape(shape), fx.reshape(shape), iterations
