"""Randomized battery of the resolvent / Yosida-approximant inequalities.

Each inequality is checked on ``n_samples`` seeded draws.  Where a bound
involves ``F^alpha`` (a quotient by ``alpha`` of quantities solved to
residual ``tol``) the additive slack is ``4*tol/alpha``; every check also
carries a floating-point allowance of 64 ulps of the magnitudes involved.
"""

from dataclasses import dataclass

import numpy as np

from .yosida import DEFAULT_TOL, default_box, resolvent

LIMIT_ALPHAS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)
LIMIT_THRESHOLD = 1e-3

INEQUALITIES = (
    "resolvent_contraction",
    "approximant_lipschitz_y",
    "approximant_dissipative",
    "approximant_domination",
    "resolvent_convergence",
    "approximant_cross_alpha",
    "resolvent_lipschitz_z",
    "approximant_lipschitz_z",
    "regularized_lipschitz_y",
    "regularized_monotone",
    "regularized_growth",
    "regularized_growth_h",
    "regularized_cross_alpha",
)


@dataclass
class PropertyResult:
    name: str
    samples: int
    violations: int
    max_excess: float
    witness: dict

    @property
    def passed(self):
        return self.violations == 0

    def to_dict(self):
        return {"name": self.name, "samples": self.samples, "violations": self.violations,
                "max_excess": self.max_excess, "witness": self.witness, "passed": self.passed}


def _check(name, lhs, rhs, slack, columns):
    eps = np.finfo(float).eps
    allowance = slack + 64 * eps * (np.abs(lhs) + np.abs(rhs))
    excess = lhs - rhs - allowance
    bad = excess > 0
    witness = None
    if bad.any():
        k = int(np.argmax(excess))
        witness = {key: float(np.broadcast_to(v, lhs.shape)[k]) for key, v in columns.items()}
        witness.update(lhs=float(lhs[k]), rhs=float(rhs[k]))
    return PropertyResult(name, int(lhs.size), int(bad.sum()), float(np.max(lhs - rhs)), witness)


def property_battery(spec, n_samples=10_000, seed=0, tol=DEFAULT_TOL, box=None,
                     alpha_range=(1e-4, 1.0)):
    """Check the thirteen approximation inequalities; returns a list of PropertyResult."""
    box = {**default_box(spec.T), **(box or {})}
    rng = np.random.default_rng(seed)
    n = n_samples
    t = rng.uniform(*box["t"], n)
    y1 = rng.uniform(*box["y"], n)
    y2 = rng.uniform(*box["y"], n)
    z = rng.uniform(*box["z"], n)
    z1 = rng.uniform(*box["z"], n)
    z2 = rng.uniform(*box["z"], n)
    lo, hi = np.log(alpha_range[0]), np.log(alpha_range[1])
    alpha = np.exp(rng.uniform(lo, hi, n))
    beta = np.exp(rng.uniform(lo, hi, n))

    u = spec.u(t)
    L = spec.L

    def F(y, zz):
        return spec.f(t, y, zz) - u * y

    def J(a, y, zz):
        return np.asarray(resolvent(spec, a, t, y, zz, tol).x)

    J1 = J(alpha, y1, z)
    J2 = J(alpha, y2, z)
    Fa1 = (J1 - y1) / alpha
    Fa2 = (J2 - y2) / alpha
    Fb2 = (J(beta, y2, z) - y2) / beta
    Jz1 = J(alpha, y1, z1)
    Jz2 = J(alpha, y1, z2)
    Faz1 = (Jz1 - y1) / alpha
    Faz2 = (Jz2 - y1) / alpha
    zero = np.zeros_like(y1)
    Fa0 = (J(alpha, y1, zero) - y1) / alpha

    fa1 = Fa1 + u * y1
    fa2 = Fa2 + u * y2
    fb2 = Fb2 + u * y2
    fa0 = Fa0 + u * y1
    dy = y1 - y2
    s_a = 4 * tol / alpha
    s_ab = 4 * tol / np.minimum(alpha, beta)
    cols = dict(t=t, y1=y1, y2=y2, z=z, alpha=alpha)
    cols_ab = dict(cols, beta=beta)
    cols_z = dict(t=t, y=y1, z1=z1, z2=z2, alpha=alpha)

    return [
        _check("resolvent_contraction", np.abs(J1 - J2), np.abs(dy), s_a, cols),
        _check("approximant_lipschitz_y", np.abs(Fa1 - Fa2), 2 / alpha * np.abs(dy), s_a, cols),
        _check("approximant_dissipative", (Fa1 - Fa2) * dy, zero, s_a, cols),
        _check("approximant_domination", np.abs(Fa1), np.abs(F(y1, z)), s_a, cols),
        _check("resolvent_convergence", np.abs(y1 - J1), alpha * np.abs(F(y1, z)), tol, cols),
        _check("approximant_cross_alpha", (Fa1 - Fb2) * dy,
               (alpha + beta) * (np.abs(Fa1) + np.abs(Fb2)) ** 2, s_ab, cols_ab),
        _check("resolvent_lipschitz_z", np.abs(Jz1 - Jz2), alpha * L * np.abs(z1 - z2), s_a, cols_z),
        _check("approximant_lipschitz_z", np.abs(Faz1 - Faz2), L * np.abs(z1 - z2), s_a, cols_z),
        _check("regularized_lipschitz_y", np.abs(fa1 - fa2), (2 / alpha + u) * np.abs(dy), s_a, cols),
        _check("regularized_monotone", (fa1 - fa2) * dy, u * dy ** 2, s_a, cols),
        _check("regularized_growth", np.abs(fa1), np.abs(spec.f(t, y1, z)) + 2 * u * np.abs(y1),
               s_a, cols),
        _check("regularized_growth_h", np.abs(fa0), spec.h(t) + 3 * u * np.abs(y1), s_a, cols),
        _check("regularized_cross_alpha", (fa1 - fb2) * dy,
               (alpha + beta) * (np.abs(fa1) + np.abs(fb2) + u * (np.abs(y1) + np.abs(y2))) ** 2
               + u * dy ** 2, s_ab, cols_ab),
    ]


def pointwise_limit(spec, points=None, alphas=LIMIT_ALPHAS, tol=DEFAULT_TOL):
    """|f^alpha - f| along a decreasing alpha sequence at fixed (t, y, z) points.

    Returns ``(gaps, passed)`` where ``gaps[k]`` is the vector of gaps for
    ``alphas[k]``; the check passes when the gaps are non-increasing (up to
    the solve slack) and the last one is below 1e-3 everywhere.
    """
    if points is None:
        T = spec.T
        grid = np.array(np.meshgrid([0.0, 0.25 * T, 0.5 * T, 0.75 * T],
                                    [-5.0, -1.0, -0.1, 0.1, 1.0, 5.0],
                                    [-1.0, 0.5], indexing="ij")).reshape(3, -1)
        points = grid
    t, y, z = (np.asarray(p, dtype=float) for p in points)
    f = spec.f(t, y, z)
    u = spec.u(t)
    gaps = []
    for a in alphas:
        fa = (np.asarray(resolvent(spec, a, t, y, z, tol).x) - y) / a + u * y
        gaps.append(np.abs(fa - f))
    gaps = np.array(gaps)
    slack = np.array([4 * tol / a for a in alphas])[:, None] + 1e-12
    monotone = bool(np.all(gaps[1:] <= gaps[:-1] + slack[1:]))
    small = bool(np.all(gaps[-1] < LIMIT_THRESHOLD))
    return gaps, monotone and small
