"""Yosida approximation of a monotone generator.

With ``F = f - u_t y`` dissipative in ``y``, the resolvent ``J^a`` solves
``x - a F(t, x, z) = y``, the approximant is ``F^a = (J^a - y) / a`` and the
regularized generator is ``f^a = F^a + u_t y``.  ``f^a`` is Lipschitz in ``y``
with constant ``2/a + u_t`` and converges pointwise to ``f`` as ``a -> 0``.

All functions broadcast over numpy arrays of ``t``, ``y``, ``z`` (and ``alpha``).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConfigError
from .rootfind import solve_increasing

DEFAULT_TOL = 1e-12


def _const(c):
    def fn(t):
        return np.zeros_like(np.asarray(t, dtype=float)) + c
    return fn


@dataclass(frozen=True)
class GeneratorSpec:
    """A generator ``f(t, y, z)`` together with the constants of its assumptions.

    ``u`` is the monotonicity rate, ``L`` the z-Lipschitz constant, ``h`` the
    dominating function with ``|f(t, y, 0)| <= h(t) + u(t)|y|``, ``M`` bounds
    the integral of ``u^2`` over ``[0, T]`` and ``lam`` is the extra
    integrability exponent (carried for reporting only).
    """

    f: object = field(repr=False)
    u: object = field(repr=False)
    L: float
    h: object = field(repr=False)
    M: float
    T: float
    lam: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, t, y, z):
        return self.f(t, y, z)

    def u_squared_integral(self):
        val, _ = integrate.quad(lambda s: float(self.u(s)) ** 2, 0.0, self.T, limit=400)
        return val

    def u_integral(self, a=0.0, b=None):
        b = self.T if b is None else b
        if b <= a:
            return 0.0
        val, _ = integrate.quad(lambda s: float(self.u(s)), a, b, limit=400)
        return val

    def h_squared_integral(self, a=0.0, b=None):
        b = self.T if b is None else b
        if b <= a:
            return 0.0
        val, _ = integrate.quad(lambda s: float(self.h(s)) ** 2, a, b, limit=400)
        return val

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params), "L": self.L,
                "lambda": self.lam, "M": self.M, "T": self.T}


def make_generator(name, T, params=None, lam=0.0):
    """Generators accepted in configs: zero, linear_decay, signed_sqrt, piecewise_kink."""
    params = dict(params or {})

    def take(key, default):
        return float(params.pop(key, default))

    if name == "zero":
        spec = dict(f=lambda t, y, z: np.zeros(np.broadcast(t, y, z).shape),
                    u=_const(0.0), L=0.0, h=_const(0.0), M=0.0, used={})
    elif name == "linear_decay":
        k = take("k", 1.0)
        rate = take("u", k)
        spec = dict(f=lambda t, y, z: -k * (np.asarray(y, dtype=float) + 0.0 * np.asarray(z)),
                    u=_const(rate), L=0.0, h=_const(0.0), M=rate * rate * T,
                    used={"k": k, "u": rate})
    elif name == "signed_sqrt":
        L = take("L", 0.5)
        horizon = float(T)

        def u(t):
            return (horizon - np.asarray(t, dtype=float)) ** -0.25

        def f(t, y, z):
            y = np.asarray(y, dtype=float)
            return -u(t) * np.sign(y) * np.sqrt(np.abs(y)) + L * np.sin(z)

        # sqrt|y| <= 1 + |y| gives |f(t,y,0)| <= u_t + u_t|y|, so h = u
        spec = dict(f=f, u=u, L=L, h=u, M=2.0 * math.sqrt(horizon), used={"L": L})
    elif name == "piecewise_kink":
        k = take("k", 1.0)
        k2 = take("k2", 2.0)
        L = take("L", 0.5)
        rate = take("u", max(k, k2))

        def f(t, y, z):
            y = np.asarray(y, dtype=float)
            return -k * np.maximum(y, 0.0) - k2 * np.minimum(y, 0.0) + L * np.asarray(z, dtype=float)

        spec = dict(f=f, u=_const(rate), L=L, h=_const(0.0), M=rate * rate * T,
                    used={"k": k, "k2": k2, "L": L, "u": rate})
    else:
        raise ConfigError("generator.name", f"unknown generator '{name}'; expected one of "
                          "zero, linear_decay, signed_sqrt, piecewise_kink")
    if params:
        raise ConfigError("generator.params", f"generator '{name}' does not take {sorted(params)}")
    used = spec.pop("used")
    return GeneratorSpec(T=float(T), lam=float(lam), name=name, params=used, **spec)


def dissipative_part(spec, t, y, z):
    """F(t, y, z) = f(t, y, z) - u_t y."""
    y = np.asarray(y, dtype=float)
    return _scalar(spec.f(t, y, z) - spec.u(t) * y)


@dataclass(frozen=True)
class ResolventResult:
    x: object
    residual: object
    iterations: int


def resolvent(spec, alpha, t, y, z, tol=DEFAULT_TOL):
    """Solve ``x - alpha F(t, x, z) = y`` by bracketed safeguarded root finding."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha must be > 0")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    t, y, z, alpha = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(y, dtype=float),
                                         np.asarray(z, dtype=float), alpha)

    def residual(x):
        return x - alpha * (spec.f(t, x, z) - spec.u(t) * x) - y

    f0 = spec.f(t, y, z) - spec.u(t) * y
    radius = np.maximum(1.0, alpha * np.abs(f0))
    radius = np.where(np.isfinite(radius), radius, 1.0)
    x, fx, its = solve_increasing(residual, y, radius, tol)
    return ResolventResult(_scalar(x), _scalar(fx), its)


def yosida_approximant(spec, alpha, t, y, z, tol=DEFAULT_TOL):
    """F^alpha = (J^alpha - y) / alpha."""
    res = resolvent(spec, alpha, t, y, z, tol)
    return _scalar((np.asarray(res.x) - np.asarray(y, dtype=float)) / np.asarray(alpha, dtype=float))


def regularized_generator(spec, alpha, t, y, z, tol=DEFAULT_TOL):
    """f^alpha = F^alpha + u_t y."""
    y = np.asarray(y, dtype=float)
    return _scalar(np.asarray(yosida_approximant(spec, alpha, t, y, z, tol)) + spec.u(t) * y)


def regularized_spec(spec, alpha, tol=DEFAULT_TOL):
    """The regularized generator packaged as a GeneratorSpec with the same constants."""
    return GeneratorSpec(f=lambda t, y, z: regularized_generator(spec, alpha, t, y, z, tol),
                         u=spec.u, L=spec.L, h=spec.h, M=spec.M, T=spec.T, lam=spec.lam,
                         name=f"{spec.name}[alpha={alpha!r}]",
                         params={**spec.params, "alpha": alpha})


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


@dataclass
class ValidationReport:
    generator: str
    n_samples: int
    seed: int
    checks: dict

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks.values())

    def to_dict(self):
        return {"generator": self.generator, "n_samples": self.n_samples, "seed": self.seed,
                "passed": self.passed, "checks": self.checks}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def default_box(T):
    return {"t": (0.0, T), "y": (-10.0, 10.0), "z": (-10.0, 10.0)}


def _first_witness(bad, **columns):
    if not bad.any():
        return None
    k = int(np.flatnonzero(bad)[0])
    return {name: float(col[k]) for name, col in columns.items()}


def validate_assumptions(spec, n_samples=10_000, seed=0, box=None, slack=1e-9):
    """Randomized probe of the monotonicity, growth and z-Lipschitz assumptions."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    box = {**default_box(spec.T), **(box or {})}
    rng = np.random.default_rng(seed)
    n = n_samples
    t = rng.uniform(*box["t"], n)
    y1 = rng.uniform(*box["y"], n)
    y2 = rng.uniform(*box["y"], n)
    z1 = rng.uniform(*box["z"], n)
    z2 = rng.uniform(*box["z"], n)
    u = spec.u(t)
    eps = np.finfo(float).eps
    checks = {}

    f1 = spec.f(t, y1, z1)
    f2 = spec.f(t, y2, z1)
    lhs = (y1 - y2) * (f1 - f2)
    rhs = u * (y1 - y2) ** 2
    bad = lhs > rhs + slack + 64 * eps * (np.abs(lhs) + np.abs(rhs))
    checks["monotone_y"] = {"passed": not bad.any(), "violations": int(bad.sum()),
                    "witness": _first_witness(bad, t=t, y1=y1, y2=y2, z=z1, lhs=lhs, rhs=rhs)}

    lhs = np.abs(spec.f(t, y1, np.zeros_like(y1)))
    rhs = spec.h(t) + u * np.abs(y1)
    bad = lhs > rhs + slack + 64 * eps * np.abs(rhs)
    checks["growth"] = {"passed": not bad.any(), "violations": int(bad.sum()),
                    "witness": _first_witness(bad, t=t, y=y1, lhs=lhs, rhs=rhs)}

    lhs = np.abs(spec.f(t, y1, z1) - spec.f(t, y1, z2))
    rhs = spec.L * np.abs(z1 - z2)
    bad = lhs > rhs + slack + 64 * eps * (np.abs(f1) + np.abs(rhs))
    checks["lipschitz_z"] = {"passed": not bad.any(), "violations": int(bad.sum()),
                    "witness": _first_witness(bad, t=t, y=y1, z1=z1, z2=z2, lhs=lhs, rhs=rhs)}

    u_min = float(np.min(u))
    integral = spec.u_squared_integral()
    checks["rate"] = {"passed": u_min >= 0 and integral <= spec.M * (1 + 1e-6),
                      "violations": int(u_min < 0) + int(integral > spec.M * (1 + 1e-6)),
                      "witness": {"min_u": u_min, "u_squared_integral": integral, "M": spec.M}}
    return ValidationReport(spec.name, n_samples, seed, checks)
