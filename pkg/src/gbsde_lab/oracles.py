"""Independent reference computations used to cross-check the lattice engine."""

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractionViolation, EnumerationCapExceeded
from .sublinear import ValueField, argmax_largest, sup_candidates
from .solver import GBSDESolution
from .yosida import DEFAULT_TOL, regularized_generator

ENUMERATION_CAP = 20_000_000
_CHUNK = 1 << 22


@dataclass
class OracleReport:
    instance: str
    oracle: float
    engine: float
    gap: float
    tolerance: float

    @classmethod
    def compare(cls, instance, oracle, engine, tolerance):
        return cls(instance, float(oracle), float(engine), abs(float(oracle) - float(engine)),
                   float(tolerance))

    @property
    def passed(self):
        return self.gap <= self.tolerance

    def to_dict(self):
        return {**asdict(self), "passed": self.passed}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def brute_force_g_expectation(terminal, T, N, vol_set, cap=ENUMERATION_CAP):
    """Max over every adapted control of the plain binomial expectation.

    A control assigns a volatility to each of the ``2**N - 1`` partial shock
    histories, so there are ``m ** (2**N - 1)`` of them; all are enumerated.
    """
    vols = np.asarray(sorted(vol_set), dtype=float)
    m = len(vols)
    n_hist = 2 ** N - 1
    total = m ** n_hist
    if total > cap:
        raise EnumerationCapExceeded(f"{total} controls exceed the cap {cap}")
    steps = vols * math.sqrt(T / N)
    # leaf paths: bit k of the leaf index is the shock at step k (1 = up)
    leaves = np.arange(2 ** N)
    shock = np.where((leaves[:, None] >> np.arange(N)[None, :]) & 1, 1.0, -1.0)
    # history node visited at step k along each leaf, heap-ordered (root 0, children 2n+1, 2n+2)
    node = np.zeros((2 ** N, N), dtype=np.int64)
    for k in range(1, N):
        node[:, k] = 2 * node[:, k - 1] + 1 + (shock[:, k - 1] > 0)
    # a control = (choices on the first N-1 levels, choices on the last level);
    # the coordinate of each leaf is the prefix part plus the last increment
    n_prefix = 2 ** (N - 1) - 1
    prefix = _all_choices(m, n_prefix)
    last = _all_choices(m, 2 ** (N - 1))
    base = np.zeros((len(prefix), 2 ** N))
    for k in range(N - 1):
        base = base + shock[None, :, k] * steps[prefix[:, node[:, k]]]
    tail = shock[None, :, N - 1] * steps[last[:, node[:, N - 1] - n_prefix]]

    best = -np.inf
    rows = max(1, _CHUNK // tail.size)
    for start in range(0, len(base), rows):
        x = base[start:start + rows, None, :] + tail[None, :, :]
        values = np.asarray(terminal(x), dtype=float) * np.ones_like(x)
        best = max(best, float(np.max(values.mean(axis=2))))
    return best


def _all_choices(m, slots):
    """Every assignment of ``m`` choices to ``slots`` slots, shape (m**slots, slots)."""
    if slots == 0:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*([np.arange(m)] * slots), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def classical_binomial_expectation(terminal, lattice):
    """Forward sum over a single-volatility binomial walk on the lattice grid."""
    N = lattice.N
    r = lattice.refinement
    total = 0.0
    for k in range(N + 1):
        weight = math.comb(N, k) / 2.0 ** N
        j = (2 * k - N) * r
        x = lattice.grid[min(max(j + lattice.J, 0), lattice.n_nodes - 1)]
        total += weight * float(terminal(x))
    return total


def quadratic_closed_form(g, T, sign):
    """E[B_T^2] = sigma_hi^2 T and E[-B_T^2] = -sigma_lo^2 T."""
    if sign == 1:
        return g.sigma_hi ** 2 * T
    if sign == -1:
        return -(g.sigma_lo ** 2) * T
    raise ValueError("sign must be +1 or -1")


def picard_lipschitz_solve(spec, terminal, lattice, tol=DEFAULT_TOL, alpha=None,
                           lipschitz=None, max_iter=10_000):
    """Lattice solve with the generator step done by fixed-point iteration.

    Iterates ``y <- S + dt * f(t, y, Z)`` from ``y = S``; needs
    ``dt * Lip_y < 1``.  With ``alpha`` the regularized generator is used and
    its y-Lipschitz constant is ``2/alpha + u_t``; otherwise ``lipschitz``
    (a number or a function of t) must be supplied.
    """
    dt = lattice.dt
    if alpha is not None:
        f = lambda t, y, z: regularized_generator(spec, alpha, t, y, z, min(tol, 1e-13))  # noqa: E731
        lip = lambda t: 2.0 / alpha + spec.u(t)  # noqa: E731
    else:
        if lipschitz is None:
            raise ValueError("a y-Lipschitz bound is required without alpha")
        f = spec.f
        lip = lipschitz if callable(lipschitz) else (lambda t: np.zeros_like(t) + lipschitz)
    q = float(np.max(dt * np.asarray(lip(lattice.times[:-1]))))
    if not q < 1:
        raise ContractionViolation(f"dt * Lip = {q:.6g} >= 1")
    N, n = lattice.N, lattice.n_nodes
    vols = np.asarray(lattice.vol_set)
    m = len(vols)
    Y = np.empty((N + 1, n))
    Z = np.empty((N, n))
    sig = np.empty((N, n))
    dK = np.empty((N, m, n))
    Y[N] = terminal.sample(lattice)
    nodes = np.arange(n)
    # stop when successive iterates differ by (1-q)/q * tol, so the fixed-point error is <= tol
    stop = tol * (1 - q) / max(q, 1e-300)
    for i in range(N - 1, -1, -1):
        cand, up, down = sup_candidates(Y[i + 1], lattice)
        k = argmax_largest(cand)
        S = cand[k, nodes]
        Z[i] = (up[k, nodes] - down[k, nodes]) / (2.0 * vols[k] * lattice.sqrt_dt)
        sig[i] = vols[k]
        dK[i] = cand - S[None, :]
        t = np.full(n, lattice.times[i])
        y = S.copy()
        for _ in range(max_iter):
            y_new = S + dt * np.asarray(f(t, y, Z[i]))
            delta = float(np.max(np.abs(y_new - y)))
            y = y_new
            if delta <= stop:
                break
        else:
            raise ContractionViolation(f"picard iteration did not settle at slice {i}")
        Y[i] = y
    return GBSDESolution(ValueField(Y, lattice), Z, sig, dK, lattice, spec, alpha)


def run_oracle_battery(lattice_cfg=None, tol=DEFAULT_TOL, picard_tol=DEFAULT_TOL):
    """Every oracle comparison used by ``oracle-check``; returns a list of OracleReport."""
    from .solver import solve
    from .sublinear import (GConfig, build_lattice, conditional_g_expectation,
                            exact_tree_expectation, make_terminal)
    from .yosida import make_generator

    lo, hi = 0.5, 1.0
    if lattice_cfg is not None:
        lo, hi = lattice_cfg.sigma_lo, lattice_cfg.sigma_hi
    g = GConfig(lo, hi)
    reports = []
    payoffs = [make_terminal("quadratic"), make_terminal("identity"), make_terminal("call", K=0.2)]
    for N in range(1, 5):
        for m in (1, 2, 3):
            vols = (hi,) if m == 1 else tuple(float(v) for v in np.linspace(lo, hi, m))
            for p in payoffs:
                reports.append(OracleReport.compare(
                    f"brute_force N={N} vol_set={list(vols)} payoff={p.name}",
                    brute_force_g_expectation(p, 1.0, N, vols),
                    exact_tree_expectation(p, 1.0, N, vols), 1e-12))

    lat = build_lattice(1.0, 200, g, 5, 5.0)
    for sign, name, tolerance in ((1, "quadratic", 1e-6), (-1, "neg_quadratic", 2e-3)):
        reports.append(OracleReport.compare(
            f"closed_form {name} N=200", quadratic_closed_form(g, 1.0, sign),
            conditional_g_expectation(make_terminal(name), lat).root, tolerance))

    flat = build_lattice(1.0, 16, GConfig(hi, hi), 3, 4.0)
    for p in payoffs:
        oracle = classical_binomial_expectation(p, flat)
        engine = conditional_g_expectation(p, flat).root
        reports.append(OracleReport.compare(f"binomial sigma_lo=sigma_hi payoff={p.name}",
                                            oracle, engine, 1e-12 * max(1.0, abs(oracle))))

    lat = build_lattice(1.0, 100, g, 5, 5.0)
    lin = make_generator("linear_decay", 1.0, {"k": 1.0})
    xi = make_terminal("quadratic")
    oracle = (1.0 + lat.dt) ** -lat.N * conditional_g_expectation(xi, lat).root
    reports.append(OracleReport.compare("linear generator k=1 N=100", oracle,
                                        solve(lin, xi, lat, tol=tol).root, 1e-9 * abs(oracle)))

    lat = build_lattice(1.0, 50, g, 5, 5.0)
    gen = make_generator("signed_sqrt", 1.0)
    call = make_terminal("call", K=0.0)
    a = solve(gen, call, lat, alpha=0.1, tol=tol)
    b = picard_lipschitz_solve(gen, call, lat, picard_tol, alpha=0.1)
    k = int(np.argmax(np.abs(a.Y.values - b.Y.values)))
    reports.append(OracleReport.compare("picard vs implicit signed_sqrt alpha=0.1 N=50 (worst node)",
                                        b.Y.values.flat[k], a.Y.values.flat[k], 1e-8))
    return reports
