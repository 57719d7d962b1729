"""Backward lattice solver for G-BSDEs with a monotone generator.

One step from slice ``i+1`` to slice ``i`` at node ``x``:

* ``S, sigma*`` = worst-case two-point average of ``Y[i+1]`` and its maximizer,
* ``Z`` = central difference of ``Y[i+1]`` across the ``sigma*`` children,
* ``Y[i]`` solves ``y - dt * f(t_i, y, Z) = S`` (implicit in the generator),
* ``dK(sigma)`` = two-point average under ``sigma`` minus ``S`` (<= 0, = 0 at ``sigma*``).

With ``alpha`` given the generator is replaced by its Yosida regularization.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import sublinear
from .errors import NumericalError, StepConditionViolation
from .rootfind import solve_increasing
from .sublinear import ValueField, argmax_largest, sup_candidates, write_rows
from .yosida import DEFAULT_TOL, regularized_generator


def implicit_step(S, t, z, spec, dt, tol=DEFAULT_TOL, f=None):
    """Unique ``y`` with ``y - dt * f(t, y, z) = S``.

    ``f`` defaults to ``spec.f``; it only needs to satisfy the monotonicity
    rate ``spec.u``, which makes the residual increasing when ``dt*u < 1``.
    """
    f = spec.f if f is None else f
    S, t, z = np.broadcast_arrays(np.asarray(S, dtype=float), np.asarray(t, dtype=float),
                                  np.asarray(z, dtype=float))
    rate = float(np.max(dt * spec.u(t)))
    if not rate < 1:
        raise StepConditionViolation(f"dt*u = {rate:.6g} >= 1; refine the time grid")

    def residual(y):
        return y - dt * f(t, y, z) - S

    f0 = np.asarray(f(t, S, z), dtype=float)
    radius = np.maximum(1.0, np.abs(dt * f0))
    radius = np.where(np.isfinite(radius), radius, 1.0)
    y, _, _ = solve_increasing(residual, S, radius, tol)
    return float(y) if y.ndim == 0 else y


def _index_offset(sigma, dt, lattice):
    if dt == lattice.dt:
        return lattice.refinement * (sigma / lattice.g.sigma_hi)
    return sigma * math.sqrt(dt) / lattice.dx


def extract_z(next_slice, x, sigma_star, dt, lattice):
    """Central difference of the next slice across the ``sigma_star`` children."""
    v = np.asarray(next_slice, dtype=float)
    pos = lattice.position(x)
    off = _index_offset(np.asarray(sigma_star, dtype=float), dt, lattice)
    up = sublinear._interp_at(v, pos + off)
    down = sublinear._interp_at(v, pos - off)
    out = (up - down) / (2.0 * np.asarray(sigma_star) * math.sqrt(dt))
    return float(out) if np.ndim(out) == 0 else out


def k_increment(next_slice, x, sigma, S, dt, lattice):
    """Two-point average under ``sigma`` minus the node's worst-case value ``S``."""
    v = np.asarray(next_slice, dtype=float)
    pos = lattice.position(x)
    off = _index_offset(np.asarray(sigma, dtype=float), dt, lattice)
    out = 0.5 * (sublinear._interp_at(v, pos + off) + sublinear._interp_at(v, pos - off)) - S
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class GBSDESolution:
    Y: ValueField
    Z: np.ndarray
    sigma_star: np.ndarray
    k_increments: np.ndarray  # (N, m_vol, nodes)
    lattice: sublinear.Lattice = field(repr=False)
    generator: object = field(repr=False, default=None)
    alpha: float = None

    @property
    def root(self):
        return self.Y.root

    def write_csv(self, directory):
        import os
        lat = self.lattice
        times, grid = lat.times, lat.grid
        self.Y.to_csv(os.path.join(directory, "Y.csv"))

        def per_node(table):
            for i in range(lat.N):
                t = repr(float(times[i]))
                for j, x in enumerate(grid):
                    yield f"{t},{float(x)!r},{float(table[i, j])!r}"

        write_rows(os.path.join(directory, "Z.csv"), "t,x,value", per_node(self.Z))
        write_rows(os.path.join(directory, "sigma_star.csv"), "t,x,sigma", per_node(self.sigma_star))

        def k_rows():
            for i in range(lat.N):
                t = repr(float(times[i]))
                for j, x in enumerate(grid):
                    xs = repr(float(x))
                    for k, s in enumerate(lat.vol_set):
                        yield f"{t},{xs},{s!r},{float(self.k_increments[i, k, j])!r}"

        write_rows(os.path.join(directory, "K.csv"), "t,x,sigma,delta_k", k_rows())


def minimal_steps(spec, T, N):
    """Smallest step count >= N for which dt * max u over the step times is below 1."""
    n = N
    while n < 10 ** 7:
        times = np.arange(n) * (T / n)
        if float(np.max((T / n) * spec.u(times))) < 1:
            return n
        n = max(n + 1, int(n * 1.25))
    return n


def check_step_condition(spec, lattice, lipschitz=None):
    times = lattice.times[:-1]
    rate = spec.u(times) if lipschitz is None else lipschitz(times)
    worst = float(np.max(lattice.dt * np.asarray(rate)))
    return worst


def solve(spec, terminal, lattice, alpha=None, tol=DEFAULT_TOL):
    """Backward sweep for the G-BSDE with generator ``spec`` (or its regularization)."""
    worst = check_step_condition(spec, lattice)
    if not worst < 1:
        raise StepConditionViolation(
            f"dt*max u = {worst:.6g} >= 1 with N={lattice.N}; use at least "
            f"N={minimal_steps(spec, lattice.T, lattice.N)}")
    dt = lattice.dt
    if alpha is None:
        f = spec.f
    else:
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        inner_tol = min(tol, 0.1 * tol * alpha / dt)

        def f(t, y, z):
            return regularized_generator(spec, alpha, t, y, z, inner_tol)

    N, n = lattice.N, lattice.n_nodes
    m = len(lattice.vol_set)
    vols = np.asarray(lattice.vol_set)
    Y = np.empty((N + 1, n))
    Z = np.empty((N, n))
    sig = np.empty((N, n))
    dK = np.empty((N, m, n))
    Y[N] = terminal.sample(lattice)
    nodes = np.arange(n)
    for i in range(N - 1, -1, -1):
        cand, up, down = sup_candidates(Y[i + 1], lattice)
        k = argmax_largest(cand)
        S = cand[k, nodes]
        s_star = vols[k]
        Z[i] = (up[k, nodes] - down[k, nodes]) / (2.0 * s_star * lattice.sqrt_dt)
        sig[i] = s_star
        dK[i] = cand - S[None, :]
        t = np.full(n, lattice.times[i])
        try:
            Y[i] = implicit_step(S, t, Z[i], spec, dt, tol, f=f)
        except NumericalError as exc:
            raise type(exc)(f"slice {i} (t={lattice.times[i]!r}): {exc}") from exc
        bad = np.flatnonzero(~np.isfinite(Y[i]))
        if bad.size:
            raise NumericalError(f"non-finite Y at node ({i}, {int(bad[0]) - lattice.J})")
    return GBSDESolution(ValueField(Y, lattice), Z, sig, dK, lattice, spec, alpha)


@dataclass(frozen=True)
class PathRecord:
    times: np.ndarray
    x: np.ndarray
    sigma: np.ndarray
    shock: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    K: np.ndarray

    def rows(self):
        n = len(self.sigma)
        for i in range(n + 1):
            head = f"{i},{float(self.times[i])!r},{float(self.x[i])!r}"
            if i < n:
                yield (f"{head},{float(self.sigma[i])!r},{int(self.shock[i])},"
                       f"{float(self.Y[i])!r},{float(self.Z[i])!r},{float(self.K[i])!r}")
            else:
                yield f"{head},,,{float(self.Y[i])!r},,{float(self.K[i])!r}"

    def to_csv(self, path):
        write_rows(path, "step,t,x,sigma,shock,Y,Z,K_cum", self.rows())


_RANDOM = re.compile(r"^random(?:\((-?\d+)\))?$")


def simulate_paths(solution, control="worst_case", seed=0, n_paths=1, shocks=None):
    """Forward simulation of ``n_paths`` paths; returns arrays shaped (n_paths, ...).

    ``control`` is ``"worst_case"``, ``"random"`` / ``"random(seed)"`` (uniform
    i.i.d. volatility per step), or an explicit sequence of N volatilities.
    ``shocks`` optionally fixes the +-1 shocks, shape (n_paths, N).
    """
    lat = solution.lattice
    N, m = lat.N, len(lat.vol_set)
    vols = np.asarray(lat.vol_set)
    rng = np.random.default_rng(seed)
    explicit = None
    mode = control
    if isinstance(control, str):
        match = _RANDOM.match(control)
        if control == "worst_case":
            pass
        elif match:
            mode = "random"
            if match.group(1) is not None:
                rng = np.random.default_rng(int(match.group(1)))
        else:
            raise ValueError(f"unknown control {control!r}")
    else:
        seq = list(control)
        if len(seq) != N:
            raise ValueError(f"control sequence has length {len(seq)}, expected {N}")
        explicit = np.array([lat.sigma_index(float(s)) for s in seq])
        mode = "explicit"
    if shocks is None:
        shocks = np.where(rng.random((n_paths, N)) < 0.5, -1, 1)
    else:
        shocks = np.asarray(shocks, dtype=int).reshape(n_paths, N)
        if not np.all(np.abs(shocks) == 1):
            raise ValueError("shocks must be +-1")

    pos = np.full(n_paths, float(lat.J))
    out_pos = np.empty((n_paths, N + 1))
    out_sig = np.empty((n_paths, N))
    out_y = np.empty((n_paths, N + 1))
    out_z = np.empty((n_paths, N))
    out_k = np.zeros((n_paths, N + 1))
    Yv = solution.Y.values
    Zv = solution.Z
    paths = np.arange(n_paths)
    for i in range(N):
        out_pos[:, i] = pos
        cand, up, down = sup_candidates(Yv[i + 1], lat, pos)
        k_star = argmax_largest(cand)
        S = cand[k_star, paths]
        if mode == "worst_case":
            k = k_star
        elif mode == "random":
            k = rng.integers(0, m, n_paths)
        else:
            k = np.full(n_paths, explicit[i])
        out_sig[:, i] = vols[k]
        out_k[:, i + 1] = out_k[:, i] + (cand[k, paths] - S)
        out_y[:, i] = sublinear._interp_at(Yv[i], pos)
        # Z at on-grid states equals the stored field; off-grid it uses the same difference
        s_star = vols[k_star]
        out_z[:, i] = (up[k_star, paths] - down[k_star, paths]) / (2.0 * s_star * lat.sqrt_dt)
        pos = pos + shocks[:, i] * lat.offsets[k]
    out_pos[:, N] = pos
    out_y[:, N] = sublinear._interp_at(Yv[N], pos)
    del Zv
    x = (out_pos - lat.J) * lat.dx
    return dict(x=x, sigma=out_sig, shock=shocks, Y=out_y, Z=out_z, K=out_k)


def simulate_path(solution, lattice=None, control="worst_case", seed=0, shocks=None):
    """One forward path; K accumulates the visited nodes' increments under ``control``."""
    lat = lattice or solution.lattice
    if lat is not solution.lattice and lat != solution.lattice:
        raise ValueError("lattice does not match the solution")
    sim = simulate_paths(solution, control, seed, 1, None if shocks is None else [shocks])
    return PathRecord(lat.times.copy(), sim["x"][0], sim["sigma"][0], sim["shock"][0],
                      sim["Y"][0], sim["Z"][0], sim["K"][0])
