"""Discrete G-expectation on a recombining lattice.

The canonical process lives on the grid ``x_j = j * dx`` for ``j in [-J, J]``.
One backward step from a node at ``x`` takes the worst (largest) of the
symmetric two-point averages ``(v(x + s*sqrt(dt)) + v(x - s*sqrt(dt))) / 2``
over the finite volatility set.  Off-grid children are linearly interpolated
and the slice is clamped beyond the outermost nodes.

The grid spacing is ``dx = sigma_hi*sqrt(dt) / refinement``, so the
``sigma_hi`` children always sit exactly ``refinement`` nodes away.  All
positions are handled in index units internally, which keeps on-grid
children bit-exact.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ConfigError, NonFiniteValue

DEFAULT_MAX_ENTRIES = 50_000_000


@dataclass(frozen=True)
class GConfig:
    sigma_lo: float
    sigma_hi: float

    def __post_init__(self):
        if not (self.sigma_lo > 0):
            raise ConfigError("sigma_lo", "must be > 0")
        if not (math.isfinite(self.sigma_hi) and self.sigma_hi >= self.sigma_lo):
            raise ConfigError("sigma_hi", "must be finite and >= sigma_lo")


def g_coefficient(a, g):
    """G(a) = (sigma_hi^2 a^+ - sigma_lo^2 a^-) / 2."""
    a = np.asarray(a, dtype=float)
    out = 0.5 * (g.sigma_hi ** 2 * np.maximum(a, 0.0) - g.sigma_lo ** 2 * np.maximum(-a, 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Lattice:
    T: float
    N: int
    g: GConfig
    J: int
    vol_set: tuple
    refinement: int = 2
    truncation_factor: float = 5.0

    @property
    def dt(self):
        return self.T / self.N

    @property
    def sqrt_dt(self):
        return math.sqrt(self.dt)

    @property
    def spatial_spacing(self):
        """Distance travelled by a sigma_hi step, ``sigma_hi*sqrt(dt)``."""
        return self.g.sigma_hi * self.sqrt_dt

    @property
    def dx(self):
        return self.spatial_spacing / self.refinement

    @property
    def n_nodes(self):
        return 2 * self.J + 1

    @cached_property
    def times(self):
        return np.array([i * self.T / self.N for i in range(self.N + 1)])

    @cached_property
    def grid(self):
        return np.arange(-self.J, self.J + 1) * self.dx

    @cached_property
    def offsets(self):
        """Child offsets in index units, one per volatility in ``vol_set``."""
        return np.array([self.refinement * (s / self.g.sigma_hi) for s in self.vol_set])

    @cached_property
    def _node_children(self):
        # per-sigma (lo, hi, w) for the up and down children of every grid node
        idx = np.arange(self.n_nodes, dtype=float)
        return [(_weights(idx + o, self.n_nodes), _weights(idx - o, self.n_nodes))
                for o in self.offsets]

    def position(self, x):
        """Fractional node index of coordinate ``x``; snaps to integers within 1e-9."""
        pos = np.asarray(x, dtype=float) / self.dx + self.J
        near = np.rint(pos)
        return np.where(np.abs(pos - near) < 1e-9, near, pos)

    def sigma_index(self, sigma):
        matches = [k for k, s in enumerate(self.vol_set) if s == sigma]
        if not matches:
            raise ValueError(f"sigma {sigma!r} is not in the volatility set {self.vol_set}")
        return matches[0]


def build_lattice(T, N, g, m_vol=5, truncation_factor=5.0, refinement=2,
                  max_entries=DEFAULT_MAX_ENTRIES):
    """Build the space-time lattice covering ``truncation_factor`` standard deviations."""
    if not (T > 0 and math.isfinite(T)):
        raise ConfigError("T", "must be finite and > 0")
    if int(N) != N or N < 1:
        raise ConfigError("N", "must be a positive integer")
    if int(m_vol) != m_vol or m_vol < 2:
        raise ConfigError("m_vol", "must be an integer >= 2")
    if not truncation_factor >= 1:
        raise ConfigError("truncation_factor", "must be >= 1")
    if int(refinement) != refinement or refinement < 1:
        raise ConfigError("refinement", "must be a positive integer")
    if g.sigma_lo > g.sigma_hi:
        raise ConfigError("sigma_lo", "must not exceed sigma_hi")
    N, m_vol, refinement = int(N), int(m_vol), int(refinement)
    dx = g.sigma_hi * math.sqrt(T / N) / refinement
    J = max(1, math.ceil(truncation_factor * g.sigma_hi * math.sqrt(T) / dx - 1e-9))
    while J * dx < truncation_factor * g.sigma_hi * math.sqrt(T):
        J += 1
    if g.sigma_lo == g.sigma_hi:
        vol_set = (float(g.sigma_hi),)
    else:
        inner = np.linspace(g.sigma_lo, g.sigma_hi, m_vol)
        vol_set = tuple([float(g.sigma_lo)] + [float(s) for s in inner[1:-1]] + [float(g.sigma_hi)])
    entries = (N + 1) * (2 * J + 1) * len(vol_set)
    if entries > max_entries:
        raise ConfigError("N", f"lattice needs {entries} table entries, above the cap {max_entries}")
    return Lattice(T=float(T), N=N, g=g, J=J, vol_set=vol_set, refinement=refinement,
                   truncation_factor=float(truncation_factor))


def _weights(pos, n):
    pos = np.clip(pos, 0.0, n - 1.0)
    lo = np.floor(pos).astype(np.intp)
    lo = np.minimum(lo, n - 1)
    w = pos - lo
    hi = np.minimum(lo + 1, n - 1)
    return lo, hi, w


def _interp_weights(values, weights):
    lo, hi, w = weights
    v_lo = values[lo]
    return v_lo + w * (values[hi] - v_lo)


def _interp_at(values, pos):
    return _interp_weights(values, _weights(np.asarray(pos, dtype=float), len(values)))


def interpolate(slice_values, x, lattice):
    """Piecewise-linear interpolation of one time slice, clamped outside the grid."""
    out = _interp_at(np.asarray(slice_values, dtype=float), lattice.position(x))
    return float(out) if np.ndim(out) == 0 else out


def sup_candidates(next_slice, lattice, pos=None):
    """Two-point averages for every volatility.

    Returns ``(cand, up, down)`` each shaped ``(m_vol,) + shape``, evaluated at
    every grid node when ``pos`` is None, else at fractional positions ``pos``.
    """
    v = np.asarray(next_slice, dtype=float)
    if pos is None:
        ups = [_interp_weights(v, up) for up, _ in lattice._node_children]
        downs = [_interp_weights(v, dn) for _, dn in lattice._node_children]
    else:
        pos = np.asarray(pos, dtype=float)
        ups = [_interp_at(v, pos + o) for o in lattice.offsets]
        downs = [_interp_at(v, pos - o) for o in lattice.offsets]
    up = np.array(ups)
    down = np.array(downs)
    return 0.5 * (up + down), up, down


def argmax_largest(cand):
    """Index of the maximum along axis 0, ties going to the largest index."""
    m = cand.shape[0]
    return m - 1 - np.argmax(cand[::-1], axis=0)


def one_step_sup(next_slice, x, lattice):
    """Worst-case one-step expectation at coordinate(s) ``x``: ``(value, sigma_star)``."""
    cand, _, _ = sup_candidates(next_slice, lattice, lattice.position(x))
    k = argmax_largest(cand)
    value = np.take_along_axis(cand, k[None], axis=0)[0]
    sigma = np.asarray(lattice.vol_set)[k]
    if np.ndim(value) == 0:
        return float(value), float(sigma)
    return value, sigma


@dataclass(frozen=True)
class ValueField:
    """Real values on every lattice node, ``values[i, j]`` for slice i and node j - J."""

    values: np.ndarray
    lattice: Lattice = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def root(self):
        return float(self.values[0, self.lattice.J])

    def at(self, i, x):
        return interpolate(self.values[i], x, self.lattice)

    def rows(self, value_name="value"):
        times = self.lattice.times
        grid = self.lattice.grid
        for i in range(self.values.shape[0]):
            t = repr(float(times[i]))
            for j, x in enumerate(grid):
                yield f"{t},{float(x)!r},{float(self.values[i, j])!r}"

    def to_csv(self, path, value_name="value"):
        write_rows(path, f"t,x,{value_name}", self.rows())


def write_rows(path, header, rows):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


@dataclass(frozen=True)
class TerminalSpec:
    name: str
    params: dict
    payoff: object = field(repr=False, compare=False)

    def __call__(self, x):
        return self.payoff(np.asarray(x, dtype=float))

    def sample(self, lattice):
        values = np.asarray(self(lattice.grid), dtype=float) * np.ones(lattice.n_nodes)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise NonFiniteValue(f"terminal payoff '{self.name}' is not finite",
                                 (lattice.N, int(bad[0]) - lattice.J))
        return values

    def to_dict(self):
        return {"name": self.name, "params": dict(self.params)}


def make_terminal(name, **params):
    """Terminal payoffs accepted in configs."""
    if name == "quadratic":
        _no_params(name, params)
        return TerminalSpec(name, {}, lambda x: x * x)
    if name == "neg_quadratic":
        _no_params(name, params)
        return TerminalSpec(name, {}, lambda x: -(x * x))
    if name == "identity":
        _no_params(name, params)
        return TerminalSpec(name, {}, lambda x: x + 0.0)
    if name == "call":
        _only_params(name, params, {"K"})
        K = float(params.get("K", 0.0))
        return TerminalSpec(name, {"K": K}, lambda x: np.maximum(x - K, 0.0))
    if name == "constant":
        _only_params(name, params, {"c"})
        c = float(params.get("c", 0.0))
        return TerminalSpec(name, {"c": c}, lambda x: np.zeros_like(x) + c)
    raise ConfigError("terminal.name", f"unknown payoff '{name}'; expected one of "
                      "quadratic, neg_quadratic, identity, call, constant")


def perturbed(terminal, eps, eta):
    """``terminal + eps * eta`` as a new terminal spec."""
    return TerminalSpec("perturbed",
                        {"base": terminal.to_dict(), "eps": float(eps), "eta": eta.to_dict()},
                        lambda x: terminal(x) + eps * eta(x))


def _no_params(name, params):
    _only_params(name, params, set())


def _only_params(name, params, allowed):
    extra = set(params) - allowed
    if extra:
        raise ConfigError("terminal.params", f"payoff '{name}' does not take {sorted(extra)}")


def conditional_g_expectation(terminal, lattice):
    """Backward induction for the discrete conditional G-expectation of ``terminal``."""
    values = np.empty((lattice.N + 1, lattice.n_nodes))
    values[-1] = terminal.sample(lattice)
    for i in range(lattice.N - 1, -1, -1):
        cand, _, _ = sup_candidates(values[i + 1], lattice)
        values[i] = cand.max(axis=0)
    return ValueField(values, lattice)


def exact_tree_expectation(terminal, T, N, vol_set):
    """Discrete G-expectation on the exact non-recombining tree (no interpolation).

    Each level multiplies the state count by ``2 * len(vol_set)``; intended for
    the small trees used to cross-check the lattice engine.
    """
    steps = np.asarray(vol_set, dtype=float) * math.sqrt(T / N)
    signs = np.array([-1.0, 1.0])
    x = np.zeros(1)
    for _ in range(N):
        inc = (signs[None, :] * steps[:, None]).ravel()
        x = (x[:, None] + inc[None, :]).ravel()
    v = np.asarray(terminal(x), dtype=float) * np.ones_like(x)
    m = len(steps)
    for _ in range(N):
        v = v.reshape(-1, m, 2)
        v = (0.5 * (v[..., 0] + v[..., 1])).max(axis=1)
    return float(v[0])
