"""Experiment drivers: alpha-convergence, generator distance, norm audit, stability."""

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .solver import simulate_paths, solve
from .sublinear import (GConfig, TerminalSpec, build_lattice, conditional_g_expectation,
                        make_terminal, perturbed, sup_candidates, argmax_largest)
from .yosida import make_generator, regularized_generator


def build_problem(cfg):
    lc = cfg.lattice
    lattice = build_lattice(lc.T, lc.N, GConfig(lc.sigma_lo, lc.sigma_hi), lc.m_vol,
                            lc.truncation_factor, lc.refinement)
    gen = make_generator(cfg.generator.name, lc.T, cfg.generator.params, cfg.generator.lam)
    terminal = make_terminal(cfg.terminal.name, **cfg.terminal.params)
    return lattice, gen, terminal


@dataclass
class ConvergenceRow:
    alpha: float
    sup_diff: float
    l2_diff: float
    z_diff: float
    runtime: float
    status: str = "ok"


@dataclass
class ConvergenceResult:
    rows: list
    slope: float
    reference: object
    solutions: dict

    @property
    def strictly_decreasing(self):
        d = [r.sup_diff for r in self.rows if r.status == "ok"]
        return all(b < a for a, b in zip(d, d[1:]))

    def monotone(self, tol_root):
        """Non-increasing, allowing one adjacent inversion below 10*tol_root."""
        d = [r.sup_diff for r in self.rows if r.status == "ok"]
        inversions = [(a, b) for a, b in zip(d, d[1:]) if b > a]
        return len(inversions) == 0 or (len(inversions) == 1
                                         and max(inversions[0]) < 10 * tol_root)


def fit_slope(alphas, diffs):
    """Least-squares slope of log(diff) against log(alpha); nan with < 2 usable points."""
    pts = [(a, d) for a, d in zip(alphas, diffs) if d > 0 and math.isfinite(d)]
    if len(pts) < 2:
        return float("nan")
    x = np.log([a for a, _ in pts])
    y = np.log([d for _, d in pts])
    return float(np.polyfit(x, y, 1)[0])


def solve_sweep(cfg, problem=None):
    """Reference solve plus one regularized solve per alpha; failed alphas map to the error."""
    lattice, gen, terminal = problem or build_problem(cfg)
    tol = cfg.tolerances.root
    start = time.perf_counter()
    reference = solve(gen, terminal, lattice, tol=tol)
    timings = {"reference": time.perf_counter() - start}
    solutions = {}
    for alpha in cfg.alpha_schedule:
        start = time.perf_counter()
        try:
            solutions[alpha] = solve(gen, terminal, lattice, alpha=alpha, tol=tol)
        except NumericalError as exc:
            solutions[alpha] = exc
        timings[alpha] = time.perf_counter() - start
    return reference, solutions, timings


def run_convergence(cfg, sweep=None):
    """Distance of Y^alpha from the unregularized solution for each alpha in the schedule."""
    reference, solutions, timings = sweep or solve_sweep(cfg)
    lat = reference.lattice
    w = lat.dt * lat.dx
    rows = []
    for alpha in cfg.alpha_schedule:
        sol = solutions[alpha]
        if isinstance(sol, Exception):
            rows.append(ConvergenceRow(alpha, math.nan, math.nan, math.nan, timings[alpha],
                                       f"failed: {sol}"))
            continue
        dy = sol.Y.values - reference.Y.values
        dz = sol.Z - reference.Z
        rows.append(ConvergenceRow(
            alpha=alpha,
            sup_diff=float(np.max(np.abs(dy))),
            l2_diff=float(np.sqrt(np.sum(dy[:-1] ** 2) * w)),
            z_diff=float(np.sqrt(np.sum(dz ** 2) * w)),
            runtime=timings[alpha]))
    ok = [r for r in rows if r.status == "ok"]
    slope = fit_slope([r.alpha for r in ok], [r.sup_diff for r in ok])
    return ConvergenceResult(rows, slope, reference, solutions)


def occupation_measure(solution):
    """Forward distribution of the lattice walk driven by the maximizing volatility."""
    lat = solution.lattice
    n = lat.n_nodes
    rho = np.zeros((lat.N + 1, n))
    rho[0, lat.J] = 1.0
    vols = list(lat.vol_set)
    for i in range(lat.N):
        k_star = np.searchsorted(vols, solution.sigma_star[i])
        for k, (up, down) in enumerate(lat._node_children):
            mass = np.where(k_star == k, 0.5 * rho[i], 0.0)
            for lo, hi, w in (up, down):
                np.add.at(rho[i + 1], lo, mass * (1.0 - w))
                np.add.at(rho[i + 1], hi, mass * w)
    return rho


def generator_gap(spec, alpha, t, y, z, tol=1e-12):
    """|f - f^alpha|^2 pointwise."""
    return (np.asarray(spec.f(t, y, z)) - np.asarray(regularized_generator(spec, alpha, t, y, z, tol))) ** 2


def run_generator_distance(cfg, reference=None, problem=None):
    """Occupation-weighted sum of |f - f^alpha|^2 dt along the reference (Y, Z)."""
    lattice, gen, terminal = problem or build_problem(cfg)
    if reference is None:
        reference = solve(gen, terminal, lattice, tol=cfg.tolerances.root)
    rho = occupation_measure(reference)
    lat = reference.lattice
    t = np.repeat(lat.times[:-1], lat.n_nodes).reshape(lat.N, lat.n_nodes)
    y = reference.Y.values[:-1]
    z = reference.Z
    rows = []
    for alpha in cfg.alpha_schedule:
        gap = generator_gap(gen, alpha, t, y, z, cfg.tolerances.root)
        rows.append({"alpha": alpha, "distance": float(np.sum(rho[:-1] * gap) * lat.dt)})
    return rows


def apriori_bound(gen, terminal, lattice):
    """Node-wise a-priori bound on |Y^alpha|^2 from the exponential energy estimate."""
    square = TerminalSpec("square", {"of": terminal.to_dict()}, lambda x: terminal(x) ** 2)
    e_sq = conditional_g_expectation(square, lattice).values
    const = gen.L ** 2 / lattice.g.sigma_lo ** 2 + 1.0
    bounds = np.empty_like(e_sq)
    for i, t in enumerate(lattice.times):
        theta = gen.u_integral(t, lattice.T) + const * (lattice.T - t)
        bounds[i] = math.exp(2.0 * theta) * (e_sq[i] + gen.h_squared_integral(t, lattice.T))
    return bounds


def z_h2_norm(solution):
    """sqrt of the worst-case expected sum of Z^2 dt, by backward induction."""
    lat = solution.lattice
    W = np.zeros(lat.n_nodes)
    for i in range(lat.N - 1, -1, -1):
        cand, _, _ = sup_candidates(W, lat)
        W = solution.Z[i] ** 2 * lat.dt + cand.max(axis=0)
    return math.sqrt(max(W[lat.J], 0.0))


def sampled_path_norms(solution, n_controls, n_paths, seed):
    """Max over sampled open-loop controls of E[sup|Y|] and E[K_T^2] over sampled paths."""
    lat = solution.lattice
    rng = np.random.default_rng(seed)
    y_sup, k_sq = 0.0, 0.0
    for _ in range(n_controls):
        control = rng.choice(lat.vol_set, size=lat.N)
        shocks = np.where(rng.random((n_paths, lat.N)) < 0.5, -1, 1)
        sim = simulate_paths(solution, control, 0, n_paths, shocks)
        y_sup = max(y_sup, float(np.mean(np.max(np.abs(sim["Y"]), axis=1))))
        k_sq = max(k_sq, float(np.mean(sim["K"][:, -1] ** 2)))
    return y_sup, k_sq


NORM_NAMES = ("y_sup", "z_h2", "k_sq")


def run_norm_audit(cfg, sweep=None, problem=None, slack=1e-6):
    """Per-alpha norm analogues, a boundedness verdict, and the node-wise a-priori check."""
    lattice, gen, terminal = problem or build_problem(cfg)
    reference, solutions, _ = sweep or solve_sweep(cfg, (lattice, gen, terminal))
    bound = apriori_bound(gen, terminal, lattice)
    rows = []
    for alpha in cfg.alpha_schedule:
        sol = solutions[alpha]
        if isinstance(sol, Exception):
            rows.append({"alpha": alpha, "status": f"failed: {sol}"})
            continue
        y_path, k_sq = sampled_path_norms(sol, cfg.sampling.n_controls, cfg.sampling.n_paths,
                                          cfg.seed)
        y2 = sol.Y.values ** 2
        violations = int(np.sum(y2 > bound + slack))
        rows.append({"alpha": alpha, "status": "ok",
                     "y_sup": float(np.max(np.abs(sol.Y.values))),
                     "y_path_sup": y_path,
                     "z_h2": z_h2_norm(sol),
                     "k_sq": k_sq,
                     "bound_violations": violations,
                     "bound_max_ratio": float(np.max(y2 / np.maximum(bound, 1e-300)))})
    ok = [r for r in rows if r["status"] == "ok"]
    verdict = {}
    for name in NORM_NAMES:
        if not ok:
            verdict[name] = "failed"
            continue
        first = ok[0][name]
        top = max(r[name] for r in ok)
        verdict[name] = "bounded" if top <= 2.0 * first + 1e-12 else "unbounded"
    return rows, verdict


def run_stability(cfg, epsilons=None, problem=None):
    """Response of the solution to terminal perturbations xi + eps*eta."""
    lattice, gen, terminal = problem or build_problem(cfg)
    eta = make_terminal(cfg.perturbation.name, **cfg.perturbation.params)
    eta_max = float(np.max(np.abs(eta.sample(lattice))))
    tol = cfg.tolerances.root
    base = solve(gen, terminal, lattice, tol=tol)
    exponent = 2.0 * gen.u_integral(0.0, lattice.T) + gen.L ** 2 / lattice.g.sigma_lo ** 2 * lattice.T
    bound = math.exp(exponent)
    rows = []
    for eps in (cfg.epsilon_schedule if epsilons is None else epsilons):
        sol = solve(gen, perturbed(terminal, eps, eta), lattice, tol=tol)
        dy = np.abs(sol.Y.values - base.Y.values)
        max_dy = float(np.max(dy))
        ratio = max_dy / (eps * eta_max) if eps > 0 and eta_max > 0 else 0.0
        rows.append({"eps": eps, "max_dy": max_dy, "root_dy": float(sol.root - base.root),
                     "ratio": ratio, "bound": bound,
                     "within_bound": ratio <= bound * (1 + 1e-3)})
    return rows
