import math

import numpy as np
import pytest

from gbsde_lab.config import GeneratorConfig, LatticeConfig, RunConfig, TerminalConfig
from gbsde_lab.studies import (apriori_bound, build_problem, fit_slope, generator_gap,
                               occupation_measure, run_convergence, run_generator_distance,
                               run_norm_audit, run_stability, solve_sweep)
from gbsde_lab.yosida import make_generator


def small_cfg(generator="signed_sqrt", params=None, terminal=("call", {"K": 0.0}), N=30,
              sigma_lo=0.5, alphas=(1e-1, 3e-2, 1e-2, 3e-3)):
    return RunConfig(lattice=LatticeConfig(N=N, sigma_lo=sigma_lo, m_vol=3),
                     generator=GeneratorConfig(generator, dict(params or {})),
                     terminal=TerminalConfig(*terminal), alpha_schedule=list(alphas))


def test_fit_slope_recovers_power_law():
    a = [1e-1, 1e-2, 1e-3]
    assert fit_slope(a, [3 * x ** 0.7 for x in a]) == pytest.approx(0.7)
    assert math.isnan(fit_slope([1e-1], [1.0]))


def test_convergence_zero_generator_all_zero():
    result = run_convergence(small_cfg("zero"))
    assert all(r.sup_diff == 0.0 and r.z_diff == 0.0 for r in result.rows)


def test_convergence_linear_generator_is_first_order():
    result = run_convergence(small_cfg("linear_decay", {"k": 1.0}, ("quadratic", {})))
    diffs = [r.sup_diff for r in result.rows]
    assert result.strictly_decreasing
    assert result.slope == pytest.approx(1.0, abs=0.05)
    assert diffs[-1] < diffs[0] / 20   # alpha shrinks 33x across the schedule


def test_convergence_signed_sqrt_decreasing():
    result = run_convergence(small_cfg(alphas=(1e-1, 1e-2, 1e-3, 1e-4)))
    assert result.strictly_decreasing
    assert result.monotone(1e-12)
    assert all(r.status == "ok" for r in result.rows)


def test_monotone_allows_single_tiny_inversion():
    result = run_convergence(small_cfg("zero"))
    result.rows[1].sup_diff = 5e-13
    assert result.monotone(1e-12) and not result.strictly_decreasing


def test_occupation_measure_is_a_distribution():
    cfg = small_cfg()
    ref, _, _ = solve_sweep(cfg)
    rho = occupation_measure(ref)
    assert np.allclose(rho.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(rho >= 0)


def test_generator_gap_linear_example():
    spec = make_generator("linear_decay", 1.0, {"k": 2.0, "u": 0.0})
    assert generator_gap(spec, 0.5, 0.0, 3.0, 0.0) == pytest.approx(9.0, abs=1e-10)


def test_distance_zero_generator():
    assert all(r["distance"] == 0.0 for r in run_generator_distance(small_cfg("zero")))


def test_distance_signed_sqrt_decreasing():
    d = [r["distance"] for r in run_generator_distance(small_cfg())]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_norm_audit_zero_generator():
    cfg = small_cfg("zero", terminal=("quadratic", {}))
    rows, verdict = run_norm_audit(cfg)
    lattice, _, _ = build_problem(cfg)
    top = float(np.max(lattice.grid ** 2))
    assert all(r["y_sup"] == top for r in rows)
    assert all(v == "bounded" for v in verdict.values())


def test_norm_audit_degenerate_has_no_k():
    rows, _ = run_norm_audit(small_cfg("linear_decay", {"k": 1.0}, sigma_lo=1.0))
    assert all(r["k_sq"] == 0.0 for r in rows)


def test_norm_audit_signed_sqrt_bounded():
    rows, verdict = run_norm_audit(small_cfg(alphas=(1e-1, 1e-2, 1e-3, 1e-4)))
    assert verdict == {"y_sup": "bounded", "z_h2": "bounded", "k_sq": "bounded"}
    assert sum(r["bound_violations"] for r in rows) == 0


def test_apriori_bound_covers_reference():
    cfg = small_cfg()
    lattice, gen, xi = build_problem(cfg)
    ref, _, _ = solve_sweep(cfg)
    assert np.all(ref.Y.values ** 2 <= apriori_bound(gen, xi, lattice) + 1e-9)


def test_stability_zero_epsilon():
    rows = run_stability(small_cfg(), epsilons=[0.0])
    assert rows[0]["max_dy"] == 0.0


def test_stability_zero_generator_shifts_by_epsilon():
    rows = run_stability(small_cfg("zero"), epsilons=[0.1, 0.01])
    for r in rows:
        assert r["max_dy"] == pytest.approx(r["eps"], rel=1e-12)
        assert r["ratio"] == pytest.approx(1.0, rel=1e-12)


def test_stability_linear_generator_discount():
    cfg = small_cfg("linear_decay", {"k": 2.0})
    rows = run_stability(cfg, epsilons=[0.1])
    N = cfg.lattice.N
    assert rows[0]["root_dy"] == pytest.approx(0.1 * (1 + 2.0 / N) ** -N, rel=1e-9)
    assert rows[0]["within_bound"]


def test_stability_signed_sqrt_within_bound():
    rows = run_stability(small_cfg())
    assert all(r["within_bound"] for r in rows)
