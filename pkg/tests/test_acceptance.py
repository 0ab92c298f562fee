"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Heavy simulations are shared between criteria through a module-level cache.
Criterion-5/7 sweep CSVs are written to artifacts/ at the repository root so
the plotting package can render them.  Run with ``pytest -s`` to see the
per-criterion lines.
"""

import contextlib
import math
import time
from pathlib import Path

import numpy as np
import pytest

from mirrormps import (NumericalParams, PhysicalParams, dde_integrate,
                       factorial_moments, markov_counting_distribution,
                       nested_sum_correlations, normalize_against_baseline,
                       photon_probabilities, residual_excitation, run_simulation,
                       vacuum_probability)
from mirrormps.cli import main as cli_main, read_records
from mirrormps.mps_core import TruncationPolicy
from mirrormps.observables import closure_error

GAMMA = 1.0
NU = 1.0 / (10.0 * GAMMA * math.sqrt(2.0 * math.log(2.0)))
A2, A4 = 2.0 * math.pi, 4.0 * math.pi
ARTIFACTS = Path(__file__).resolve().parent.parent / "artifacts"

_cache = {}


@contextlib.contextmanager
def criterion(number, summary):
    try:
        yield
    except Exception:
        print(f"[FAIL] criterion {number}: {summary}")
        raise
    print(f"[PASS] criterion {number}: {summary}")


def feedback_run(area, tau, phi, q, cutoff=3, bond=64, thr=1e-7):
    """Cached driven feedback run; returns (stats, trajectory, closure, residual)."""
    key = ("fb", area, tau, phi, q, cutoff, bond, thr)
    if key not in _cache:
        phys = PhysicalParams(gamma=GAMMA, tau=tau, phi=phi, pulse_area=area,
                              pulse_width=NU, feedback_enabled=True)
        num = NumericalParams(dt=tau / q, bin_photon_cutoff=cutoff)
        traj = run_simulation(phys, num, policy=TruncationPolicy(thr, bond))
        stats = photon_probabilities(factorial_moments(traj.final_state,
                                                       on_residual="ignore"))
        clo = closure_error(stats, vacuum_probability(traj.final_state))
        res = residual_excitation(traj.final_state)
        _cache[key] = (stats, traj, clo, res)
    return _cache[key]


def baseline_run(area, dt, cutoff=3):
    """Cached no-feedback twin at the same drive and resolution."""
    key = ("base", area, dt, cutoff)
    if key not in _cache:
        phys = PhysicalParams(gamma=GAMMA, tau=0.0, phi=0.0, pulse_area=area,
                              pulse_width=NU, feedback_enabled=False)
        num = NumericalParams(dt=dt, bin_photon_cutoff=cutoff)
        traj = run_simulation(phys, num)
        stats = photon_probabilities(factorial_moments(traj.final_state))
        clo = closure_error(stats, vacuum_probability(traj.final_state))
        _cache[key] = (stats, traj, clo)
    return _cache[key]


def test_criterion_01_markovian_decay():
    with criterion(1, "no feedback, no drive: population follows exp(-2 gamma t)"):
        t0 = time.perf_counter()
        phys = PhysicalParams(gamma=GAMMA, tau=0.0, feedback_enabled=False,
                              pulse_area=0.0)
        num = NumericalParams(dt=0.004, bin_photon_cutoff=2, t_end=5.0)
        traj = run_simulation(phys, num, start_excited=True, strict=False)
        err = np.max(np.abs(traj.population - np.exp(-2.0 * GAMMA * traj.times)))
        elapsed = time.perf_counter() - t0
        assert err <= 1e-3, f"max abs error {err:.2e}"
        assert elapsed < 10.0, f"runtime {elapsed:.1f}s"


def test_criterion_02_feedback_decay_vs_dde():
    with criterion(2, "spontaneous emission with feedback matches the delay "
                      "equation for phi in {0, pi/2, pi}"):
        tau = 0.5

        def decay_run(phys):
            num = NumericalParams(dt=0.004, bin_photon_cutoff=2, t_end=4 * tau)
            return run_simulation(phys, num, start_excited=True, strict=False)

        # the pointwise dominance checks compare against the no-feedback twin
        # at the same discretization, so the O(gamma dt) offset common to both
        # curves cancels where they touch at t = tau
        markov = decay_run(PhysicalParams(gamma=GAMMA, tau=0.0,
                                          feedback_enabled=False, pulse_area=0.0))
        for phi in (0.0, math.pi / 2.0, math.pi):
            traj = decay_run(PhysicalParams(gamma=GAMMA, tau=tau, phi=phi,
                                            feedback_enabled=True, pulse_area=0.0))
            sol = dde_integrate(GAMMA, tau, phi, 4 * tau, traj.grid.dt / 2.0)
            dde_pop = sol.population[::2][:traj.population.size]
            w1 = (traj.times >= tau) & (traj.times <= 2 * tau)
            w2 = (traj.times >= 2 * tau) & (traj.times <= 4 * tau)
            e1 = np.max(np.abs(traj.population[w1] - dde_pop[w1]))
            e2 = np.max(np.abs(traj.population[w2] - dde_pop[w2]))
            assert e1 <= 1e-3, f"phi={phi}: [tau,2tau] error {e1:.2e}"
            assert e2 <= 3e-3, f"phi={phi}: [2tau,4tau] error {e2:.2e}"
            if phi == 0.0:
                assert np.all(traj.population[w1] <= markov.population[w1] + 1e-9), \
                    "phi=0 must not exceed the memoryless decay"
            if phi == math.pi:
                assert np.all(traj.population[w1] >= markov.population[w1] - 1e-9), \
                    "phi=pi must dominate the memoryless decay"


def test_criterion_03_rabi_calibration():
    with criterion(3, "isolated pulse leaves sin^2(A/2) excited"):
        nu = 1.0
        for area in (math.pi / 2.0, math.pi, 2.0 * math.pi):
            phys = PhysicalParams(gamma=1e-3 / nu, tau=0.0, feedback_enabled=False,
                                  pulse_area=area, pulse_width=nu)
            num = NumericalParams(dt=nu / 25.0, bin_photon_cutoff=2,
                                  t_start=-5.0 * nu, t_end=3.0 * nu)
            traj = run_simulation(phys, num, strict=False)
            want = math.sin(area / 2.0) ** 2
            diff = abs(traj.population[-1] - want)
            assert diff <= 1e-2, f"A={area:.3f}: |pop - sin^2(A/2)| = {diff:.2e}"


def test_criterion_04_no_feedback_photon_statistics():
    with criterion(4, "no-feedback p(n) at A=2pi matches the counting hierarchy "
                      "and shows p2 > p1"):
        t0 = time.perf_counter()
        stats, _, clo = baseline_run(A2, dt=0.004)
        hierarchy = markov_counting_distribution(A2, NU, GAMMA)
        assert stats.p2 > stats.p1
        assert hierarchy[2] > hierarchy[1]
        for n in (1, 2, 3):
            got = (stats.p1, stats.p2, stats.p3)[n - 1]
            assert abs(got - hierarchy[n]) <= 1e-2, \
                f"p({n}): mps {got:.5f} vs hierarchy {hierarchy[n]:.5f}"
        assert clo <= 5e-3
        assert time.perf_counter() - t0 < 300.0


def test_criterion_05_two_photon_enhancement_headline():
    with criterion(5, "A=2pi, phi=0, tau*gamma=0.06: p2 up ~50%, p1 unchanged"):
        tau = 0.06
        fb30, _, clo30, _ = feedback_run(A2, tau, 0.0, q=30)
        fb15, _, _, _ = feedback_run(A2, tau, 0.0, q=15)
        base, _, _ = baseline_run(A2, dt=tau / 30.0)
        norm = normalize_against_baseline(fb30, base)
        base15, _, _ = baseline_run(A2, dt=tau / 15.0)
        norm15 = normalize_against_baseline(fb15, base15)
        pbar3_err = abs(norm.pbar3 - norm15.pbar3)
        print(f"    pbar1={norm.pbar1:.4f} pbar2={norm.pbar2:.4f} "
              f"pbar3={norm.pbar3:.4f} +/- {pbar3_err:.4f} (dt-halving error bar)")
        assert 1.35 <= norm.pbar2 <= 1.65, f"pbar2={norm.pbar2:.4f}"
        assert 0.90 <= norm.pbar1 <= 1.10, f"pbar1={norm.pbar1:.4f}"
        assert clo30 <= 5e-3


def test_criterion_06_four_pi_pulse_control():
    with criterion(6, "A=4pi, tau*gamma=0.05: p2 up ~40%, p1 down ~30%"):
        t0 = time.perf_counter()
        tau = 0.05
        fb, traj, clo, _ = feedback_run(A4, tau, 0.0, q=24, cutoff=4)
        base, _, base_clo = baseline_run(A4, dt=tau / 24.0, cutoff=4)
        norm = normalize_against_baseline(fb, base)
        elapsed = time.perf_counter() - t0
        print(f"    pbar1={norm.pbar1:.4f} pbar2={norm.pbar2:.4f} "
              f"closure fb={clo:.1e} base={base_clo:.1e} ({elapsed:.0f}s)")
        assert 1.25 <= norm.pbar2 <= 1.55, f"pbar2={norm.pbar2:.4f}"
        assert 0.60 <= norm.pbar1 <= 0.80, f"pbar1={norm.pbar1:.4f}"
        assert clo <= 5e-3 and base_clo <= 5e-3
        assert elapsed < 900.0, f"runtime {elapsed:.0f}s"
        # the no-feedback twin also agrees with the counting hierarchy here
        hierarchy = markov_counting_distribution(A4, NU, GAMMA, n_cut=6)
        for n, got in zip((1, 2, 3), (base.p1, base.p2, base.p3)):
            assert abs(got - hierarchy[n]) <= 1e-2


def _phase_map_csv(tmp_path_factory=None):
    """Run the criterion-7 phase sweep through the CLI and return the records."""
    key = "phase_map"
    if key not in _cache:
        ARTIFACTS.mkdir(exist_ok=True)
        out = ARTIFACTS / "criterion7_phase_map.csv"
        cfg = ARTIFACTS / "criterion7.cfg"
        phis = [0.0, math.pi / 4, -math.pi / 4, math.pi,
                math.pi + math.pi / 4, math.pi - math.pi / 4]
        cfg.write_text(
            "gamma = 1.0\n"
            f"pulse_area = {A2!r}\n"
            f"pulse_width = {NU!r}\n"
            "dt = 0.004\n"
            "outputs = correlations,probabilities,normalized\n"
            "baseline_mode = auto\n"
            "sweep_axis1 = tau\n"
            "sweep_axis1_values = 0.06\n"
            "sweep_axis2 = phi\n"
            f"sweep_axis2_values = {','.join(repr(p) for p in phis)}\n")
        code = cli_main(["sweep", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        _cache[key] = read_records(str(out))
    return _cache[key]


def test_criterion_07_phase_map_structure():
    with criterion(7, "r/r_baseline > 1 around phi=0 and < 1 around phi=pi "
                      "at tau*gamma=0.06"):
        records = _phase_map_csv()
        by_phi = {round(r["phi"], 6): r for r in records}
        two_pi = 2.0 * math.pi
        enhanced = [0.0, math.pi / 4, (-math.pi / 4) % two_pi]
        suppressed = [math.pi, math.pi + math.pi / 4, math.pi - math.pi / 4]
        for phi in enhanced:
            rr = by_phi[round(phi, 6)]["r_over_r_baseline"]
            assert rr > 1.0, f"phi={phi:.3f}: r/r0={rr:.3f} should exceed 1"
        for phi in suppressed:
            rr = by_phi[round(phi, 6)]["r_over_r_baseline"]
            assert rr < 1.0, f"phi={phi:.3f}: r/r0={rr:.3f} should be below 1"


def test_criterion_08_numerical_robustness():
    with criterion(8, "dt halving < 0.5% (order >= 1.8 on p2), bond/threshold "
                      "sensitivity < 0.3%, closure <= 5e-3"):
        tau = 0.06
        s15, _, c15, _ = feedback_run(A2, tau, 0.0, q=15)
        s30, _, c30, _ = feedback_run(A2, tau, 0.0, q=30)
        s60, _, c60, _ = feedback_run(A2, tau, 0.0, q=60)
        for name, a, b in (("p1", s30.p1, s60.p1), ("p2", s30.p2, s60.p2),
                           ("p3", s30.p3, s60.p3)):
            change = abs(a - b) / b
            assert change < 5e-3, f"{name} changes {change*100:.2f}% on dt halving"
        order = math.log2(abs((s15.p2 - s30.p2) / (s30.p2 - s60.p2)))
        print(f"    observed dt-order on p2: {order:.2f}")
        assert order >= 1.8, f"observed order {order:.2f}"
        sb, _, _, _ = feedback_run(A2, tau, 0.0, q=15, bond=128)
        st, _, _, _ = feedback_run(A2, tau, 0.0, q=15, thr=1e-8)
        ref, _, _, _ = feedback_run(A2, tau, 0.0, q=15)
        for name, r, b, t in (("p1", ref.p1, sb.p1, st.p1),
                              ("p2", ref.p2, sb.p2, st.p2),
                              ("p3", ref.p3, sb.p3, st.p3)):
            assert abs(b - r) / r < 3e-3, f"{name} moves with bond doubling"
            assert abs(t - r) / r < 3e-3, f"{name} moves with threshold/10"
        for clo in (c15, c30, c60):
            assert clo <= 5e-3


def test_criterion_09_correlation_cross_check():
    with criterion(9, "factorial-moment MPO equals the nested time-ordered sums"):
        _, traj, _, _ = feedback_run(A2, 0.06, 0.0, q=15)
        state = traj.final_state
        # restrict both routes to the 300 most occupied contiguous bins
        from mirrormps.observables import bin_occupations
        labels, occ = bin_occupations(state.copy())
        window = 300
        sums = np.convolve(occ, np.ones(window), mode="valid")
        start = int(np.argmax(sums))
        bin_range = (int(labels[start]), int(labels[start + window - 1]) + 1)
        a = factorial_moments(state, bin_range=bin_range, on_residual="ignore")
        b = nested_sum_correlations(state, bin_range=bin_range, on_residual="ignore")
        for name, x, y in (("C1", a.c1, b.c1), ("C2", a.c2, b.c2), ("C3", a.c3, b.c3)):
            assert abs(x - y) <= 1e-8, f"{name}: {x!r} vs {y!r}"


def test_criterion_10_dense_oracle_suite():
    with criterion(10, "core chain operations match the dense reference on "
                       "randomized chains of <= 6 sites"):
        # the detailed randomized suite lives in test_mps_core; rerun the
        # pipeline check here so the acceptance module is self-contained
        from dense_reference import (dense_apply_gate, dense_expectation,
                                     dense_swap, random_state, random_unitary,
                                     state_to_dense)
        from mirrormps.mps_core import (EXACT, apply_gate, expectation_local,
                                        move_center, swap_adjacent)
        rng = np.random.default_rng(5)
        for _ in range(4):
            n_sites = int(rng.integers(4, 7))
            dims = [int(rng.integers(2, 4)) for _ in range(n_sites)]
            state = random_state(rng, dims)
            vec = state_to_dense(state)
            for _ in range(5):
                action = rng.integers(0, 3)
                if action == 0:
                    site = int(rng.integers(0, n_sites - 1))
                    move_center(state, site)
                    swap_adjacent(state, site, EXACT)
                    vec = dense_swap(vec, dims, site)
                    dims[site], dims[site + 1] = dims[site + 1], dims[site]
                elif action == 1:
                    first = int(rng.integers(0, n_sites - 1))
                    gate = random_unitary(rng, dims[first] * dims[first + 1])
                    move_center(state, first)
                    apply_gate(state, gate, first, EXACT)
                    vec = dense_apply_gate(vec, gate, dims, first, 2)
                else:
                    move_center(state, int(rng.integers(0, n_sites)))
                assert np.linalg.norm(state_to_dense(state) - vec) < 1e-10
            for site in range(n_sites):
                op = np.diag(np.arange(dims[site], dtype=float)).astype(complex)
                got = expectation_local(state, op, site)
                want = dense_expectation(vec, op, dims, site)
                assert abs(got - want) < 1e-10


def test_write_delay_curve_artifact():
    """Not a numbered criterion: emits the criterion-5 style sweep CSV for
    the plotting package (tau sweep through the CLI at the headline drive)."""
    ARTIFACTS.mkdir(exist_ok=True)
    out = ARTIFACTS / "criterion5_delay_curve.csv"
    cfg = ARTIFACTS / "criterion5.cfg"
    cfg.write_text(
        "gamma = 1.0\n"
        f"pulse_area = {A2!r}\n"
        f"pulse_width = {NU!r}\n"
        "phi = 0.0\n"
        "dt = 0.004\n"
        "outputs = correlations,probabilities,normalized\n"
        "baseline_mode = auto\n"
        "sweep_axis1 = tau\n"
        "sweep_axis1_values = 0.03,0.06,0.12,0.24\n")
    assert cli_main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
    records = read_records(str(out))
    assert len(records) == 4
    assert all(r["status"] == "ok" for r in records)
    base_out = ARTIFACTS / "criterion5_baseline.csv"
    assert cli_main(["baseline", "--config", str(cfg), "--out", str(base_out)]) == 0
