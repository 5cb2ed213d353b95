"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the summary
lines are printed even when output capture is on.
"""
import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest

from loopchi.cumulant import (LOOP, TIMEORDERED, QuadratureConfig, chi3_integral, response_S3,
                              s3_from_chi3)
from loopchi.lineshape import LineshapeKernel
from loopchi.lorentzian import (LorentzianGreens, chi3_loop, chi3_offresonant_symmetric,
                                chi3_timeordered)
from loopchi.model import BathSpec, SystemSpec, two_level_model, vee_model
from loopchi.spectra import VeeScan, diagonal_enhancement, resonance_width_study, scan2d
from loopchi.termgen import PermutedTerms, gen_loop_terms, gen_timeordered_terms, render_term

from oracles import nested_commutator_S3

GOLDEN = Path(__file__).parent / "golden"
REL_TOL = 1e-4
CHI_TOL = max(2 * REL_TOL, 1e-3)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}  {detail}  ({elapsed:.2f} s)")
        assert ok, detail
    return emit


def ladder():
    V = np.zeros((3, 3), dtype=complex)
    V[0, 1] = 1.0
    V[1, 2] = 0.7 + 0.2j
    V[0, 2] = 0.3
    V = V + V.conj().T
    return SystemSpec(("g", "e", "f"), [0.0, 1.1, 2.5], V, [0.7, 0.3, 0.0])


def bare(system):
    return LineshapeKernel(BathSpec.uncoupled(system.n))


def test_criterion_1_term_counts(report):
    start = time.perf_counter()
    bad = []
    for n in range(1, 9):
        loop, to = gen_loop_terms(n), gen_timeordered_terms(n)
        got = (len(loop), len(to), len(PermutedTerms(loop, n)), len(PermutedTerms(to, n)))
        want = (n + 1, 2 ** n, math.factorial(n + 1), 2 ** n * math.factorial(n))
        if got != want:
            bad.append(n)
    elapsed = time.perf_counter() - start
    report(1, not bad and elapsed < 1.0, f"n=1..8 counts exact, mismatches at {bad}", elapsed)


def test_criterion_2_golden_n3(report):
    start = time.perf_counter()
    loop_ok = ([render_term(t) for t in gen_loop_terms(3)]
               == GOLDEN.joinpath("loop_n3.txt").read_text().splitlines())
    rendered = sorted(render_term(t) for t in gen_timeordered_terms(3))
    golden = sorted(GOLDEN.joinpath("timeordered_n3.txt").read_text().splitlines())
    to_ok = rendered == golden and sum(r.startswith("+") for r in rendered) == 4
    elapsed = time.perf_counter() - start
    report(2, loop_ok and to_ok and elapsed < 1.0,
           f"loop lines match: {loop_ok}, time-ordered 8 lines (4+/4-) match: {to_ok}", elapsed)


def test_criterion_3_expansion_equivalence(report):
    start = time.perf_counter()
    quad = QuadratureConfig(points_per_axis=64, rel_tol=REL_TOL)
    cases = [("2-level", two_level_model(1.0)[0], None), ("3-level", ladder(), None)]
    for eta in (0.0, 0.5, 1.0):
        system, bath = vee_model(eta, w_ba=2.0, w_da=1.5, lam=0.2, big_lambda=5.0, kT=2.5)
        cases.append((f"vee eta={eta}", system, LineshapeKernel(bath)))
    rng = np.random.default_rng(2024)
    worst = {}
    for name, system, kernel in cases:
        kernel = kernel or bare(system)
        diffs = []
        for w in rng.uniform(-2.5, 2.5, (20, 3)):
            a = chi3_integral(system, kernel, LOOP, *w, quad=quad)
            b = chi3_integral(system, kernel, TIMEORDERED, *w, quad=quad)
            diffs.append(abs(a - b) / abs(b))
        worst[name] = max(diffs)
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= CHI_TOL and elapsed < 600
    detail = ", ".join(f"{k}: {v:.1e}" for k, v in worst.items())
    report(3, ok, f"max relative loop/time-ordered difference ({detail}) vs {CHI_TOL:g}", elapsed)


def test_criterion_4_hilbert_space_oracle(report):
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    for system in (two_level_model(1.0, v=0.8 + 0.3j)[0], ladder()):
        rho = np.diag(system.populations)
        for t1, t2, t3 in rng.uniform(0, 6, (50, 3)):
            ref = nested_commutator_S3(system.energies, system.dipole, rho, t3, t2, t1)
            got = response_S3(system, bare(system), t3, t2, t1)
            worst = max(worst, abs(got - ref) / abs(ref))
    elapsed = time.perf_counter() - start
    report(4, worst <= 1e-10 and elapsed < 10, f"max relative error {worst:.1e}", elapsed)


def test_criterion_5_lineshape_limits(report):
    start = time.perf_counter()
    # fast regime: Lambda^2 >= 100 * 2 lam kT and t >= 10 / Lambda, with
    # kT >> Lambda so the reorganization term is negligible
    lam, big, kT = 1e-4, 10.0, 5000.0
    assert big ** 2 >= 100 * 2 * lam * kT

    def fast_error(lam, big, kT, t):
        brown = LineshapeKernel(BathSpec([[lam]], [[big]], kT))
        fast = LineshapeKernel(BathSpec([[lam]], [[big]], kT, "fast"))
        return np.max(np.abs(brown.g(0, 0, t) - fast.g(0, 0, t)) / np.abs(fast.g(0, 0, t)))

    fast_err = fast_error(lam, big, kT, np.geomspace(10 / big, 1e4 / big, 200))
    example_err = fast_error(0.1, 10.0, 50.0, np.array([1.0]))
    # slow regime: Lambda |t| <= 0.01
    lam, big, kT = 1.0, 1e-4, 1e3
    brown = LineshapeKernel(BathSpec([[lam]], [[big]], kT))
    slow = LineshapeKernel(BathSpec([[lam]], [[big]], kT, "slow"))
    t = np.linspace(1.0, 0.01 / big, 200)
    slow_err = np.max(np.abs(brown.g(0, 0, t) - slow.g(0, 0, t)) / np.abs(slow.g(0, 0, t)))
    # symmetry over random draws
    rng = np.random.default_rng(5)
    sym = 0.0
    for _ in range(1000):
        mode = rng.choice(["brownian", "fast", "slow"])
        l = rng.uniform(0, 1, (3, 3))
        l = (l + l.T) / 2 * 0.3 + np.diag(np.full(3, 2.0))
        b = rng.uniform(0.1, 5, (3, 3))
        k = LineshapeKernel(BathSpec(l, (b + b.T) / 2, rng.uniform(0, 5), mode))
        i, j = rng.integers(0, 3, 2)
        s = rng.uniform(-50, 50)
        sym = max(sym, abs(k.g(i, j, s) - np.conj(k.g(j, i, -s))) / max(1, abs(k.g(i, j, s))))
    elapsed = time.perf_counter() - start
    ok = fast_err < 0.01 and slow_err < 0.01 and sym <= 1e-14 and elapsed < 5
    report(5, ok, f"fast-limit error {fast_err:.3g} (needs < 0.01; lam=0.1, Lambda=10, "
                  f"kT=50, t=1 gives {example_err:.3g}), slow-limit error "
                  f"{slow_err:.2e}, symmetry {sym:.1e}", elapsed)


def test_criterion_6_correlation_resonance(report):
    start = time.perf_counter()
    scan = VeeScan()
    res = resonance_width_study([0.0, 0.25, 0.5, 0.75, 1.0], scan)
    rows = {r.eta: r for r in res.rows}
    sigma = res.gamma_sum
    fitted = (0.25, 0.5, 0.75)
    if all(rows[e].status == "ok" for e in fitted):
        width_err = max(abs(rows[e].width / (sigma * (1 - e)) - 1) for e in fitted)
        amps = [rows[e].amplitude / e for e in fitted]
        amp_spread = (max(amps) - min(amps)) / np.mean(amps)
    else:
        width_err = amp_spread = float("inf")
    grid_step = scan.delta_axis()[1] - scan.delta_axis()[0]
    eta0_ok = rows[0.0].status == "no peak"
    eta1_ok = rows[1.0].status == "unresolved" and rows[1.0].width < grid_step
    # loop evaluator on a grid around the bd diagonal
    w1 = np.arange(10 - 0.8, 10 - 0.3 + 1e-9, 0.01)
    w2 = np.arange(9 - 0.8 - 0.3, 9 - 0.3 + 0.3, 0.01)
    loop_max = 0.0
    for eta in (0.0, 0.25, 0.5, 0.75, 1.0):
        system, bath = vee_model(eta, mode="fast", lam=0.1)
        g = LorentzianGreens.from_bath(system, bath)
        grid = scan2d(lambda a, b, c: chi3_loop(system, g, a, b, c), w1, w2, 5.0, sign2=-1)
        loop_max = max(loop_max, diagonal_enhancement(grid, 1.0, 10))
    elapsed = time.perf_counter() - start
    ok = (width_err <= 0.05 and amp_spread <= 0.10 and eta0_ok and eta1_ok
          and loop_max < 1.05 and elapsed < 120)
    report(6, ok, f"width error {width_err:.3f}, amplitude/eta spread {amp_spread:.3f}, "
                  f"eta=0 no peak: {eta0_ok}, eta=1 unresolved: {eta1_ok}, "
                  f"loop enhancement {loop_max:.3f}", elapsed)


def test_criterion_7_fast_limit_factorization(report):
    start = time.perf_counter()
    quad = QuadratureConfig(points_per_axis=64, rel_tol=REL_TOL)
    system, bath = vee_model(0.5, w_ba=2.0, w_da=1.5, lam=0.2, big_lambda=5.0, kT=2.5,
                             mode="fast")
    kernel = LineshapeKernel(bath)
    g = LorentzianGreens.from_bath(system, bath, eta_reg=1e-12)
    rng = np.random.default_rng(7)
    worst = 0.0
    for w in rng.uniform(-2.5, 2.5, (10, 3)):
        got = chi3_integral(system, kernel, TIMEORDERED, *w, quad=quad)
        ref = chi3_timeordered(system, g, *(w + 1j * quad.switching))
        worst = max(worst, abs(got - ref) / abs(ref))
    elapsed = time.perf_counter() - start
    report(7, worst <= CHI_TOL and elapsed < 300, f"max relative difference {worst:.1e}", elapsed)


def test_criterion_8_symmetric_form(report):
    start = time.perf_counter()
    system = two_level_model(1.0)[0]
    g = LorentzianGreens(system, real=True, eta_reg=0.0)
    w = (0.21, 0.13, -0.07)
    a = chi3_offresonant_symmetric(system, g, *w)
    rel = abs(a - chi3_loop(system, g, *w)) / abs(a)
    spread = max(abs(chi3_offresonant_symmetric(system, g, *p) - a) / abs(a)
                 for p in itertools.permutations(w))
    elapsed = time.perf_counter() - start
    ok = rel <= 1e-10 and spread <= 1e-14 and elapsed < 1
    report(8, ok, f"vs real loop {rel:.1e}, permutation spread {spread:.1e}", elapsed)


def test_criterion_9_transform_consistency(report):
    start = time.perf_counter()
    eta = 0.4
    system = two_level_model(1.0)[0]
    g = LorentzianGreens(system, eta_reg=eta)
    t = np.linspace(0.5, 4.0, 8)
    got = s3_from_chi3(lambda a, b, c: chi3_timeordered(system, g, a, b, c), t, t, t,
                       omega_max=8.0, points=128, resonances=(1.0,), widths=eta)
    T1, T2, T3 = np.meshgrid(t, t, t, indexing="ij")
    ref = response_S3(system, bare(system), T3, T2, T1) * np.exp(-eta * (T1 + T2 + T3))
    err = np.max(np.abs(got - ref)) / np.max(np.abs(ref))
    elapsed = time.perf_counter() - start
    report(9, err <= 0.05 and elapsed < 60, f"max error {err:.2%} of peak |S| on 8^3 grid",
           elapsed)
