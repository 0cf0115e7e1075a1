"""Acceptance criteria, each printed as one PASS/FAIL line.

Criteria backed by CLI commands run once with ``--threads 1``; the
determinism criterion reruns every one of them with ``--threads 8`` and
compares the CSV output byte for byte.
"""

import csv
import json
import math
import time

import numpy as np
import pytest
from scipy import optimize

from epl.chaining import (
    build_partition,
    chain_decomposition,
    chain_index,
    choose_chain_depth,
    psi_difference_l1,
    refine_level,
    smoothed_process,
)
from epl.cli import main
from epl.distmodel import CantorCdf, Uniform01
from epl.empproc import ecdf_build
from epl.procgen import ProcessSpec, generate, gouezel_apply, gouezel_layout
from epl.verify import smoothing_trend

SEED = 20240601

CLI_RUNS = {
    "cov-iid": ["verify-cov", "--process", "iid-uniform", "--n", "2048", "--reps", "5000",
                "--points", "0.25,0.5,0.75"],
    "clt-iid": ["verify-clt", "--process", "iid-uniform", "--f", "identity", "--n", "4096", "--reps", "2000",
                "--threshold", "0.04"],
    "clt-cantor": ["verify-clt", "--process", "cantor", "--f", "identity", "--n", "4096", "--reps", "2000",
                   "--threshold", "0.05"],
    "m4-iid": ["verify-moment4", "--process", "iid-uniform", "--f", "identity", "--n-list", "10",
               "--reps", "200000"],
    "m4-cantor": ["verify-moment4", "--process", "cantor", "--f", "identity", "--alpha", "3", "--beta", "2",
                  "--n-list", "64,128,256,512,1024,2048,4096", "--reps", "1000"],
    "reduce-exp": ["reduce", "--model", "exp", "--rate", "2", "--n", "100"],
    "bad-exp": ["bad-intervals", "--model", "exp", "--rate", "2"],
    "orbit": ["simulate", "--process", "gouezel", "--n", "100000"],
    "chain-cantor": ["chain", "--process", "cantor", "--n", "10000", "--m", "10", "--eps", "0.1"],
    "tightness-iid": ["verify-tightness", "--process", "iid-uniform", "--n", "4096", "--delta", "0.1",
                      "--eps", "3.0", "--reps", "200"],
}


@pytest.fixture(scope="module")
def cli(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance")
    cache = {}

    def run(key, threads=1):
        if (key, threads) not in cache:
            out = root / f"{key}-t{threads}"
            t0 = time.perf_counter()
            code = main([*CLI_RUNS[key], "--seed", str(SEED), "--threads", str(threads), "--out", str(out)])
            elapsed = time.perf_counter() - t0
            cmd = CLI_RUNS[key][0]
            data = json.loads((out / f"{cmd}_summary.json").read_text())
            cache[key, threads] = (code, data, out / f"{cmd}_series.csv", elapsed)
        return cache[key, threads]

    return run


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} :: {detail}")

    return emit


def test_criterion_01_chaining_exactness(report):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst, violations, sandwich_fail = 0.0, 0, 0
    for case in range(200):
        kind, model = (("iid-uniform", Uniform01()), ("cantor", CantorCdf()))[case % 2]
        m = (4, 10)[(case // 2) % 2]
        n = int(rng.integers(1, 1001))
        part = build_partition(model, m)
        x = generate(ProcessSpec(kind), n, SEED, case).values
        t = float(model.quantile(rng.random()))
        eps = math.sqrt(n) * part.h * rng.uniform(0.01, 1.0)
        K = choose_chain_depth(n, part.h, eps)
        ct = chain_decomposition(x, part, t, K)
        worst = max(worst, ct.residual)
        violations += ct.sandwich_violations
        j = ct.j
        if j >= 2:
            f = ecdf_build(x)
            v = smoothed_process(x, part).cell_values[j - 1]
            sandwich_fail += not (f(part.points[j - 2]) <= v <= f(part.points[j - 1]))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and violations == 0 and sandwich_fail == 0 and elapsed < 10
    report(1, "chaining exactness", ok,
           f"max residual {worst:.2e}, chain violations {violations}, sandwich failures {sandwich_fail}, "
           f"{elapsed:.2f}s")
    assert ok


def test_criterion_02_depth_rule(report):
    rng = np.random.default_rng(SEED + 2)
    t0 = time.perf_counter()
    bad = 0
    for _ in range(1000):
        n = int(np.exp(rng.uniform(0, math.log(1e9))))
        h = 1.0 / int(rng.integers(2, 1000))
        q = math.sqrt(n) * h
        eps = q * float(rng.uniform(1e-6, 1.0)) if q > 0 else 1.0
        if rng.random() < 0.05:
            eps = q  # lower-bracket boundary
        K = choose_chain_depth(n, h, eps)
        ratio = q / 2.0**K
        bad += not (K >= 4 and eps / 16 <= ratio <= eps / 8)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 1
    report(2, "depth rule bracket", ok, f"{bad} bracket failures of 1000, {elapsed:.3f}s")
    assert ok


def test_criterion_03_chain_index_law(report):
    rng = np.random.default_rng(SEED + 3)
    t0 = time.perf_counter()
    K, m, broken = 10, 4, 0
    for model in (Uniform01(), CantorCdf()):
        part = build_partition(model, m)
        refs = {(j, k): refine_level(part, j, k) for j in range(1, m + 1) for k in range(K + 1)}
        for t in model.quantile(rng.random(1000)):
            j = part.cell_of(t)
            ls = [chain_index(refs[j, k], t) for k in range(K + 1)]
            broken += sum(ls[k - 1] != ls[k] // 2 for k in range(1, K + 1))
    elapsed = time.perf_counter() - t0
    ok = broken == 0 and elapsed < 5
    report(3, "chain-index halving law", ok, f"{broken} violations over 2x1000 points, K={K}, {elapsed:.2f}s")
    assert ok


def test_criterion_04_psi_difference_bound(report):
    t0 = time.perf_counter()
    worst = -math.inf
    for model in (Uniform01(), CantorCdf()):
        part = build_partition(model, 8)
        for j in range(1, 9):
            for k in range(1, 11):
                vals = psi_difference_l1(part, j, k, np.arange(2**k + 1))
                worst = max(worst, float(np.max(vals - 3 * part.h / 2**k)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    report(4, "psi-difference L1 bound", ok, f"max(value - 3h/2^k) = {worst:.3e}, {elapsed:.2f}s")
    assert ok


def test_criterion_05_bridge_kernel(cli, report):
    code, data, series, elapsed = cli("cov-iid")
    with open(series) as fh:
        rows = list(csv.DictReader(fh))
    errs = [abs(float(r["empirical"]) - (min(float(r["s"]), float(r["t"])) - float(r["s"]) * float(r["t"])))
            for r in rows]
    worst = max(errs)
    ok = len(rows) == 9 and worst <= 0.03 and code == 0 and elapsed < 60
    report(5, "i.i.d. Brownian-bridge covariance", ok, f"max |emp - (min(s,t)-st)| = {worst:.4f}, {elapsed:.2f}s")
    assert ok


def test_criterion_06_clt_oracle(cli, report):
    c1, iid, _, e1 = cli("clt-iid")
    c2, cantor, _, e2 = cli("clt-cantor")
    elapsed = e1 + e2
    ok = (
        iid["ks"] < 0.04
        and abs(cantor["sigma2_hat"] - 0.25) < 0.02
        and cantor["ks"] < 0.05
        and c1 == c2 == 0
        and elapsed < 120
    )
    report(6, "CLT oracle", ok,
           f"iid KS {iid['ks']:.4f}; cantor sigma2 {cantor['sigma2_hat']:.4f}, KS {cantor['ks']:.4f}; {elapsed:.2f}s")
    assert ok


def test_criterion_07_fourth_moment(cli, report):
    _, iid, _, e1 = cli("m4-iid")
    _, cantor, _, e2 = cli("m4-cantor")
    elapsed = e1 + e2
    m10 = iid["moments"][0]
    rel = abs(m10 - 2.0) / 2.0
    ok = rel <= 0.05 and cantor["slope"] <= 0.1 and elapsed < 120
    report(7, "fourth-moment oracle", ok,
           f"iid E(S_10^4) = {m10:.4f} (rel err {rel:.4f}); cantor log-log slope {cantor['slope']:.4f}; {elapsed:.2f}s")
    assert ok


def test_criterion_08_reduction(cli, report):
    y_star = optimize.brentq(lambda y: 1.0 - math.exp(-2.0 * y) - y, 0.79, 0.80, xtol=1e-15)
    code, data, _, elapsed = cli("reduce-exp")
    (iv,) = data["intervals"]
    err = abs(iv["y"] - y_star)
    ok = (
        err < 1e-6
        and abs(iv["x"]) < 1e-12
        and data["lipschitz_excess"] <= 1e-12
        and data["transport_residual"] < 1e-10
        and code == 0
        and elapsed < 10
    )
    report(8, "reduction correctness", ok,
           f"|y - y*| = {err:.2e}, Lipschitz excess {data['lipschitz_excess']:.2e}, "
           f"transport residual {data['transport_residual']:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_09_gouezel(cli, report):
    rng = np.random.default_rng(SEED + 9)
    t0 = time.perf_counter()
    lay = gouezel_layout()
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 200))
        u = float(rng.random())
        worst = max(worst, abs(gouezel_apply(lay, float(lay.v(n, u))) - u))
        worst = max(worst, abs(gouezel_apply(lay, float(lay.w(n, u))) - u))
    code, data, _, e_orbit = cli("orbit")
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and data["ks_vs_marginal"] < 0.02 and elapsed < 30
    report(9, "Gouezel map", ok,
           f"max round-trip error {worst:.2e} on 100 points, orbit KS {data['ks_vs_marginal']:.4f}, {elapsed:.2f}s")
    assert ok


def test_criterion_10_smoothing_trend(report):
    t0 = time.perf_counter()
    rep = smoothing_trend(ProcessSpec.iid_uniform(), 4096, [4, 16, 64], 200, master_seed=SEED)
    elapsed = time.perf_counter() - t0
    ok = rep.strictly_decreasing and rep.separated and elapsed < 120
    meds = " > ".join(f"{v:.4f}" for v in rep.medians)
    bands = ", ".join(f"[{a:.3f}, {b:.3f}]" for a, b in rep.bands)
    report(10, "smoothing-error trend", ok, f"medians {meds}; median bands {bands}; {elapsed:.2f}s")
    assert ok


def test_criterion_11_determinism(cli, report):
    differing = []
    for key in CLI_RUNS:
        _, _, one, _ = cli(key, threads=1)
        _, _, eight, _ = cli(key, threads=8)
        if one.read_bytes() != eight.read_bytes():
            differing.append(key)
    ok = not differing
    report(11, "determinism across threads", ok,
           f"{len(CLI_RUNS) - len(differing)}/{len(CLI_RUNS)} commands byte-identical"
           + (f"; differing: {differing}" if differing else ""))
    assert ok
