"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the lines are repeated in
the terminal summary.
"""

import itertools
import time

import numpy as np
import pytest

from pcsynth.controller import evaluate_many, feedback, selector, simulate, simulate_lpv, verify_certificate
from pcsynth.graph import LabeledGraph, debruijn, is_complete, is_deterministic, is_path_complete
from pcsynth.model import SwitchedSystem, SwitchingSignal, example_family, random_simplex_weights
from pcsynth.synthesis import (
    Kind,
    SynthesisRequest,
    attempt,
    bundled_certificate,
    max_parameter,
    min_decay_rate,
    synthesize,
)

RESULTS = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    RESULTS.append(line)
    assert ok, line


def fmt(values):
    return "[" + ", ".join(f"{v:.4f}" for v in values) + "]"


def within(values, expected, tol):
    return all(abs(v - e) <= tol for v, e in zip(values, expected))


def test_criterion_1_example1_thresholds():
    start = time.perf_counter()
    a0, _ = max_parameter("ex1", debruijn(2, 0), bracket=(0.3, 0.8))
    rest = [max_parameter("ex1", debruijn(2, l))[0] for l in (1, 2, 3)]
    elapsed = time.perf_counter() - start
    ok = abs(a0 - 0.5872) <= 0.01 and within(rest, [0.6667] * 3, 0.005) and elapsed < 30
    report(1, ok, f"alpha l=0: {a0:.4f}, l=1..3: {fmt(rest)}, {elapsed:.1f}s")


def test_criterion_2_ex2_max_alpha_by_order():
    orders, expected = (0, 1, 2, 3, 5), (0.6646, 0.6684, 0.6856, 0.6984, 0.7032)
    start = time.perf_counter()
    values = [max_parameter("ex2", debruijn(2, l))[0] for l in orders]
    elapsed = time.perf_counter() - start
    monotone = all(b >= a for a, b in zip(values, values[1:]))
    ok = within(values, expected, 0.01) and monotone and elapsed < 180
    report(2, ok, f"max alpha {fmt(values)} vs {fmt(expected)}, monotone={monotone}, {elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_3_ex3_decay_rate_by_order():
    sys_ = example_family("ex3")
    orders, expected = (0, 2, 4, 6), (0.9638, 0.9612, 0.9586, 0.9571)
    values = [min_decay_rate(sys_, debruijn(2, l))[0] for l in orders]
    g10 = debruijn(2, 10)
    start = time.perf_counter()
    big, cert = min_decay_rate(sys_, g10)
    elapsed = time.perf_counter() - start
    blocks = len(g10.edges)
    chain = values + [big]
    monotone = all(b <= a for a, b in zip(chain, chain[1:]))
    ok = (
        within(values, expected, 0.005)
        and abs(big - 0.9555) <= 0.005
        and monotone
        and elapsed < 900
        and g10.node_count == 1024
        and blocks == 2048
        and verify_certificate(sys_, cert).valid
    )
    report(3, ok, f"min gamma {fmt(values)} vs {fmt(expected)}; l=10: {big:.4f} "
                  f"({g10.node_count} nodes, {blocks} blocks, {elapsed:.1f}s), monotone={monotone}")


@pytest.mark.slow
def test_criterion_4_ex5_mode_dependent_decay_rate():
    sys_ = example_family("ex5")
    orders, expected = (0, 1, 2, 3, 4), (0.9156, 0.9058, 0.9023, 0.9009, 0.9003)
    start = time.perf_counter()
    values = [min_decay_rate(sys_, debruijn(4, l), Kind.MODE_DEPENDENT)[0] for l in orders]
    elapsed = time.perf_counter() - start
    monotone = all(b <= a for a, b in zip(values, values[1:]))
    ok = within(values, expected, 0.01) and monotone and max(values) <= 0.96 and elapsed < 600
    report(4, ok, f"min gamma {fmt(values)} vs {fmt(expected)}, monotone={monotone}, {elapsed:.1f}s")


def test_criterion_5_printed_certificates():
    start = time.perf_counter()
    ex2, _ = bundled_certificate("bundled-ex2")
    ex4, _ = bundled_certificate("bundled-ex4")
    r2 = verify_certificate(example_family("ex2", 0.6856), ex2, gamma=1.0)
    r4 = verify_certificate(example_family("ex4"), ex4, gamma=0.7536)
    elapsed = time.perf_counter() - start
    ok = r2.max_margin < 0 and r4.max_margin < 0 and r2.valid and r4.valid and elapsed < 1
    report(5, ok, f"ex2 max margin {r2.max_margin:+.3e}, ex4 max margin "
                  f"{r4.max_margin:+.3e}, {elapsed * 1e3:.1f}ms")


def test_criterion_6_gain_activation():
    cert, _ = bundled_certificate("bundled-ex4")
    sig = SwitchingSignal.periodic([1, 2, 3], 30)
    tr = simulate(example_family("ex4"), cert, sig, [0.4, 1.4], 30)
    names = cert.graph.node_names
    active = {names[s] for s in tr.active_nodes[:30]}
    W = tr.lyapunov
    decreasing = bool(np.all(W[1:] < W[:-1]))
    ok = active == {"13", "21", "33"} and decreasing
    report(6, ok, f"active gains {sorted('K' + a for a in active)}, W strictly decreasing={decreasing}")


def random_instance(rng):
    M, n = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    m = int(rng.integers(1, n + 1))
    l = int(rng.integers(0, 3))
    A, B = [], []
    for _ in range(M):
        G = rng.normal(size=(n, n))
        rho = max(abs(np.linalg.eigvals(G)))
        A.append(G * rng.uniform(0.4, 1.3) / rho)
        B.append(rng.normal(size=(n, m)))
    kind = Kind.ROBUST if rng.random() < 0.5 else Kind.MODE_DEPENDENT
    return SwitchedSystem(tuple(A), tuple(B)), debruijn(M, l), kind


def closed_loop_step(sys_, cert, X, node, i):
    A, B = sys_.mode(i)
    return np.stack([(A + B @ cert.gain(s, i if cert.kind is Kind.MODE_DEPENDENT else None)) @ x
                     for x, s in zip(X, node)])


def test_criterion_7_property_suite():
    rng = np.random.default_rng(2024)
    checked, failures, worst = 0, [], -np.inf
    while checked < 50:
        sys_, g, kind = random_instance(rng)
        res = attempt(SynthesisRequest(sys_, g, kind, 1.0))
        if not res.feasible:
            continue
        cert = res.certificate
        checked += 1
        margin = verify_certificate(sys_, cert).max_margin
        worst = max(worst, margin)
        if not margin < -1e-9:
            failures.append((checked, "oracle", margin))
        X = rng.normal(size=(1000, sys_.n))
        W, node = evaluate_many(cert, X)
        for i in g.labels:
            W1, _ = evaluate_many(cert, closed_loop_step(sys_, cert, X, node, i))
            if not np.all(W1 < W):
                failures.append((checked, f"decrease mode {i}", int(np.sum(W1 >= W))))
        lam = np.exp(rng.uniform(-6, 6, size=1000))
        for x, c in zip(rng.normal(size=(1000, sys_.n)), lam):
            mode = int(rng.integers(1, sys_.M + 1)) if kind is Kind.MODE_DEPENDENT else None
            if selector(cert, c * x) != selector(cert, x):
                failures.append((checked, "selector", c))
                break
            # rounding of K @ x is bounded by eps * |K| |x|, not by |K x|, under cancellation
            K = cert.gain(selector(cert, x), mode)
            scale = c * float(np.abs(K) @ np.abs(x) @ np.ones(K.shape[0]))
            if not np.allclose(feedback(cert, c * x, mode), c * feedback(cert, x, mode), rtol=0, atol=1e-13 * scale):
                failures.append((checked, "homogeneity", c))
                break
    report(7, not failures, f"{checked} instances, worst oracle margin {worst:+.3e}, failures {failures[:3]}")


def test_criterion_8_lpv_envelope():
    sys_ = example_family("ex1", 0.66)
    cert = synthesize(SynthesisRequest(sys_, debruijn(2, 1), alpha=0.66))
    x0 = np.array([1.0, -1.0])
    ratios = []
    for seed in range(20):
        tr = simulate_lpv(sys_, cert, random_simplex_weights(2, 300, seed), x0, 300)
        ratios.append(np.linalg.norm(tr.states[-1]) / np.linalg.norm(x0))
    ok = max(ratios) < 1e-6
    report(8, ok, f"20 LPV runs, largest |x(300)|/|x0| = {max(ratios):.3e}")


def path_exists(g, word):
    out = {}
    for a, b, i in g.edges:
        out.setdefault(a, []).append((b, i))

    def walk(node, k):
        return k == len(word) or any(walk(b, k + 1) for b, i in out.get(node, ()) if i == word[k])

    return any(walk(s, 0) for s in range(g.node_count))


def enumerate_words(g, max_len):
    layer = [()]
    for _ in range(max_len):
        nxt = []
        for w in layer:
            for i in g.labels:
                if not path_exists(g, w + (i,)):
                    return False
                nxt.append(w + (i,))
        layer = nxt
    return True


def test_criterion_9_graph_oracles():
    rng = np.random.default_rng(99)
    disagreements, positives = 0, 0
    for _ in range(200):
        n, M = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        density = rng.choice([0.15, 0.3, 0.5])
        edges = [(a, b, i) for a in range(n) for b in range(n) for i in range(1, M + 1) if rng.random() < density]
        g = LabeledGraph(M, tuple(map(str, range(n))), tuple(edges))
        fast = is_path_complete(g)
        positives += fast
        # words up to length 2n + 2; a disagreement would expose a longer killing word
        if fast != enumerate_words(g, 2 * n + 2):
            disagreements += 1
    debruijn_ok = all(
        is_complete(debruijn(M, l)) and is_deterministic(debruijn(M, l))
        for M, l in itertools.product(range(1, 5), range(0, 7))
    )
    ok = disagreements == 0 and debruijn_ok and 0 < positives < 200
    report(9, ok, f"200 random graphs ({positives} path-complete), {disagreements} disagreements; "
                  f"De Bruijn M<=4, l<=6 complete and deterministic: {debruijn_ok}")
