"""Acceptance criteria 1-8.

Each test prints exactly one ``PASS``/``FAIL`` line (also collected into the
terminal summary) and then asserts. Run on its own with::

    pytest tests/test_acceptance.py -v -s
"""

import json
import random
import re
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from moaoff.errors import CalibrationError, ParseError
from moaoff.perception import (
    Calibration,
    GrayImage,
    ImageWeights,
    TextParams,
    count_entities,
    edge_density,
    fit_calibration,
    gray_entropy,
    image_complexity,
    laplacian_variance,
    mean_sobel_gradient,
    percentile,
    resolution_scale,
    sharpness,
    split_sentences,
    text_complexity,
    tokenize,
)
from moaoff.policy import Decision, Modality, PolicyConfig, SystemState, decide_modality, decide_request
from moaoff.simulator import CostModel, Strategy, ablation, reports_to_csv, run_comparison, simulate
from moaoff.workload import (
    SyntheticSpec,
    UnsupportedFormatError,
    parse_pgm,
    parse_workload_lines,
    synthesize_workload,
)
from oracles import naive_laplacian_variance, naive_mean_sobel, random_rows, rel_close

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "tests" / "data" / "default_seed7.csv"


def report(number, title, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def default_workload():
    return synthesize_workload(SyntheticSpec())


# -- 1 ---------------------------------------------------------------------------


def test_c1_kernel_oracle_equivalence():
    rng = random.Random(20240601)
    start = time.perf_counter()
    worst = 0.0
    failures = 0
    for _ in range(200):
        h, w = rng.randint(1, 16), rng.randint(1, 16)
        rows = random_rows(rng, h, w)
        img = GrayImage.from_rows(rows)
        for got, want in ((mean_sobel_gradient(img), naive_mean_sobel(rows)), (laplacian_variance(img), naive_laplacian_variance(rows))):
            err = abs(got - want) / max(1.0, abs(want))
            worst = max(worst, err)
            failures += not rel_close(got, want, 1e-9)
    elapsed = time.perf_counter() - start
    ok = failures == 0 and elapsed < 5.0
    report(1, "kernel oracle equivalence", ok, f"200 images, worst rel err {worst:.2e}, {elapsed:.2f}s")
    assert ok


# -- 2 ---------------------------------------------------------------------------


def _analytic_cases():
    cal = Calibration(2.0, 60.0, 10.0, 2000.0, 1e-6)
    flat = GrayImage.constant(8, 8, 128)
    two_levels = GrayImage.from_rows([[0, 255] * 4] * 8)
    all_levels = GrayImage.from_rows([list(range(r * 16, r * 16 + 16)) for r in range(16)])
    ramp = GrayImage.from_rows([list(range(200))] * 5)
    params = TextParams(l0=512, gamma=3.0, beta_l=0.5, beta_ner=0.5)
    saturating = " ".join("Word 1 2 3 4 5 6 7.".split() * 256)
    state = SystemState(0.3, 200.0)
    cfg = PolicyConfig()

    def raises(fn, exc):
        try:
            fn()
        except exc:
            return True
        return False

    return {
        "C_res 1024x1024": resolution_scale(GrayImage.constant(1024, 1024, 0)) == 1.0,
        "C_res 512x1024": resolution_scale(GrayImage.constant(512, 1024, 0)) == 0.5,
        "C_res 4096x4096": resolution_scale(GrayImage.constant(4096, 4096, 0)) == 1.0,
        "Sobel constant": mean_sobel_gradient(flat) == 0.0,
        "edge density constant": edge_density(flat, cal) == 0.0,
        "edge density at p95": abs(edge_density(GrayImage.from_rows([[0] * 3, [0] * 3, [255] * 3]), Calibration(2.0, 1020.0, 10.0, 2000.0, 1e-6)) - 1.0) <= 1e-6,
        "entropy constant": gray_entropy(flat) == 0.0,
        "entropy two levels": abs(gray_entropy(two_levels) - 0.125) <= 1e-12,
        "entropy all levels": gray_entropy(all_levels) == 1.0,
        "Laplacian constant": laplacian_variance(flat) == 0.0,
        "Laplacian ramp": laplacian_variance(ramp) == 0.0,
        "sharpness constant": sharpness(flat, cal) == 0.0,
        "weights (1,0,0,0) select C_res": image_complexity(two_levels, ImageWeights(1, 0, 0, 0)).total == resolution_scale(two_levels),
        "weights (0,0,1,0) on all levels": image_complexity(all_levels, ImageWeights(0, 0, 1, 0)).total == 1.0,
        "tokenize two words": tokenize("hello world") == ["hello", "world"],
        "tokenize empty": tokenize("") == [],
        "tokenize whitespace runs": tokenize("  a\t b \n") == ["a", "b"],
        "sentences 3": split_sentences("One. Two! Three?") == 3,
        "sentences floor": split_sentences("no terminator") == 1 and split_sentences("") == 1,
        "entities sentence-initial": count_entities(tokenize("The cat sat")) == 0,
        "entities empty": count_entities([]) == 0,
        "text empty": (lambda r: (r.c_l, r.c_ner, r.total) == (0.0, 0.0, 0.0))(text_complexity("", params)),
        "text saturates": (lambda r: (r.c_l, r.c_ner, r.total) == (1.0, 1.0, 1.0))(text_complexity(saturating, params)),
        "percentile constant": percentile([7.0, 7.0], 5) == percentile([7.0, 7.0], 95) == 7.0,
        "calibration single element": raises(lambda: fit_calibration([1.0], [1.0]), CalibrationError),
        "policy c above tau": decide_modality(0.6, Modality.IMAGE, SystemState(0.0, 1.0), cfg) is Decision.CLOUD,
        "policy overloaded": decide_modality(0.4, Modality.IMAGE, SystemState(0.9, 200.0), cfg) is Decision.CLOUD,
        "policy single modality": [r.decision for r in decide_request([(Modality.TEXT, 0.3)], state, cfg)] == [decide_modality(0.3, Modality.TEXT, state, cfg)],
        "policy all zero complexity": all(r.decision is Decision.EDGE for r in decide_request([(Modality.TEXT, 0.0)] * 3, state, cfg)),
        "PGM P5 2x2": parse_pgm(b"P5\n2 2\n255\n" + bytes([0, 64, 128, 255])).pixels.tolist() == [[0, 64], [128, 255]],
        "PGM P2 1x1": parse_pgm(b"P2\n1 1\n255\n7\n").pixels.tolist() == [[7]],
        "PGM rejects P6": raises(lambda: parse_pgm(b"P6\n1 1\n255\n\0\0\0"), UnsupportedFormatError),
        "empty workload": parse_workload_lines([]) == [],
        "synthetic count 0": synthesize_workload(SyntheticSpec(request_count=0)) == [],
    }


def test_c2_analytic_component_suite():
    cases = _analytic_cases()
    failed = [name for name, ok in cases.items() if not ok]
    ok = not failed
    report(2, "analytic component suite", ok, f"{len(cases) - len(failed)}/{len(cases)} exact" + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert ok, failed


# -- 3 ---------------------------------------------------------------------------


def _random_case(rng):
    def unit():
        r = rng.random()
        # hit the boundaries and the shared grid often so ties get exercised
        return rng.choice((0.0, 1.0, 0.5, round(r, 1), r))

    cfg = PolicyConfig(unit(), unit(), unit(), rng.choice((200.0, 300.0, 400.0, rng.uniform(1, 1000))), rng.random() < 0.5)
    state = SystemState(unit(), rng.choice((200.0, 300.0, 400.0, rng.uniform(1, 1000))))
    return cfg, state, rng.choice((Modality.TEXT, Modality.IMAGE)), unit()


def test_c3_policy_property_suite():
    rng = random.Random(3)
    n = 10_000
    start = time.perf_counter()
    counts = dict.fromkeys(("threshold", "state", "monotone", "compositional"), 0)
    violations = []
    for _ in range(n):
        cfg, state, m, c = _random_case(rng)
        d = decide_modality(c, m, state, cfg)
        if c > cfg.threshold(m) and d is not Decision.CLOUD:
            violations.append(("threshold", cfg, state, c))
        counts["threshold"] += 1

        if (state.edge_load > cfg.ell_max or not cfg.bandwidth_ok(state.bandwidth_mbps)) and d is not Decision.CLOUD:
            violations.append(("state", cfg, state, c))
        counts["state"] += 1

        c2 = rng.choice((c, 1.0, c + (1.0 - c) * rng.random()))
        if d is Decision.CLOUD and decide_modality(c2, m, state, cfg) is not Decision.CLOUD:
            violations.append(("monotone", cfg, state, c, c2))
        counts["monotone"] += 1

        k = rng.randint(1, 5)
        scores = [(rng.choice((Modality.TEXT, Modality.IMAGE)), rng.random()) for _ in range(k)]
        vec = decide_request(scores, state, cfg)
        if [r.decision for r in vec] != [decide_modality(sc, sm, state, cfg) for sm, sc in scores]:
            violations.append(("compositional", cfg, state, scores))
        counts["compositional"] += 1
    elapsed = time.perf_counter() - start
    ok = not violations and min(counts.values()) >= 10_000 and elapsed < 5.0
    report(3, "policy property suite", ok, f"{n} cases per property, {len(violations)} violations, {elapsed:.2f}s")
    assert ok, violations[:3]


# -- 4 ---------------------------------------------------------------------------


def test_c4_degenerate_strategy_equivalence():
    start = time.perf_counter()
    wl = synthesize_workload(SyntheticSpec(request_count=1000, seed=7))
    model = CostModel()
    bw = 300.0
    never = PolicyConfig(tau_text=0.0, tau_image=0.0, beta_bw_mbps=1.0, bandwidth_gate_literal=True)
    assert not never.bandwidth_ok(bw)
    moa_cloud = simulate(wl, Strategy.MOA_OFF, never, model, bw, 7)
    cloud = simulate(wl, Strategy.CLOUD_ONLY, never, model, bw, 7)

    unbounded = replace(model, edge_queue_cap=None)
    always = PolicyConfig(tau_text=1.0, tau_image=1.0, ell_max=1.0, beta_bw_mbps=1000.0, bandwidth_gate_literal=True)
    assert always.bandwidth_ok(bw)
    moa_edge = simulate(wl, Strategy.MOA_OFF, always, unbounded, bw, 7)
    edge = simulate(wl, Strategy.EDGE_ONLY, always, unbounded, bw, 7)
    elapsed = time.perf_counter() - start

    ok = moa_cloud.metrics() == cloud.metrics() and moa_edge.metrics() == edge.metrics() and elapsed < 10.0
    report(4, "degenerate-strategy equivalence", ok, f"cloud and edge collapses bit-identical on 1000 requests, {elapsed:.2f}s")
    assert ok


# -- 5 ---------------------------------------------------------------------------


def test_c5_qualitative_trends(default_workload):
    start = time.perf_counter()
    reports = run_comparison(default_workload, PolicyConfig(), CostModel(), (200.0, 300.0, 400.0), 7)
    elapsed = time.perf_counter() - start
    at300 = {r.strategy: r for r in reports if r.bandwidth_mbps == 300.0}
    moa, edge, cloud = at300["moa-off"], at300["edge-only"], at300["cloud-only"]

    latency_cut = 1.0 - moa.mean_s / min(cloud.mean_s, edge.mean_s)
    busy_cut = 1.0 - moa.cloud_busy_s / cloud.cloud_busy_s
    moa_gap = moa.acc_proxy - cloud.acc_proxy
    edge_gap = edge.acc_proxy - cloud.acc_proxy
    golden = GOLDEN.read_text(encoding="utf-8") == reports_to_csv(reports)
    checks = {
        "latency": latency_cut >= 0.30,
        "cloud busy": 0.30 <= busy_cut <= 0.65,
        "moa accuracy": abs(moa_gap) <= 0.02,
        "edge accuracy": edge_gap <= -0.08,
        "regression csv": golden,
        "runtime": elapsed < 60.0,
    }
    ok = all(checks.values())
    detail = (
        f"latency -{latency_cut:.1%}, cloud busy -{busy_cut:.1%}, "
        f"acc moa {moa_gap * 100:+.2f}pp edge {edge_gap * 100:+.2f}pp vs cloud, "
        f"csv {'matches' if golden else 'differs'}, {elapsed:.2f}s"
    )
    report(5, "qualitative trend reproduction", ok, detail)
    assert ok, checks


# -- 6 ---------------------------------------------------------------------------


def test_c6_ablation_direction(default_workload):
    rep = ablation(default_workload, PolicyConfig(), CostModel(), 300.0, 7)
    d = rep.deltas()
    ok = rep.modality_blind.acc_proxy <= rep.full.acc_proxy and rep.no_scheduling.p95_s >= rep.full.p95_s
    detail = (
        f"modality-blind acc {d['modality-blind']['acc_proxy'] * 100:+.2f}pp, "
        f"scheduling-off p95 {d['no-scheduling']['p95_s']:+.4f}s"
    )
    report(6, "ablation direction", ok, detail)
    assert ok


# -- 7 ---------------------------------------------------------------------------


def test_c7_determinism(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        code = subprocess.run(
            [sys.executable, "-m", "moaoff", "simulate", "-c", str(ROOT / "configs" / "default.toml"), "-o", str(path)],
            capture_output=True,
        ).returncode
        assert code == 0
        outs.append(path.read_bytes())
    same = outs[0] == outs[1]
    golden = outs[0] == GOLDEN.read_bytes()
    ok = same and golden
    report(7, "determinism", ok, f"rerun {'identical' if same else 'differs'}, checked-in CSV {'identical' if golden else 'differs'}")
    assert ok


# -- 8 ---------------------------------------------------------------------------


def _expect(fn, exc, pattern):
    try:
        fn()
    except exc as e:
        return re.search(pattern, str(e)) is not None
    return False


def test_c8_format_robustness(tmp_path):
    good_line = json.dumps({"id": 0, "t": 0, "mods": [{"kind": "text", "c": 0.1}]})
    missing = json.dumps({"id": 1, "t": 1, "mods": [{"kind": "image", "path": "gone.pgm"}]})
    cases = {
        "valid P5": parse_pgm(b"P5\n2 2\n255\n" + bytes([0, 64, 128, 255])).pixels.tolist() == [[0, 64], [128, 255]],
        "valid P2": parse_pgm(b"P2\n2 1\n255\n1 2\n").pixels.tolist() == [[1, 2]],
        "comment-laden": parse_pgm(b"P2\n#a\n2#b\n#c\n1 255\n#d\n4 #e\n5\n").pixels.tolist() == [[4, 5]],
        "truncated P5": _expect(lambda: parse_pgm(b"P5\n2 2\n255\n" + bytes(3)), ParseError, r"truncated pixel data at byte 14"),
        "truncated P2": _expect(lambda: parse_pgm(b"P2\n2 2\n255\n1 2 3"), ParseError, r"truncated pixel data at byte 16"),
        "truncated header": _expect(lambda: parse_pgm(b"P5\n2"), ParseError, r"truncated header at byte 4"),
        "bad maxval": _expect(lambda: parse_pgm(b"P5\n1 1\n300\n\0"), ParseError, r"maxval 300 at byte 7"),
        "malformed header": _expect(lambda: parse_pgm(b"P5\n-1 1\n255\n\0"), ParseError, r"malformed width .* at byte 3"),
        "colour to PGM reader": _expect(lambda: parse_pgm(b"P6\n1 1\n255\n\0\0\0"), UnsupportedFormatError, "load_ppm_as_gray"),
        "bad JSON line": _expect(lambda: parse_workload_lines([good_line, "", "{"]), ParseError, r"^line 3:"),
        "bad field line": _expect(lambda: parse_workload_lines([good_line, '{"id": 2, "t": "x", "mods": []}']), ParseError, r"^line 2:"),
        "missing image": _expect(lambda: parse_workload_lines([good_line, missing], tmp_path), FileNotFoundError, r"line 2: .*gone\.pgm"),
    }
    failed = [k for k, v in cases.items() if not v]
    ok = not failed
    report(8, "format robustness", ok, f"{len(cases) - len(failed)}/{len(cases)} cases" + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert ok, failed
