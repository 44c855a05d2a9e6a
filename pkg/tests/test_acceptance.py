"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Every criterion runs a shipped preset through the experiment runners and
checks the summary scalars at the stated tolerance.
"""
import functools
import math
import time

import pytest

from nlscontrol.config import preset
from nlscontrol.experiments import execute, run_experiment


@functools.lru_cache(maxsize=None)
def scalars(name):
    t0 = time.perf_counter()
    res = run_experiment(preset(name))
    return dict(res.scalars), time.perf_counter() - t0


def by_prefix(sc, prefix):
    out = {k: v for k, v in sc.items() if k.startswith(prefix + "[")}
    assert out, f"no scalars named {prefix}[...]"
    return out


@pytest.fixture
def report(capsys):
    def _report(n, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, f"criterion {n} ({title}) failed: {detail}"
    return _report


def fmt(d):
    return ", ".join(f"{k}={v:.3g}" for k, v in sorted(d.items()))


def test_c01_plane_wave(report):
    sc, _ = scalars("plane-wave")
    err = by_prefix(sc, "linf_error_final")
    report(1, "plane-wave exactness", len(err) == 2 and max(err.values()) <= 1e-8, fmt(err))


def test_c02_integrator_order(report):
    sc, _ = scalars("integrator-order")
    r = by_prefix(sc, "order_ratio")
    report(2, "integrator order", all(3.2 <= v <= 4.8 for v in r.values()), fmt(r))


def test_c03_mass_identity(report):
    sc, _ = scalars("mass-identity")
    res = by_prefix(sc, "mass_residual_rel")
    ratio = by_prefix(sc, "mass_refine_ratio")
    ok = max(res.values()) <= 1e-6 and min(ratio.values()) >= 3.2
    report(3, "mass identity", ok, f"{fmt(res)}, {fmt(ratio)}")


def test_c04_exponential_decay(report):
    parts, elapsed = {}, 0.0
    for name in ("decay-defocusing", "decay-focusing"):
        sc, dt = scalars(name)
        elapsed += dt
        for key in ("min_gamma", "min_r2", "max_tail_fraction"):
            parts.update(by_prefix(sc, key))
    pick = lambda key: {k: v for k, v in parts.items() if k.startswith(key)}
    gam, r2, tail = pick("min_gamma"), pick("min_r2"), pick("max_tail_fraction")
    ok = min(gam.values()) > 0 and min(r2.values()) >= 0.95 and elapsed <= 300
    report(4, "exponential decay", ok,
           f"{fmt(gam)}, {fmt(r2)}, {fmt(tail)}, runtime={elapsed:.0f}s")


def test_c05_gramian_trivial(report):
    sc, _ = scalars("gramian-trivial")
    err, herm = sc["constant_gramian_error"], sc["hermiticity_defect"]
    report(5, "Gramian trivial case", err <= 1e-10 and herm <= 1e-12,
           f"error={err:.2e}, hermiticity={herm:.2e}")


def test_c06_linear_hum(report):
    sc, _ = scalars("linear-hum")
    res, it = sc["max_replay_residual"], sc["max_cg_iterations"]
    report(6, "linear HUM replay", res <= 1e-6 and it <= 200,
           f"residual={res:.2e}, cg_iterations={it}")


def test_c07_observability(report):
    sc, _ = scalars("observability-n16")
    rel, mono = sc["C_rel_diff"], bool(sc["nested_monotone"])
    report(7, "observability constant", rel <= 1e-6 and mono,
           f"C={sc['C_dense']:.6g}, rel_diff={rel:.2e}, nested_monotone={mono}")


def test_c08_null_control(report):
    sc, _ = scalars("null-control")
    ratio = by_prefix(sc, "max_ratio")
    ver = by_prefix(sc, "verification_error")
    lin = sc["lam0_vs_linear"]
    ok = max(ratio.values()) <= 0.9 and max(ver.values()) <= 1e-6 and lin <= 1e-10
    report(8, "nonlinear null control", ok, f"{fmt(ratio)}, {fmt(ver)}, lam0_vs_linear={lin:.2e}")


def test_c09_k_scaling(report):
    sc, _ = scalars("k-scaling")
    s = by_prefix(sc, "k_slope")
    report(9, "cubic scaling of K", all(abs(v - 3) <= 0.1 for v in s.values()), fmt(s))


def test_c10_global_steering(report):
    sc, _ = scalars("steer")
    err = by_prefix(sc, "end_error")
    ends = by_prefix(sc, "g_endpoint_max")
    out = by_prefix(sc, "g_outside_support")
    ok = len(err) == 2 and max(err.values()) <= 1e-4 \
        and max(ends.values()) == 0 and max(out.values()) == 0
    report(10, "global steering", ok, f"{fmt(err)}, {fmt(ends)}, {fmt(out)}")


def test_c11_parity(report):
    sc, _ = scalars("steer-parity-odd")
    st = by_prefix(sc, "state_parity_defect")
    ct = by_prefix(sc, "control_parity_defect")
    err = by_prefix(sc, "end_error")
    ok = max(st.values()) <= 1e-12 and max(ct.values()) <= 1e-12 and max(err.values()) <= 1e-4
    report(11, "parity preservation", ok, f"{fmt(st)}, {fmt(ct)}, {fmt(err)}")


def test_c12_multiplication_loss(report):
    sc, _ = scalars("multiplication-loss")
    s = by_prefix(sc, "slope")
    ok = len(s) == 3 and all(abs(v - float(k[len("slope[b="):-1])) <= 0.1 for k, v in s.items())
    report(12, "multiplication loss", ok, fmt(s))


def test_c13_l4_estimate(report):
    sc, _ = scalars("l4-scan")
    spread, change, mx = sc["single_mode_spread"], sc["doubling_change"], sc["ensemble_max"]
    ok = spread <= 0.05 and change <= 0.10 and math.isfinite(mx)
    report(13, "L4 estimate", ok,
           f"single_mode_spread={spread:.2e}, ensemble_max={mx:.4g}, doubling_change={change:.3f}")


def test_c14_trilinear(report):
    sc, _ = scalars("trilinear-scan-s2")
    g = sc["growth_factor"]
    report(14, "trilinear 3^s factor", g <= 18,
           f"ratio(s=2)/ratio(s=0)={g:.3f} (bound 18)")


def test_c15_duhamel_gain(report):
    sc, _ = scalars("duhamel-gain")
    s = by_prefix(sc, "slope")
    diffs = {k: abs(v - sc["target" + k[len("slope"):]]) for k, v in s.items()}
    ok = len(s) == 2 and max(diffs.values()) <= 0.15
    report(15, "Duhamel gain", ok, f"{fmt(s)}, deviation: {fmt(diffs)}")


def test_c16_determinism(report, tmp_path):
    compared, mismatched = 0, []
    for name in ("integrator-order", "linear-hum", "difference-scan"):
        cfg = preset(name)
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        assert execute(cfg, a) == 0 and execute(cfg, b) == 0
        files = sorted(p.name for p in a.glob("*.csv"))
        assert files
        compared += len(files)
        mismatched += [f"{name}/{f}" for f in files
                       if (a / f).read_bytes() != (b / f).read_bytes()]
    report(16, "determinism", not mismatched,
           f"{compared} CSV files over 3 presets, mismatched: {mismatched or 'none'}")
