"""Experiment runners behind the CLI.

Each ``run_<name>(cfg)`` returns a :class:`RunResult`; :func:`execute` writes
it to disk (CSV tables, ``summary.csv``, ``manifest.json``).  Random data are
drawn from ``numpy.random.Generator(PCG64(seed))`` in a fixed order before any
parallel work, so results do not depend on ``threads``.
"""
from __future__ import annotations

import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import xsb
from .config import ExperimentConfig
from .dynamics import (
    Damping, EvolutionParams, evolve, gronwall_margin, mass_identity_residual, plane_wave,
)
from .errors import NumericalFailure
from .linear_control import (
    ControlGeometry, Gramian, gramian_apply, observability_constant, solve_linear_hum,
)
from .nonlinear_control import (
    contraction_threshold, hs_regularity_report, k_operator, local_null_control,
)
from .output import dump_coefficients, write_csv, write_json
from .spectral import (
    ConstantCutoff, MirroredBump, SpectralField, TorusGrid, make_bump,
    parity_defect, random_field, sample,
)
from .steering import (
    control_parity_defect, damped_observability_scan, damped_trajectory, decay_rate_fit,
    stabilize_until, steer,
)


@dataclass
class RunResult:
    tables: dict = field(default_factory=dict)      # name -> (columns, rows)
    scalars: dict = field(default_factory=dict)     # written to summary.csv
    diagnostics: dict = field(default_factory=dict)  # manifest only
    dumps: dict = field(default_factory=dict)       # file name -> (grid, coeffs)


# -- helpers -----------------------------------------------------------------------------

def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def pmap(fn, items, threads=1):
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def spatial_cutoff(cfg: ExperimentConfig, plateau=None):
    if cfg.constant:
        return ConstantCutoff()
    lo, hi = cfg.omega
    if plateau is None:
        plateau = cfg.plateau
    if plateau is None:
        w = hi - lo
        plateau = (lo + 0.25 * w, hi - 0.25 * w)
    bump = make_bump((lo, hi), plateau, kind="spatial")
    return MirroredBump(bump) if cfg.mirrored else bump


def control_geometry(cfg: ExperimentConfig, n_modes=None, plateau=None) -> ControlGeometry:
    T = cfg.T
    phi = make_bump((0.0, T), (T / 3, 2 * T / 3), kind="temporal")
    return ControlGeometry(TorusGrid(n_modes or cfg.n_modes), T,
                           spatial_cutoff(cfg, plateau), phi, cfg.dt)


def _kmax(p, grid):
    return grid.n_modes // 4 if p.get("kmax") is None else int(p["kmax"])


def _lam_tag(lam):
    return f"{lam:+g}"


# -- simulate ----------------------------------------------------------------------------

def _initial_field(cfg, grid, rng):
    p = cfg.params
    if p["initial"] == "plane_wave":
        return SpectralField.from_modes(grid, {int(p["k"]): p["amplitude"]})
    if p["initial"] == "random":
        return random_field(grid, rng, kmax=int(p["kmax"]), norm=p["norm"])
    raise ValueError(p["initial"])


def run_simulate(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    grid = TorusGrid(cfg.n_modes)
    rng = make_rng(cfg.seed)
    u0 = _initial_field(cfg, grid, rng)
    damping = Damping(spatial_cutoff(cfg)) if p["damping"] else None
    res = RunResult()
    rows, order_rows, refine_rows = [], [], []
    for lam in cfg.lam:
        params = EvolutionParams(lam=lam, dt=cfg.dt, damping=damping,
                                 tail_monitor_threshold=p["tail_monitor"])
        tr = evolve(u0, 0.0, cfg.T, params)
        l2, h1 = tr.norms(0), tr.norms(1)
        linf = np.full(len(tr.times), np.nan)
        if p["initial"] == "plane_wave" and damping is None:
            vals = tr.values()
            for j, t in enumerate(tr.times):
                exact = plane_wave(grid, p["amplitude"], int(p["k"]), lam, t).values()
                linf[j] = np.max(np.abs(vals[j] - exact))
            res.scalars[f"linf_error_final[{_lam_tag(lam)}]"] = float(linf[-1])
        for j, t in enumerate(tr.times):
            rows.append([lam, t, l2[j], h1[j], linf[j]])
        res.scalars[f"mass_residual_rel[{_lam_tag(lam)}]"] = mass_identity_residual(
            tr, params, relative=True)
        res.scalars[f"gronwall_margin[{_lam_tag(lam)}]"] = gronwall_margin(tr)
        if p["order_check"]:
            ref = evolve(u0, 0.0, cfg.T,
                         EvolutionParams(lam=lam, dt=cfg.dt / p["reference_factor"],
                                         damping=damping)).final
            half = evolve(u0, 0.0, cfg.T,
                          EvolutionParams(lam=lam, dt=cfg.dt / 2, damping=damping)).final
            e1, e2 = (tr.final - ref).norm(), (half - ref).norm()
            order_rows.append([lam, cfg.dt, e1, e2, e1 / e2])
            res.scalars[f"order_ratio[{_lam_tag(lam)}]"] = e1 / e2
        if p["refine_check"]:
            half_params = EvolutionParams(lam=lam, dt=cfg.dt / 2, damping=damping)
            r1 = res.scalars[f"mass_residual_rel[{_lam_tag(lam)}]"]
            r2 = mass_identity_residual(evolve(u0, 0.0, cfg.T, half_params), half_params,
                                        relative=True)
            refine_rows.append([lam, cfg.dt, r1, r2, r1 / r2])
            res.scalars[f"mass_residual_rel_half[{_lam_tag(lam)}]"] = r2
            res.scalars[f"mass_refine_ratio[{_lam_tag(lam)}]"] = r1 / r2
        if p["dump"]:
            res.dumps[f"trace_{_lam_tag(lam)}.bin"] = (grid, tr.coeffs)
    res.tables["trace"] = (["lam", "t", "l2", "h1", "linf_error"], rows)
    if order_rows:
        res.tables["order"] = (["lam", "dt", "error_dt", "error_dt_half", "ratio"], order_rows)
    if refine_rows:
        res.tables["mass_refinement"] = (
            ["lam", "dt", "residual_dt", "residual_dt_half", "ratio"], refine_rows)
    return res


# -- stabilize -----------------------------------------------------------------------------

def run_stabilize(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    grid = TorusGrid(cfg.n_modes)
    rng = make_rng(cfg.seed)
    a = spatial_cutoff(cfg)
    kmax = _kmax(p, grid)
    ensembles = {R0: [random_field(grid, rng, kmax=kmax, norm=R0)
                      for _ in range(int(p["n_samples"]))] for R0 in p["R0"]}
    res = RunResult()
    rows = []
    tail = grid.tail_mask()
    for lam in cfg.lam:
        for R0, fields in ensembles.items():
            if p["threshold"] is None:
                def one(u, lam=lam):
                    tr = damped_trajectory(u, a, lam, p["t_final"], cfg.dt)
                    e = np.abs(tr.coeffs) ** 2
                    tail_frac = float(np.max(e[:, tail].sum(1) / e.sum(1)))
                    return decay_rate_fit(tr, tuple(p["fit_window"])), tr.final.norm(), tail_frac
                out = pmap(one, fields, cfg.threads)
                for i, (fit, fn, tf) in enumerate(out):
                    rows.append([lam, R0, i, fit.gamma, fit.C, fit.r2, fn, tf])
                key = f"[{_lam_tag(lam)},R0={R0:g}]"
                res.scalars["min_gamma" + key] = min(o[0].gamma for o in out)
                res.scalars["min_r2" + key] = min(o[0].r2 for o in out)
                res.scalars["max_tail_fraction" + key] = max(o[2] for o in out)
            else:
                def one(u, lam=lam):
                    st = stabilize_until(u, a, lam, p["threshold"], t_max=p["t_max"],
                                         dt=cfg.dt, ramp=cfg.ramp)
                    return st.t_star, st.final.norm()
                out = pmap(one, fields, cfg.threads)
                for i, (ts, fn) in enumerate(out):
                    rows.append([lam, R0, i, ts, fn])
                res.scalars[f"max_t_star[{_lam_tag(lam)},R0={R0:g}]"] = max(o[0] for o in out)
    if p["threshold"] is None:
        res.tables["decay_fits"] = (
            ["lam", "R0", "sample", "gamma", "C", "r2", "final_norm", "max_tail_fraction"], rows)
    else:
        res.tables["crossings"] = (["lam", "R0", "sample", "t_star", "final_norm"], rows)
    return res


# -- linear control ----------------------------------------------------------------------

def run_linear_control(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    geom = control_geometry(cfg)
    grid = geom.grid
    rng = make_rng(cfg.seed)
    kmax = _kmax(p, grid)
    gram = Gramian(geom)
    res = RunResult()
    probes = [random_field(grid, rng, kmax=grid.n_modes // 2, norm=1.0)
              for _ in range(2 * int(p["n_hermitian"]))]
    herm, pos = 0.0, np.inf
    for u, v in zip(probes[::2], probes[1::2]):
        lu, lv = gram(u.coeffs), gram(v.coeffs)
        herm = max(herm, abs(np.vdot(lu, v.coeffs) - np.vdot(u.coeffs, lv)))
        pos = min(pos, float(np.vdot(u.coeffs, lu).real))
    res.scalars["hermiticity_defect"] = float(herm)
    res.scalars["min_quadratic_form"] = pos
    if cfg.constant:
        c = geom.phi_sq_integral()
        err = max((gramian_apply(u, geom) - u * c).norm() / u.norm() for u in probes)
        res.scalars["phi_sq_integral"] = c
        res.scalars["constant_gramian_error"] = float(err)
    rows = []
    for i in range(int(p["n_samples"])):
        psi0 = random_field(grid, rng, kmax=kmax, norm=1.0)
        sol = solve_linear_hum(psi0, geom, tol=cfg.tolerances["cg"], max_iter=int(p["max_iter"]))
        rows.append([i, sol.iterations, sol.cg_residual, sol.residual, sol.phi0.norm()])
        if i == 0 and p.get("dump"):
            res.dumps["control.bin"] = (grid, sol.control_trace().coeffs)
    res.tables["hum"] = (["sample", "cg_iterations", "cg_residual", "replay_residual",
                          "phi0_l2"], rows)
    res.scalars["max_replay_residual"] = max(r[3] for r in rows)
    res.scalars["max_cg_iterations"] = max(r[1] for r in rows)
    res.diagnostics["geometry"] = geom.manifest()
    return res


# -- null control --------------------------------------------------------------------------

def _datum(cfg, grid):
    p = cfg.params
    modes = {int(k): float(v) for k, v in p["modes"].items()}
    f = SpectralField.from_modes(grid, modes)
    n = f.norm()
    return f * (p["amplitude"] / n) if n > 0 else f


def run_null_control(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    geom = control_geometry(cfg)
    grid = geom.grid
    u0 = _datum(cfg, grid)
    res = RunResult()
    tol = cfg.tolerances["picard"]
    if p["mode"] == "k_scaling":
        lin = solve_linear_hum(u0 if u0.norm() > 0 else SpectralField.from_modes(grid, {1: 1.0}),
                               geom, tol=cfg.tolerances["cg"])
        direction = lin.phi0 * (1.0 / lin.phi0.norm())
        eps = np.geomspace(p["eps"][0], p["eps"][1], int(p["n_eps"]))
        rows = []
        for lam in cfg.lam:
            ks = [k_operator(direction * e, geom, lam).norm() for e in eps]
            rows += [[lam, e, k] for e, k in zip(eps, ks)]
            fit = xsb.loglog_fit(eps, ks)
            res.scalars[f"k_slope[{_lam_tag(lam)}]"] = fit.slope
            res.scalars[f"k_slope_r2[{_lam_tag(lam)}]"] = fit.r2
        res.tables["k_scaling"] = (["lam", "eps", "k_norm"], rows)
        return res
    rows, ratio_rows, hs_rows = [], [], []
    for lam in cfg.lam:
        sol = local_null_control(u0, geom, lam, tol=tol)
        tag = _lam_tag(lam)
        mr = max(sol.ratios) if sol.ratios else 0.0
        rows.append([lam, sol.iterations, mr, sol.verification_error, sol.phi0.norm()])
        ratio_rows += [[lam, m + 1, r] for m, r in enumerate(sol.ratios)]
        res.scalars[f"max_ratio[{tag}]"] = mr
        res.scalars[f"verification_error[{tag}]"] = sol.verification_error
        res.scalars[f"iterations[{tag}]"] = sol.iterations
        res.diagnostics[f"solution[{tag}]"] = sol.diagnostics()
        if p["s_list"]:
            for row in hs_regularity_report(sol, p["s_list"], refine=p["refine"], tol=tol):
                hs_rows.append([lam] + [row.get(k, np.nan) for k in
                                        ("s", "phi0_hs", "g_max_hs", "phi0_hs_2N",
                                         "g_max_hs_2N", "rel_change")])
        if p["threshold_scan"]:
            res.scalars[f"epsilon[{tag}]"] = contraction_threshold(u0, geom, lam)
        if p.get("dump"):
            res.dumps[f"control_{tag}.bin"] = (
                grid, np.fft.fft(sol.control.values, axis=-1) / grid.n_modes)
    if p["compare_linear"]:
        lin = solve_linear_hum(u0, geom, tol=1e-13, max_iter=cfg.tolerances["cg_max_iter"])
        zero = local_null_control(u0, geom, 0.0, tol=tol)
        den = lin.phi0.norm()
        diff = (zero.phi0 - lin.phi0).norm() / den if den > 0 else (zero.phi0 - lin.phi0).norm()
        res.scalars["lam0_vs_linear"] = float(diff)
    res.tables["null_control"] = (["lam", "iterations", "max_ratio", "verification_error",
                                   "phi0_l2"], rows)
    res.tables["ratios"] = (["lam", "m", "ratio"], ratio_rows)
    if hs_rows:
        res.tables["hs_regularity"] = (["lam", "s", "phi0_hs", "g_max_hs", "phi0_hs_2N",
                                        "g_max_hs_2N", "rel_change"], hs_rows)
    res.diagnostics["geometry"] = geom.manifest()
    return res


# -- steering ------------------------------------------------------------------------------

def run_steer(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    geom = control_geometry(cfg)
    grid = geom.grid
    rng = make_rng(cfg.seed)
    kmax = _kmax(p, grid)
    par = None if p["parity"] == "none" else p["parity"]
    u0 = random_field(grid, rng, kmax=kmax, norm=p["norm0"], parity=par)
    u1 = random_field(grid, rng, kmax=kmax, norm=p["norm1"], parity=par)
    res = RunResult()
    rows, phase_rows = [], []
    outside = sample(geom.a, grid) == 0
    for lam in cfg.lam:
        tag = _lam_tag(lam)
        try:
            plan = steer(u0, u1, geom, lam, gate=p["gate"], tol=cfg.tolerances["steer"],
                         picard_tol=cfg.tolerances["picard"], t_max=p["t_max"], ramp=cfg.ramp,
                         keep_trace=par is not None)
        except NumericalFailure as exc:
            raise exc.with_phase(f"steer[{tag}]:{exc.phase or 'unknown'}")
        m = plan.manifest()
        g_out = float(np.max(np.abs(plan.control.values[:, outside]))) if outside.any() else 0.0
        rows.append([lam, plan.end_error, plan.T_total, m["control_sup"], m["g_start"],
                     m["g_end"], g_out, plan.gate])
        for ph in plan.phases:
            phase_rows.append([lam, ph.name, ph.t_start, ph.duration])
        res.scalars[f"end_error[{tag}]"] = plan.end_error
        res.scalars[f"T_total[{tag}]"] = plan.T_total
        res.scalars[f"g_endpoint_max[{tag}]"] = max(m["g_start"], m["g_end"])
        res.scalars[f"g_outside_support[{tag}]"] = g_out
        if par is not None:
            res.scalars[f"state_parity_defect[{tag}]"] = parity_defect(plan.trace.coeffs, grid, par)
            res.scalars[f"control_parity_defect[{tag}]"] = control_parity_defect(
                plan.control, grid, par)
        res.diagnostics[f"plan[{tag}]"] = m
        if p["dump"]:
            res.dumps[f"control_{tag}.bin"] = (
                grid, np.fft.fft(plan.control.values, axis=-1) / grid.n_modes)
    res.tables["steering"] = (["lam", "end_error", "T_total", "control_sup", "g_start",
                               "g_end", "g_outside_support", "gate"], rows)
    res.tables["phases"] = (["lam", "phase", "t_start", "duration"], phase_rows)
    return res


# -- X^{s,b} probes -----------------------------------------------------------------------

def run_xsb_probe(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    res = RunResult()
    if p["probe"] == "multiplication_loss":
        grid = TorusGrid(cfg.n_modes)
        rows = []
        for b in p["b_list"]:
            base, shifted = xsb.multiplication_loss_norms(p["n_list"], b, grid, t1=cfg.T,
                                                          n_time=int(p["n_time"]))
            fit = xsb.loglog_fit(p["n_list"], shifted)
            rows += [[b, n, x, y] for n, x, y in zip(p["n_list"], base, shifted)]
            res.scalars[f"slope[b={b:g}]"] = fit.slope
            res.scalars[f"base_spread[b={b:g}]"] = float(base.max() / base.min() - 1)
        res.tables["multiplication_loss"] = (["b", "n", "norm_un", "norm_shifted"], rows)
        res.diagnostics["window"] = {"plateau_fraction": xsb.DEFAULT_PLATEAU,
                                     "pad": xsb.DEFAULT_PAD, "T": cfg.T}
    else:
        rows = []
        for b, bp in p["pairs"]:
            ratios = xsb.duhamel_gain_ratios(xsb.gaussian_pulse, p["T_list"], b, bp)
            fit = xsb.loglog_fit(p["T_list"], ratios)
            rows += [[b, bp, T, r] for T, r in zip(p["T_list"], ratios)]
            res.scalars[f"slope[b={b:g},b'={bp:g}]"] = fit.slope
            res.scalars[f"target[b={b:g},b'={bp:g}]"] = 1 - b - bp
        res.tables["duhamel_gain"] = (["b", "bp", "T", "ratio"], rows)
    return res


def _free_traces(fields, times):
    return [xsb.free_wave_trace(u, times) for u in fields]


def run_estimate_scan(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    grid = TorusGrid(cfg.n_modes)
    rng = make_rng(cfg.seed)
    times = xsb.uniform_times(p["t1"], int(p["n_time"]))
    n = int(p["n_samples"])
    kmax = int(p["kmax"])
    b = float(p["b"])
    res = RunResult()
    if p["probe"] == "l4":
        single = [xsb.l4_ratio(xsb.free_wave_trace(SpectralField.from_modes(grid, {k: 1.0}),
                                                   times), b=b) for k in p["k_list"]]
        res.scalars["single_mode_spread"] = float(max(single) / min(single) - 1)
        # the doubled grid gets its own ensemble with twice the band limit
        grid2 = TorusGrid(2 * grid.n_modes)
        fields = [random_field(grid, rng, kmax=kmax) for _ in range(n)]
        fields2 = [random_field(grid2, rng, kmax=2 * kmax) for _ in range(n)]
        ratio = lambda u: xsb.l4_ratio(xsb.free_wave_trace(u, times), b=b)
        r1 = pmap(ratio, fields, cfg.threads)
        r2 = pmap(ratio, fields2, cfg.threads)
        res.scalars["ensemble_max"] = max(r1)
        res.scalars["ensemble_max_2N"] = max(r2)
        res.scalars["doubling_change"] = abs(max(r2) - max(r1)) / max(r1)
        res.tables["l4_single_mode"] = (["k", "ratio"], list(zip(p["k_list"], single)))
        res.tables["l4_ensemble"] = (["sample", "ratio_N", "ratio_2N"],
                                     [[i, x, y] for i, (x, y) in enumerate(zip(r1, r2))])
    elif p["probe"] == "trilinear":
        s, s0 = float(p["s"]), float(p["baseline_s"])
        triples = [[random_field(grid, rng, kmax=kmax) for _ in range(3)] for _ in range(n)]

        def one(tr):
            us = _free_traces(tr, times)
            return (xsb.trilinear_ratio(*us, s0, b=b), xsb.trilinear_ratio(*us, s, b=b))
        out = pmap(one, triples, cfg.threads)
        mode = xsb.free_wave_trace(SpectralField.from_modes(grid, {1: 1.0}), times)
        res.scalars["single_mode_baseline"] = xsb.trilinear_ratio(mode, mode, mode, s0, b=b)
        res.scalars[f"ensemble_max[s={s0:g}]"] = max(o[0] for o in out)
        res.scalars[f"ensemble_max[s={s:g}]"] = max(o[1] for o in out)
        res.scalars["growth_factor"] = max(o[1] for o in out) / max(o[0] for o in out)
        res.scalars["bound_3s_margin2"] = 2.0 * 3.0 ** (s - s0)
        res.tables["trilinear"] = (["sample", f"ratio_s{s0:g}", f"ratio_s{s:g}"],
                                   [[i, x, y] for i, (x, y) in enumerate(out)])
    else:
        pairs = [(random_field(grid, rng, kmax=kmax), random_field(grid, rng, kmax=kmax))
                 for _ in range(n)]
        rows = []
        for s in p["s_list"]:
            out = pmap(lambda uv, s=s: xsb.difference_ratio(*_free_traces(uv, times), s, b=b),
                       pairs, cfg.threads)
            rows += [[s, i, r] for i, r in enumerate(out)]
            res.scalars[f"ensemble_max[s={s:g}]"] = max(out)
        res.tables["difference"] = (["s", "sample", "ratio"], rows)
    res.diagnostics["window"] = {"plateau_fraction": xsb.DEFAULT_PLATEAU, "pad": xsb.DEFAULT_PAD,
                                 "t1": p["t1"], "n_time": p["n_time"]}
    return res


# -- observability ------------------------------------------------------------------------

def run_observability(cfg: ExperimentConfig) -> RunResult:
    p = cfg.params
    res = RunResult()
    if p["kind"] == "gramian":
        geom = control_geometry(cfg)
        n_obs = p["n_obs"] or geom.grid.n_modes
        est = observability_constant(geom, n_obs)
        res.scalars["C_iterative"] = est.constant
        if p["dense_check"]:
            from .linear_control import low_mode_mask
            mask = low_mode_mask(geom.grid, n_obs)
            D = Gramian(geom).dense()[np.ix_(mask, mask)]
            lam_min = float(np.linalg.eigvalsh(D)[0])
            res.scalars["C_dense"] = 1.0 / lam_min
            res.scalars["C_rel_diff"] = abs(est.constant * lam_min - 1.0)
        rows = []
        for pl in p["nested_plateaus"]:
            g = control_geometry(cfg, plateau=tuple(pl))
            rows.append([pl[0], pl[1], observability_constant(g, n_obs).constant])
        res.tables["nested"] = (["plateau_lo", "plateau_hi", "C"], rows)
        cs = [r[2] for r in rows]
        res.scalars["nested_monotone"] = bool(all(x >= y for x, y in zip(cs, cs[1:])))
    else:
        grid = TorusGrid(cfg.n_modes)
        rng = make_rng(cfg.seed)
        a = spatial_cutoff(cfg)
        kmax = _kmax(p, grid)
        dirs = [random_field(grid, rng, kmax=kmax) for _ in range(int(p["n_samples"]))]
        levels = sorted(p["R0"])
        rows = []
        for lam in cfg.lam:
            for R0 in levels:
                ens = [d * r for r in levels if r <= R0 for d in dirs]
                scan = damped_observability_scan(a, lam, cfg.T, ens, cfg.dt)
                rows.append([lam, R0, scan.constant, len(scan.flagged)])
                res.scalars[f"C[{_lam_tag(lam)},R0={R0:g}]"] = scan.constant
        res.tables["damped_observability"] = (["lam", "R0", "C", "flagged"], rows)
    return res


RUNNERS = {
    "simulate": run_simulate,
    "stabilize": run_stabilize,
    "linear-control": run_linear_control,
    "null-control": run_null_control,
    "steer": run_steer,
    "xsb-probe": run_xsb_probe,
    "estimate-scan": run_estimate_scan,
    "observability": run_observability,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    return RUNNERS[cfg.experiment](cfg)


# -- artifacts ----------------------------------------------------------------------------

def _versions():
    out = {"python": platform.python_version(), "numpy": np.__version__}
    for dist in ("scipy", "pyyaml", "artifact"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            pass
    return out


def execute(cfg: ExperimentConfig, out_dir=None) -> int:
    """Run and write artifacts; returns the process exit code (0 or 3).

    Configuration errors are raised before this point, so no directory is
    created for invalid input.
    """
    out = Path(out_dir or cfg.out)
    manifest = {"config": cfg.to_dict(), "versions": _versions(),
                "rng": {"generator": "PCG64", "seed": cfg.seed}}
    t0 = time.perf_counter()
    try:
        res = run_experiment(cfg)
    except NumericalFailure as exc:
        manifest.update(status="failed", exit_code=3, partial=True,
                        failure={"type": type(exc).__name__, "phase": exc.phase or cfg.experiment,
                                 "message": str(exc)},
                        timings={"total_s": time.perf_counter() - t0})
        write_json(out / "manifest.json", manifest)
        return 3
    files = []
    for name, (cols, rows) in res.tables.items():
        write_csv(out / f"{name}.csv", cols, rows)
        files.append(f"{name}.csv")
    write_csv(out / "summary.csv", ["quantity", "value"], sorted(res.scalars.items()))
    files.append("summary.csv")
    for name, (grid, coeffs) in res.dumps.items():
        dump_coefficients(out / name, grid, coeffs)
        files.append(name)
    manifest.update(status="ok", exit_code=0, partial=False, files=files,
                    scalars=res.scalars, diagnostics=res.diagnostics,
                    timings={"total_s": time.perf_counter() - t0},
                    dump_layout="little-endian complex128, modes ascending -N/2..N/2-1, "
                                "one row of N values per snapshot")
    write_json(out / "manifest.json", manifest)
    return 0
