"""Damped stabilization, decay fits and global two-point steering.

Steering from ``u0`` to ``u1`` runs three phases on one time mesh:

* A: damping ``-i a^2 phi_d(t)^2 u`` switched on smoothly until the state is
  below the smallness gate, then switched off; the damped steps are exported
  as an exact control for the undamped equation;
* B: local null control of the small state;
* C: A' + B' applied to ``conj(u1)`` and mapped by ``h(t) -> conj(h(T_C - t))``,
  which drives 0 to ``u1`` because the split step is exactly reversible.

The assembled control is verified by a single forward solve without damping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import (
    Damping, EvolutionParams, StepSource, TrajectoryTrace, concatenate_sources, evolve,
    evolve_damped_as_control,
)
from .errors import ContractionError, DecayTooSlowError, NumericalFailure, SteeringError
from .linear_control import ControlGeometry
from .nonlinear_control import contraction_threshold, local_null_control
from .spectral import SpectralField, parity_defect, sample, smooth_step


# -- decay fits ------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    C: float
    gamma: float
    window: tuple
    r2: float

    def as_dict(self):
        return {"C": self.C, "gamma": self.gamma, "t_a": self.window[0],
                "t_b": self.window[1], "r2": self.r2}


def fit_exponential(times, norms, window=None, norm0=None) -> DecayFit:
    times = np.asarray(times, float)
    norms = np.asarray(norms, float)
    ta, tb = window if window is not None else (times[0], times[-1])
    sel = (times >= ta - 1e-12) & (times <= tb + 1e-12)
    if sel.sum() < 2:
        raise ValueError("fit window holds fewer than two samples")
    if np.any(norms[sel] <= 0):
        raise ValueError("norms must be positive on the fit window")
    t, y = times[sel], np.log(norms[sel])
    slope, intercept = np.polyfit(t, y, 1)
    ss = float(np.sum((y - y.mean()) ** 2))
    resid = float(np.sum((y - slope * t - intercept) ** 2))
    # a flat line (to rounding) is fitted exactly
    flat = ss <= len(y) * (1e-12 * max(1.0, float(np.max(np.abs(y))))) ** 2
    r2 = 1.0 if flat else 1.0 - resid / ss
    n0 = norms[0] if norm0 is None else norm0
    return DecayFit(float(np.exp(intercept) / n0), float(-slope), (float(ta), float(tb)), r2)


def decay_rate_fit(trace: TrajectoryTrace, window=None) -> DecayFit:
    """Least-squares line through ``(t, log |u(t)|)`` on ``window``."""
    norms = trace.norms(0)
    return fit_exponential(trace.times, norms, window, norm0=norms[0])


# -- damping profiles ---------------------------------------------------------------

class RampProfile:
    """``phi_d``: smooth rise over ``[t0, t0 + ramp]``; after :meth:`switch_off`
    at ``t_off`` a smooth fall from the value held there over ``ramp``.
    ``ramp == 0`` gives a hard switch (``phi_d == 1`` until ``t_off``)."""

    def __init__(self, ramp=0.5, t0=0.0):
        self.ramp = float(ramp)
        self.t0 = float(t0)
        self.t_off = None
        self.level = 1.0

    def _rise(self, t):
        if self.ramp == 0:
            return np.where(t >= self.t0, 1.0, 0.0)
        return smooth_step((t - self.t0) / self.ramp)

    def switch_off(self, t_off):
        self.t_off = float(t_off)
        self.level = float(self._rise(np.array([t_off]))[0])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self._rise(t)
        if self.t_off is not None:
            if self.ramp == 0:
                fall = np.where(t < self.t_off, 1.0, 0.0)
            else:
                fall = 1.0 - smooth_step((t - self.t_off) / self.ramp)
            out = np.where(t <= self.t_off, out, self.level * fall)
        return out

    def describe(self):
        return {"ramp": self.ramp, "t0": self.t0, "t_off": self.t_off, "level": self.level}


@dataclass
class StabilizationResult:
    trace: TrajectoryTrace
    t_star: float
    control: StepSource
    profile: RampProfile
    fit: DecayFit | None = None

    @property
    def t_end(self):
        return self.trace.t1

    @property
    def final(self):
        return self.trace.final


def stabilize_until(u0: SpectralField, a: Callable, lam: float, threshold: float,
                    t_max: float = 50.0, dt: float = 1e-3, ramp: float = 0.5,
                    t0: float = 0.0, tail_monitor_threshold=None) -> StabilizationResult:
    """Damped evolution until ``|u(t)| <= threshold`` (first node ``t*``).

    The damping rises over ``ramp``, and after ``t*`` falls back to zero over
    another ``ramp``; the run ends when it is off.  The control returned is
    the exact undamped-equation source reproducing the damped steps.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    profile = RampProfile(ramp, t0)
    params = EvolutionParams(lam=lam, dt=dt, damping=Damping(a, profile),
                             tail_monitor_threshold=tail_monitor_threshold)
    if u0.norm() <= threshold:
        profile.switch_off(t0)
        empty = StepSource(t0, dt, np.zeros((0, u0.grid.n_modes), complex))
        trace = TrajectoryTrace(u0.grid, t0, dt, np.array([u0.coeffs]))
        return StabilizationResult(trace, t0, empty, profile)
    n_max = int(round(t_max / dt))
    n_ramp = int(np.ceil(ramp / dt - 1e-9))
    state = {"off_at": None}

    def stop(j, c):
        if state["off_at"] is None:
            if np.sqrt(np.sum(np.abs(c) ** 2)) <= threshold:
                state["off_at"] = j
                profile.switch_off(t0 + j * dt)
                return n_ramp == 0
            return False
        return j >= state["off_at"] + n_ramp

    trace, ctrl = evolve_damped_as_control(u0, t0, n_max + n_ramp, dt, params, stop)
    if state["off_at"] is None or state["off_at"] > n_max:
        fit = None
        if trace.n_steps >= 2:
            fit = decay_rate_fit(trace)
        raise DecayTooSlowError(
            f"norm {trace.final.norm():.3e} still above {threshold:.3e} at t={trace.t1:.3g}",
            fit=fit, trace=trace)
    t_star = t0 + state["off_at"] * dt
    return StabilizationResult(trace, t_star, ctrl, profile)


def damped_trajectory(u0, a, lam, t1, dt=1e-3, phi=None, tail_monitor_threshold=None):
    """Plain damped evolution ``i u_t + u_xx + i phi^2 a^2 u = lam |u|^2 u``."""
    params = EvolutionParams(lam=lam, dt=dt, damping=Damping(a, phi),
                             tail_monitor_threshold=tail_monitor_threshold)
    return evolve(u0, 0.0, t1, params)


def decay_ensemble(fields, a, lam, t1=10.0, dt=1e-3, window=(1.0, 10.0)):
    return [decay_rate_fit(damped_trajectory(u, a, lam, t1, dt), window) for u in fields]


# -- observability of the damped equation ----------------------------------------------

@dataclass(frozen=True)
class DampedObservability:
    constant: float
    ratios: tuple
    flagged: tuple  # indices with int |a u|^2 == 0


def damped_observability_ratio(u0, a, lam, T, dt=1e-3):
    tr = damped_trajectory(u0, a, lam, T, dt)
    a_sq = sample(a, u0.grid) ** 2
    dens = np.mean(a_sq * np.abs(tr.values()) ** 2, axis=1)
    obs = float(np.trapezoid(dens, dx=tr.dt))
    return u0.norm() ** 2, obs


def damped_observability_scan(a, lam, T, ensemble, dt=1e-3) -> DampedObservability:
    """``max |u(0)|^2 / int_0^T |a u|^2`` over the ensemble."""
    ratios, flagged = [], []
    for i, u0 in enumerate(ensemble):
        num, den = damped_observability_ratio(u0, a, lam, T, dt)
        if den == 0.0:
            if num > 0:
                flagged.append(i)
            ratios.append(np.inf if num > 0 else np.nan)
            continue
        ratios.append(num / den)
    finite = [r for r in ratios if np.isfinite(r)]
    C = max(finite) if finite else np.nan
    if flagged:
        C = np.inf
    return DampedObservability(float(C), tuple(ratios), tuple(flagged))


# -- two-point steering ------------------------------------------------------------------

REFERENCE_MODES = {1: 1 / np.sqrt(2), -2: 1 / np.sqrt(2)}


def measured_epsilon(geom: ControlGeometry, lam: float, **kw) -> float:
    shape = SpectralField.from_modes(geom.grid, REFERENCE_MODES)
    return contraction_threshold(shape, geom, lam, **kw)


@dataclass
class Phase:
    name: str
    t_start: float
    duration: float
    info: dict = field(default_factory=dict)

    def as_dict(self):
        return {"name": self.name, "t_start": self.t_start, "duration": self.duration, **self.info}


@dataclass
class SteeringPlan:
    phases: list
    control: StepSource
    gate: float
    epsilon: float | None
    end_error: float
    lam: float
    trace: TrajectoryTrace | None = field(default=None, repr=False)

    @property
    def T_total(self):
        return self.control.t1 - self.control.t0

    def endpoint_values(self):
        v = self.control.values
        return float(np.max(np.abs(v[0]))), float(np.max(np.abs(v[-1])))

    def manifest(self):
        g0, g1 = self.endpoint_values()
        return {"phases": [p.as_dict() for p in self.phases], "gate": self.gate,
                "epsilon": self.epsilon, "end_error": self.end_error, "T_total": self.T_total,
                "control_sup": self.control.sup_norm(), "g_start": g0, "g_end": g1,
                "lam": self.lam}


def _drive_to_zero(u0, geom, lam, gate, t_max, ramp, retries, tol):
    """Phases A + B for one datum, as one source on ``[0, T_A + T]``."""
    phases = []
    for attempt in range(retries + 1):
        try:
            stab = stabilize_until(u0, geom.a, lam, gate, t_max=t_max, dt=geom.dt, ramp=ramp)
        except NumericalFailure as exc:
            raise exc.with_phase("stabilize")
        try:
            sol = local_null_control(stab.final, geom, lam, tol=tol)
            break
        except ContractionError as exc:
            if attempt == retries:
                raise exc.with_phase("null_control")
            gate *= 0.5
    phases.append(Phase("stabilize", 0.0, stab.t_end, {
        "t_star": stab.t_star, "gate": gate, "end_norm": stab.final.norm(),
        "skipped": stab.control.n_steps == 0}))
    phases.append(Phase("null_control", stab.t_end, geom.T, {
        "iterations": sol.iterations, "max_ratio": max(sol.ratios) if sol.ratios else 0.0,
        "verification_error": sol.verification_error}))
    parts = [s for s in (stab.control, sol.control) if s.n_steps]
    return concatenate_sources(parts, 0.0), phases, gate


def steer(u0: SpectralField, u1: SpectralField, geom: ControlGeometry, lam: float,
          gate=None, tol=1e-4, picard_tol=1e-10, t_max=50.0, ramp=0.5, retries=3,
          keep_trace=False) -> SteeringPlan:
    """Control driving ``u0`` at time 0 to ``u1`` at ``T_total``.

    ``gate`` defaults to half the measured contraction threshold for
    ``(lam, geom)``.  Raises :class:`SteeringError` if the forward verification
    misses ``u1`` by more than ``tol``.
    """
    eps = None
    if gate is None:
        eps = measured_epsilon(geom, lam)
        gate = 0.5 * eps
    head, phases, g_a = _drive_to_zero(u0, geom, lam, gate, t_max, ramp, retries, picard_tol)
    parts = [head]
    if u1.norm() > 0:
        try:
            rev, rphases, _ = _drive_to_zero(u1.conj(), geom, lam, gate, t_max, ramp,
                                             retries, picard_tol)
        except NumericalFailure as exc:
            raise exc.with_phase("reversed_" + (exc.phase or "phase"))
        t_c = head.t1
        phases.append(Phase("reversed_null_control", t_c, rev.t1 - rev.t0, {
            "sub_phases": [p.as_dict() for p in rphases]}))
        parts.append(rev.time_reversed_conj())
    total = concatenate_sources(parts, 0.0)
    tr = evolve(u0, 0.0, total.t1, geom.evolution_params(lam), total)
    err = float((tr.final - u1).norm())
    plan = SteeringPlan(phases, total, g_a, eps, err, lam, tr if keep_trace else None)
    if not err <= tol:
        exc = SteeringError(f"steering end error {err:.3e} exceeds {tol:.1e}")
        exc.phase = "verification"
        exc.plan = plan
        raise exc
    return plan


def control_parity_defect(source: StepSource, grid, tag) -> float:
    coeffs = np.fft.fft(source.values, axis=-1) / grid.n_modes
    return max((parity_defect(c, grid, tag) for c in coeffs), default=0.0)
