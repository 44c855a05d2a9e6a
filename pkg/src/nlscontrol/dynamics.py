"""Split-step integration of the damped, controlled cubic NLS

    i u_t + u_xx + i phi(t)^2 a(x)^2 u = lam |u|^2 u + g          on the torus.

One step of size ``h`` (either sign) from ``t`` is the symmetric composition

    L(h/2)  P(h/2)  S(h)  P(h/2)  L(h/2)

of exact sub-flows: ``L`` the free flow ``exp(-i k^2 tau)``; ``P`` the
pointwise flow of ``u_t = -a^2 phi^2 u - i lam |u|^2 u`` (solved in closed
form, damping and nonlinear phase together); ``S`` the source kick
``u -> u - i h g(t + h/2)``.  Coefficients ``a`` and ``phi`` are frozen at the
midpoint.  The composition is self-adjoint, so a step with ``-h`` inverts a
step with ``h`` to rounding: controls built by backward integration replay
exactly forward, and the conjugate time-reversal identity holds at the
discrete level.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BlowUpError, UnderResolvedError
from .spectral import (
    SpectralField, TorusGrid, free_phase, hs_norm_coeffs, sample,
)


@dataclass(frozen=True)
class Damping:
    """Damping term ``phi(t)^2 a(x)^2``; ``phi=None`` means ``phi == 1``."""

    a: Callable
    phi: Optional[Callable] = None

    def beta(self, a_sq, t):
        if self.phi is None:
            return a_sq
        return a_sq * float(self.phi(np.array([t]))[0]) ** 2

    def phi_at(self, t):
        t = np.asarray(t, dtype=float)
        return np.ones_like(t) if self.phi is None else np.asarray(self.phi(t), dtype=float)


@dataclass(frozen=True)
class EvolutionParams:
    lam: float = 0.0
    dt: float = 1e-3
    damping: Optional[Damping] = None
    dealias: bool = False
    tail_monitor_threshold: Optional[float] = None
    blowup_factor: float = 2.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.isfinite(self.lam):
            raise ValueError("lam must be finite")


# -- sources --------------------------------------------------------------------
#
# A source is anything with ``at(t) -> physical samples`` (or None for zero).
# ``at`` is called by the integrator at step midpoints only.


@dataclass(frozen=True)
class HumSource:
    """Closed-form control ``a(x)^2 phi(t)^2 exp(i t d_xx) Phi_0``."""

    a_sq: np.ndarray
    phi: Callable
    phi0: SpectralField

    def at(self, t):
        grid = self.phi0.grid
        phi_t = float(self.phi(np.array([t]))[0])
        if phi_t == 0.0:
            return np.zeros(grid.n_modes, dtype=complex)
        c = free_phase(grid, t) * self.phi0.coeffs
        return self.a_sq * phi_t ** 2 * (grid.n_modes * np.fft.ifft(c))


@dataclass(frozen=True)
class StepSource:
    """Source held constant on each step; ``values[j]`` acts on
    ``[t0 + j dt, t0 + (j+1) dt]`` and is what the integrator sees at the
    midpoint of that step.  Values are physical samples."""

    t0: float
    dt: float
    values: np.ndarray

    @property
    def n_steps(self):
        return self.values.shape[0]

    @property
    def t1(self):
        return self.t0 + self.n_steps * self.dt

    @property
    def midpoints(self):
        return self.t0 + (np.arange(self.n_steps) + 0.5) * self.dt

    def _index(self, t):
        x = (t - self.t0) / self.dt - 0.5
        j = int(np.rint(x))
        if abs(x - j) > 1e-6 or not 0 <= j < self.n_steps:
            raise ValueError(f"t={t!r} is not a step midpoint of this source mesh")
        return j

    def at(self, t):
        return self.values[self._index(t)]

    def at_node(self, t):
        """Value at a mesh node: mean of the two adjacent steps."""
        x = (t - self.t0) / self.dt
        j = int(np.rint(x))
        if abs(x - j) > 1e-6 or not 0 <= j <= self.n_steps:
            raise ValueError(f"t={t!r} is not a node of this source mesh")
        lo = self.values[max(j - 1, 0)]
        hi = self.values[min(j, self.n_steps - 1)]
        return 0.5 * (lo + hi)

    def time_reversed_conj(self):
        """The control ``conj(h(T - t))`` on ``[0, T]`` with ``T`` the span."""
        return StepSource(0.0, self.dt, np.conj(self.values[::-1]))

    def shifted(self, t0):
        return StepSource(t0, self.dt, self.values)

    def sup_norm(self):
        return float(np.max(np.abs(self.values))) if self.n_steps else 0.0


def concatenate_sources(sources, t0=0.0):
    """Join step sources with equal ``dt`` end to end starting at ``t0``."""
    sources = [s for s in sources if s.n_steps]
    if not sources:
        raise ValueError("nothing to concatenate")
    dt = sources[0].dt
    if any(abs(s.dt - dt) > 1e-12 * dt for s in sources):
        raise ValueError("sources use different step sizes")
    return StepSource(t0, dt, np.concatenate([s.values for s in sources], axis=0))


@dataclass(frozen=True)
class TraceSource:
    """Source sampled at trace nodes; midpoint values by linear interpolation."""

    t0: float
    dt: float
    values: np.ndarray

    def at(self, t):
        x = (t - self.t0) / self.dt
        j = int(np.floor(x + 1e-9))
        j = min(max(j, 0), self.values.shape[0] - 2)
        w = x - j
        if w < -1e-6 or w > 1 + 1e-6:
            raise ValueError(f"t={t!r} outside the sampled span")
        return (1 - w) * self.values[j] + w * self.values[j + 1]

    def at_node(self, t):
        x = (t - self.t0) / self.dt
        j = int(np.rint(x))
        return self.values[j]


def source_at_node(g, t, grid):
    if g is None:
        return np.zeros(grid.n_modes, dtype=complex)
    if hasattr(g, "at_node"):
        return g.at_node(t)
    return g.at(t)


# -- traces ---------------------------------------------------------------------

@dataclass
class TrajectoryTrace:
    """Snapshots at ``t0 + j dt`` for ``j = 0..n`` (ascending in time)."""

    grid: TorusGrid
    t0: float
    dt: float
    coeffs: np.ndarray

    @property
    def n_steps(self):
        return self.coeffs.shape[0] - 1

    @property
    def t1(self):
        return self.t0 + self.n_steps * self.dt

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.coeffs.shape[0])

    def snapshot(self, j) -> SpectralField:
        return SpectralField(self.grid, self.coeffs[j])

    @property
    def initial(self):
        return self.snapshot(0)

    @property
    def final(self):
        return self.snapshot(-1)

    def norms(self, s=0.0):
        return hs_norm_coeffs(self.grid, self.coeffs, s)

    def values(self):
        """Physical samples, shape ``(n+1, N)``."""
        return self.grid.n_modes * np.fft.ifft(self.coeffs, axis=-1)


def _n_steps(t0, t1, dt):
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    n = int(round((t1 - t0) / dt))
    return max(n, 1)


# -- stepping -------------------------------------------------------------------

class Stepper:
    """Precomputed pieces of the split step for one grid and parameter set."""

    def __init__(self, grid: TorusGrid, params: EvolutionParams):
        self.grid = grid
        self.params = params
        self.ksq = grid.k.astype(float) ** 2
        self.a_sq = None
        if params.damping is not None:
            self.a_sq = sample(params.damping.a, grid) ** 2
        self.tail = grid.tail_mask()
        self._half = {}

    def half_phase(self, h):
        ph = self._half.get(h)
        if ph is None:
            ph = np.exp(-0.5j * h * self.ksq)
            self._half[h] = ph
        return ph

    def beta(self, t):
        if self.a_sq is None:
            return None
        return self.params.damping.beta(self.a_sq, t)

    def pointwise(self, v, tau, beta):
        lam = self.params.lam
        m = np.abs(v) ** 2
        if beta is None:
            return v * np.exp(-1j * lam * m * tau) if lam else v
        with np.errstate(divide="ignore", invalid="ignore"):
            eff = np.where(beta > 0, -np.expm1(-2.0 * beta * tau) / (2.0 * beta), tau)
        out = v * np.exp(-beta * tau)
        if lam:
            out = out * np.exp(-1j * lam * m * eff)
        return out

    def to_phys(self, c):
        return self.grid.n_modes * np.fft.ifft(c)

    def to_coef(self, v):
        return np.fft.fft(v) / self.grid.n_modes

    def step(self, c, t, h, g=None):
        """Advance coefficients ``c`` from ``t`` to ``t + h``."""
        ph = self.half_phase(h)
        tm = t + 0.5 * h
        beta = self.beta(tm)
        v = self.to_phys(c * ph)
        v = self.pointwise(v, 0.5 * h, beta)
        if g is not None:
            v = v - 1j * h * g.at(tm)
        v = self.pointwise(v, 0.5 * h, beta)
        return self.to_coef(v) * ph

    def damped_step_as_control(self, c, t, h):
        """Damped step with no source, plus the step-source that makes the
        undamped step reproduce it exactly (zero wherever ``a = 0``)."""
        ph = self.half_phase(h)
        tm = t + 0.5 * h
        beta = self.beta(tm)
        v = self.to_phys(c * ph)
        w = self.pointwise(self.pointwise(v, 0.5 * h, beta), 0.5 * h, beta)
        lam = self.params.lam
        fwd = v * np.exp(-0.5j * lam * h * np.abs(v) ** 2)
        back = w * np.exp(0.5j * lam * h * np.abs(w) ** 2)
        gam = np.where(beta > 0, (fwd - back) / (1j * h), 0.0)
        return self.to_coef(w) * ph, gam

    def check(self, c, t, bound):
        if not np.all(np.isfinite(c)):
            raise BlowUpError(f"non-finite state at t={t:.6g}")
        e = np.abs(c) ** 2
        total = e.sum()
        if bound is not None and total > (self.params.blowup_factor * bound) ** 2:
            raise BlowUpError(
                f"L2 norm {np.sqrt(total):.3e} exceeds twice its a-priori bound at t={t:.6g}")
        thr = self.params.tail_monitor_threshold
        if thr is not None and total > 0 and e[self.tail].sum() > thr * total:
            raise UnderResolvedError(
                f"spectral tail holds {e[self.tail].sum() / total:.2e} of the energy "
                f"at t={t:.6g} (threshold {thr:.2e})")


def _norm_bound_growth(stepper, h):
    """Per-step multiplicative L2 growth allowed by the sub-flows."""
    if stepper.a_sq is None or h > 0:
        return 1.0
    return float(np.exp(np.max(stepper.a_sq) * abs(h)))


def _run(u0: SpectralField, t_start, n, h, params, g):
    stepper = Stepper(u0.grid, params)
    out = np.empty((n + 1, u0.grid.n_modes), dtype=complex)
    c = np.array(u0.coeffs)
    out[0] = c
    bound = float(np.linalg.norm(c)) + 1e-300
    grow = _norm_bound_growth(stepper, h)
    t = t_start
    for j in range(n):
        if g is not None:
            bound += abs(h) * float(np.sqrt(np.mean(np.abs(g.at(t + 0.5 * h)) ** 2)))
        bound *= grow
        c = stepper.step(c, t, h, g)
        t = t_start + (j + 1) * h
        stepper.check(c, t, bound)
        out[j + 1] = c
    return out


def strang_step(u: SpectralField, t: float, params: EvolutionParams, g=None,
                dt: float | None = None) -> SpectralField:
    """One split step from ``t`` to ``t + dt`` (``dt`` defaults to ``params.dt``)."""
    h = params.dt if dt is None else dt
    stepper = Stepper(u.grid, params)
    c = stepper.step(np.array(u.coeffs), t, h, g)
    stepper.check(c, t + h, None)
    return SpectralField(u.grid, c)


def evolve(u0: SpectralField, t0: float, t1: float, params: EvolutionParams,
           g=None) -> TrajectoryTrace:
    """Integrate forward from ``u(t0) = u0`` to ``t1``.

    The step is adjusted to ``(t1 - t0) / round((t1 - t0) / params.dt)`` so the
    last snapshot sits exactly at ``t1``.
    """
    n = _n_steps(t0, t1, params.dt)
    h = (t1 - t0) / n
    return TrajectoryTrace(u0.grid, t0, h, _run(u0, t0, n, h, params, g))


def evolve_backward(u1: SpectralField, t0: float, t1: float, params: EvolutionParams,
                    g=None) -> TrajectoryTrace:
    """Integrate from ``u(t1) = u1`` down to ``t0`` with negative steps.

    The returned trace is ordered by ascending time like :func:`evolve`.
    """
    n = _n_steps(t0, t1, params.dt)
    h = (t1 - t0) / n
    out = _run(u1, t1, n, -h, params, g)
    return TrajectoryTrace(u1.grid, t0, h, out[::-1].copy())


def evolve_damped_as_control(u0: SpectralField, t0: float, n: int, h: float,
                             params: EvolutionParams, stop=None):
    """Damped forward evolution that also records the equivalent control.

    Returns ``(trace, source)`` where ``source`` drives the *undamped*
    controlled equation through the same discrete states.  ``stop(j, c)`` may
    end the run early by returning True after step ``j``.
    """
    if params.damping is None:
        raise ValueError("damping must be set")
    stepper = Stepper(u0.grid, params)
    states = [np.array(u0.coeffs)]
    controls = []
    c = states[0]
    bound = float(np.linalg.norm(c)) + 1e-300
    for j in range(n):
        t = t0 + j * h
        c, gam = stepper.damped_step_as_control(c, t, h)
        stepper.check(c, t + h, bound)
        states.append(c)
        controls.append(gam)
        if stop is not None and stop(j + 1, c):
            break
    trace = TrajectoryTrace(u0.grid, t0, h, np.array(states))
    values = np.array(controls) if controls else np.zeros((0, u0.grid.n_modes), complex)
    return trace, StepSource(t0, h, values)


# -- diagnostics ----------------------------------------------------------------

def _trapezoid_cumulative(y, h):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))
    return out


def mass_identity_terms(trace: TrajectoryTrace, params: EvolutionParams, g=None):
    """Both sides of the mass balance at every snapshot.

    ``lhs = |u(t)|^2 - |u(t0)|^2`` and
    ``rhs = -2 int |a phi u|^2 + 2 Im int <g, u>`` (trapezoid in time).
    """
    grid = trace.grid
    vals = trace.values()
    mass = np.mean(np.abs(vals) ** 2, axis=1)
    lhs = mass - mass[0]
    times = trace.times
    rhs = np.zeros_like(lhs)
    if params.damping is not None:
        a_sq = sample(params.damping.a, grid) ** 2
        phi_sq = params.damping.phi_at(times) ** 2
        dens = phi_sq * np.mean(a_sq * np.abs(vals) ** 2, axis=1)
        rhs -= 2.0 * _trapezoid_cumulative(dens, trace.dt)
    if g is not None:
        gv = np.array([source_at_node(g, t, grid) for t in times])
        work = np.imag(np.mean(gv * np.conj(vals), axis=1))
        rhs += 2.0 * _trapezoid_cumulative(work, trace.dt)
    return lhs, rhs


def mass_identity_residual(trace: TrajectoryTrace, params: EvolutionParams, g=None,
                           relative: bool = False) -> float:
    lhs, rhs = mass_identity_terms(trace, params, g)
    res = float(np.max(np.abs(lhs - rhs)))
    if relative:
        m0 = float(trace.norms(0)[0]) ** 2
        res = res / m0 if m0 > 0 else res
    return res


def gronwall_margin(trace: TrajectoryTrace, g=None, C: float = 2.0) -> float:
    """Smallest value of ``envelope / |u(t)|^2`` with
    ``envelope = C (|u(0)|^2 + |g|^2_{L2 L2}) exp(C |t - t0|)``; >= 1 means it holds."""
    mass = trace.norms(0) ** 2
    gsq = 0.0
    if g is not None:
        gv = np.array([source_at_node(g, t, trace.grid) for t in trace.times])
        dens = np.mean(np.abs(gv) ** 2, axis=1)
        gsq = float(_trapezoid_cumulative(dens, trace.dt)[-1])
    env = C * (mass[0] + gsq) * np.exp(C * np.abs(trace.times - trace.t0))
    pos = mass > 0
    return float(np.min(env[pos] / mass[pos])) if np.any(pos) else np.inf


def plane_wave(grid, amplitude, k, lam, t):
    """Exact plane-wave solution ``A e^{ikx} e^{-i(k^2 + lam |A|^2) t}``."""
    return SpectralField.from_modes(
        grid, {k: amplitude * np.exp(-1j * (k * k + lam * abs(amplitude) ** 2) * t)})
