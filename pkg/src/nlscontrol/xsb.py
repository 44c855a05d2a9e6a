"""Discrete Bourgain norms and numerical probes of the multilinear estimates.

The restriction norm of ``X^{s,b}_T`` is an infimum over extensions and is
not computable.  Everything here uses one fixed extension instead: the trace
is multiplied by a smooth window ``psi`` supported inside its time span, so
``|psi u|_{X^{s,b}}`` is an upper bound for the restriction norm and both
sides of every probed estimate are measured with the same functional.

Norm evaluation: ``u -> u#`` (mode-wise phase ``exp(+i k^2 t)``), zero-padding
by ``pad``, temporal FFT with angular frequencies ``sigma``, then

    |psi u|^2 = (dt / P) sum_{sigma, k} |k|_o^{2s} <sigma>^{2b} |F(sigma, k)|^2,

which for ``b = 0`` is exactly the rectangle rule for ``int |psi u|_{H^s}^2 dt``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import TrajectoryTrace
from .spectral import SpectralField, TorusGrid, free_phase, make_bump

DEFAULT_PAD = 4
DEFAULT_PLATEAU = 1.0 / 3.0


@dataclass(frozen=True)
class TimeWindow:
    """Smooth cutoff sampled on a trace mesh."""

    values: np.ndarray
    plateau_fraction: float

    def __post_init__(self):
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("window values must lie in [0, 1]")


def time_window(times, plateau_fraction=DEFAULT_PLATEAU) -> TimeWindow:
    """Bump vanishing at both ends of ``times`` with a centred plateau."""
    times = np.asarray(times, dtype=float)
    t0, t1 = float(times[0]), float(times[-1])
    span = t1 - t0
    half = 0.5 * plateau_fraction * span
    mid = 0.5 * (t0 + t1)
    bump = make_bump((t0, t1), (mid - half, mid + half), kind="temporal")
    return TimeWindow(bump(times), plateau_fraction)


@dataclass(frozen=True)
class XsbSample:
    """Temporal spectrum of ``(psi u)#`` on a padded mesh."""

    grid: TorusGrid
    spectrum: np.ndarray  # (P, N), FFT over time of the padded, windowed u#
    sigma: np.ndarray     # angular frequencies, length P
    dt: float
    pad: int
    plateau_fraction: float

    def norm(self, s: float, b: float) -> float:
        if abs(b) > 1:
            raise ValueError("|b| <= 1 required")
        wk = self.grid.k_circ ** (2.0 * s)
        wt = (1.0 + self.sigma ** 2) ** b
        p = self.spectrum.shape[0]
        e = np.abs(self.spectrum) ** 2
        return float(np.sqrt(self.dt / p * np.einsum("t,k,tk->", wt, wk, e)))

    def manifest(self):
        return {"pad": self.pad, "dt": self.dt, "n_time": self.spectrum.shape[0] // self.pad,
                "plateau_fraction": self.plateau_fraction}


def _window_values(trace, window):
    if window is None:
        window = time_window(trace.times)
    w = np.asarray(window.values if isinstance(window, TimeWindow) else window, dtype=float)
    if w.shape != (trace.coeffs.shape[0],):
        raise ValueError("window and trace meshes differ")
    frac = window.plateau_fraction if isinstance(window, TimeWindow) else float("nan")
    return w, frac


def xsb_transform(trace: TrajectoryTrace, window=None, pad: int = DEFAULT_PAD) -> XsbSample:
    if pad < 4:
        raise ValueError("temporal padding factor must be >= 4")
    w, frac = _window_values(trace, window)
    sharp = np.conj(free_phase(trace.grid, trace.times)) * trace.coeffs
    sharp = sharp * w[:, None]
    p = pad * sharp.shape[0]
    spec = np.fft.fft(sharp, n=p, axis=0)
    sigma = 2.0 * np.pi * np.fft.fftfreq(p, d=trace.dt)
    return XsbSample(trace.grid, spec, sigma, trace.dt, pad, frac)


def xsb_norm(trace: TrajectoryTrace, s: float, b: float, window=None,
             pad: int = DEFAULT_PAD) -> float:
    """Windowed ``X^{s,b}`` norm of a trace (upper bound for the restriction norm)."""
    if abs(b) > 1:
        raise ValueError("|b| <= 1 required")
    return xsb_transform(trace, window, pad).norm(s, b)


def free_wave_trace(u0: SpectralField, times) -> TrajectoryTrace:
    """Samples of ``exp(i t d_xx) u0`` on a uniform mesh."""
    times = np.asarray(times, dtype=float)
    coeffs = free_phase(u0.grid, times) * u0.coeffs
    return TrajectoryTrace(u0.grid, float(times[0]), float(times[1] - times[0]), coeffs)


def uniform_times(t1=1.0, n=256, t0=0.0):
    return t0 + (t1 - t0) * np.arange(n + 1) / n


def pointwise_product(*factors, conj_mask=None):
    """Trace of ``u1 conj(u2) u3 ...`` computed at collocation points."""
    first = factors[0]
    conj_mask = conj_mask or [False] * len(factors)
    prod = None
    for f, cj in zip(factors, conj_mask):
        v = f.values()
        v = np.conj(v) if cj else v
        prod = v if prod is None else prod * v
    coeffs = np.fft.fft(prod, axis=-1) / first.grid.n_modes
    return TrajectoryTrace(first.grid, first.t0, first.dt, coeffs)


def lp_norm(trace: TrajectoryTrace, p: float, window=None) -> float:
    """``|psi u|_{L^p([t0,t1] x T)}``: collocation in space (normalized measure),
    trapezoid in time."""
    w, _ = _window_values(trace, window)
    dens = np.mean(np.abs(w[:, None] * trace.values()) ** p, axis=1)
    return float(np.trapezoid(dens, dx=trace.dt) ** (1.0 / p))


def l4_ratio(trace: TrajectoryTrace, window=None, b: float = 3 / 8) -> float:
    """``|psi u|_{L^4} / |psi u|_{X^{0,b}}``."""
    den = xsb_norm(trace, 0.0, b, window)
    if den == 0.0:
        raise ZeroDivisionError("zero field: L4 ratio undefined")
    return lp_norm(trace, 4, window) / den


def trilinear_ratio(u1, u2, u3, s: float, window=None, b: float = 3 / 8,
                    pad: int = DEFAULT_PAD) -> float:
    """``|psi u1 conj(u2) u3|_{X^{s,-b}}`` over the best single-slot bound.

    The right-hand side places the ``s`` derivatives on one slot:
    ``D_j = |u_j|_{X^{s,b}} prod_{i != j} |u_i|_{X^{0,b}}``; the ratio is taken
    against ``max_j D_j`` (the smallest of the three slot-wise ratios).
    """
    num = xsb_norm(pointwise_product(u1, u2, u3, conj_mask=[False, True, False]),
                   s, -b, window, pad)
    samples = [xsb_transform(u, window, pad) for u in (u1, u2, u3)]
    lo = [x.norm(0.0, b) for x in samples]
    hi = [x.norm(s, b) for x in samples]
    dens = [hi[j] * np.prod([lo[i] for i in range(3) if i != j]) for j in range(3)]
    den = max(dens)
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise ZeroDivisionError("zero denominator in trilinear ratio")
    return num / den


def difference_ratio(u, v, s: float, window=None, b: float = 3 / 8) -> float:
    """``||u|^2u - |v|^2v|_{X^{s,-b}} / ((|u|^2 + |v|^2)_{X^{s,b}} |u - v|_{X^{s,b}})``."""
    cubic = lambda w: pointwise_product(w, w, w, conj_mask=[False, True, False])
    cu, cv = cubic(u), cubic(v)
    diff = TrajectoryTrace(u.grid, u.t0, u.dt, cu.coeffs - cv.coeffs)
    num = xsb_norm(diff, s, -b, window)
    uv = TrajectoryTrace(u.grid, u.t0, u.dt, u.coeffs - v.coeffs)
    den = (xsb_norm(u, s, b, window) ** 2 + xsb_norm(v, s, b, window) ** 2) \
        * xsb_norm(uv, s, b, window)
    if den == 0.0:
        raise ZeroDivisionError("zero denominator")
    return num / den


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    x: tuple
    y: tuple
    r2: float


def loglog_fit(x, y) -> SlopeFit:
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), tuple(map(float, x)),
                    tuple(map(float, y)), float(r2))


def multiplication_loss_norms(n_list, b, grid=None, t1=1.0, n_time=512,
                              plateau_fraction=DEFAULT_PLATEAU):
    """``(|u_n|_{X^{0,b}}, |e^{ix} u_n|_{X^{0,b}})`` for ``u_n = psi e^{inx} e^{-in^2 t}``."""
    grid = grid or TorusGrid(128)
    n_list = [int(n) for n in n_list]
    if max(n_list) > grid.n_modes / 3:
        raise ValueError(f"n={max(n_list)} exceeds N/3 = {grid.n_modes / 3:.1f}")
    times = uniform_times(t1, n_time)
    window = time_window(times, plateau_fraction)
    base, shifted = [], []
    for n in n_list:
        un = free_wave_trace(SpectralField.from_modes(grid, {n: 1.0}), times)
        base.append(xsb_norm(un, 0.0, b, window))
        moved = np.zeros_like(un.coeffs)
        moved[:, (n + 1) % grid.n_modes] = un.coeffs[:, n % grid.n_modes]
        shifted.append(xsb_norm(TrajectoryTrace(grid, un.t0, un.dt, moved), 0.0, b, window))
    return np.array(base), np.array(shifted)


def multiplication_loss_probe(n_list, b, grid=None, **kw) -> SlopeFit:
    """Log-log slope of ``|e^{ix} u_n|_{X^{0,b}}`` against ``n``."""
    if not 0 <= b < 1:
        raise ValueError("b must lie in [0, 1)")
    _, shifted = multiplication_loss_norms(n_list, b, grid, **kw)
    return loglog_fit(n_list, shifted)


def hb_norm_1d(f, dt, b, pad=1):
    """Discrete ``H^b(R)`` norm of samples ``f`` (assumed to vanish at the ends)."""
    p = pad * len(f)
    spec = np.fft.fft(f, n=p)
    sigma = 2.0 * np.pi * np.fft.fftfreq(p, d=dt)
    return float(np.sqrt(dt / p * np.sum((1.0 + sigma ** 2) ** b * np.abs(spec) ** 2)))


def gaussian_pulse(s):
    return np.exp(-np.asarray(s) ** 2)


def duhamel_primitive(f_vals, t, T, cutoff=None):
    """``F(t) = Psi(t/T) int_0^t f`` on a uniform mesh containing ``t = 0``.

    ``Psi`` equals 1 on ``[-1, 1]`` and vanishes outside ``(-2, 2)``.
    """
    t = np.asarray(t, float)
    f_vals = np.asarray(f_vals)
    dt = t[1] - t[0]
    i0 = int(np.argmin(np.abs(t)))
    cum = np.concatenate([[0.0], np.cumsum(0.5 * dt * (f_vals[1:] + f_vals[:-1]))])
    cum = cum - cum[i0]
    cutoff = cutoff or make_bump((-2.0, 2.0), (-1.0, 1.0), kind="temporal")
    return cutoff(t / T) * cum


def duhamel_gain_ratios(pulse, T_list, b, bp, half_span=64.0, points_per_T=64):
    T_list = np.asarray(T_list, float)
    dt = T_list.min() / points_per_T
    n = int(2 * half_span / dt)
    n += n % 2
    t = (np.arange(n) - n // 2) * dt
    out = []
    for T in T_list:
        f = pulse(t / T)
        den = hb_norm_1d(f, dt, -bp)
        if den == 0.0:
            raise ZeroDivisionError("zero forcing")
        out.append(hb_norm_1d(duhamel_primitive(f, t, T), dt, b) / den)
    return np.array(out)


def duhamel_gain_probe(pulse=gaussian_pulse, T_list=(1 / 64, 1 / 32, 1 / 16, 1 / 8),
                       b=5 / 8, bp=3 / 8, **kw) -> SlopeFit:
    """Slope in ``T`` of ``|F|_{H^b} / |f_T|_{H^{-b'}}`` with ``f_T(t) = pulse(t/T)``.

    The forcing is rescaled with ``T``: for a fixed forcing the ratio scales
    like ``T^{3/2-b}``, and the extremal ``T^{1-b-b'}`` behaviour only shows
    for forcings concentrated on the window.
    """
    if not (0 < bp < 0.5 < b and b + bp <= 1 + 1e-12):
        raise ValueError("need 0 < b' < 1/2 < b and b + b' <= 1")
    if any(not 0 < T <= 1 for T in T_list):
        raise ValueError("T_list must lie in (0, 1]")
    return loglog_fit(T_list, duhamel_gain_ratios(pulse, T_list, b, bp, **kw))
