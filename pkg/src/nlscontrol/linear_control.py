"""HUM control of the free Schrodinger flow.

The Gramian is discretized with the midpoint rule on the evolution mesh,

    Lam Phi = h sum_m phi(t_m)^2 L(-t_m) a^2 L(t_m) Phi,     t_m = (m + 1/2) h,

which is exactly what the split-step integrator produces when it replays the
control ``a^2 phi^2 L(t) Phi`` backward from zero: ``Psi(0) = i Lam Phi``.
Backward replay therefore reproduces the target to CG accuracy.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import (
    EvolutionParams, HumSource, StepSource, TrajectoryTrace, evolve_backward,
)
from .errors import CGConvergenceError
from .spectral import (
    Bump, SpectralField, TorusGrid, free_phase, make_bump, sample,
)


@dataclass(frozen=True)
class ControlGeometry:
    """Control region ``a``, time window ``phi`` on ``[0, T]`` and the step."""

    grid: TorusGrid
    T: float
    a: Callable
    phi: Callable
    dt: float = 1e-3

    def __post_init__(self):
        if not self.T > 0 or not self.dt > 0:
            raise ValueError("T and dt must be positive")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError("T must be an integer multiple of dt")

    @classmethod
    def build(cls, n_modes=64, T=1.0, omega=(0.0, np.pi / 2), plateau=None, dt=1e-3):
        """Bump ``a`` on ``omega`` (plateau defaults to its central half) and
        ``phi`` with support ``[0, T]`` and plateau ``[T/3, 2T/3]``."""
        lo, hi = omega
        if plateau is None:
            w = hi - lo
            plateau = (lo + 0.25 * w, hi - 0.25 * w)
        a = make_bump(omega, plateau, kind="spatial")
        phi = make_bump((0.0, T), (T / 3, 2 * T / 3), kind="temporal")
        return cls(TorusGrid(n_modes), T, a, phi, dt)

    def with_grid(self, grid):
        return ControlGeometry(grid, self.T, self.a, self.phi, self.dt)

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def midpoints(self):
        return (np.arange(self.n_steps) + 0.5) * self.dt

    @property
    def a_sq(self):
        return sample(self.a, self.grid) ** 2

    @property
    def phi_sq(self):
        return np.asarray(self.phi(self.midpoints), dtype=float) ** 2

    def phi_sq_integral(self):
        """Midpoint value of ``int_0^T phi^2``."""
        return float(self.dt * self.phi_sq.sum())

    def evolution_params(self, lam=0.0, **kw):
        return EvolutionParams(lam=lam, dt=self.dt, **kw)

    def manifest(self):
        d = {"n_modes": self.grid.n_modes, "T": self.T, "dt": self.dt}
        for name in ("a", "phi"):
            f = getattr(self, name)
            if isinstance(f, Bump):
                d[name] = {"support": list(f.support), "plateau": list(f.plateau)}
            else:
                d[name] = type(f).__name__
        return d


class Gramian:
    """Vectorized midpoint Gramian; ``apply`` works on coefficient arrays."""

    def __init__(self, geom: ControlGeometry):
        self.geom = geom
        self.grid = geom.grid
        w = geom.dt * geom.phi_sq
        keep = w > 0
        self.weights = w[keep]
        self.phase = free_phase(self.grid, geom.midpoints[keep])
        self.a_sq = geom.a_sq

    def __call__(self, c):
        v = np.fft.ifft(self.phase * c, axis=-1)
        v *= self.a_sq
        back = np.fft.fft(v, axis=-1)
        return np.einsum("m,mk->k", self.weights, np.conj(self.phase) * back)

    def dense(self):
        eye = np.eye(self.grid.n_modes, dtype=complex)
        return np.stack([self(e) for e in eye], axis=1)


def gramian_apply(phi0: SpectralField, geom: ControlGeometry) -> SpectralField:
    if phi0.grid != geom.grid:
        raise ValueError("field and geometry use different grids")
    return SpectralField(geom.grid, Gramian(geom)(phi0.coeffs))


def gramian_matrix_closed_form(geom: ControlGeometry) -> np.ndarray:
    """``Lam_jk = (a^2)^_{j-k} h sum_m phi_m^2 exp(i (k_j^2 - k_k^2) t_m)``."""
    grid = geom.grid
    k = grid.k.astype(float)
    a2hat = np.fft.fft(geom.a_sq) / grid.n_modes
    idx = (np.arange(grid.n_modes)[:, None] - np.arange(grid.n_modes)[None, :]) % grid.n_modes
    dk = (k[:, None] ** 2 - k[None, :] ** 2)
    w = geom.dt * geom.phi_sq
    time_part = np.einsum("m,mjk->jk", w, np.exp(1j * dk[None] * geom.midpoints[:, None, None]))
    return a2hat[idx] * time_part


# -- conjugate gradients -----------------------------------------------------------

@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def conjugate_gradient(op, b, x0=None, tol=1e-10, max_iter=500, project=None) -> CGResult:
    """CG for a Hermitian positive-definite ``op``; relative residual stopping.

    ``project`` (optional) is applied to every operator output, restricting the
    iteration to an invariant subspace.
    """
    P = project or (lambda v: v)
    b = P(np.asarray(b, dtype=complex))
    bn = float(np.linalg.norm(b))
    if bn == 0.0:
        return CGResult(np.zeros_like(b), 0, 0.0)
    x = np.zeros_like(b) if x0 is None else P(np.array(x0, dtype=complex))
    r = b - P(op(x)) if x0 is not None else b.copy()
    p = r.copy()
    rr = float(np.vdot(r, r).real)
    hist = [np.sqrt(rr) / bn]
    if hist[-1] <= tol:
        return CGResult(x, 0, hist[-1], hist)
    for it in range(1, max_iter + 1):
        Ap = P(op(p))
        pAp = float(np.vdot(p, Ap).real)
        if pAp <= 0:
            raise CGConvergenceError(
                f"operator not positive definite (p*Ap = {pAp:.3e}) at iteration {it}")
        alpha = rr / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rr_new = float(np.vdot(r, r).real)
        hist.append(np.sqrt(rr_new) / bn)
        if hist[-1] <= tol:
            return CGResult(x, it, hist[-1], hist)
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise CGConvergenceError(
        f"CG did not reach relative residual {tol:.1e} in {max_iter} iterations "
        f"(last {hist[-1]:.3e})")


# -- observability -------------------------------------------------------------------

def low_mode_mask(grid: TorusGrid, n_obs: int) -> np.ndarray:
    """Modes ``-n_obs/2 .. n_obs/2 - 1`` (all modes when ``n_obs == N``)."""
    if not 1 <= n_obs <= grid.n_modes:
        raise ValueError("need 1 <= n_obs <= N")
    lo = -(n_obs // 2)
    return (grid.k >= lo) & (grid.k < lo + n_obs)


@dataclass(frozen=True)
class ObservabilityEstimate:
    constant: float
    lam_min: float
    n_obs: int
    iterations: int
    cg_iterations: int


def observability_constant(geom: ControlGeometry, n_obs=None, tol=1e-10, block=4,
                           max_iter=200, cg_tol=1e-12, seed=0,
                           floor=1e-12) -> ObservabilityEstimate:
    """``1 / lam_min`` of the Gramian compressed to the lowest ``n_obs`` modes.

    Block inverse iteration with Rayleigh-Ritz; each inverse application is a
    CG solve on the compressed operator.
    """
    grid = geom.grid
    n_obs = grid.n_modes if n_obs is None else int(n_obs)
    mask = low_mode_mask(grid, n_obs)
    gram = Gramian(geom)
    proj = lambda v: np.where(mask, v, 0.0)
    op = lambda v: gram(proj(v))
    p = min(block, n_obs)
    rng = np.random.default_rng(seed)
    X = np.zeros((grid.n_modes, p), dtype=complex)
    X[mask] = rng.standard_normal((n_obs, p)) + 1j * rng.standard_normal((n_obs, p))
    X, _ = np.linalg.qr(X)
    prev = None
    cg_total = 0
    lam_floor = floor * max(geom.phi_sq_integral(), 1e-300)
    for it in range(1, max_iter + 1):
        Y = np.empty_like(X)
        for j in range(p):
            try:
                res = conjugate_gradient(op, X[:, j], tol=cg_tol, max_iter=20 * n_obs + 100,
                                         project=proj)
            except CGConvergenceError as exc:
                raise CGConvergenceError(
                    f"inverse iteration failed on the {n_obs}-mode subspace; the smallest "
                    f"eigenvalue is below the resolution floor ({exc})") from exc
            cg_total += res.iterations
            Y[:, j] = res.x
        Q, _ = np.linalg.qr(Y)
        AQ = np.stack([op(Q[:, j]) for j in range(p)], axis=1)
        H = Q.conj().T @ AQ
        evals, evecs = np.linalg.eigh(0.5 * (H + H.conj().T))
        X = Q @ evecs
        lam = float(evals[0])
        if lam <= lam_floor:
            raise CGConvergenceError(
                f"lambda_min = {lam:.3e} below floor {lam_floor:.3e} on {n_obs} modes")
        if prev is not None and abs(lam - prev) <= tol * lam:
            return ObservabilityEstimate(1.0 / lam, lam, n_obs, it, cg_total)
        prev = lam
    raise CGConvergenceError("inverse iteration did not converge")


# -- HUM -----------------------------------------------------------------------------

@dataclass
class LinearControlResult:
    phi0: SpectralField
    geom: ControlGeometry
    residual: float
    iterations: int
    cg_residual: float

    @property
    def source(self) -> HumSource:
        return HumSource(self.geom.a_sq, self.geom.phi, self.phi0)

    def step_source(self) -> StepSource:
        """Control sampled at the step midpoints of the geometry mesh."""
        return hum_step_source(self.phi0, self.geom)

    def dual_trace(self) -> TrajectoryTrace:
        g = self.geom
        t = np.arange(g.n_steps + 1) * g.dt
        return TrajectoryTrace(g.grid, 0.0, g.dt, free_phase(g.grid, t) * self.phi0.coeffs)

    def control_trace(self) -> TrajectoryTrace:
        """``g = a^2 phi^2 Phi`` at the mesh nodes, as coefficients."""
        g = self.geom
        dual = self.dual_trace()
        phi_sq = np.asarray(g.phi(dual.times), dtype=float) ** 2
        vals = dual.values() * g.a_sq[None, :] * phi_sq[:, None]
        return TrajectoryTrace(g.grid, 0.0, g.dt, np.fft.fft(vals, axis=-1) / g.grid.n_modes)

    def manifest(self):
        return {"geometry": self.geom.manifest(), "iterations": self.iterations,
                "cg_residual": self.cg_residual, "replay_residual": self.residual}


def hum_step_source(phi0: SpectralField, geom: ControlGeometry, t0: float = 0.0) -> StepSource:
    phase = free_phase(geom.grid, geom.midpoints)
    vals = geom.grid.n_modes * np.fft.ifft(phase * phi0.coeffs, axis=-1)
    vals *= geom.a_sq[None, :] * geom.phi_sq[:, None]
    return StepSource(t0, geom.dt, vals)


def apply_S(phi0: SpectralField, geom: ControlGeometry, gram: Gramian | None = None) -> SpectralField:
    """``S = i Lam``: the state at time 0 produced by the HUM control of ``phi0``."""
    gram = gram or Gramian(geom)
    return SpectralField(geom.grid, 1j * gram(phi0.coeffs))


def solve_S(target: SpectralField, geom: ControlGeometry, tol=1e-10, max_iter=500,
            x0=None, gram: Gramian | None = None) -> CGResult:
    """``S^{-1} target = -i Lam^{-1} target`` by CG on ``Lam``."""
    gram = gram or Gramian(geom)
    guess = None if x0 is None else 1j * np.asarray(x0)
    res = conjugate_gradient(gram, target.coeffs, x0=guess, tol=tol, max_iter=max_iter)
    res.x = -1j * res.x
    return res


def replay_residual(phi0: SpectralField, psi0: SpectralField, geom: ControlGeometry) -> float:
    """Backward free evolution from zero at ``T`` under the HUM control of ``phi0``;
    returns ``|Psi(0) - psi0| / |psi0|``."""
    params = geom.evolution_params(0.0)
    tr = evolve_backward(geom.grid.zeros(), 0.0, geom.T, params, hum_step_source(phi0, geom))
    err = float(np.linalg.norm(tr.initial.coeffs - psi0.coeffs))
    n0 = psi0.norm()
    return err / n0 if n0 > 0 else err


def solve_linear_hum(psi0: SpectralField, geom: ControlGeometry, tol=1e-10,
                     max_iter=500) -> LinearControlResult:
    """HUM control steering the free flow from 0 at ``T`` to ``psi0`` at time 0
    (equivalently, forward from ``psi0`` to 0)."""
    if psi0.grid != geom.grid:
        raise ValueError("field and geometry use different grids")
    if psi0.norm() == 0.0:
        return LinearControlResult(geom.grid.zeros(), geom, 0.0, 0, 0.0)
    res = solve_S(psi0, geom, tol=tol, max_iter=max_iter)
    phi0 = SpectralField(geom.grid, res.x)
    return LinearControlResult(phi0, geom, replay_residual(phi0, psi0, geom),
                               res.iterations, res.residual)
