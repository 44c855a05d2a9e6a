"""Local null control of the cubic NLS by a Picard iteration on HUM data.

For a dual datum ``Phi0`` let ``u`` solve the controlled equation backward
from ``u(T) = 0`` with control ``a^2 phi^2 exp(i t d_xx) Phi0``.  Splitting
``u(0) = K Phi0 + S Phi0`` into the nonlinear remainder and the linear HUM
part, a control driving ``u0`` to zero is a fixed point of

    B Phi0 = S^{-1} (u0 - K Phi0).

All operators are evaluated with the same split-step mesh as the forward
verification, so the fixed point is a discrete null control up to the Picard
and CG tolerances.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    StepSource, TraceSource, TrajectoryTrace, evolve, evolve_backward,
)
from .errors import BlowUpError, ContractionError, NumericalFailure
from .linear_control import ControlGeometry, Gramian, hum_step_source, solve_S
from .spectral import SpectralField, hs_norm, hs_norm_coeffs, resample

CG_TOL = 1e-13


def _backward_u(phi0: SpectralField, geom: ControlGeometry, lam: float) -> TrajectoryTrace:
    params = geom.evolution_params(lam)
    return evolve_backward(geom.grid.zeros(), 0.0, geom.T, params, hum_step_source(phi0, geom))


def k_operator(phi0: SpectralField, geom: ControlGeometry, lam: float,
               gram: Gramian | None = None) -> SpectralField:
    """``K Phi0 = u(0) - S Phi0``, the nonlinear part of the backward solve."""
    if lam == 0 or phi0.norm() == 0.0:
        return geom.grid.zeros()
    gram = gram or Gramian(geom)
    u0 = _backward_u(phi0, geom, lam).initial.coeffs
    return SpectralField(geom.grid, u0 - 1j * gram(phi0.coeffs))


def k_operator_direct(phi0: SpectralField, geom: ControlGeometry, lam: float) -> SpectralField:
    """``v(0)`` from a second backward solve of the free equation with source
    ``lam |u|^2 u`` read off the ``u`` trace (agrees with :func:`k_operator`
    to O(dt^2))."""
    if lam == 0:
        return geom.grid.zeros()
    u = _backward_u(phi0, geom, lam)
    vals = u.values()
    src = TraceSource(u.t0, u.dt, lam * np.abs(vals) ** 2 * vals)
    v = evolve_backward(geom.grid.zeros(), 0.0, geom.T, geom.evolution_params(0.0), src)
    return v.initial


def b_map(phi0: SpectralField, u0: SpectralField, geom: ControlGeometry, lam: float,
          cg_tol=CG_TOL, max_iter=500, gram: Gramian | None = None, x0=None) -> SpectralField:
    gram = gram or Gramian(geom)
    rhs = u0 - k_operator(phi0, geom, lam, gram)
    res = solve_S(rhs, geom, tol=cg_tol, max_iter=max_iter, x0=x0, gram=gram)
    return SpectralField(geom.grid, res.x)


def fixed_point_residual(phi0: SpectralField, u0: SpectralField, geom: ControlGeometry,
                         lam: float) -> float:
    """``|K Phi0 + S Phi0 - u0|``, recomputed from one fresh backward solve."""
    u = _backward_u(phi0, geom, lam).initial
    return float(np.linalg.norm(u.coeffs - u0.coeffs))


@dataclass
class ControlSolution:
    phi0: SpectralField
    geom: ControlGeometry
    lam: float
    u0: SpectralField
    iterations: int
    diffs: list
    ratios: list
    verification_error: float
    control: StepSource = field(repr=False)
    trace: TrajectoryTrace | None = field(default=None, repr=False)

    def phi0_hs(self, s):
        return hs_norm(self.phi0, s)

    def control_hs_max(self, s):
        coeffs = np.fft.fft(self.control.values, axis=-1) / self.geom.grid.n_modes
        norms = hs_norm_coeffs(self.geom.grid, coeffs, s)
        return float(norms.max()) if norms.size else 0.0

    def diagnostics(self):
        return {"iterates": self.iterations, "diffs": list(map(float, self.diffs)),
                "ratios": list(map(float, self.ratios)),
                "max_ratio": float(max(self.ratios)) if self.ratios else 0.0,
                "verification_error": self.verification_error,
                "u0_norm": self.u0.norm(), "lam": self.lam}


def local_null_control(u0: SpectralField, geom: ControlGeometry, lam: float, tol=1e-10,
                       max_iter=60, cg_tol=CG_TOL, ratio_limit=1.0,
                       keep_trace=False) -> ControlSolution:
    """Picard iteration ``Phi^{m+1} = B Phi^m`` from ``Phi^0 = 0``.

    Stops when ``|Phi^{m+1} - Phi^m| <= tol |Phi^1|``; raises
    :class:`ContractionError` as soon as a ratio of successive differences
    reaches ``ratio_limit``.
    """
    if u0.grid != geom.grid:
        raise ValueError("data and geometry use different grids")
    gram = Gramian(geom)
    phi = geom.grid.zeros()
    diffs, ratios = [], []
    it = 0
    if u0.norm() > 0:
        scale = None
        while True:
            if it >= max_iter:
                raise ContractionError(
                    f"Picard iteration not converged after {max_iter} iterates", ratios)
            try:
                new = b_map(phi, u0, geom, lam, cg_tol=cg_tol, gram=gram,
                            x0=phi.coeffs if it else None)
            except BlowUpError as exc:
                raise ContractionError(f"backward solve blew up at iterate {it + 1}: {exc}",
                                       ratios) from exc
            it += 1
            d = (new - phi).norm()
            phi = new
            scale = scale or d
            if diffs:
                ratios.append(d / diffs[-1] if diffs[-1] > 0 else 0.0)
            diffs.append(d)
            if d <= tol * scale:
                break
            if ratios and ratios[-1] >= ratio_limit:
                raise ContractionError(
                    f"contraction ratio {ratios[-1]:.3f} >= {ratio_limit} at iterate {it}; "
                    f"|u0| = {u0.norm():.3e} is above the smallness threshold", ratios)
    control = hum_step_source(phi, geom)
    tr = evolve(u0, 0.0, geom.T, geom.evolution_params(lam), control)
    err = tr.final.norm()
    return ControlSolution(phi, geom, lam, u0, it, diffs, ratios, err, control,
                           tr if keep_trace else None)


def hs_regularity_report(sol: ControlSolution, s_list=(0, 1, 2), refine=True, rtol=0.05,
                         **solver_kw):
    """Rows ``{s, phi0_hs, g_max_hs[, refined values, rel_change, stable]}``.

    With ``refine`` the problem is re-solved on the ``2N`` grid with the same
    data and geometry; norms changing by more than ``rtol`` are flagged.
    """
    fine = None
    if refine:
        grid2 = type(sol.geom.grid)(2 * sol.geom.grid.n_modes)
        geom2 = sol.geom.with_grid(grid2)
        fine = local_null_control(resample(sol.u0, grid2), geom2, sol.lam, **solver_kw)
    rows = []
    for s in s_list:
        row = {"s": float(s), "phi0_hs": sol.phi0_hs(s), "g_max_hs": sol.control_hs_max(s)}
        if fine is not None:
            row["phi0_hs_2N"] = fine.phi0_hs(s)
            row["g_max_hs_2N"] = fine.control_hs_max(s)
            changes = []
            for key in ("phi0_hs", "g_max_hs"):
                ref = max(row[key], row[key + "_2N"])
                changes.append(abs(row[key + "_2N"] - row[key]) / ref if ref > 0 else 0.0)
            row["rel_change"] = max(changes)
            row["stable"] = bool(row["rel_change"] <= rtol)
        rows.append(row)
    return rows


# -- smallness threshold ---------------------------------------------------------------

_THRESHOLD_CACHE: dict = {}


def _contracts(u0, geom, lam, ratio_cap, **kw):
    try:
        sol = local_null_control(u0, geom, lam, ratio_limit=1.0, **kw)
    except NumericalFailure:
        return False
    return all(r <= ratio_cap for r in sol.ratios)


def contraction_threshold(shape: SpectralField, geom: ControlGeometry, lam: float,
                          lo=1e-3, hi=4.0, ratio_cap=0.9, steps=10, use_cache=True, **kw):
    """Largest amplitude ``eps`` (bracketed by log-bisection) such that the
    Picard iteration for ``u0 = eps shape / |shape|`` has all ratios <= ratio_cap.

    Results are cached per ``(lam, geometry, N)`` and data direction.
    """
    key = (float(lam), repr(geom.manifest()), geom.grid.n_modes,
           shape.coeffs.tobytes(), ratio_cap, lo, hi, steps)
    if use_cache and key in _THRESHOLD_CACHE:
        return _THRESHOLD_CACHE[key]
    unit = shape * (1.0 / shape.norm())
    if not _contracts(unit * lo, geom, lam, ratio_cap, **kw):
        raise ContractionError(f"no contraction even at amplitude {lo:.1e}")
    if _contracts(unit * hi, geom, lam, ratio_cap, **kw):
        eps = hi
    else:
        a, b = np.log(lo), np.log(hi)
        for _ in range(steps):
            m = 0.5 * (a + b)
            if _contracts(unit * np.exp(m), geom, lam, ratio_cap, **kw):
                a = m
            else:
                b = m
        eps = float(np.exp(a))
    _THRESHOLD_CACHE[key] = eps
    return eps
