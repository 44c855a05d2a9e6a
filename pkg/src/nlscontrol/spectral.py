"""Fourier representation of functions on the torus R/2piZ.

Coefficients are stored in FFT order with the unitary-mean normalization

    u(x_j) = sum_k c_k exp(i k x_j),      c_k = (1/N) sum_j u(x_j) exp(-i k x_j),

so that ``sum |c_k|^2`` equals the mean of ``|u|^2`` over the circle, i.e. the
L2 norm over [0, 2pi] divided by sqrt(2pi).  Every norm in the package uses
this normalization.

Multipliers use the modified modulus ``|k|_o = |k|`` for ``k != 0`` and
``|0|_o = 1``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """Collocation grid ``x_j = 2 pi j / N`` with modes ``-N/2 .. N/2-1``."""

    n_modes: int

    def __post_init__(self):
        n = self.n_modes
        if int(n) != n or n < 8 or n % 2:
            raise ValueError(f"n_modes must be an even integer >= 8, got {n!r}")

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order."""
        k = np.fft.fftfreq(self.n_modes, d=1.0 / self.n_modes)
        k = np.rint(k).astype(np.int64)
        k.setflags(write=False)
        return k

    @cached_property
    def x(self) -> np.ndarray:
        x = TWO_PI * np.arange(self.n_modes) / self.n_modes
        x.setflags(write=False)
        return x

    @cached_property
    def k_circ(self) -> np.ndarray:
        """``|k|_o`` as floats (1 on the zero mode)."""
        kc = np.abs(self.k).astype(float)
        kc[0] = 1.0
        kc.setflags(write=False)
        return kc

    @cached_property
    def reflect_index(self) -> np.ndarray:
        """Index map of ``k -> -k`` (the Nyquist mode maps to itself)."""
        idx = (-np.arange(self.n_modes)) % self.n_modes
        idx.setflags(write=False)
        return idx

    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep ``|k| <= N/3``."""
        return np.abs(self.k) <= self.n_modes // 3

    def tail_mask(self) -> np.ndarray:
        """The top eighth of the spectrum, ``|k| >= N/2 - N/16``."""
        return np.abs(self.k) >= self.n_modes // 2 - self.n_modes // 16

    def mode_order(self) -> np.ndarray:
        """Permutation sorting FFT-ordered arrays by ascending mode index."""
        return np.argsort(self.k, kind="stable")

    def zeros(self) -> "SpectralField":
        return SpectralField(self, np.zeros(self.n_modes, dtype=complex))


@dataclass(frozen=True)
class SpectralField:
    """Complex Fourier coefficients of a function on the torus (FFT order)."""

    grid: TorusGrid
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex, copy=True)
        if c.shape != (self.grid.n_modes,):
            raise ValueError(
                f"expected {self.grid.n_modes} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_modes(cls, grid, modes):
        """Build a field from a ``{k: c_k}`` mapping."""
        c = np.zeros(grid.n_modes, dtype=complex)
        for k, v in modes.items():
            if not -grid.n_modes // 2 <= k < grid.n_modes // 2:
                raise ValueError(f"mode {k} not on a grid of {grid.n_modes} modes")
            c[k % grid.n_modes] += v
        return cls(grid, c)

    def __add__(self, other):
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs)

    def conj(self):
        """Coefficients of the complex-conjugate function."""
        return SpectralField(self.grid, np.conj(self.coeffs[self.grid.reflect_index]))

    def values(self):
        return to_physical(self)

    def norm(self):
        return hs_norm(self, 0.0)


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def to_physical(field: SpectralField) -> np.ndarray:
    """Values at the collocation points."""
    return field.grid.n_modes * np.fft.ifft(field.coeffs)


def to_spectral(values, grid: TorusGrid | None = None) -> SpectralField:
    values = np.asarray(values)
    if values.ndim != 1:
        raise ValueError("expected a one-dimensional array of samples")
    if grid is None:
        grid = TorusGrid(values.shape[0])
    elif values.shape[0] != grid.n_modes:
        raise ValueError(
            f"length mismatch: {values.shape[0]} samples for {grid.n_modes} modes")
    return SpectralField(grid, np.fft.fft(values) / grid.n_modes)


def dr_multiplier(grid: TorusGrid, r: float) -> np.ndarray:
    """Symbol of D^r: ``sgn(n)|n|^r`` off zero, 1 on the zero mode."""
    return np.sign(grid.k) * grid.k_circ ** r + (grid.k == 0)


def apply_Dr(field: SpectralField, r: float) -> SpectralField:
    return SpectralField(field.grid, dr_multiplier(field.grid, r) * field.coeffs)


def hs_weights(grid: TorusGrid, s: float) -> np.ndarray:
    return grid.k_circ ** (2.0 * s)


def hs_norm(field: SpectralField, s: float = 0.0) -> float:
    """``(|c_0|^2 + sum_{k != 0} |k|^{2s} |c_k|^2)^{1/2}``."""
    return float(np.sqrt(np.sum(hs_weights(field.grid, s) * np.abs(field.coeffs) ** 2)))


def hs_norm_coeffs(grid, coeffs, s=0.0):
    """:func:`hs_norm` over the last axis of a raw coefficient array."""
    return np.sqrt(np.sum(hs_weights(grid, s) * np.abs(coeffs) ** 2, axis=-1))


def free_phase(grid: TorusGrid, t) -> np.ndarray:
    """Mode-wise symbol of the free flow over time ``t``: ``exp(-i k^2 t)``.

    ``t`` may be an array, in which case the result has shape ``(len(t), N)``.
    """
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * np.multiply.outer(t, grid.k.astype(float) ** 2))


def free_propagate(field: SpectralField, t: float) -> SpectralField:
    """Solve ``i u_t + u_xx = 0`` exactly over a time ``t`` (either sign)."""
    return SpectralField(field.grid, free_phase(field.grid, t) * field.coeffs)


class Parity(enum.Enum):
    ODD = "odd"
    EVEN = "even"
    NONE = "none"


def parity_project(field: SpectralField, tag) -> SpectralField:
    """Odd or even part with respect to ``x -> -x``."""
    tag = Parity(tag)
    if tag is Parity.NONE:
        raise ValueError("parity_project needs tag 'odd' or 'even'")
    reflected = field.coeffs[field.grid.reflect_index]
    sign = -1.0 if tag is Parity.ODD else 1.0
    return SpectralField(field.grid, 0.5 * (field.coeffs + sign * reflected))


def parity_defect(coeffs, grid, tag) -> float:
    """Energy of the component of the wrong parity (squared norm)."""
    c = np.asarray(coeffs)
    reflected = c[..., grid.reflect_index]
    wrong = 0.5 * (c + reflected) if Parity(tag) is Parity.ODD else 0.5 * (c - reflected)
    return float(np.max(np.sum(np.abs(wrong) ** 2, axis=-1)))


def multiply(f: SpectralField, u: SpectralField, dealias: bool = True) -> SpectralField:
    """Product ``f u`` by collocation, optionally with two-thirds truncation."""
    _check_same_grid(f, u)
    grid = u.grid
    if dealias:
        mask = grid.dealias_mask()
        f = SpectralField(grid, f.coeffs * mask)
        u = SpectralField(grid, u.coeffs * mask)
    prod = to_spectral(to_physical(f) * to_physical(u), grid)
    if dealias:
        prod = SpectralField(grid, prod.coeffs * grid.dealias_mask())
    return prod


def commutator_Dr_mult(f: SpectralField, r: float, u: SpectralField,
                       dealias: bool = True) -> SpectralField:
    """``D^r(f u) - f D^r u``."""
    return apply_Dr(multiply(f, u, dealias), r) - multiply(f, apply_Dr(u, r), dealias)


def resample(field: SpectralField, grid: TorusGrid) -> SpectralField:
    """Move a field to another grid by zero-padding or truncating modes."""
    out = np.zeros(grid.n_modes, dtype=complex)
    half = min(grid.n_modes, field.grid.n_modes) // 2
    for k in range(-half, half):
        out[k % grid.n_modes] = field.coeffs[k % field.grid.n_modes]
    return SpectralField(grid, out)


def random_field(grid: TorusGrid, rng: np.random.Generator, kmax: int | None = None,
                 norm: float = 1.0, parity=None) -> SpectralField:
    """Complex Gaussian coefficients on ``|k| <= kmax``, scaled to L2 norm ``norm``."""
    if kmax is None:
        kmax = grid.n_modes // 4
    c = rng.standard_normal(grid.n_modes) + 1j * rng.standard_normal(grid.n_modes)
    c = c * (np.abs(grid.k) <= kmax)
    f = SpectralField(grid, c)
    if parity is not None and Parity(parity) is not Parity.NONE:
        f = parity_project(f, parity)
    nrm = hs_norm(f)
    if nrm == 0.0:
        return f
    return f * (norm / nrm)


# -- smooth cutoffs -------------------------------------------------------------

def _h(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    a, b = _h(t), _h(1.0 - t)
    return a / (a + b)


@dataclass(frozen=True)
class Bump:
    """Smooth cutoff equal to 1 on ``plateau`` and 0 outside ``support``.

    Spatial bumps are 2pi-periodic; temporal bumps live on the real line.
    """

    support: tuple
    plateau: tuple
    kind: str = "spatial"

    def __post_init__(self):
        s0, s1 = map(float, self.support)
        p0, p1 = map(float, self.plateau)
        object.__setattr__(self, "support", (s0, s1))
        object.__setattr__(self, "plateau", (p0, p1))
        if self.kind not in ("spatial", "temporal"):
            raise ValueError(f"kind must be 'spatial' or 'temporal', got {self.kind!r}")
        if not (s0 <= p0 <= p1 <= s1 and s0 < s1):
            raise ValueError(f"plateau {self.plateau} not inside support {self.support}")
        if self.kind == "spatial" and s1 - s0 > TWO_PI + 1e-12:
            raise ValueError("spatial support longer than the circle")

    @property
    def full(self):
        return self.kind == "spatial" and self.plateau[1] - self.plateau[0] >= TWO_PI - 1e-12

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s0, s1 = self.support
        p0, p1 = self.plateau
        if self.full:
            return np.ones_like(x)
        if self.kind == "spatial":
            y = np.mod(x - s0, TWO_PI)
        else:
            y = x - s0
        p0, p1, s1 = p0 - s0, p1 - s0, s1 - s0
        out = np.zeros_like(y)
        inside = (y >= 0) & (y <= s1)
        out[inside & (y >= p0) & (y <= p1)] = 1.0
        if p0 > 0:
            left = inside & (y < p0)
            out[left] = smooth_step(y[left] / p0)
        if p1 < s1:
            right = inside & (y > p1)
            out[right] = smooth_step((s1 - y[right]) / (s1 - p1))
        return out


def make_bump(support, plateau, kind="spatial") -> Bump:
    return Bump(tuple(support), tuple(plateau), kind)


@dataclass(frozen=True)
class MirroredBump:
    """Even extension ``b(x) + b(-x)`` of a spatial bump supported in ``(0, pi)``."""

    bump: Bump

    def __post_init__(self):
        s0, s1 = self.bump.support
        if self.bump.kind != "spatial" or s0 < 0 or s1 > np.pi:
            raise ValueError("mirroring needs a spatial bump supported in [0, pi]")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.bump(x) + self.bump(-x)


@dataclass(frozen=True)
class ConstantCutoff:
    """Cutoff identically equal to ``value`` (the trivial geometry ``a == 1``)."""

    value: float = 1.0

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)


def sample(cutoff, grid: TorusGrid) -> np.ndarray:
    return np.asarray(cutoff(grid.x), dtype=float)
