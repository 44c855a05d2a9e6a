import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlscontrol.dynamics import TrajectoryTrace
from nlscontrol.spectral import SpectralField, TorusGrid, hs_norm, random_field
from nlscontrol.xsb import (
    duhamel_gain_probe, duhamel_primitive, free_wave_trace, gaussian_pulse, hb_norm_1d,
    l4_ratio, loglog_fit, lp_norm, multiplication_loss_norms, multiplication_loss_probe,
    pointwise_product, time_window, trilinear_ratio, difference_ratio, uniform_times,
    xsb_norm, xsb_transform,
)


def random_trace(grid, rng, n_time=64, kmax=None):
    """Free wave with a random time modulation per mode (not a free solution)."""
    times = uniform_times(1.0, n_time)
    base = free_wave_trace(random_field(grid, rng, kmax=kmax), times)
    mod = 1 + 0.5 * np.sin(2 * np.pi * np.outer(times, rng.uniform(0, 3, grid.n_modes)))
    return TrajectoryTrace(grid, 0.0, base.dt, base.coeffs * mod)


def test_window_shape():
    times = uniform_times(1.0, 300)
    w = time_window(times).values
    assert w[0] == 0 and w[-1] == 0
    mid = (times >= 1 / 3) & (times <= 2 / 3)
    assert np.all(w[mid] == 1.0)
    assert np.all((w >= 0) & (w <= 1))


def test_single_mode_factorization():
    grid = TorusGrid(32)
    times = uniform_times(1.0, 256)
    w = time_window(times)
    for k in (0, 1, 5, -7):
        tr = free_wave_trace(SpectralField.from_modes(grid, {k: 1.0}), times)
        for s, b in ((0, 0.5), (1, 0.375), (2, 1.0)):
            expect = max(abs(k), 1) ** s * hb_norm_1d(w.values, tr.dt, b, pad=4)
            assert xsb_norm(tr, s, b) == pytest.approx(expect, rel=1e-12)


def test_modulated_single_mode_factorizes():
    grid = TorusGrid(32)
    times = uniform_times(1.0, 256)
    g = np.cos(3 * times) + 0.3j * times
    w = time_window(times).values
    for k in (2, 6, 11):
        tr = free_wave_trace(SpectralField.from_modes(grid, {k: 1.0}), times)
        tr = TrajectoryTrace(grid, 0.0, tr.dt, tr.coeffs * g[:, None])
        expect = k * hb_norm_1d(w * g, tr.dt, 0.5, pad=4)
        assert xsb_norm(tr, 1, 0.5) == pytest.approx(expect, rel=1e-2)


def test_b_zero_is_windowed_l2_hs(rng):
    grid = TorusGrid(16)
    tr = random_trace(grid, rng)
    w = time_window(tr.times).values
    for s in (0, 1.5):
        direct = np.sqrt(tr.dt * sum(hs_norm(SpectralField(grid, w[j] * tr.coeffs[j]), s) ** 2
                                     for j in range(len(w))))
        assert xsb_norm(tr, s, 0.0) == pytest.approx(direct, rel=1e-12)


def test_brute_force_double_sum(rng):
    grid = TorusGrid(8)
    times = uniform_times(1.0, 63)
    c = np.zeros((64, 8), complex)
    c[:, 1] = np.exp(-1j * times) * (1 + times)
    c[:, -3 % 8] = 0.5j * np.cos(5 * times)
    tr = TrajectoryTrace(grid, 0.0, times[1] - times[0], c)
    w = time_window(times).values
    P, dt = 4 * 64, tr.dt
    s, b = 1.0, 0.375
    total = 0.0
    for j, k in enumerate(grid.k):
        sharp = np.exp(1j * k * k * times) * c[:, j] * w
        wk = max(abs(k), 1) ** (2 * s)
        for m in range(P):
            sigma = 2 * np.pi * (m if m < P // 2 else m - P) / (P * dt)
            F = np.sum(sharp * np.exp(-2j * np.pi * m * np.arange(64) / P))
            total += wk * (1 + sigma ** 2) ** b * abs(F) ** 2
    assert xsb_norm(tr, s, b) == pytest.approx(np.sqrt(dt / P * total), rel=1e-12)


@given(st.integers(0, 2**32 - 1), st.floats(0, 2), st.floats(0, 1.5),
       st.floats(-1, 1), st.floats(-1, 1))
def test_monotone_in_s_and_b(seed, s, ds, b1, b2):
    grid = TorusGrid(16)
    tr = random_trace(grid, np.random.default_rng(seed), n_time=32)
    x = xsb_transform(tr)
    assert x.norm(s + ds, b1) >= x.norm(s, b1) * (1 - 1e-13)
    lo, hi = sorted((b1, b2))
    assert x.norm(s, hi) >= x.norm(s, lo) * (1 - 1e-13)


def test_parameter_errors(rng):
    tr = random_trace(TorusGrid(16), rng, n_time=32)
    with pytest.raises(ValueError):
        xsb_norm(tr, 0, 1.5)
    with pytest.raises(ValueError):
        xsb_norm(tr, 0, 0.5, pad=2)
    with pytest.raises(ValueError):
        xsb_norm(tr, 0, 0.5, window=np.ones(5))


def test_zero_field():
    grid = TorusGrid(16)
    tr = free_wave_trace(grid.zeros(), uniform_times(1.0, 32))
    assert xsb_norm(tr, 1, 0.5) == 0.0
    with pytest.raises(ZeroDivisionError):
        l4_ratio(tr)
    assert trilinear_ratio(tr, tr, tr, 1.0) == 0.0


# -- estimates -----------------------------------------------------------------------

def test_l4_single_mode_k_independent():
    grid = TorusGrid(128)
    times = uniform_times(1.0, 512)
    r = [l4_ratio(free_wave_trace(SpectralField.from_modes(grid, {k: 1.0}), times))
         for k in range(1, 17)]
    assert (max(r) - min(r)) / min(r) <= 0.05


def test_lp_norm_constant():
    grid = TorusGrid(16)
    times = uniform_times(1.0, 200)
    tr = free_wave_trace(SpectralField.from_modes(grid, {0: 2.0}), times)
    assert lp_norm(tr, 2, np.ones(201)) == pytest.approx(2.0, rel=1e-12)


def test_pointwise_product_modes():
    grid = TorusGrid(32)
    times = uniform_times(1.0, 16)
    u = free_wave_trace(SpectralField.from_modes(grid, {2: 1.0}), times)
    v = free_wave_trace(SpectralField.from_modes(grid, {3: 1.0}), times)
    p = pointwise_product(u, v, u, conj_mask=[False, True, False])
    # e^{2ix} e^{-3ix} e^{2ix} = e^{ix}, phase e^{-i(4 - 9 + 4)t}
    np.testing.assert_allclose(p.coeffs[:, 1], np.exp(1j * times), atol=1e-13)
    assert np.sum(np.abs(p.coeffs) ** 2) == pytest.approx(len(times))


def test_trilinear_single_mode_finite():
    grid = TorusGrid(32)
    times = uniform_times(1.0, 128)
    u = free_wave_trace(SpectralField.from_modes(grid, {3: 1.0}), times)
    r0 = trilinear_ratio(u, u, u, 0.0)
    r2 = trilinear_ratio(u, u, u, 2.0)
    assert np.isfinite(r0) and 0 < r2 <= 9 * r0 * 2


def test_difference_ratio_bounded(rng):
    grid = TorusGrid(32)
    times = uniform_times(1.0, 64)
    vals = []
    for _ in range(5):
        u = free_wave_trace(random_field(grid, rng, kmax=4), times)
        v = free_wave_trace(random_field(grid, rng, kmax=4), times)
        vals.append(difference_ratio(u, v, 1.0))
    assert np.all(np.isfinite(vals)) and max(vals) < 10


# -- probes ------------------------------------------------------------------------------

def test_multiplication_loss_base_norm_constant():
    base, _ = multiplication_loss_norms([4, 8, 16, 32], 0.5)
    assert np.ptp(base) <= 1e-10 * base.max()


def test_multiplication_loss_b_zero_flat():
    assert abs(multiplication_loss_probe([4, 8, 16, 32], 0.0).slope) <= 1e-10


def test_multiplication_loss_rejects_aliasing():
    with pytest.raises(ValueError):
        multiplication_loss_norms([50], 0.5)
    with pytest.raises(ValueError):
        multiplication_loss_probe([4, 8], 1.0)


def test_loglog_fit_exact():
    fit = loglog_fit([1, 2, 4, 8], [3, 12, 48, 192])
    assert fit.slope == pytest.approx(2.0) and fit.r2 == pytest.approx(1.0)


def test_duhamel_zero_forcing():
    t = np.linspace(-1, 1, 201)
    assert np.all(duhamel_primitive(np.zeros_like(t), t, 0.5) == 0)


def test_duhamel_primitive_is_integral():
    t = np.linspace(-3, 3, 6001)
    F = duhamel_primitive(np.cos(t), t, 1.0)
    inside = np.abs(t) <= 1
    np.testing.assert_allclose(F[inside], np.sin(t[inside]), atol=1e-6)
    assert np.all(F[np.abs(t) >= 2] == 0)


def test_duhamel_parameter_range():
    with pytest.raises(ValueError):
        duhamel_gain_probe(b=0.4, bp=0.3)
    with pytest.raises(ValueError):
        duhamel_gain_probe(b=0.75, bp=0.375)
    with pytest.raises(ValueError):
        duhamel_gain_probe(T_list=(0.5, 2.0))


def test_hb_norm_b_zero_is_l2():
    f = gaussian_pulse(np.linspace(-5, 5, 1001))
    dt = 0.01
    assert hb_norm_1d(f, dt, 0.0) == pytest.approx(np.sqrt(dt * np.sum(f ** 2)), rel=1e-13)
