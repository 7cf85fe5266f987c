"""Space-time white noise, mollification, and the smoothed Gaussian field.

The field v_eps is the truncated kernel q convolved with mollified noise.
Its covariance Q_eps(z) = Cov(v_eps(z), v_eps(0)) is computed three ways:

* analytically for eps = 0, where the mode series splits into a closed-form
  complex-logarithm part plus a small boundary-layer sum handled by
  Gauss-Legendre quadrature (the cutoff makes only modes k <= ~6 contribute
  there above 1e-16);
* for eps > 0 by integrating Q against the mollifier self-convolution in
  diamond-polar coordinates with dyadically refined radial panels, which
  tames the logarithmic singularity at the origin;
* by Monte Carlo over noise realizations, pooling over spatial translates
  (the field is stationary) with the spread taken across seeds.

Grid convolutions run spectrally in space; in time the kernel is integrated
exactly over each cell and the noise factor enters through endpoint-averaged
taps, so the only time-discretization error is the trapezoid error on the
smooth mollified noise.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import RectBivariateSpline
from scipy.signal import fftconvolve

from .cauchy_kernel import KernelConfig, cutoff_H, heat_kernel_torus
from .torus_spectral import TorusGrid, st_norm, torus_wrap

__all__ = [
    "SpaceTimeGrid",
    "NoiseRealization",
    "GridField",
    "Mollifier",
    "TestFunction",
    "sample_white_noise",
    "scale_test_function",
    "mollify_noise",
    "gaussian_field_v",
    "kernel_time_taps",
    "startup_rows",
    "covariance_analytic",
    "covariance_time_quadrature",
    "covariance_mc",
    "mc_snap_point",
    "variance_asymptotics",
    "variance_limit_oracle",
    "covariance_log_bound_scan",
    "covariance_rate_check",
    "RateCheckReport",
]


# ---------------------------------------------------------------------------
# grids, noise, fields


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform cells on [t_min, t_max) x torus; times are left endpoints."""

    t_min: float
    t_max: float
    n_t: int
    torus: TorusGrid

    def __post_init__(self):
        if not self.t_min < self.t_max:
            raise ValueError("need t_min < t_max")
        if self.n_t < 1:
            raise ValueError("need at least one time cell")

    @classmethod
    def from_step(cls, t_min, t_max, dt, n_x):
        n_t = int(round((t_max - t_min) / dt))
        return cls(t_min, t_min + n_t * dt, n_t, TorusGrid(n_x))

    @property
    def dt(self):
        return (self.t_max - self.t_min) / self.n_t

    @property
    def dx(self):
        return self.torus.dx

    @property
    def n_x(self):
        return self.torus.n_x

    @property
    def cell_area(self):
        return self.dt * self.dx

    def times(self):
        return self.t_min + self.dt * np.arange(self.n_t)

    def index_of_time(self, t):
        i = (t - self.t_min) / self.dt
        j = int(round(i))
        if abs(i - j) > 1e-9 or not 0 <= j < self.n_t:
            raise ValueError(f"time {t} is not a grid time")
        return j


@dataclass
class GridField:
    grid: SpaceTimeGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_t, self.grid.n_x):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid "
                f"({self.grid.n_t}, {self.grid.n_x})"
            )


@dataclass
class NoiseRealization:
    """Cell values are i.i.d. N(0, 1/(dt*dx)), so pairings against smooth
    functions reproduce the L2 isometry of white noise at grid level."""

    grid: SpaceTimeGrid
    values: np.ndarray
    seed: int

    def pair(self, f):
        """<noise, f> = sum of cell value * f(cell point) * cell area."""
        tt = self.grid.times()[:, None]
        xx = self.grid.torus.points()[None, :]
        return float(np.sum(self.values * f(tt, xx)) * self.grid.cell_area)


def sample_white_noise(grid, seed):
    rng = np.random.default_rng(seed)
    sigma = 1.0 / math.sqrt(grid.cell_area)
    values = rng.normal(0.0, sigma, size=(grid.n_t, grid.n_x))
    return NoiseRealization(grid=grid, values=values, seed=seed)


# ---------------------------------------------------------------------------
# mollifiers


def _bump(u):
    # exp(-1/(1-u^2)) on |u| < 1, 0 outside
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


_BUMP_MASS = None


def _bump_mass():
    global _BUMP_MASS
    if _BUMP_MASS is None:
        val, err = quad(
            lambda u: math.exp(-1.0 / (1.0 - u * u)), -1.0, 1.0, epsabs=1e-13, epsrel=1e-13
        )
        assert err < 1e-11
        _BUMP_MASS = val
    return _BUMP_MASS


class _ConvGrid:
    """Tabulated 2D convolution of two bumps, spline-interpolated."""

    def __init__(self, values, half_t, half_x):
        n_t, n_x = values.shape
        self.half_t = half_t
        self.half_x = half_x
        self._spline = RectBivariateSpline(
            np.linspace(-half_t, half_t, n_t),
            np.linspace(-half_x, half_x, n_x),
            values,
            kx=3,
            ky=3,
            s=0,
        )

    def eval(self, t, x):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x, dtype=float)
        shape = np.broadcast_shapes(t.shape, x.shape)
        tb = np.broadcast_to(t, shape).ravel()
        xb = np.broadcast_to(x, shape).ravel()
        out = np.zeros(tb.shape)
        inside = (np.abs(tb) < self.half_t) & (np.abs(xb) < self.half_x)
        if np.any(inside):
            out[inside] = self._spline.ev(tb[inside], xb[inside])
        return out.reshape(shape)


class Mollifier:
    """Product bump c * g(1-(t/s0)^2) * g(1-(4x)^2), normalized to mass one.

    Support is [-s0, s0] x [-1/4, 1/4]; the profile is smooth and even in
    each variable separately.
    """

    def __init__(self, s0=0.25):
        if not 0.0 < s0 <= 0.25:
            raise ValueError(f"s0 must lie in (0, 1/4], got {s0}")
        self.s0 = s0
        self.normalization = 1.0 / (s0 * 0.25 * _bump_mass() ** 2)
        self._selfconv = None
        self._crossconv = {}

    def __call__(self, t, x):
        return self.normalization * _bump(np.asarray(t) / self.s0) * _bump(4.0 * np.asarray(x))

    def eval_scaled(self, eps, t, x):
        """(S^eps_0 rho)(t,x) = eps^{-2} rho(t/eps, x/eps)."""
        return self(np.asarray(t) / eps, np.asarray(x) / eps) / eps**2

    def l2_norm_sq(self):
        nodes, weights = leggauss(80)
        tq = self.s0 * nodes
        xq = 0.25 * nodes
        vals = self(tq[:, None], xq[None, :]) ** 2
        return float(self.s0 * 0.25 * weights @ vals @ weights)

    def self_convolution(self):
        if self._selfconv is None:
            self._selfconv = self.cross_convolution(self)
        return self._selfconv

    def cross_convolution(self, other):
        """Tabulate (self * other)(t, x) as a spline; support adds."""
        if id(other) in self._crossconv:
            return self._crossconv[id(other)]
        h_t = (self.s0 + other.s0) / 512.0
        h_x = 0.5 / 512.0

        def samples(m):
            nt = int(round(m.s0 / h_t))
            nx = int(round(0.25 / h_x))
            ts = h_t * np.arange(-nt, nt + 1)
            xs = h_x * np.arange(-nx, nx + 1)
            return m(ts[:, None], xs[None, :])

        a = samples(self)
        b = samples(other)
        conv = fftconvolve(a, b) * h_t * h_x
        half_t = h_t * (conv.shape[0] - 1) / 2.0
        half_x = h_x * (conv.shape[1] - 1) / 2.0
        out = _ConvGrid(conv, half_t, half_x)
        self._crossconv[id(other)] = out
        return out


# ---------------------------------------------------------------------------
# test functions and the scaling operator


@dataclass
class TestFunction:
    """Smooth probe supported in the metric ball of the stated radius."""

    func: object
    support_radius: float
    m: int = 3
    c_m_norm: float = float("nan")
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.support_radius <= 0.25:
            raise ValueError("support radius must lie in (0, 1/4]")

    def __call__(self, t, x):
        return self.func(np.asarray(t, dtype=float), np.asarray(x, dtype=float))

    def integral(self, n=257):
        nodes, weights = leggauss(n)
        r = self.support_radius
        ct, cx = self.center
        tq = ct + r * nodes
        xq = cx + r * nodes
        vals = self(tq[:, None], xq[None, :])
        return float(r * r * weights @ vals @ weights)

    def l2_norm_sq(self, n=257):
        nodes, weights = leggauss(n)
        r = self.support_radius
        ct, cx = self.center
        tq = ct + r * nodes
        xq = cx + r * nodes
        vals = self(tq[:, None], xq[None, :]) ** 2
        return float(r * r * weights @ vals @ weights)

    @classmethod
    def bump(cls, radius=0.25, m=3):
        half = radius / 2.0
        scale = 1.0 / (half * half * _bump_mass() ** 2)

        def f(t, x):
            return scale * _bump(t / half) * _bump(x / half)

        tf = cls(func=f, support_radius=radius, m=m)
        tf.c_m_norm = fd_c_m_norm(tf, m)
        return tf


def fd_c_m_norm(f, m, n_grid=161):
    """Sup over the support box of all partial derivatives of order <= m,
    estimated by repeated central differences on a fixed relative grid."""
    r = f.support_radius
    ct, cx = f.center
    ts = ct + np.linspace(-r, r, n_grid)
    xs = cx + np.linspace(-r, r, n_grid)
    vals = f(ts[:, None], xs[None, :])
    tables = {(0, 0): vals}
    best = float(np.max(np.abs(vals)))
    for order in range(1, m + 1):
        new = {}
        for (jt, jx), tab in tables.items():
            if jt + jx != order - 1:
                continue
            dt_ = ts[1] - ts[0]
            dx_ = xs[1] - xs[0]
            new[(jt + 1, jx)] = np.gradient(tab, dt_, axis=0)
            new[(jt, jx + 1)] = np.gradient(tab, dx_, axis=1)
        tables.update(new)
        for tab in new.values():
            best = max(best, float(np.max(np.abs(tab))))
    return best


def scale_test_function(f, delta, z):
    """(S^delta_z f)(w) = delta^{-2} f((w - z)/delta), torus-aware in x."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"scale must lie in (0, 1], got {delta}")
    zt, zx = z
    base = f.func

    def g(t, x):
        return base((t - zt) / delta, torus_wrap(x - zx) / delta) / delta**2

    bct, bcx = f.center
    return TestFunction(
        func=g,
        support_radius=f.support_radius * delta,
        m=f.m,
        c_m_norm=f.c_m_norm / delta ** (2 + f.m),
        center=(zt + delta * bct, torus_wrap(zx + delta * bcx)),
    )


# ---------------------------------------------------------------------------
# grid convolutions


def mollify_noise(xi, rho, eps):
    """Discrete convolution with S^eps_0 rho: circular in x, linear in t.

    Rows within eps*s0 of the time boundary miss part of the kernel mass
    (the noise is treated as zero outside its horizon).
    """
    grid = xi.grid
    if eps < 2.0 * max(grid.dt, grid.dx):
        raise ValueError(f"eps={eps} under-resolved by grid steps ({grid.dt}, {grid.dx})")
    kern = _mollifier_cell_kernel(rho, eps, grid)
    xf = np.fft.fft(xi.values, axis=1)
    kf = np.fft.fft(kern, axis=1)
    out = fftconvolve(xf, kf, mode="same", axes=0)
    vals = np.real(np.fft.ifft(out, axis=1))
    return GridField(grid=grid, values=vals)


def _mollifier_cell_kernel(rho, eps, grid):
    # kernel rows at time lags l*dt, columns at circular index offsets
    m = int(math.floor(eps * rho.s0 / grid.dt))
    lags = grid.dt * np.arange(-m, m + 1)
    offsets = torus_wrap(grid.dx * np.arange(grid.n_x))
    return rho.eval_scaled(eps, lags[:, None], offsets[None, :]) * grid.cell_area


def startup_rows(cfg, grid):
    """Rows below this index would need noise from before the horizon."""
    return int(math.ceil((cfg.t0 + 1.0) / grid.dt))


def kernel_time_taps(cfg, grid):
    """Per-mode time taps of the truncated kernel, shape (M+1, n_x).

    Tap j multiplies the x-spectrum of the input at time lag j*dt. The
    kernel's mode multiplier e^{-2 pi |k| tau} H(tau - t0) is integrated
    exactly over each time cell (H frozen at the cell midpoint) and the
    endpoint-averaged taps implement the trapezoid rule on the input.
    """
    dt = grid.dt
    m_cells = startup_rows(cfg, grid)
    k = np.abs(np.fft.fftfreq(grid.n_x, d=1.0 / grid.n_x))
    a = 2.0 * np.pi * k
    mm = np.arange(1, m_cells + 1)[:, None]
    h_mid = cutoff_H((mm - 0.5) * dt - cfg.t0)
    with np.errstate(divide="ignore", invalid="ignore"):
        cell = (np.exp(-a * (mm - 1) * dt) - np.exp(-a * mm * dt)) / a
    cell[:, a == 0.0] = dt
    cell = cell * h_mid
    taps = np.zeros((m_cells + 1, grid.n_x))
    taps[0] = 0.5 * cell[0]
    taps[1:-1] = 0.5 * (cell[:-1] + cell[1:])
    taps[-1] = 0.5 * cell[-1]
    return taps


def gaussian_field_v(cfg, xi_eps):
    """v_eps = q * xi_eps on the grid of the input field.

    Rows before startup_rows(cfg, grid) assume zero noise before the
    horizon; callers needing exact stationarity should discard them.
    """
    grid = xi_eps.grid
    if grid.t_max - grid.t_min <= cfg.t0 + 1.0:
        raise ValueError("noise horizon shorter than the kernel support")
    taps = kernel_time_taps(cfg, grid)
    xf = np.fft.fft(xi_eps.values, axis=1)
    conv = fftconvolve(xf, taps.astype(complex), mode="full", axes=0)[: grid.n_t]
    return GridField(grid=grid, values=np.real(np.fft.ifft(conv, axis=1)))


# ---------------------------------------------------------------------------
# analytic covariance


_GL64 = leggauss(64)


def _boundary_layer_sum(cfg, t_abs, x, k_cut=6):
    """Mode-k integrals over the cutoff boundary region, summed with their
    cosine factors. Modes beyond k_cut contribute below ~1e-16 there."""
    t0 = cfg.t0
    s_lo = np.clip(t0 - t_abs, 0.0, None)
    s_hi = t0 + 1.0
    nodes, weights = _GL64
    half = 0.5 * (s_hi - s_lo)
    mid = 0.5 * (s_hi + s_lo)
    sigma = mid[..., None] + half[..., None] * nodes  # (..., 64)
    hh = cutoff_H(sigma - t0) * cutoff_H(sigma + t_abs[..., None] - t0)
    total = np.zeros_like(t_abs)
    for k in range(0, k_cut + 1):
        integrand = np.exp(-2.0 * np.pi * k * (2.0 * sigma + t_abs[..., None])) * hh
        b_k = half * (integrand @ weights)
        if k == 0:
            total = total + b_k
        else:
            total = total + 2.0 * np.cos(2.0 * np.pi * k * x) * b_k
    return total


def _log_abs_one_minus(a, x):
    # ln|1 - e^{-2 pi a + 2 pi i x}| via |1-zeta|^2 = (1-e)^2 + 4e sin^2(pi x),
    # written with expm1 so tiny a and x do not cancel catastrophically
    em1 = np.expm1(-2.0 * np.pi * a)
    mag_sq = em1 * em1 + 4.0 * (1.0 + em1) * np.sin(np.pi * x) ** 2
    return 0.5 * np.log(mag_sq)


def _q_covariance(cfg, t, x):
    """Covariance of the eps = 0 field: closed-form geometric-log part plus
    the boundary-layer quadrature sum. Exactly zero for |t| >= t0 + 1."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    shape = np.broadcast_shapes(t.shape, x.shape)
    tb = np.abs(np.broadcast_to(t, shape).astype(float))
    xb = np.broadcast_to(x, shape).astype(float)
    if np.any((tb == 0.0) & (torus_wrap(xb) == 0.0)):
        raise ValueError("covariance diverges logarithmically at the origin")
    s_pure = np.clip(cfg.t0 - tb, 0.0, None)
    log_part = (_log_abs_one_minus(tb + 2.0 * s_pure, xb) - _log_abs_one_minus(tb, xb)) / (
        2.0 * np.pi
    )
    return s_pure + log_part + _boundary_layer_sum(cfg, tb, xb)


def covariance_time_quadrature(cfg, t, x):
    """Independent route for the eps = 0 covariance: a single adaptive
    quadrature over the shared time variable using the semigroup property
    of the kernel (the space integral collapses to the kernel itself)."""
    t_abs = abs(float(t))
    if t_abs == 0.0 and torus_wrap(float(x)) == 0.0:
        raise ValueError("covariance diverges logarithmically at the origin")
    t0 = cfg.t0

    def integrand(sigma):
        return (
            cutoff_H(sigma - t0)
            * cutoff_H(sigma + t_abs - t0)
            * heat_kernel_torus(2.0 * sigma + t_abs, x)
        )

    lo = 0.0 if t_abs > 0.0 else 1e-300
    val, err = quad(integrand, lo, t0 + 1.0, limit=400, epsabs=1e-12, epsrel=1e-11)
    return float(val)


# diamond-polar quadrature: w = r*e(s) with e tracing the unit ball of
# |t| + |x|; the area element is r dr ds on each of the four edges

_EDGE_P = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
_EDGE_D = np.array([[-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 1.0]])


def _diamond_quad(fn, r_outer, n_panels=22, order_r=12, order_s=16):
    """Integral of fn over the diamond ball of radius r_outer, with dyadic
    radial panels toward the (integrably singular) origin."""
    gr_nodes, gr_weights = leggauss(order_r)
    gs_nodes, gs_weights = leggauss(order_s)
    s = 0.5 * (gs_nodes + 1.0)
    ws = 0.5 * gs_weights
    edges_t = _EDGE_P[:, 0][:, None] + np.outer(_EDGE_D[:, 0], s)
    edges_x = _EDGE_P[:, 1][:, None] + np.outer(_EDGE_D[:, 1], s)

    bounds = r_outer * 2.0 ** -np.arange(n_panels + 1)
    r_lo = bounds[1:]
    r_hi = bounds[:-1]
    half = 0.5 * (r_hi - r_lo)
    mid = 0.5 * (r_hi + r_lo)
    rr = mid[:, None] + np.outer(half, gr_nodes)  # (panels, order_r)
    wr = np.outer(half, gr_weights) * rr  # includes the r Jacobian

    tt = rr[:, :, None, None] * edges_t[None, None, :, :]
    xx = rr[:, :, None, None] * edges_x[None, None, :, :]
    vals = fn(tt, xx)
    return float(np.einsum("prek,pr,k->", vals, wr, ws))


def _mollified_covariance(cfg, zt, zx, eps, rho, rho2=None):
    conv = rho.self_convolution() if rho2 is None else rho.cross_convolution(rho2)
    reach = eps * (conv.half_t + conv.half_x)
    nz = st_norm(zt, zx)
    if nz > 1.25 * reach:
        # singularity of Q lies well outside the mollifier support: plain
        # tensor quadrature over the support rectangle around z
        nodes, weights = leggauss(100)
        tq = eps * conv.half_t * nodes
        xq = eps * conv.half_x * nodes
        ww = conv.eval(tq[:, None] / eps, xq[None, :] / eps) / eps**2
        qq = _q_covariance(cfg, zt - tq[:, None], zx - xq[None, :])
        return float(eps * conv.half_t * eps * conv.half_x * (weights @ (ww * qq) @ weights))

    r_outer = nz + reach + 1e-12
    if r_outer > 0.5:
        raise ValueError("mollified covariance supported only near the diagonal here")

    def fn(t, x):
        w = conv.eval((zt - t) / eps, (zx - x) / eps) / eps**2
        out = np.zeros_like(w)
        mask = w != 0.0
        if np.any(mask):
            out[mask] = w[mask] * _q_covariance(cfg, t[mask], x[mask])
        return out

    return _diamond_quad(fn, r_outer, order_r=16, order_s=24)


def covariance_analytic(cfg, z, eps=0.0, rho=None, rho2=None):
    """Q_eps(z); eps = 0 gives the unmollified covariance (divergent at 0).

    For eps > 0 the default mollifier is the standard product bump; pass
    rho2 to get the two-mollifier covariance.
    """
    zt, zx = z
    if eps == 0.0:
        out = _q_covariance(cfg, np.asarray(zt, dtype=float), np.asarray(zx, dtype=float))
        return float(out) if np.isscalar(zt) and np.isscalar(zx) else out
    if rho is None:
        rho = _default_mollifier()
    return _mollified_covariance(cfg, float(zt), float(zx), eps, rho, rho2)


_DEFAULT_MOLLIFIER = None


def _default_mollifier():
    global _DEFAULT_MOLLIFIER
    if _DEFAULT_MOLLIFIER is None:
        _DEFAULT_MOLLIFIER = Mollifier()
    return _DEFAULT_MOLLIFIER


# ---------------------------------------------------------------------------
# Monte Carlo covariance


def mc_snap_point(z, dt=1.0 / 256.0, n_x=256):
    """Nearest grid-representable separation to z (time >= 0 by symmetry)."""
    zt = round(abs(float(z[0])) / dt) * dt
    zx = round(float(z[1]) * n_x) / n_x
    return zt, zx


def _fused_taps(cfg, grid, rho, eps):
    """Time taps of q * (S^eps_0 rho) per spatial mode: the kernel taps
    convolved with the mollifier's cell kernel in mode space. Returns
    (taps, m) where row j is time lag (j - m)*dt."""
    taps_q = kernel_time_taps(cfg, grid).astype(complex)
    kern = _mollifier_cell_kernel(rho, eps, grid)
    kf = np.fft.fft(kern, axis=1)
    m = (kern.shape[0] - 1) // 2
    taps = fftconvolve(taps_q, kf, axes=0)
    return taps, m


def _v_rows_from_noise(xi_hat, taps, m, rows):
    """Values of v_eps at the requested rows from the x-spectrum of raw
    noise; row i uses noise rows i-M..i+m."""
    depth = taps.shape[0]
    out = []
    for i in rows:
        window = xi_hat[i + m - depth + 1 : i + m + 1]
        mode_row = np.einsum("jk,jk->k", taps[::-1], window)
        out.append(np.real(np.fft.ifft(mode_row)))
    return out


def covariance_mc(cfg, z, eps, n_samples, seed, rho=None, dt=None, n_x=256, return_samples=False):
    """Monte Carlo estimate of Q_eps(z) with standard error.

    Per seed, the product v(0, x) v(t, x + zx) is averaged over all spatial
    translates (stationarity); the standard error comes from the spread of
    the per-seed averages. z is snapped to the nearest grid offset; compare
    against the analytic value at mc_snap_point(z, dt, n_x).
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    if rho is None:
        rho = _default_mollifier()
    if dt is None:
        dt = 1.0 / 256.0
    zt, zx = mc_snap_point(z, dt, n_x)
    grid = SpaceTimeGrid.from_step(-(cfg.t0 + 1.0) - 0.125, zt + 0.125, dt, n_x)
    shift = int(round(zx / grid.dx))
    taps, m = _fused_taps(cfg, grid, rho, eps)
    i0 = grid.index_of_time(0.0)
    i1 = grid.index_of_time(zt)
    sigma = 1.0 / math.sqrt(grid.cell_area)
    estimates = np.empty(n_samples)
    for s in range(n_samples):
        rng = np.random.default_rng([seed, s])
        xi = rng.normal(0.0, sigma, size=(grid.n_t, grid.n_x))
        xi_hat = np.fft.fft(xi, axis=1)
        v0, v1 = _v_rows_from_noise(xi_hat, taps, m, [i0, i1])
        estimates[s] = float(np.mean(v0 * np.roll(v1, -shift)))
    est = float(np.mean(estimates))
    stderr = float(np.std(estimates, ddof=1) / math.sqrt(n_samples))
    if return_samples:
        return est, stderr, estimates
    return est, stderr


# ---------------------------------------------------------------------------
# variance asymptotics and rate checks


def variance_asymptotics(cfg, eps_list, rho=None):
    """Rows (eps, Q_eps(0), Q_eps(0) - (1/2pi) ln(1/eps)) for decreasing eps."""
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if rho is None:
        rho = _default_mollifier()
    rows = []
    for eps in eps_list:
        q0 = covariance_analytic(cfg, (0.0, 0.0), eps, rho=rho)
        rows.append(
            {
                "eps": eps,
                "variance": q0,
                "excess": q0 - math.log(1.0 / eps) / (2.0 * math.pi),
            }
        )
    return rows


def variance_limit_oracle(cfg, eps, rho=None):
    """Independent value of Q_eps(0) - (1/2pi) ln(1/eps): the mollifier
    integral of (1/2pi) ln(1/(4||w||)) plus the integral of the bounded
    remainder of Q at scale eps. Exact identity for eps <= 1/4."""
    if rho is None:
        rho = _default_mollifier()
    conv = rho.self_convolution()
    r_outer = conv.half_t + conv.half_x + 1e-12

    def log_term(t, x):
        r = st_norm(t, x)
        return conv.eval(t, x) * np.log(1.0 / (4.0 * r)) / (2.0 * np.pi)

    def remainder_term(t, x):
        w = conv.eval(t, x)
        out = np.zeros_like(w)
        mask = w != 0.0
        if np.any(mask):
            q = _q_covariance(cfg, eps * t[mask], eps * x[mask])
            r = st_norm(eps * t[mask], eps * x[mask])
            out[mask] = w[mask] * (q - np.log(1.0 / (4.0 * np.minimum(r, 0.25))) / (2.0 * np.pi))
        return out

    return _diamond_quad(log_term, r_outer) + _diamond_quad(remainder_term, r_outer)


def covariance_log_bound_scan(cfg, eps, rho=None, radius=0.4, n_dirs=8, n_radii=6):
    """Max of |Q_eps(z) + (1/2pi) ln(||z|| + eps)| over a polar scan."""
    if rho is None:
        rho = _default_mollifier()
    worst = 0.0
    radii = np.geomspace(eps / 4.0, radius, n_radii)
    for r in radii:
        for ang in np.linspace(0.0, 2.0 * np.pi, n_dirs, endpoint=False):
            zt = r * math.cos(ang) ** 2 * math.copysign(1.0, math.cos(ang))
            zx = r * math.sin(ang) ** 2 * math.copysign(1.0, math.sin(ang))
            q = covariance_analytic(cfg, (zt, zx), eps, rho=rho)
            val = abs(q + math.log(st_norm(zt, zx) + eps) / (2.0 * math.pi))
            worst = max(worst, val)
    return worst


@dataclass
class RateCheckReport:
    eps: float
    z_list: list
    ratios: np.ndarray  # |Q - Q_eps| * ||z|| / eps per z

    @property
    def max_ratio(self):
        return float(np.max(self.ratios))


def covariance_rate_check(cfg, eps, z_list, rho=None, rho2=None):
    """|Q(z) - Q_eps(z)| * ||z|| / eps over the list; informative only for
    ||z|| >= 4 eps, which is enforced."""
    if rho is None:
        rho = _default_mollifier()
    ratios = []
    for z in z_list:
        nz = st_norm(z[0], z[1])
        if nz < 4.0 * eps:
            raise ValueError(f"z={z} too close to the diagonal for eps={eps}")
        q0 = covariance_analytic(cfg, z, 0.0)
        qe = covariance_analytic(cfg, z, eps, rho=rho, rho2=rho2)
        ratios.append(abs(q0 - qe) * nz / eps)
    return RateCheckReport(eps=eps, z_list=list(z_list), ratios=np.asarray(ratios))
