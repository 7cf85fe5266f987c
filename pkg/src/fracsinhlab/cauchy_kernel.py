"""Cauchy/Poisson kernel of the half-Laplacian semigroup and its torus form.

The line kernel is pbar(t,x) = (1/pi) t / (x^2 + t^2) for t > 0 and 0 for
t <= 0. Its periodization over integer shifts has the closed form

    p(t,x) = sinh(2 pi t) / (cosh(2 pi t) - cos(2 pi x)),

which is the geometric sum of the mode multipliers e^{-2 pi |k| t}. The
truncated kernel q multiplies p by a smooth cutoff H(t - t0) so that q = p
for 0 < t <= t0 and q = 0 for t >= t0 + 1 (and for t <= 0).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import digamma

__all__ = [
    "KernelConfig",
    "cauchy_density_line",
    "cauchy_density_line_causal",
    "heat_kernel_torus",
    "cutoff_H",
    "cutoff_H_prime",
    "truncated_kernel_q",
    "kernel_bound_check",
    "KernelBoundReport",
]


@dataclass(frozen=True)
class KernelConfig:
    """Truncation time t0 (>= 1 so the cutoff region stays inside t > 0)
    and the number of explicit images K for the spatial-route evaluation."""

    t0: float = 1.0
    n_images: int = 128

    def __post_init__(self):
        if self.t0 < 1.0:
            raise ValueError(f"t0 must be >= 1, got {self.t0}")
        if self.n_images < 1:
            raise ValueError(f"n_images must be >= 1, got {self.n_images}")

    @property
    def support_end(self):
        # q vanishes for t >= t0 + 1
        return self.t0 + 1.0


def cauchy_density_line(t, x):
    """Line kernel (1/pi) t/(x^2 + t^2); strict: requires t > 0."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("line kernel needs t > 0; use the causal variant for t <= 0")
    return t / (x * x + t * t) / np.pi


def cauchy_density_line_causal(t, x):
    """Tolerant variant: 0 for t <= 0, the line kernel for t > 0."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    tt = np.where(t > 0.0, t, 1.0)
    vals = tt / (x * x + tt * tt) / np.pi
    return np.where(t > 0.0, vals, 0.0)


def _closed_form(t, x):
    # sinh(a)/(cosh(a) - cos(b)) written with e^{-a} so large t cannot overflow
    a = 2.0 * np.pi * np.asarray(t, dtype=float)
    b = 2.0 * np.pi * np.asarray(x, dtype=float)
    e = np.exp(-a)
    return (1.0 - e * e) / (1.0 + e * e - 2.0 * e * np.cos(b))


def _image_sum(t, x, n_images):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    k = np.arange(-n_images, n_images + 1)
    shape = np.broadcast_shapes(t.shape, x.shape)
    tb = np.broadcast_to(t, shape)[..., None]
    xb = np.broadcast_to(x, shape)[..., None]
    body = (tb / ((xb + k) ** 2 + tb * tb)).sum(axis=-1) / np.pi
    # exact remainder of the two infinite tails:
    # sum_{j>=0} 1/((j+a)^2 + t^2) = Im psi(a + i t) / t
    a_right = n_images + 1.0 + np.broadcast_to(x, shape)
    a_left = n_images + 1.0 - np.broadcast_to(x, shape)
    tail = (
        digamma(a_right + 1j * np.broadcast_to(t, shape)).imag
        + digamma(a_left + 1j * np.broadcast_to(t, shape)).imag
    ) / np.pi
    return body + tail


def heat_kernel_torus(t, x, cfg=None, method="closed_form"):
    """Torus kernel p(t,x) for t > 0 by either route.

    method="closed_form" evaluates the geometric-series expression;
    method="image_sum" sums K explicit integer images of the line kernel
    plus the exact analytic remainder of the image series, so both routes
    target the same function and can be cross-checked at tight tolerance.
    """
    if cfg is None:
        cfg = KernelConfig()
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0.0):
        raise ValueError("torus kernel defined for t > 0 only")
    if method == "closed_form":
        return _closed_form(t_arr, x)
    if method == "image_sum":
        return _image_sum(t_arr, x, cfg.n_images)
    raise ValueError(f"unknown method {method!r}")


def _g(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0.0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / s[pos])
    return out


def _g_prime(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0.0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / s[pos]) / (s[pos] * s[pos])
    return out


def cutoff_H(t):
    """Smooth decreasing switch: 1 for t <= 0, 0 for t >= 1, 1/2 at t = 1/2."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    num = _g(1.0 - t)
    den = _g(t) + num
    mid = (t > 0.0) & (t < 1.0)
    out = np.where(t <= 0.0, 1.0, 0.0)
    out[mid] = num[mid] / den[mid]
    if out.shape == (1,):
        return float(out[0])
    return out


def cutoff_H_prime(t):
    """Derivative of cutoff_H (supported on (0,1), negative there)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    a = _g(t)
    b = _g(1.0 - t)
    ap = _g_prime(t)
    bp = _g_prime(1.0 - t)
    out = np.zeros_like(t)
    mid = (t > 0.0) & (t < 1.0)
    out[mid] = (-bp[mid] * a[mid] - ap[mid] * b[mid]) / (a[mid] + b[mid]) ** 2
    if out.shape == (1,):
        return float(out[0])
    return out


def truncated_kernel_q(cfg, t, x):
    """Smoothly truncated kernel q(t,x) = p(t,x) H(t - t0), 0 for t <= 0."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    pos = t > 0.0
    t_safe = np.where(pos, t, 1.0)
    vals = _closed_form(t_safe, x) * cutoff_H(t_safe - cfg.t0)
    return np.where(pos, vals, 0.0)


@dataclass
class KernelBoundReport:
    """Finite-difference scan of the kernel's near-origin growth."""

    max_dt_ratio: float  # max |d_t p| * ||z||
    max_dx_ratio: float  # max |d_x p| * ||z||
    max_dt_ratio_refined: float  # same with half the stencil width
    max_dx_ratio_refined: float
    max_p_ratio: float  # max p * ||z|| / (1 + ||z||)
    annulus_levels: np.ndarray
    annulus_sups: np.ndarray
    annulus_slope: float  # fitted log2 growth of sup p per annulus level

    @property
    def stencil_stable(self):
        rel_t = abs(self.max_dt_ratio - self.max_dt_ratio_refined) / self.max_dt_ratio
        rel_x = abs(self.max_dx_ratio - self.max_dx_ratio_refined) / self.max_dx_ratio
        return rel_t < 0.10 and rel_x < 0.10


def _scan_points():
    ts = np.geomspace(1e-3, 1.0, 25)
    xs = np.concatenate([[0.0], np.geomspace(1e-3, 0.499, 17)])
    tt, xx = np.meshgrid(ts, xs, indexing="ij")
    return tt.ravel(), xx.ravel()


def _max_ratios(t, x, h_scale):
    from .torus_spectral import st_norm

    h = np.minimum(1e-4, t / 10.0) * h_scale
    dp_dt = (_closed_form(t + h, x) - _closed_form(t - h, x)) / (2.0 * h)
    dp_dx = (_closed_form(t, x + h) - _closed_form(t, x - h)) / (2.0 * h)
    nz = st_norm(t, x)
    return (
        float(np.max(np.abs(dp_dt) * nz)),
        float(np.max(np.abs(dp_dx) * nz)),
        float(np.max(_closed_form(t, x) * nz / (1.0 + nz))),
    )


def kernel_bound_check(cfg=None, levels=range(2, 8)):
    """Scan |grad p| * ||z|| and p * ||z||/(1+||z||) for boundedness, and fit
    the growth of sup p over dyadic annuli ||z|| ~ 2^{-n} (expected ~ 2^n)."""
    from .torus_spectral import st_norm

    if cfg is None:
        cfg = KernelConfig()
    t, x = _scan_points()
    dt1, dx1, p_ratio = _max_ratios(t, x, 1.0)
    dt2, dx2, _ = _max_ratios(t, x, 0.5)

    levels = np.asarray(list(levels))
    sups = []
    for n in levels:
        r_lo, r_hi = 2.0 ** (-n - 1), 2.0 ** (-n)
        tg = np.linspace(r_lo / 40.0, r_hi, 160)
        xg = np.linspace(0.0, r_hi, 160)
        tt, xx = np.meshgrid(tg, xg, indexing="ij")
        mask = (st_norm(tt, xx) >= r_lo) & (st_norm(tt, xx) <= r_hi)
        sups.append(float(np.max(_closed_form(tt[mask], xx[mask]))))
    sups = np.asarray(sups)
    slope = float(np.polyfit(levels.astype(float), np.log2(sups), 1)[0])

    return KernelBoundReport(
        max_dt_ratio=dt1,
        max_dx_ratio=dx1,
        max_dt_ratio_refined=dt2,
        max_dx_ratio_refined=dx2,
        max_p_ratio=p_ratio,
        annulus_levels=levels,
        annulus_sups=sups,
        annulus_slope=slope,
    )
