"""Wick-renormalized exponential of the regularized Gaussian field.

Weight fields exp{gamma v_eps - (gamma^2/2) Var}, pairings against rescaled
test functions, moment-scaling fits over a window of scales, coupled L2
comparisons across regularization scales and mollifier shapes, and a Monte
Carlo oracle for the truncated pair-interaction integral Z(p, r).
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve

from .cauchy_kernel import KernelConfig
from .noise_field import (
    GridField,
    Mollifier,
    SpaceTimeGrid,
    TestFunction,
    _default_mollifier,
    _fused_taps,
    covariance_analytic,
    scale_test_function,
    variance_limit_oracle,
)

_4PI = 4.0 * math.pi


# ---------------------------------------------------------------------------
# exponent arithmetic and normalization constants


def alpha_gamma(gamma):
    """Upper edge of the admissible regularity window for the chaos field."""
    if gamma == 0.0:
        return 0.0
    b = gamma * gamma / _4PI
    return b * min(-3.0, -(math.sqrt(1.0 + 8.0 / b) - 1.0))


def moment_bound_exponent(gamma, p):
    """-p(p-1) gamma^2 / 4pi: the scale exponent bounding the p-th moment."""
    return -p * (p - 1) * gamma * gamma / _4PI


def moment_order_limit(gamma):
    """Moments of order p exist for integer 1 <= p < 8pi/gamma^2."""
    if gamma == 0.0:
        return math.inf
    return 8.0 * math.pi / (gamma * gamma)


def wick_constant(cfg=None, rho=None, eps=1.0 / 128.0):
    """Limit of Var v_eps(0) - (1/2pi) ln(1/eps) as eps -> 0.

    The identity value has an O(eps^2) remainder; one Richardson step in
    eps^2 removes it to well below the quadrature noise.
    """
    if cfg is None:
        cfg = KernelConfig()
    e1 = variance_limit_oracle(cfg, eps, rho=rho)
    e2 = variance_limit_oracle(cfg, eps / 2.0, rho=rho)
    return (4.0 * e2 - e1) / 3.0


def explicit_normalization(cfg, gamma, eps, rho=None, c_rho=None):
    """The closed-form counterweight exp{-(gamma^2/2) C} eps^{gamma^2/4pi}."""
    if c_rho is None:
        c_rho = wick_constant(cfg, rho=rho)
    b = gamma * gamma / _4PI
    return math.exp(-0.5 * gamma * gamma * c_rho) * eps**b


def normalization_agreement(cfg, gamma, eps_list, rho=None):
    """Ratio of the closed-form normalization to the Wick normalization
    exp{-(gamma^2/2) Var v_eps(0)} at each eps; tends to one as eps -> 0."""
    c_rho = wick_constant(cfg, rho=rho)
    out = []
    for eps in eps_list:
        q0 = covariance_analytic(cfg, (0.0, 0.0), eps, rho=rho)
        ratio = explicit_normalization(cfg, gamma, eps, c_rho=c_rho) * math.exp(
            0.5 * gamma * gamma * q0
        )
        out.append(ratio)
    return out


# ---------------------------------------------------------------------------
# weight fields


@dataclass(frozen=True)
class GmcSample:
    gamma: float
    eps: float
    weights: GridField
    seed: object = None


def gmc_weights(v_eps, gamma, q_eps0, eps=float("nan"), seed=None):
    """Pointwise exp{gamma v_eps - (gamma^2/2) q_eps0} on the grid of v_eps.

    q_eps0 must be the variance of v_eps at a point so the weights have
    mean one; for continuum comparisons that is the analytic covariance at
    the origin, for sampled fields the discrete variance of the pipeline.
    """
    with np.errstate(over="ignore"):
        vals = np.exp(gamma * v_eps.values - 0.5 * gamma * gamma * q_eps0)
    if not np.all(np.isfinite(vals)) or not np.all(vals > 0.0):
        raise FloatingPointError("weight field left the positive range")
    return GmcSample(
        gamma=gamma, eps=eps, weights=GridField(grid=v_eps.grid, values=vals), seed=seed
    )


def _pair_table(grid, f, delta, z=(0.0, 0.0), order=6):
    """Rows touching the support of S^delta_z f and its exact cell averages.

    The weight field is piecewise constant per cell, so the pairing reduces
    to cell averages of the rescaled function; per-cell Gauss quadrature
    keeps those accurate even when the support covers few cells.
    """
    g = scale_test_function(f, delta, z)
    ct, _ = g.center
    radius = g.support_radius
    times = grid.times()
    if ct - radius < grid.t_min - 1e-12 or ct + radius > times[-1] + 1e-12:
        raise ValueError("pairing region escapes the grid's time range")
    rows = np.nonzero(np.abs(times - ct) <= radius + grid.dt)[0]
    nodes, wts = leggauss(order)
    tq = times[rows][:, None] + grid.dt * (nodes[None, :] + 1.0) / 2.0
    xq = grid.torus.points()[:, None] + grid.torus.dx * (nodes[None, :] + 1.0) / 2.0
    gvals = g(tq[:, :, None, None], xq[None, None, :, :])
    gcell = np.einsum("a,b,iajb->ij", wts, wts, gvals) / 4.0
    return rows, gcell


def pair(x_sample, f, delta, z):
    """Quadrature of the weight field against S^delta_z f.

    The support of the rescaled function must stay inside the grid's time
    range; the space direction wraps around the torus.
    """
    grid = x_sample.weights.grid
    rows, gcell = _pair_table(grid, f, delta, z)
    return float(np.sum(x_sample.weights.values[rows] * gcell) * grid.cell_area)


# ---------------------------------------------------------------------------
# sampling plans: v_eps on a short time window around t = 0

# The kernel taps reach back over the whole unit-time support, but only the
# lowest spatial modes still feel noise that old; the convolution is split
# into a short full-spectrum head and a long few-mode tail.


@dataclass(frozen=True)
class _WindowPlan:
    grid: SpaceTimeGrid
    window: SpaceTimeGrid
    row_lo: int
    taps: np.ndarray
    m: int
    head_len: int
    tail_modes: np.ndarray
    sigma: float
    var0: float


def _normalized_fused_taps(cfg, grid, rho, eps):
    """Fused kernel/mollifier taps with the mollifier's discrete mass pinned
    to one, so coarse grids do not rescale the field."""
    taps, m = _fused_taps(cfg, grid, rho, eps)
    kern_mass = np.real(taps[:, 0]).sum() / _plain_taps_mass(cfg, grid)
    return taps / kern_mass, m


def _plain_taps_mass(cfg, grid):
    from .noise_field import kernel_time_taps

    return kernel_time_taps(cfg, grid)[:, 0].sum()


def make_window_plan(cfg, rho, eps, half_window, dt, n_x, margin=None):
    """Precompute everything needed to draw v_eps on [-half_window, half_window].

    Coupled experiments pass an explicit margin so plans at different
    mollification scales land on an identical noise grid.
    """
    if margin is None:
        margin = max(4.0 * eps, 8.0 * dt)
    grid = SpaceTimeGrid.from_step(
        -(cfg.t0 + 1.0) - half_window - margin, half_window + margin, dt, n_x
    )
    taps, m = _normalized_fused_taps(cfg, grid, rho, eps)
    row_lo = grid.index_of_time(-round(half_window / dt) * dt)
    row_hi = grid.index_of_time(round(half_window / dt) * dt)
    n_win = row_hi - row_lo + 1
    window = SpaceTimeGrid(
        grid.times()[row_lo], grid.times()[row_lo] + n_win * grid.dt, n_win, grid.torus
    )
    head_len = min(taps.shape[0], m + int(round(0.25 / dt)) + 1)
    tail = taps[head_len:]
    if tail.size:
        keep = np.max(np.abs(tail), axis=0) > 1e-13 * np.max(np.abs(taps))
        tail_modes = np.nonzero(keep)[0]
    else:
        tail_modes = np.arange(0)
    sigma = 1.0 / math.sqrt(grid.cell_area)
    var0 = sigma * sigma * float(np.sum(np.abs(taps) ** 2)) / n_x
    return _WindowPlan(
        grid=grid,
        window=window,
        row_lo=row_lo,
        taps=taps,
        m=m,
        head_len=head_len,
        tail_modes=tail_modes,
        sigma=sigma,
        var0=var0,
    )


def _full_half_spectrum(grid, sigma, rng):
    """Modes 0..n/2 of white cell noise on every grid row.

    Columns 0 and n/2 are real; interior columns split the cell variance
    between real and imaginary parts, matching the FFT of real noise.
    """
    n, half = grid.n_x, grid.n_x // 2 + 1
    z = rng.standard_normal((grid.n_t, half, 2))
    out = (z[..., 0] + 1j * z[..., 1]) * (sigma * math.sqrt(n / 2.0))
    out[:, 0] = sigma * math.sqrt(n) * z[:, 0, 0]
    out[:, -1] = sigma * math.sqrt(n) * z[:, -1, 0]
    return out


def sample_half_spectrum(plan, seed, s):
    """x-spectrum (modes 0..n/2) of white noise from substream [seed, s].

    Rows older than the head horizon only feed the surviving tail modes, so
    only those columns are drawn there; the distribution of the returned
    block matches the FFT of real cell noise exactly.
    """
    grid = plan.grid
    rng = np.random.default_rng([seed, s] if np.ndim(seed) == 0 else list(seed) + [s])
    n, half = grid.n_x, grid.n_x // 2 + 1
    n_win = plan.window.n_t
    depth, j, m = plan.taps.shape[0], plan.head_len, plan.m
    head_lo = plan.row_lo + m - j + 1
    scale_mid = plan.sigma * math.sqrt(n / 2.0)
    scale_edge = plan.sigma * math.sqrt(n)

    def draw(rows, cols):
        z = rng.standard_normal((rows, cols, 2))
        out = (z[..., 0] + 1j * z[..., 1]) * scale_mid
        return out, z

    xi_half = np.zeros((grid.n_t, half), dtype=complex)
    head_rows = grid.n_t - head_lo
    block, z = draw(head_rows, half)
    block[:, 0] = scale_edge * z[:, 0, 0]
    block[:, -1] = scale_edge * z[:, -1, 0]
    xi_half[head_lo:] = block
    if plan.tail_modes.size:
        cols = plan.tail_modes[plan.tail_modes < half]
        block, z = draw(head_lo, len(cols))
        edge = np.isin(cols, (0, half - 1))
        block[:, edge] = scale_edge * z[:, edge, 0]
        xi_half[:head_lo, cols] = block
    return xi_half


def sample_window_field(plan, seed, s):
    """v_eps on the plan's window from substream [seed, s] of the noise."""
    return _window_from_half(plan, sample_half_spectrum(plan, seed, s))


def _pooled_pairs(x_sample, f, delta, n_centers, table=None):
    """pair() at n_centers x-translates of the origin, sharing one kernel."""
    grid = x_sample.weights.grid
    if table is None:
        table = _pair_table(grid, f, delta)
    rows, gcell = table
    w = x_sample.weights.values[rows]
    shift = grid.n_x // n_centers
    out = np.empty(n_centers)
    for c in range(n_centers):
        out[c] = np.sum(np.roll(w, -c * shift, axis=1) * gcell)
    return out * grid.cell_area


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class MomentFit:
    gamma: float
    p: int
    eps: float
    delta_list: tuple
    moments: tuple
    stderrs: tuple
    slope: float
    ci: float
    n_samples: int

    def log_moments(self):
        return tuple(math.log(v) for v in self.moments)

    def rows(self):
        return [
            {
                "gamma": self.gamma,
                "p": self.p,
                "delta": d,
                "eps": self.eps,
                "estimate": v,
                "stderr": se,
                "n": self.n_samples,
            }
            for d, v, se in zip(self.delta_list, self.moments, self.stderrs)
        ]

    def to_csv(self):
        return rows_to_csv(self.rows())


CSV_COLUMNS = ("gamma", "p", "delta", "eps", "estimate", "stderr", "n")


def rows_to_csv(rows):
    """Experiment rows (mappings or CSV_COLUMNS-ordered tuples) rendered in
    the fixed column order with full-precision floats."""
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        vals = [row[c] for c in CSV_COLUMNS] if isinstance(row, dict) else list(row)
        lines.append(
            ",".join(
                "%d" % v if c in ("p", "n") else "%.17g" % v
                for c, v in zip(CSV_COLUMNS, vals)
            )
        )
    return "\n".join(lines) + "\n"


def _fit_log_slope(deltas, moments, stderrs, n_samples):
    x = np.log(np.asarray(deltas))
    y = np.log(np.asarray(moments))
    var_y = (np.asarray(stderrs) / np.asarray(moments)) ** 2
    xc = x - x.mean()
    denom = float(np.sum(xc * xc))
    slope = float(np.sum(xc * y) / denom)
    se = math.sqrt(float(np.sum(xc * xc * var_y)) / denom**2)
    return slope, 2.0 * se


def _validate_deltas(delta_list, eps):
    if any(b >= a for a, b in zip(delta_list, delta_list[1:])):
        raise ValueError("scales must be strictly decreasing")
    for d in delta_list:
        if not 8.0 * eps <= d <= 0.25:
            raise ValueError(
                f"scale {d} outside the resolved window [{8.0 * eps}, 0.25]"
            )


def moment_scaling(
    gamma,
    p,
    delta_list,
    n_samples,
    seed,
    eps=1.0 / 256.0,
    f=None,
    cfg=None,
    rho=None,
    dt=None,
    n_x=None,
    n_centers=8,
):
    """Fit the scale exponent of E|<X, S^delta f>|^p over delta_list.

    Per seed substream one weight field serves every delta and n_centers
    spatial translates; the standard error comes from the spread across
    substreams. The slope must not fall below moment_bound_exponent minus
    the fit's confidence width.
    """
    if p != int(p) or p < 1:
        raise ValueError("moment order must be a positive integer")
    if p >= moment_order_limit(gamma):
        raise ValueError(
            f"moment order {p} outside the existence range [1, {moment_order_limit(gamma)})"
        )
    delta_list = tuple(float(d) for d in delta_list)
    _validate_deltas(delta_list, eps)
    if cfg is None:
        cfg = KernelConfig()
    if rho is None:
        rho = _default_mollifier()
    if f is None:
        f = TestFunction.bump()
    if dt is None:
        dt = eps / 4.0
    if n_x is None:
        n_x = int(round(1.0 / dt))
    half_window = max(delta_list) * f.support_radius
    plan = make_window_plan(cfg, rho, eps, half_window, dt, n_x)
    tables = [_pair_table(plan.window, f, d) for d in delta_list]
    per_field = np.empty((n_samples, len(delta_list)))
    for s in range(n_samples):
        v = sample_window_field(plan, seed, s)
        x = gmc_weights(v, gamma, plan.var0, eps=eps, seed=(seed, s))
        for k, d in enumerate(delta_list):
            pairs = _pooled_pairs(x, f, d, n_centers, table=tables[k])
            per_field[s, k] = np.mean(np.abs(pairs) ** p)
    moments = per_field.mean(axis=0)
    stderrs = per_field.std(axis=0, ddof=1) / math.sqrt(n_samples)
    slope, ci = _fit_log_slope(delta_list, moments, stderrs, n_samples)
    return MomentFit(
        gamma=gamma,
        p=int(p),
        eps=eps,
        delta_list=delta_list,
        moments=tuple(float(v) for v in moments),
        stderrs=tuple(float(v) for v in stderrs),
        slope=slope,
        ci=ci,
        n_samples=n_samples,
    )


def pair_mean(
    gamma,
    f,
    delta,
    n_samples,
    seed,
    eps=1.0 / 16.0,
    cfg=None,
    rho=None,
    dt=None,
    n_x=None,
    n_centers=8,
):
    """Monte Carlo mean of <X, S^delta_0 f> with its standard error and the
    grid quadrature of S^delta_0 f (the exact expectation)."""
    if cfg is None:
        cfg = KernelConfig()
    if rho is None:
        rho = _default_mollifier()
    if dt is None:
        dt = eps / 8.0
    if n_x is None:
        n_x = int(round(1.0 / dt))
    plan = make_window_plan(cfg, rho, eps, delta * f.support_radius, dt, n_x)
    table = _pair_table(plan.window, f, delta)
    vals = np.empty(n_samples)
    for s in range(n_samples):
        v = sample_window_field(plan, seed, s)
        x = gmc_weights(v, gamma, plan.var0, eps=eps, seed=(seed, s))
        vals[s] = np.mean(_pooled_pairs(x, f, delta, n_centers, table=table))
    ones = GmcSample(
        gamma=0.0,
        eps=eps,
        weights=GridField(grid=plan.window, values=np.ones((plan.window.n_t, n_x))),
    )
    target = float(np.mean(_pooled_pairs(ones, f, delta, n_centers, table=table)))
    est = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n_samples))
    return est, stderr, target


def l2_cauchy(
    gamma,
    eps,
    eps_prime,
    delta,
    f,
    n_samples,
    seed,
    cfg=None,
    rho=None,
    dt=1.0 / 512.0,
    n_x=512,
    n_centers=8,
):
    """E|<X_eps - X_eps', S^delta f>|^2 with both fields driven by the same
    noise realization, mollified at the two scales."""
    if eps_prime > eps:
        raise ValueError("the comparison scale must not exceed the base scale")
    if cfg is None:
        cfg = KernelConfig()
    if rho is None:
        rho = _default_mollifier()
    if f is None:
        f = TestFunction.bump()
    half_window = delta * f.support_radius
    margin = max(4.0 * eps, 8.0 * dt)
    plan = make_window_plan(cfg, rho, eps, half_window, dt, n_x, margin=margin)
    plan_p = make_window_plan(cfg, rho, eps_prime, half_window, dt, n_x, margin=margin)
    return _coupled_l2(gamma, plan, plan_p, f, delta, n_samples, seed, n_centers)


def mollifier_independence(
    gamma,
    eps,
    delta,
    f,
    rho,
    vartheta,
    n_samples,
    seed,
    cfg=None,
    dt=1.0 / 512.0,
    n_x=512,
    n_centers=8,
):
    """E|<X^rho - X^vartheta, S^delta f>|^2 from one noise realization
    mollified with the two shapes at the same scale."""
    if cfg is None:
        cfg = KernelConfig()
    if f is None:
        f = TestFunction.bump()
    half_window = delta * f.support_radius
    plan = make_window_plan(cfg, rho, eps, half_window, dt, n_x)
    plan_p = make_window_plan(cfg, vartheta, eps, half_window, dt, n_x)
    return _coupled_l2(gamma, plan, plan_p, f, delta, n_samples, seed, n_centers)


def alternative_mollifier(rho):
    """Same product-bump family with the time half-support halved."""
    return Mollifier(s0=rho.s0 / 2.0)


def _coupled_l2(gamma, plan_a, plan_b, f, delta, n_samples, seed, n_centers):
    if plan_a.grid != plan_b.grid:
        raise ValueError("coupled plans must share one noise grid")
    table = _pair_table(plan_a.window, f, delta)
    diffs = np.empty(n_samples)
    for s in range(n_samples):
        rng = np.random.default_rng([seed, s])
        xi_half = _full_half_spectrum(plan_a.grid, plan_a.sigma, rng)
        pa = _pooled_pairs(
            gmc_weights(_window_from_half(plan_a, xi_half), gamma, plan_a.var0),
            f,
            delta,
            n_centers,
            table=table,
        )
        pb = _pooled_pairs(
            gmc_weights(_window_from_half(plan_b, xi_half), gamma, plan_b.var0),
            f,
            delta,
            n_centers,
            table=table,
        )
        diffs[s] = np.mean((pa - pb) ** 2)
    est = float(np.mean(diffs))
    stderr = float(np.std(diffs, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return est, stderr


def _window_from_hat(plan, xi_hat):
    """Window rows of v from the x-spectrum of raw noise.

    Row i needs sum_l taps[l] xi_hat[i+m-l]; 'valid' convolution of the
    noise block with the taps yields exactly that slice. Noise older than
    the head length only reaches the surviving tail modes.
    """
    n_win = plan.window.n_t
    lo, m, j = plan.row_lo, plan.m, plan.head_len
    head_rows = xi_hat[lo + m - j + 1 : lo + m + n_win]
    mode_rows = fftconvolve(head_rows, plan.taps[:j], mode="valid", axes=0)
    if plan.taps.shape[0] > j and plan.tail_modes.size:
        cols = plan.tail_modes
        depth = plan.taps.shape[0]
        tail_rows = xi_hat[lo + m - depth + 1 : lo + m - j + n_win, :][:, cols]
        mode_rows[:, cols] += fftconvolve(
            tail_rows, plan.taps[j:, cols], mode="valid", axes=0
        )
    return GridField(grid=plan.window, values=np.real(np.fft.ifft(mode_rows, axis=1)))


def _window_from_half(plan, xi_half):
    """Window rows of v from the non-negative x-modes of the noise.

    Same row algebra as _window_from_hat; since the taps are real and even
    in the mode index, the missing negative modes follow by conjugation and
    an inverse real FFT recovers the field.
    """
    n_win = plan.window.n_t
    lo, m, j = plan.row_lo, plan.m, plan.head_len
    half = plan.grid.n_x // 2 + 1
    taps = plan.taps[:, :half]
    head_rows = xi_half[lo + m - j + 1 : lo + m + n_win]
    mode_rows = fftconvolve(head_rows, taps[:j], mode="valid", axes=0)
    if plan.taps.shape[0] > j and plan.tail_modes.size:
        cols = plan.tail_modes[plan.tail_modes < half]
        depth = plan.taps.shape[0]
        tail_rows = xi_half[lo + m - depth + 1 : lo + m - j + n_win, :][:, cols]
        mode_rows[:, cols] += fftconvolve(
            tail_rows, taps[j:, cols], mode="valid", axes=0
        )
    values = np.fft.irfft(mode_rows, n=plan.grid.n_x, axis=1)
    return GridField(grid=plan.window, values=values)


# ---------------------------------------------------------------------------
# truncated pair-interaction integral


class PartitionEstimate(NamedTuple):
    estimate: float
    stderr: float
    ess: float


def partition_integral_mc(a, p, r, n_samples, seed):
    """Monte Carlo value of the integral over p-tuples in the taxicab ball
    of radius r of the product of pairwise distances to the power -a.

    Points are drawn uniformly on the ball via the rotated-square map
    (t, x) = ((u - v)/2, (u + v)/2) with u, v uniform on [-r, r]; the ball
    is treated as a subset of the plane, not of the torus.
    """
    if not a < 2.0:
        raise ValueError("pair exponent must be below the plane dimension")
    if p != int(p) or p < 1:
        raise ValueError("tuple size must be a positive integer")
    if p >= 4.0 / a if a > 0 else False:
        raise ValueError(f"tuple size {p} outside the finite regime p < {4.0 / a}")
    p = int(p)
    rng = np.random.default_rng(seed)
    uv = rng.uniform(-r, r, size=(n_samples, p, 2))
    t = 0.5 * (uv[:, :, 0] - uv[:, :, 1])
    x = 0.5 * (uv[:, :, 0] + uv[:, :, 1])
    w = np.ones(n_samples)
    for i in range(p):
        for jj in range(i + 1, p):
            dist = np.abs(t[:, jj] - t[:, i]) + np.abs(x[:, jj] - x[:, i])
            w *= dist**-a
    vol = (2.0 * r * r) ** p
    est = vol * float(np.mean(w))
    stderr = vol * float(np.std(w, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    ess = float(np.sum(w)) ** 2 / float(np.sum(w * w))
    return PartitionEstimate(estimate=est, stderr=stderr, ess=ess)
