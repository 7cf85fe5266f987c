"""Negative-regularity norm estimation on space-time grids.

Two estimators for the scale-weighted supremum seminorm of a sampled field:
a wavelet route (orthonormal coefficient tables, suprema weighted by
2^{n(alpha+1)}) and a direct scan over rescaled test functions. The module
also provides the dyadic partition germ and the spatial bump family used by
the kernel-decomposition arguments elsewhere.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .noise_field import GridField, TestFunction, _bump, fd_c_m_norm
from .torus_spectral import torus_wrap

# orthogonal filters, sum normalized to sqrt(2); published to double precision
_DB_FILTERS = {
    2: [
        0.48296291314469025,
        0.836516303737469,
        0.22414386804185735,
        -0.12940952255092145,
    ],
    3: [
        0.3326705529500825,
        0.8068915093110924,
        0.4598775021184914,
        -0.1350110200102546,
        -0.0854412738820267,
        0.0352262918857095,
    ],
    4: [
        0.23037781330885523,
        0.7148465705525415,
        0.6308807679295904,
        -0.02798376941698385,
        -0.18703481171888114,
        0.030841381835986965,
        0.032883011666982945,
        -0.010597401784997278,
    ],
}

# global Holder exponents of the scaling functions (standard numerical values)
_HOLDER_REGULARITY = {2: 0.5500, 3: 1.0878, 4: 1.6179}


def _exact_integer_values(a):
    # phi on the integers: eigenvector of M_{ij} = a_{2i-j} at eigenvalue 1
    n = len(a)
    m = np.zeros((n - 2, n - 2))
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            k = 2 * i - j
            if 0 <= k < n:
                m[i - 1, j - 1] = a[k]
    w, vecs = np.linalg.eig(m)
    i1 = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[i1] - 1.0) > 1e-8:
        raise ValueError("refinement operator has no unit eigenvalue")
    v = np.real(vecs[:, i1])
    return v / v.sum()


def _dyadic_phi_table(a, j_levels):
    """phi at k/2^J over its support, exact by repeated refinement."""
    n = len(a)
    vals = np.zeros(n)
    vals[1 : n - 1] = _exact_integer_values(a)
    cur = vals
    for j in range(1, j_levels + 1):
        width = (n - 1) * 2**j
        new = np.zeros(width + 1)
        step = 2 ** (j - 1)
        prev_len = (n - 1) * step + 1
        for m in range(n):
            lo = m * step
            hi = min(lo + prev_len, width + 1)
            if hi > lo:
                new[lo:hi] += a[m] * cur[: hi - lo]
        cur = new
    return cur


def _psi_table_from_phi(a, phi, j_levels):
    n = len(a)
    b = np.array([(-1.0) ** k * a[n - 1 - k] for k in range(n)])
    psi = np.zeros_like(phi)
    idx = np.arange(len(phi))
    for k in range(n):
        src = 2 * idx - k * 2**j_levels
        ok = (src >= 0) & (src < len(phi))
        psi[ok] += b[k] * phi[src[ok]]
    return psi


@dataclass
class WaveletBasis:
    """Orthonormal compactly supported pair (phi, psi) tabulated at dyadics.

    The tables hold exact values at k 2^{-J} on the common support [0, 2v-1];
    evaluation off the table grid interpolates linearly.
    """

    v: int
    level_base: int
    resolution: int
    filter: np.ndarray
    phi_table: np.ndarray
    psi_table: np.ndarray
    regularity: float

    @property
    def support_width(self):
        return 2 * self.v - 1

    def _eval(self, table, x):
        x = np.asarray(x, dtype=float)
        y = x * 2.0**self.resolution
        i0 = np.floor(y).astype(np.int64)
        frac = y - i0
        out = np.zeros_like(y)
        last = len(table) - 1
        ok = (i0 >= 0) & (i0 < last)
        out[ok] = (1.0 - frac[ok]) * table[i0[ok]] + frac[ok] * table[i0[ok] + 1]
        exact = i0 == last
        out[exact] = table[last] * (frac[exact] == 0.0)
        return out

    def phi(self, x):
        return self._eval(self.phi_table, x)

    def psi(self, x):
        return self._eval(self.psi_table, x)


_BASIS_CACHE = {}


def build_basis(v=3, level_base=3, resolution=12):
    """Orthonormal basis with v vanishing moments, tabulated to 2^-resolution."""
    if v not in _DB_FILTERS:
        raise ValueError(f"unsupported vanishing-moment count v={v}")
    key = (v, level_base, resolution)
    if key in _BASIS_CACHE:
        return _BASIS_CACHE[key]
    if (2 * v - 1) * 2.0**-level_base >= 1.0:
        raise ValueError("base level too coarse: basis functions do not fit in one period")
    a = math.sqrt(2.0) * np.asarray(_DB_FILTERS[v])
    phi = _dyadic_phi_table(a, resolution)
    psi = _psi_table_from_phi(a, phi, resolution)
    basis = WaveletBasis(
        v=v,
        level_base=level_base,
        resolution=resolution,
        filter=a,
        phi_table=phi,
        psi_table=psi,
        regularity=_HOLDER_REGULARITY[v],
    )
    _BASIS_CACHE[key] = basis
    return basis


# ---------------------------------------------------------------------------
# coefficient tables


@dataclass
class CoefficientTable:
    """Per-level tables c[iota][n][p_index, m_index] of L2-normalized
    coefficients; p indexes time translates p 2^{-n}, m space translates
    m 2^{-n} of the periodized factor."""

    basis: WaveletBasis
    t1: float
    levels: list
    entries: dict  # (iota, n) -> {"p": int array, "m": int array, "coeff": 2D array}
    dt: float
    dx: float

    def level_values(self, n, iotas=(0, 1, 2, 3)):
        blocks = [
            self.entries[(i, n)]["coeff"].ravel()
            for i in iotas
            if (i, n) in self.entries
        ]
        return np.concatenate(blocks) if blocks else np.zeros(0)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iota", "n", "p", "m", "coeff"])
        for (iota, n) in sorted(self.entries):
            e = self.entries[(iota, n)]
            for ip, p in enumerate(e["p"]):
                for im, m in enumerate(e["m"]):
                    w.writerow([iota, n, p, m, "%.17g" % e["coeff"][ip, im]])
        return buf.getvalue()


def _time_matrix(basis, table, n, p_values, times):
    # rows: translates p; cols: grid times; 2^{n/2} f(2^n t - p)
    args = (2.0**n) * times[None, :] - p_values[:, None]
    return (2.0 ** (0.5 * n)) * basis._eval(table, args)


def _space_matrix(basis, table, n, m_values, xs):
    # periodized: sum over integer wraps of 2^{n/2} f(2^n(x+w) - m)
    out = np.zeros((len(m_values), len(xs)))
    for w in (-1.0, 0.0, 1.0, 2.0):
        args = (2.0**n) * (xs[None, :] + w) - m_values[:, None]
        out += basis._eval(table, args)
    return (2.0 ** (0.5 * n)) * out


def _level_cap(grid, margin=4.0):
    h = max(grid.dt, grid.dx)
    return int(math.floor(-math.log2(margin * h) + 1e-9))


def _p_range(grid, n, t1, width):
    p_lo = int(math.ceil(grid.t_min * 2.0**n - 1e-9))
    p_lo = max(p_lo, -int(math.floor((t1 + 1.0) * 2.0**n + 1e-9)))
    p_hi = int(math.floor(grid.t_max * 2.0**n + 1e-9)) - width
    p_hi = min(p_hi, int(math.floor((t1 + 1.0) * 2.0**n + 1e-9)))
    return p_lo, p_hi


def analyze(x_field, basis, t1, n_max=None):
    """Coefficient tables <X, basis fn> for iota in {0,1,2,3}, levels
    level_base..n_max, by grid quadrature (left-endpoint cells)."""
    grid = x_field.grid
    cap = _level_cap(grid)
    if n_max is None:
        n_max = cap
    elif n_max > cap:
        raise ValueError(f"level {n_max} under-resolved: grid supports n <= {cap}")
    if n_max < basis.level_base:
        raise ValueError("no admissible levels: grid too coarse for the base level")
    times = grid.times()
    xs = grid.torus.points()
    width = basis.support_width
    entries = {}
    levels = list(range(basis.level_base, n_max + 1))
    for n in levels:
        p_lo, p_hi = _p_range(grid, n, t1, width)
        if p_lo > p_hi:
            continue
        p_values = np.arange(p_lo, p_hi + 1)
        m_values = np.arange(2**n)
        u = {
            0: _time_matrix(basis, basis.phi_table, n, p_values, times),
            1: _time_matrix(basis, basis.psi_table, n, p_values, times),
        }
        w = {
            0: _space_matrix(basis, basis.phi_table, n, m_values, xs),
            1: _space_matrix(basis, basis.psi_table, n, m_values, xs),
        }
        for iota, (it, ix) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
            coeff = (u[it] @ x_field.values @ w[ix].T) * grid.cell_area
            entries[(iota, n)] = {"p": p_values, "m": m_values, "coeff": coeff}
    return CoefficientTable(
        basis=basis,
        t1=t1,
        levels=levels,
        entries=entries,
        dt=grid.dt,
        dx=grid.dx,
    )


def synthesize(table, grid):
    """Field with the given coefficients: X = sum c * (basis function)."""
    basis = table.basis
    times = grid.times()
    xs = grid.torus.points()
    vals = np.zeros((grid.n_t, grid.n_x))
    for (iota, n), e in table.entries.items():
        it, ix = [(0, 0), (0, 1), (1, 0), (1, 1)][iota]
        u = _time_matrix(
            basis, basis.phi_table if it == 0 else basis.psi_table, n, e["p"], times
        )
        w = _space_matrix(
            basis, basis.phi_table if ix == 0 else basis.psi_table, n, e["m"], xs
        )
        vals += u.T @ e["coeff"] @ w
    return GridField(grid=grid, values=vals)


# ---------------------------------------------------------------------------
# norm estimates


@dataclass
class BesovEstimate:
    """Scale-weighted supremum estimate; value is the max of the profile."""

    alpha: float
    window: tuple
    value: float
    profile: dict  # scale label -> weighted supremum at that scale
    rms_profile: dict = field(default_factory=dict)


def besov_norm_wavelet(table, alpha, window=None):
    """Max over levels and translates of 2^{n(alpha+1)} |coefficient|.

    The factor 2^n converts L2-normalized coefficients to pairings against
    rescaled bumps of unit mass; the rms profile tracks the same weight on
    the root mean square coefficient and is the statistically stable variant
    used for slope fitting.
    """
    if alpha >= 0:
        raise ValueError("alpha must be negative")
    if table.basis.regularity <= -alpha:
        raise ValueError(
            f"basis regularity {table.basis.regularity} inadmissible for alpha={alpha}"
        )
    if window is None:
        window = (-(table.t1 + 1.0), table.t1 + 1.0)
    profile = {}
    rms = {}
    for n in table.levels:
        vals = []
        for iota in range(4):
            if (iota, n) not in table.entries:
                continue
            e = table.entries[(iota, n)]
            pos = e["p"] * 2.0**-n
            keep = (pos >= window[0]) & (pos + table.basis.support_width * 2.0**-n <= window[1])
            if np.any(keep):
                vals.append(e["coeff"][keep].ravel())
        if not vals:
            continue
        flat = np.concatenate(vals)
        weight = 2.0 ** (n * (alpha + 1.0))
        profile[n] = weight * float(np.max(np.abs(flat)))
        rms[n] = weight * float(np.sqrt(np.mean(flat**2)))
    value = max(profile.values()) if profile else 0.0
    return BesovEstimate(
        alpha=alpha, window=tuple(window), value=value, profile=profile, rms_profile=rms
    )


def profile_slope(profile):
    """Least-squares slope of log2(profile) against the level."""
    ns = np.array(sorted(profile))
    ys = np.log2([profile[n] for n in ns])
    return float(np.polyfit(ns, ys, 1)[0])


def probe_set(m):
    """Four smooth probes with C^m norm certified <= 1, supported in the
    taxicab ball of radius 1/4: an even bump, an odd bump, two anisotropic."""

    def make(fn, radius):
        raw = TestFunction(func=fn, support_radius=radius, m=m)
        norm = fd_c_m_norm(raw, m, n_grid=321)
        scaled = TestFunction(
            func=lambda t, x, _f=fn, _c=1.1 * norm: _f(t, x) / _c,
            support_radius=radius,
            m=m,
            c_m_norm=1.0 / 1.1,
        )
        return scaled

    return [
        make(lambda t, x: _bump(t / 0.125) * _bump(x / 0.125), 0.25),
        make(lambda t, x: (t / 0.125) * _bump(t / 0.125) * _bump(x / 0.125), 0.25),
        make(lambda t, x: _bump(t / 0.1875) * _bump(x / 0.0625), 0.25),
        make(lambda t, x: _bump(t / 0.0625) * _bump(x / 0.1875), 0.25),
    ]


def _scan_one(x_field, probe, delta, window, alpha):
    grid = x_field.grid
    ht = probe.support_radius * delta
    kt = int(math.ceil(ht / grid.dt)) - 1
    kx = min(int(math.ceil(ht / grid.dx)) - 1, grid.n_x // 2 - 1)
    t_off = grid.dt * np.arange(-kt, kt + 1)
    x_off = grid.dx * np.arange(-kx, kx + 1)
    kern = probe(t_off[:, None] / delta, x_off[None, :] / delta) / delta**2
    kern_pad = np.zeros((len(t_off), grid.n_x))
    kern_pad[:, : 2 * kx + 1] = kern
    kern_pad = np.roll(kern_pad, -kx, axis=1)
    a_hat = np.fft.fft(x_field.values, axis=1)
    k_hat = np.conj(np.fft.fft(kern_pad, axis=1))
    corr = fftconvolve(a_hat, k_hat[::-1, :], axes=0, mode="valid")
    pairings = np.real(np.fft.ifft(corr, axis=1)) * grid.cell_area
    z_times = grid.times()[kt : kt + pairings.shape[0]]
    keep = (z_times >= window[0]) & (z_times <= window[1])
    if not np.any(keep):
        return 0.0
    return delta ** (-alpha) * float(np.max(np.abs(pairings[keep])))


def besov_norm_scan(x_field, alpha, window, probes=None, j_max=None):
    """Direct lower-bound scan: sup over dyadic scales delta = 2^-j, centers z
    on the grid, and probes g of delta^{-alpha} |<X, rescaled probe at z>|."""
    if alpha >= 0:
        raise ValueError("alpha must be negative")
    if probes is None:
        probes = probe_set(-math.floor(alpha))
    if not probes:
        raise ValueError("probe set is empty")
    grid = x_field.grid
    h = max(grid.dt, grid.dx)
    # scaled probe support spans delta/4; keep at least 4 cells across it
    cap = int(math.floor(-math.log2(16.0 * h) + 1e-9))
    if j_max is None:
        j_max = cap
    elif j_max > cap:
        raise ValueError(f"scale 2^-{j_max} under-resolved: grid supports j <= {cap}")
    profile = {}
    for j in range(0, j_max + 1):
        delta = 2.0**-j
        profile[j] = max(
            _scan_one(x_field, g, delta, window, alpha) for g in probes
        )
    return BesovEstimate(
        alpha=alpha,
        window=tuple(window),
        value=max(profile.values()) if profile else 0.0,
        profile=profile,
    )


# ---------------------------------------------------------------------------
# dyadic partition of unity and spatial bumps


@dataclass(frozen=True)
class DyadicPartition:
    """Radial germ supported in (1/16, 1/4) whose dyadic dilates sum to one
    on r > 0; built by normalizing a fixed bump by its own dilate sum."""

    center: float = 5.0 / 32.0
    half: float = 3.0 / 32.0

    def _chi(self, r):
        return _bump((np.asarray(r, dtype=float) - self.center) / self.half)

    def germ(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        pos = r > 0.0
        if np.any(pos):
            rp = r[pos]
            total = np.zeros_like(rp)
            lo = math.floor(math.log2(1.0 / (16.0 * rp.max()))) - 1
            hi = math.ceil(math.log2(1.0 / (4.0 * rp.min()))) + 1
            for mlev in range(int(lo), int(hi) + 1):
                total += self._chi(rp * 2.0**mlev)
            out[pos] = self._chi(rp) / total
        return out


def dyadic_partition_eval(part, n, r):
    """Level-n member: germ(2^n r)."""
    return part.germ((2.0**n) * np.asarray(r, dtype=float))


def dyadic_partition_sum(part, r, n_lo=-30, n_hi=60):
    vals = sum(dyadic_partition_eval(part, n, r) for n in range(n_lo, n_hi + 1))
    return vals


@dataclass(frozen=True)
class SpatialBump:
    """Symmetric profile supported in (-1/2, 1/2) with half-integer-shift
    partition of unity."""

    def _chi(self, x):
        return _bump(2.0 * np.asarray(x, dtype=float))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        num = self._chi(x)
        out = np.zeros_like(num)
        inside = num > 0.0
        if np.any(inside):
            xi = x[inside]
            total = np.zeros_like(xi)
            for k in range(-3, 4):
                total += self._chi(xi - 0.5 * k)
            out[inside] = num[inside] / total
        return out


def spatial_bump_eval(bump, n, x):
    """Level-n member on the torus: profile(2^n x)."""
    return bump((2.0**n) * np.asarray(x, dtype=float))


def spatial_bump_torus_sum(bump, n, x):
    """Finite shifted sum over k = -2^n+1 .. 2^n with torus-wrapped offsets."""
    ks = np.arange(-(2**n) + 1, 2**n + 1)
    shift = ks * 2.0 ** -(n + 1)
    args = torus_wrap(np.asarray(x, dtype=float)[..., None] - shift)
    return np.sum(spatial_bump_eval(bump, n, args), axis=-1)
