"""Spectral calculus for 1-periodic functions on the unit torus.

The torus is [-1/2, 1/2) with grid points x_j = -1/2 + j/n_x. Fourier
coefficients follow the analytic convention

    coeffs[k] = (1/n_x) sum_j f(x_j) e^{-2 pi i k x_j},

which differs from the index-based FFT by a (-1)^k phase because of the
half-period grid offset. The half-Laplacian acts as multiplication by
2 pi |k|, the semigroup as e^{-2 pi |k| t}, and the Green inverse divides
mean-zero data by 2 pi |k|.
"""

import numpy as np

__all__ = [
    "TorusGrid",
    "GridFunction1D",
    "SpectralField",
    "torus_wrap",
    "torus_distance",
    "st_norm",
    "dft_forward",
    "dft_inverse",
    "apply_multiplier",
    "frac_laplacian_apply",
    "green_eval",
    "green_convolve",
    "semigroup_multiplier",
    "semigroup_apply",
]


def torus_wrap(x):
    """Wrap positions to the fundamental domain [-1/2, 1/2)."""
    x = np.asarray(x, dtype=float)
    return (x + 0.5) % 1.0 - 0.5


def torus_distance(x):
    """Distance to 0 on the torus: min over integer shifts of |x + k|."""
    w = torus_wrap(x)
    return np.abs(w)


def st_norm(t, x):
    """Parabolic-type space-time norm |t| + d(x, 0) used for balls and annuli."""
    return np.abs(np.asarray(t, dtype=float)) + torus_distance(x)


class TorusGrid:
    """Uniform grid on the torus; n_x must be a power of two, at least 8."""

    def __init__(self, n_x):
        n_x = int(n_x)
        if n_x < 8 or (n_x & (n_x - 1)) != 0:
            raise ValueError(f"n_x must be a power of two >= 8, got {n_x}")
        self.n_x = n_x
        self.dx = 1.0 / n_x

    def points(self):
        return -0.5 + self.dx * np.arange(self.n_x)

    def wavenumbers(self):
        # ascending order -n/2 .. n/2 - 1; index i <-> k = i - n/2
        return np.arange(-(self.n_x // 2), self.n_x // 2)

    def __eq__(self, other):
        return isinstance(other, TorusGrid) and other.n_x == self.n_x

    def __hash__(self):
        return hash(("TorusGrid", self.n_x))

    def __repr__(self):
        return f"TorusGrid(n_x={self.n_x})"


class GridFunction1D:
    """Real samples of a function at the grid points."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_x,):
            raise ValueError(
                f"values shape {values.shape} does not match grid n_x={grid.n_x}"
            )
        self.grid = grid
        self.values = values


class SpectralField:
    """Fourier coefficients indexed by k in {-n_x/2, ..., n_x/2 - 1}."""

    def __init__(self, grid, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (grid.n_x,):
            raise ValueError(
                f"coeffs shape {coeffs.shape} does not match grid n_x={grid.n_x}"
            )
        self.grid = grid
        self.coeffs = coeffs

    def coeff(self, k):
        k = int(k)
        n = self.grid.n_x
        if not -(n // 2) <= k < n // 2:
            raise ValueError(f"wavenumber {k} outside resolved band of n_x={n}")
        return self.coeffs[k + n // 2]

    def synthesize_complex(self):
        """Inverse transform without discarding the imaginary part."""
        n = self.grid.n_x
        k = self.grid.wavenumbers()
        # undo the phase from the -1/2 grid offset, then plain inverse FFT
        c = self.coeffs * ((-1.0) ** k)
        return np.fft.ifft(np.fft.ifftshift(c)) * n


def _phase(grid):
    # e^{-2 pi i k x_j} = (-1)^k e^{-2 pi i k j / n} on the offset grid
    return (-1.0) ** grid.wavenumbers()


def dft_forward(f):
    """Analysis transform of a GridFunction1D into a SpectralField."""
    grid = f.grid
    c = np.fft.fftshift(np.fft.fft(f.values)) / grid.n_x
    return SpectralField(grid, c * _phase(grid))


def dft_inverse(sf):
    """Synthesis transform back to grid samples (real part).

    The suppressed imaginary part is a consistency indicator; use
    SpectralField.synthesize_complex to inspect it.
    """
    return GridFunction1D(sf.grid, sf.synthesize_complex().real)


def apply_multiplier(sf, multiplier, odd=False):
    """Multiply coefficients by multiplier(k).

    With odd=True the unpaired Nyquist mode k = -n_x/2 is zeroed: an odd
    symbol has no consistent real-valued action on that mode.
    """
    k = sf.grid.wavenumbers()
    m = np.asarray(multiplier(k), dtype=complex)
    out = sf.coeffs * m
    if odd:
        out[0] = 0.0
    return SpectralField(sf.grid, out)


def frac_laplacian_apply(f):
    """Apply the half-Laplacian (Fourier symbol 2 pi |k|) to grid samples."""
    sf = dft_forward(f)
    return dft_inverse(apply_multiplier(sf, lambda k: 2.0 * np.pi * np.abs(k)))


def green_eval(x):
    """Green function of the half-Laplacian on the torus.

    G(x) = -(1/pi) log(2 sin(pi |x|)) for x != 0 (mod 1); the on-diagonal
    value is logarithmically singular and raises.
    """
    x = np.asarray(x, dtype=float)
    d = torus_distance(x)
    if np.any(d == 0.0):
        raise ValueError("Green function is singular at x = 0 (mod 1)")
    return -np.log(2.0 * np.sin(np.pi * d)) / np.pi


def green_convolve(f, mean_tol=1e-10):
    """Solve the half-Laplacian problem: convolve mean-zero data with G.

    Spectrally this divides by 2 pi |k| and keeps the zero mode at 0. Input
    with |mean| > mean_tol is rejected, since the operator has no inverse on
    constants.
    """
    sf = dft_forward(f)
    mean = sf.coeff(0)
    if abs(mean) > mean_tol:
        raise ValueError(
            f"green_convolve requires mean-zero input: |coeff[0]| = {abs(mean):.3e}"
        )
    k = sf.grid.wavenumbers()
    with np.errstate(divide="ignore"):
        inv = np.where(k == 0, 0.0, 1.0 / (2.0 * np.pi * np.abs(k)))
    return dft_inverse(SpectralField(sf.grid, sf.coeffs * inv))


def semigroup_multiplier(grid, t):
    """Multiplier array e^{-2 pi |k| t} over the grid's wavenumbers."""
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    return np.exp(-2.0 * np.pi * np.abs(grid.wavenumbers()) * t)


def semigroup_apply(t, f):
    """Apply the half-Laplacian semigroup at time t >= 0 to grid samples."""
    sf = dft_forward(f)
    m = semigroup_multiplier(f.grid, t)
    return dft_inverse(SpectralField(f.grid, sf.coeffs * m))
