"""Numerical laboratory for a singular stochastic sinh-Gordon-type equation
driven by space-time white noise on the unit torus, with half-Laplacian
dissipation.

Modules
-------
torus_spectral   spectral calculus on the torus (half-Laplacian, Green, semigroup)
cauchy_kernel    Cauchy/Poisson kernel, its torus periodization and smooth truncation
noise_field      white noise, mollifiers, kernel-smoothed Gaussian fields, covariance
gmc              multiplicative chaos weights and their moment/Cauchy statistics
besov_wavelet    wavelet tables, negative-regularity estimators, dyadic partitions
schauder         annulus-decomposed pairings and the regularity-gain measurement
dpd_solver       remainder field, Picard fixed point, epsilon-convergence studies
harness          TOML-configured CLI producing CSV/JSON artifacts
"""

__version__ = "0.1.0"
