"""Closed-form two-component advection-decay benchmark.

The system is

    d/dt (u1, u2) = R (u1, u2),    R = [[-1, dx], [dx, -1]],

on periodic grid functions.  Its solution operator factors over the
characteristic variables u1 +- u2, so exact solutions, mean solutions under
the correlation measure A = [[1, beta], [beta, gamma]], first/second-order
reductions, and the memory kernel all have closed forms.  That makes this the
analytic oracle both for the finite-matrix prediction engine (per Fourier
mode) and for the 1D staggered solver.

Shift convention: Delta_t maps f(x) to f(x - t), so Delta_{-t} translates a
profile toward negative x.  The reduced solution exp(-t) Delta_{-beta t} u1
therefore moves toward negative x for beta > 0; all displayed formulas follow
this convention.  On the unit grid a mode exp(2 pi i k x) picks up the factor
exp(-2 pi i k s) under Delta_s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import GaussianMeasure
from .prediction import LinearSystem, solve_full_op

__all__ = ["ModelState", "grid", "shift", "exact_solution", "mean_solution",
           "foop_solution", "model_memory_kernel", "mode_generator",
           "mode_measure", "verify_full_op_identity"]


def grid(n: int) -> np.ndarray:
    """Uniform periodic grid x_j = j/n on [0, 1)."""
    return np.arange(n) / n


def shift(values: np.ndarray, s: float) -> np.ndarray:
    """Apply Delta_s (f  ->  f(. - s)) on the periodic unit grid.

    Grid-multiple shifts are exact circular index moves; anything else is a
    spectral phase shift, which is exact for band-limited data.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    steps = s * n
    nearest = np.rint(steps)
    if abs(steps - nearest) < 1e-9:
        return np.roll(values, int(nearest) % n)
    freqs = np.fft.rfftfreq(n, d=1.0 / n)
    spec = np.fft.rfft(values) * np.exp(-2j * np.pi * freqs * s)
    return np.fft.irfft(spec, n=n)


@dataclass(frozen=True)
class ModelState:
    """Two periodic grid functions plus the measure parameters (beta, gamma)."""

    u1: np.ndarray
    u2: np.ndarray
    beta: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        u1 = np.asarray(self.u1, dtype=float)
        u2 = np.asarray(self.u2, dtype=float)
        if u1.shape != u2.shape or u1.ndim != 1:
            raise ValueError("u1 and u2 must be 1D arrays on the same grid")
        # |beta| < sqrt(gamma) makes [[1, beta], [beta, gamma]] SPD; equality is
        # tolerated here so the degenerate single-characteristic closed forms
        # stay usable (the measure itself would fail SPD validation).
        if abs(self.beta) > np.sqrt(self.gamma):
            raise ValueError(
                f"|beta| = {abs(self.beta)} must be <= sqrt(gamma) = "
                f"{np.sqrt(self.gamma)} for a (semi)definite measure")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @property
    def n(self) -> int:
        return len(self.u1)


def exact_solution(state: ModelState, t: float) -> ModelState:
    """Evolve both components exactly via the characteristic variables u1 +- u2."""
    vp = shift(state.u1 + state.u2, -t)   # moves toward negative x
    vm = shift(state.u1 - state.u2, t)
    decay = np.exp(-t)
    return ModelState(u1=0.5 * decay * (vp + vm), u2=0.5 * decay * (vp - vm),
                      beta=state.beta, gamma=state.gamma)


def mean_solution(u1_0: np.ndarray, beta: float, t: float,
                  gamma: float = 1.0) -> ModelState:
    """Measure-averaged solution given only the first component's initial data.

    Component 1 is exp(-t) [ (1+beta)/2 Delta_{-t} + (1-beta)/2 Delta_t ] u1_0;
    component 2 carries the same two waves with a minus sign on the second.
    """
    left = shift(u1_0, -t)
    right = shift(u1_0, t)
    decay = np.exp(-t)
    wl, wr = 0.5 * (1.0 + beta), 0.5 * (1.0 - beta)
    return ModelState(u1=decay * (wl * left + wr * right),
                      u2=decay * (wl * left - wr * right),
                      beta=beta, gamma=gamma)


def foop_solution(u1_0: np.ndarray, beta: float, t: float) -> np.ndarray:
    """First-order reduction: exp(-t) Delta_{-beta t} u1_0 (memory dropped)."""
    return np.exp(-t) * shift(u1_0, -beta * t)


def model_memory_kernel(beta: float, t: float, xi: float) -> np.ndarray:
    """Fourier symbol of the memory kernel at mode xi.

    K(t) = (1-beta^2) exp(-t) Delta_{beta t} [[dxx, 0], [-dx, 0]]; with the
    convention Delta_s -> exp(-i xi s) the symbol is

        (1 - beta^2) exp(-t) exp(-i beta xi t) [[-xi^2, 0], [-i xi, 0]].
    """
    phase = (1.0 - beta ** 2) * np.exp(-t) * np.exp(-1j * beta * xi * t)
    return phase * np.array([[-xi ** 2, 0.0], [-1j * xi, 0.0]])


def mode_generator(xi: float) -> np.ndarray:
    """Spatial Fourier transform of the generator: R(xi) = [[-1, i xi], [i xi, -1]]."""
    return np.array([[-1.0, 1j * xi], [1j * xi, -1.0]])


def mode_measure(beta: float, gamma: float = 1.0) -> GaussianMeasure:
    """Correlation measure [[1, beta], [beta, gamma]] with u1 resolved."""
    return GaussianMeasure(A=np.array([[1.0, beta], [beta, gamma]]),
                           m=np.zeros(2), k=1)


def mean_mode(beta: float, xi: float, t) -> np.ndarray:
    """Closed-form resolved mean-solution factor at mode xi."""
    t = np.asarray(t, dtype=float)
    return np.exp(-t) * (0.5 * (1 + beta) * np.exp(1j * xi * t)
                         + 0.5 * (1 - beta) * np.exp(-1j * xi * t))


def verify_full_op_identity(beta: float, xi: float, t_end: float,
                            dt: float, gamma: float = 1.0) -> float:
    """Max deviation between the integrated memory equation and the mean mode.

    Integrates d/dt u = (-1 + i beta xi) u + int_0^t K_CC(t-s) u(s) ds per
    mode and compares against the exact mean-solution factor.  The local part
    is removed by the exact integrating factor (so the zero mode, pure decay,
    comes out exact to rounding); the remaining Volterra convolution uses the
    trapezoidal rule, making the deviation O(dt^2) for xi != 0.
    """
    n_steps = int(round(t_end / dt))
    times = dt * np.arange(n_steps + 1)
    g = -1.0 + 1j * beta * xi
    # substituting v = exp(-g t) u leaves v' = (Ktilde * v) with the bounded
    # oscillatory kernel Ktilde(s) = K(s) exp(-g s)
    kernel = -(1.0 - beta ** 2) * xi ** 2 * np.exp(-2j * beta * xi * times)

    v = np.empty(n_steps + 1, dtype=complex)
    v[0] = 1.0
    denom = 1.0 - 0.25 * dt ** 2 * kernel[0]
    for m in range(n_steps):
        conv_m = _trapezoid_conv(kernel, v, m, dt)
        conv_known = dt * (0.5 * kernel[m + 1] * v[0]
                           + np.dot(kernel[m:0:-1], v[1:m + 1]))
        v[m + 1] = (v[m] + 0.5 * dt * (conv_m + conv_known)) / denom
    u = np.exp(g * times) * v
    return float(np.abs(u - mean_mode(beta, xi, times)).max())


def _trapezoid_conv(kernel, u, m, dt):
    if m == 0:
        return 0.0
    acc = 0.5 * (kernel[m] * u[0] + kernel[0] * u[m])
    if m > 1:
        acc += np.dot(kernel[m - 1:0:-1], u[1:m])
    return dt * acc


def full_op_mode_solution(beta: float, xi: float, t_end: float, dt: float,
                          gamma: float = 1.0):
    """Resolved trajectory of the finite-matrix engine on the mode generator."""
    system = LinearSystem(R=mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
    return solve_full_op(system, mode_measure(beta, gamma), t_end, dt)
