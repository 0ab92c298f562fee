"""Independent references that never touch the tensor-network code.

Contents: the single-excitation delay equation and its closed forms on the
first feedback interval, an exclusive photon-counting hierarchy for the
memoryless (no-feedback) driven emitter, the Rabi calibration curve, and the
mirror-displacement robustness length of the destructive-interference
window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import PhysicalParams, pulse_envelope
from .observables import PhotonStats

SPEED_OF_LIGHT = 299792458.0  # m/s

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
_PE = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=np.complex128)


@dataclass(frozen=True)
class DdeSolution:
    """Amplitude history of the delayed decay equation on a uniform grid."""

    t: np.ndarray
    c: np.ndarray

    @property
    def population(self) -> np.ndarray:
        return np.abs(self.c) ** 2

    def population_at(self, times) -> np.ndarray:
        """Population at arbitrary times inside the grid (spline-interpolated)."""
        from scipy.interpolate import CubicSpline
        times = np.asarray(times, dtype=float)
        re = CubicSpline(self.t, self.c.real)(times)
        im = CubicSpline(self.t, self.c.imag)(times)
        return re ** 2 + im ** 2


def rabi_final_population(pulse_area: float) -> float:
    """Excited population after an isolated pulse of the given area: sin^2(A/2)."""
    return math.sin(pulse_area / 2.0) ** 2


def phase_robustness(omega0: float, c0: float = SPEED_OF_LIGHT) -> float:
    """Mirror-displacement width of the destructive window, pi*c0/(2*omega0).

    The round-trip phase is phi = 2*omega0*L/c0 and the destructive window
    spans a phase interval of width pi, hence delta-L = pi c0 / (2 omega0).
    ``omega0`` in rad/s, result in meters.
    """
    if omega0 <= 0:
        raise ValueError("omega0 must be > 0")
    return math.pi * c0 / (2.0 * omega0)


def analytic_feedback_population(t: float, gamma: float, tau: float, phi: float,
                                 cross_term_sign: float = 1.0) -> float:
    """Closed-form excited population on the first feedback interval [tau, 2tau]:

        exp(-2Gt) + exp(-G(2t - tau)) G(t - tau) [s*2cos(phi) + G(t - tau) e^{G tau}]

    The default cross-term sign s=+1 makes phi = 0 decay slower; direct
    piecewise integration of the delay equation gives s=-1 (see
    piecewise_feedback_population), under which phi = 0 enhances and phi = pi
    suppresses the emission.  Both variants are kept so the discrepancy stays
    visible; tests anchor to the delay integrator.
    """
    if not (tau - 1e-12 <= t <= 2 * tau + 1e-12):
        raise ValueError(f"t={t} outside the first feedback interval [{tau}, {2 * tau}]")
    g = gamma
    x = g * (t - tau)
    return math.exp(-2 * g * t) + math.exp(-g * (2 * t - tau)) * x * (
        cross_term_sign * 2.0 * math.cos(phi) + x * math.exp(g * tau))


def piecewise_feedback_population(t: float, gamma: float, tau: float,
                                  phi: float) -> float:
    """|c(t)|^2 on [tau, 2tau] from piecewise integration of the delay equation.

    c(t) = e^{-Gt} - G(t - tau) e^{i phi} e^{-G(t - tau)}; identical to the
    closed form above with the cross-term sign flipped to -1.
    """
    if not (tau - 1e-12 <= t <= 2 * tau + 1e-12):
        raise ValueError(f"t={t} outside the first feedback interval [{tau}, {2 * tau}]")
    g = gamma
    c = math.exp(-g * t) - g * (t - tau) * np.exp(1j * phi) * math.exp(-g * (t - tau))
    return float(abs(c) ** 2)


def dde_integrate(gamma: float, tau: float, phi: float, t_max: float,
                  dt: float) -> DdeSolution:
    """Integrate cdot(t) = -G c(t) - G e^{i phi} c(t - tau) theta(t - tau), c(0)=1.

    Classic RK4 with the grid aligned to multiples of tau so derivative kinks
    sit on nodes; half-step history values come from cubic Hermite
    interpolation with segment-consistent endpoint derivatives.  The sign
    convention makes phi = pi suppress the decay.  Requires dt <= tau/50
    whenever the delay activates inside the window.
    """
    if t_max <= 0 or dt <= 0:
        raise ValueError("t_max and dt must be > 0")
    delay_active = tau <= t_max
    if delay_active:
        if dt > tau / 50.0 * (1.0 + 1e-12):
            raise ValueError(f"dt={dt} must be <= tau/50={tau / 50.0:g}")
        m = math.ceil(tau / dt - 1e-12)
        h = tau / m
    else:
        m = 0
        h = dt
    n = math.ceil(t_max / h - 1e-9)
    g = gamma
    fb = g * np.exp(1j * phi)

    c = np.zeros(n + 1, dtype=np.complex128)
    c[0] = 1.0

    def seg_deriv(i: int) -> complex:
        """cdot at node i, with the delay flag of the segment starting at i."""
        delayed = fb * c[i - m] if (delay_active and i >= m) else 0.0
        return -g * c[i] - delayed

    def hist_half(j: int) -> complex:
        """History value c(t_j + h/2 - tau) by cubic Hermite on segment j-m."""
        i = j - m
        c0, c1 = c[i], c[i + 1]
        d0 = seg_deriv(i)
        d1 = -g * c[i + 1] - (fb * c[i + 1 - m] if (delay_active and i >= m) else 0.0)
        # Hermite basis at theta = 1/2
        return 0.5 * (c0 + c1) + 0.125 * h * (d0 - d1)

    for j in range(n):
        delay_on = delay_active and j >= m
        f1 = fb * c[j - m] if delay_on else 0.0
        f2 = fb * hist_half(j) if delay_on else 0.0
        f4 = fb * c[j + 1 - m] if delay_on else 0.0
        cj = c[j]
        k1 = -g * cj - f1
        k2 = -g * (cj + 0.5 * h * k1) - f2
        k3 = -g * (cj + 0.5 * h * k2) - f2
        k4 = -g * (cj + h * k3) - f4
        c[j + 1] = cj + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return DdeSolution(t=h * np.arange(n + 1), c=c)


def markov_counting_distribution(pulse_area: float, pulse_width: float, gamma: float,
                                 n_cut: int = 4, t_start: float | None = None,
                                 t_end: float | None = None,
                                 rtol: float = 1e-10, atol: float = 1e-12) -> np.ndarray:
    """p(0..n_cut) for the driven emitter without feedback, by exclusive counting.

    Conditional states rho^(n) evolve under the no-jump generator while the
    jump term feeds rho^(n) from rho^(n-1); the top level absorbs its own
    jumps so that total probability is conserved exactly.  p(n) is the trace
    of rho^(n) at the end of the window; the last entry means "n_cut or
    more" photons.
    """
    if n_cut < 3:
        raise ValueError("n_cut must be >= 3")
    params = PhysicalParams(gamma=gamma, tau=0.0, phi=0.0, pulse_area=pulse_area,
                            pulse_width=pulse_width, feedback_enabled=False)
    t0 = -5.0 * pulse_width if t_start is None else t_start
    t1 = 10.0 / gamma if t_end is None else t_end
    rate = 2.0 * gamma  # population jump rate

    def deriv(t, y):
        rho = y.reshape(n_cut + 1, 2, 2)
        om = pulse_envelope(t, params)
        h = om * _SX
        out = np.empty_like(rho)
        for nn in range(n_cut + 1):
            r = rho[nn]
            out[nn] = -1j * (h @ r - r @ h) - gamma * (_PE @ r + r @ _PE)
        for nn in range(1, n_cut + 1):
            out[nn][0, 0] += rate * rho[nn - 1][1, 1]
        out[n_cut][0, 0] += rate * rho[n_cut][1, 1]  # absorbing top level
        return out.reshape(-1)

    y0 = np.zeros((n_cut + 1, 2, 2), dtype=np.complex128)
    y0[0, 0, 0] = 1.0
    sol = solve_ivp(deriv, (t0, t1), y0.reshape(-1), method="DOP853",
                    rtol=rtol, atol=atol, max_step=pulse_width / 2.0)
    if not sol.success:
        raise RuntimeError(f"counting hierarchy integration failed: {sol.message}")
    rho_end = sol.y[:, -1].reshape(n_cut + 1, 2, 2)
    return np.real(np.trace(rho_end, axis1=1, axis2=2))


def markov_counting_pn(pulse_area: float, pulse_width: float, gamma: float,
                       n_cut: int = 4, **kwargs) -> PhotonStats:
    """PhotonStats view of markov_counting_distribution (p0..p3 and r)."""
    p = markov_counting_distribution(pulse_area, pulse_width, gamma, n_cut, **kwargs)
    flags = []
    if abs(float(np.sum(p)) - 1.0) > 1e-6:
        flags.append("conservation_violation")
    if p[1] > 1e-9:
        ratio = float(p[2] / p[1])
    else:
        ratio = None
        flags.append("ratio_undefined")
    return PhotonStats(p0=float(p[0]), p1=float(p[1]), p2=float(p[2]), p3=float(p[3]),
                       ratio_r=ratio, flags=tuple(flags))
