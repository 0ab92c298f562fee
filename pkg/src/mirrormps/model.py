"""Physical parameters and per-step evolution operators.

The one-step gate acts on the three-body basis |i_S, i_n, i_tau> where i_S
is the emitter level, i_n the photon number of the current time bin and
i_tau that of the bin one round-trip delay in the past.  The basis ordering
is fixed: i_S slowest, i_tau fastest, i.e.

    index = i_S * (n_max+1)**2 + i_n * (n_max+1) + i_tau.

The gate is assembled each step as U = U0 + Omega(t) U1 + Omega(t)^2 U2 from
three time-independent sparse matrices (second-order short-time expansion of
exp(-i Omega dt sigma_x + M_fb) in the bin-coupling strength sqrt(gamma dt)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalParams:
    """Emitter, waveguide and drive parameters.

    ``gamma`` is the radiative amplitude decay rate: without feedback the
    excited population decays as exp(-2*gamma*t).  ``phi`` is the optical
    round-trip phase, kept as a knob independent of ``tau`` and stored in
    [0, 2pi).  ``pulse_area`` is calibrated so that an isolated pulse leaves
    the excited population at sin^2(pulse_area/2).
    """

    gamma: float
    tau: float = 0.0
    phi: float = 0.0
    pulse_area: float = 0.0
    pulse_width: float = 0.1
    feedback_enabled: bool = True

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.pulse_width <= 0:
            raise ValueError(f"pulse_width must be > 0, got {self.pulse_width}")
        if self.feedback_enabled and self.tau <= 0:
            raise ValueError("feedback requires tau > 0")
        object.__setattr__(self, "phi", self.phi % TWO_PI)


@dataclass(frozen=True)
class NumericalParams:
    """Discretization controls.

    ``dt`` must resolve both time scales: dt <= pulse_width/20 whenever the
    drive is on, and dt <= 0.01/gamma always (checked when the grid is
    built).  ``bin_photon_cutoff`` is the max photon number per time bin;
    the second-order stepper emits up to two photons per step and therefore
    needs a cutoff of at least 2.
    """

    dt: float
    bin_photon_cutoff: int = 3
    t_start: float | None = None
    t_end: float | None = None
    expansion_order: int = 2

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.expansion_order not in (1, 2):
            raise ValueError(f"expansion_order must be 1 or 2, got {self.expansion_order}")
        if self.bin_photon_cutoff < 1:
            raise ValueError("bin_photon_cutoff must be >= 1")
        if self.expansion_order == 2 and self.bin_photon_cutoff < 2:
            raise ValueError("bin_photon_cutoff must be >= 2 for the second-order stepper")


@dataclass(frozen=True)
class StepOperators:
    """The three sparse one-step matrices on |i_S, i_n, i_tau>.

    u0 carries the pure emission/feedback part, u1 the part linear in the
    drive envelope and u2 the quadratic part.  All have dimension
    2*(n_max+1)**2 with i_S slowest and i_tau fastest.
    """

    u0: sp.csr_matrix
    u1: sp.csr_matrix
    u2: sp.csr_matrix
    n_max: int
    dt: float
    feedback_enabled: bool

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1) ** 2


def pulse_envelope(t: float, params: PhysicalParams) -> float:
    """Gaussian drive amplitude Omega(t) = (A/2) exp(-t^2/nu^2) / (nu sqrt(pi)).

    Normalized so the accumulated Rabi angle integral(Omega) equals A/2 and
    an isolated pulse takes the ground state to excited population
    sin^2(A/2); A = pi inverts the emitter.
    """
    a, nu = params.pulse_area, params.pulse_width
    if a == 0.0:
        return 0.0
    return (0.5 * a) * math.exp(-(t / nu) ** 2) / (nu * math.sqrt(math.pi))


def _lower(dim: int) -> sp.csr_matrix:
    """Bosonic lowering operator on a (dim)-level Fock space."""
    return sp.diags(np.sqrt(np.arange(1, dim)), offsets=1, format="csr")


def build_m_tls(n_max: int) -> sp.csr_matrix:
    """Drive structure matrix (|1><0| + |0><1|)_S x 1_n x 1_tau.

    Hermitian, traceless, exactly 2*(n_max+1)^2 nonzeros; squares to the
    identity.  The -i and dt factors enter in build_step_operators.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    sx = sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128))
    eye_bins = sp.identity((n_max + 1) ** 2, dtype=np.complex128, format="csr")
    return sp.kron(sx, eye_bins, format="csr")


def build_m_fb(params: PhysicalParams, dt: float, n_max: int) -> sp.csr_matrix:
    """Anti-Hermitian one-step bin-coupling generator M = X - X^dagger.

    With feedback, X = sqrt(gamma dt) sigma_+ (a_n + e^{-i phi} a_tau): the
    emitter absorbs from the current bin and, phase shifted, from the bin one
    delay in the past.  Each channel carries amplitude decay rate gamma, so
    the pre-return excited population decays as exp(-2 gamma t).  Without
    feedback the delayed channel is dropped and the local amplitude becomes
    sqrt(2 gamma dt), keeping the same total rate.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    d = n_max + 1
    a = _lower(d)
    eye = sp.identity(d, dtype=np.complex128, format="csr")
    sig_plus = sp.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]], dtype=np.complex128))
    if params.feedback_enabled:
        amp = math.sqrt(params.gamma * dt)
        absorb = amp * (sp.kron(a, eye) + np.exp(-1j * params.phi) * sp.kron(eye, a))
    else:
        amp = math.sqrt(2.0 * params.gamma * dt)
        absorb = amp * sp.kron(a, eye)
    x = sp.kron(sig_plus, absorb, format="csr")
    return (x - x.conj().T).tocsr()


def build_step_operators(params: PhysicalParams, num: NumericalParams) -> StepOperators:
    """Short-time expansion of exp(-i Omega dt M_TLS + M_fb), grouped by drive power.

    Counting M_fb as order sqrt(dt), the second-order scheme keeps every term
    through dt^2:

        u0 = 1 + M + M^2/2 + M^3/6 + M^4/24
        u1 = -i dt [T + (T M + M T)/2 + (T M^2 + M T M + M^2 T)/6]
        u2 = -(dt^2/2) T^2

    with T = build_m_tls and M = build_m_fb.  The first-order scheme keeps
    terms through dt (powers p <= 2 of the generator).
    """
    n_max = num.bin_photon_cutoff
    dt = num.dt
    m = build_m_fb(params, dt, n_max)
    t = build_m_tls(n_max)
    eye = sp.identity(2 * (n_max + 1) ** 2, dtype=np.complex128, format="csr")
    m2 = (m @ m).tocsr()
    if num.expansion_order == 2:
        u0 = eye + m + 0.5 * m2 + (m2 @ m) / 6.0 + (m2 @ m2) / 24.0
        u1 = (-1j * dt) * (
            t
            + 0.5 * (t @ m + m @ t)
            + (t @ m2 + m @ t @ m + m2 @ t) / 6.0
        )
    else:
        u0 = eye + m + 0.5 * m2
        u1 = (-1j * dt) * (t + 0.5 * (t @ m + m @ t))
    u2 = (-0.5 * dt * dt) * (t @ t)
    return StepOperators(u0=u0.tocsr(), u1=u1.tocsr(), u2=u2.tocsr(),
                         n_max=n_max, dt=dt, feedback_enabled=params.feedback_enabled)


def assemble_u(ops: StepOperators, t: float, params: PhysicalParams) -> np.ndarray:
    """Dense one-step gate U = u0 + Omega(t) u1 + Omega(t)^2 u2.

    The envelope is evaluated once per call; the result acts on the
    flattened |i_S, i_n, i_tau> basis and is ready for apply_gate.
    """
    om = pulse_envelope(t, params)
    u = ops.u0 + om * ops.u1 + (om * om) * ops.u2
    return np.asarray(u.todense())


def dump_operators(ops: StepOperators, path_prefix: str) -> list[str]:
    """Write u0/u1/u2 as coordinate-list text (row col re im), one file each.

    Entries are sorted by (row, col) so files from different builds diff
    cleanly.  Returns the written paths.
    """
    paths = []
    for name, mat in (("u0", ops.u0), ("u1", ops.u1), ("u2", ops.u2)):
        coo = mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        path = f"{path_prefix}{name}.txt"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# {name} dim={mat.shape[0]} basis=|i_S,i_n,i_tau> i_tau fastest\n")
            for i in order:
                v = coo.data[i]
                fh.write(f"{coo.row[i]} {coo.col[i]} {v.real:.17g} {v.imag:.17g}\n")
        paths.append(path)
    return paths
