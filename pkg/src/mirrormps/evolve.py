"""Time-stepping loop for the delayed-feedback emitter.

Chain layout is chronological: bins stay sorted by emission time with the
system site between the already-processed bins and the future ones.  At step
k (bin times t_k = t_start + k dt) the bin from one delay in the past is
swapped next to the (system, current bin) pair, the assembled three-body
gate is applied, the system advances one slot and the delay bin returns to
its chronological place.  Per step this costs 2(q-1)+1 adjacent swaps and 2
orthogonality-center moves, q = tau/dt; with feedback off only the
(system, current bin) gate plus one advance swap remain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import (NumericalParams, PhysicalParams,
                    build_step_operators, pulse_envelope)
from .mps_core import (SYSTEM_LABEL, TimeBinState, TruncationPolicy, apply_gate,
                       init_vacuum, move_center, swap_adjacent)


class CutoffOverflowError(RuntimeError):
    """Too much weight reached the highest per-bin Fock state."""

    def __init__(self, leak: float, cutoff: int):
        super().__init__(
            f"weight {leak:.3e} leaked onto the highest bin Fock state |{cutoff}>; "
            f"increase bin_photon_cutoff beyond {cutoff}")
        self.leak = leak


#: summed top-Fock-state occupation beyond which a run is rejected
TOP_STATE_LEAK_LIMIT = 1e-4


@dataclass(frozen=True)
class SimulationGrid:
    """Resolved time grid: t_k = t_start + k*dt for k = 0..n_steps."""

    dt: float
    t_start: float
    t_end: float
    q: int
    n_steps: int

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)


@dataclass
class Trajectory:
    """Per-step record of a run plus the final chain."""

    times: np.ndarray
    population: np.ndarray
    norm: np.ndarray
    discarded_weight: np.ndarray
    final_state: TimeBinState
    grid: SimulationGrid
    top_state_leak: float
    swaps_per_step: int
    max_bond: int


def build_grid(params: PhysicalParams, num: NumericalParams,
               start_excited: bool = False, strict: bool = True) -> SimulationGrid:
    """Resolve the simulation window and snap dt so that q*dt == tau exactly.

    The requested dt is only ever reduced (q = ceil(tau/dt)), so resolution
    bounds that hold for the request keep holding.  With ``strict`` the
    window defaults are enforced: dt <= 0.01/gamma, dt <= pulse_width/20
    when driven, t_start <= -max(tau, 5 nu) and t_end >= 10/gamma.
    """
    if params.feedback_enabled:
        q = max(1, math.ceil(params.tau / num.dt - 1e-12))
        dt = params.tau / q
    else:
        q = 1
        dt = num.dt

    slack = 1.0 + 1e-9
    if strict:
        if dt > 0.01 / params.gamma * slack:
            raise ValueError(
                f"dt={dt:.3e} does not resolve 0.01/gamma={0.01 / params.gamma:.3e}")
        if params.pulse_area != 0.0 and dt > params.pulse_width / 20.0 * slack:
            raise ValueError(
                f"dt={dt:.3e} does not resolve pulse_width/20={params.pulse_width / 20.0:.3e}")

    if num.t_start is not None:
        t_start = num.t_start
    elif start_excited:
        t_start = 0.0
    else:
        t_start = -max(params.tau, 5.0 * params.pulse_width)
    t_end = num.t_end if num.t_end is not None else 10.0 / params.gamma

    if strict and not start_excited:
        if t_start > -max(params.tau, 5.0 * params.pulse_width) * (1.0 - 1e-12):
            raise ValueError(f"t_start={t_start} must be <= -max(tau, 5*pulse_width)")
        if t_end < 10.0 / params.gamma * (1.0 - 1e-12):
            raise ValueError(f"t_end={t_end} must be >= 10/gamma for complete emission")
    if t_end <= t_start:
        raise ValueError("t_end must exceed t_start")

    n_steps = max(1, math.ceil((t_end - t_start) / dt - 1e-9))
    return SimulationGrid(dt=dt, t_start=t_start, t_end=t_start + n_steps * dt,
                          q=q, n_steps=n_steps)


def _gate_to_chain_order(u: np.ndarray, n_max: int) -> np.ndarray:
    """Permute a |i_S, i_n, i_tau> gate to the chain's (tau, S, n) site order."""
    d = n_max + 1
    g = u.reshape(2, d, d, 2, d, d).transpose(2, 0, 1, 5, 3, 4)
    return np.ascontiguousarray(g.reshape(2 * d * d, 2 * d * d))


def _gate_drop_delay_leg(u: np.ndarray, n_max: int) -> np.ndarray:
    """Restrict a |i_S, i_n, i_tau> gate acting trivially on i_tau to (S, n)."""
    d = n_max + 1
    return np.ascontiguousarray(
        u.reshape(2, d, d, 2, d, d)[:, :, 0, :, :, 0].reshape(2 * d, 2 * d))


def _center_excited_population(state: TimeBinState) -> float:
    """<sigma_+ sigma_->, valid while the center sits on the system site."""
    t = state.tensors[state.center]
    nsq = float(np.real(np.vdot(t, t)))
    exc = t[:, 1, :]
    return float(np.real(np.vdot(exc, exc))) / nsq


def step(state: TimeBinState, k: int, gate: np.ndarray, grid: SimulationGrid,
         policy: TruncationPolicy, observer=None) -> TimeBinState:
    """Advance one feedback step; ``gate`` must be in chain site order (tau, S, n).

    Layout at entry: the delay bin (time index k-q) sits at slot k, the
    system at slot q+k, the current bin at slot q+k+1, the orthogonality
    center within one move of slot k.  ``observer(state)``, if given, is
    called right after the gate while the center sits on the system site.
    """
    q = grid.q
    move_center(state, k)
    for j in range(k, q + k - 1):
        swap_adjacent(state, j, policy, center_after=j + 1)
    apply_gate(state, gate, q + k - 1, policy, center_after=q + k)
    if observer is not None:
        observer(state)
    # advance the system past the current bin
    swap_adjacent(state, q + k, policy, center_after=q + k)
    move_center(state, q + k - 1)
    for j in range(q + k - 2, k - 1, -1):
        swap_adjacent(state, j, policy, center_after=j)
    return state


def _step_no_feedback(state: TimeBinState, k: int, gate2: np.ndarray, q: int,
                      policy: TruncationPolicy, observer=None) -> TimeBinState:
    """(system, current bin) gate followed by the advance swap."""
    apply_gate(state, gate2, q + k, policy, center_after=q + k)
    if observer is not None:
        observer(state)
    swap_adjacent(state, q + k, policy, center_after=q + k + 1)
    return state


def run_simulation(params: PhysicalParams, num: NumericalParams,
                   policy: TruncationPolicy | None = None,
                   start_excited: bool = False,
                   strict: bool = True) -> Trajectory:
    """Deterministic MPS evolution over the full grid.

    The final state holds every emitted-field bin.  Raises
    CutoffOverflowError when more than TOP_STATE_LEAK_LIMIT of summed weight
    ends up on the highest per-bin Fock state (remedy: raise the cutoff).
    ``start_excited`` is a test hook: the emitter starts inverted at t_start
    with no pulse required.
    """
    if policy is None:
        policy = TruncationPolicy()
    grid = build_grid(params, num, start_excited=start_excited, strict=strict)
    ops = build_step_operators(params, replace(num, dt=grid.dt))
    u0 = np.asarray(ops.u0.todense())
    u1 = np.asarray(ops.u1.todense())
    u2 = np.asarray(ops.u2.todense())

    n_max = num.bin_photon_cutoff
    q, n_steps = grid.q, grid.n_steps
    state = init_vacuum(q, n_steps, n_max + 1,
                        system_level=1 if start_excited else 0)
    if not params.feedback_enabled:
        move_center(state, q)

    population = np.empty(n_steps + 1)
    norm = np.empty(n_steps + 1)
    discarded = np.empty(n_steps + 1)
    population[0] = 1.0 if start_excited else 0.0
    norm[0] = 1.0
    discarded[0] = 0.0

    max_bond_seen = 1
    pop_now = [population[0]]

    def observer(st):
        pop_now[0] = _center_excited_population(st)

    for k in range(n_steps):
        t_mid = grid.t_start + (k + 0.5) * grid.dt
        om = pulse_envelope(t_mid, params)
        u = u0 + om * u1 + (om * om) * u2
        if params.feedback_enabled:
            step(state, k, _gate_to_chain_order(u, n_max), grid, policy, observer)
        else:
            _step_no_feedback(state, k, _gate_drop_delay_leg(u, n_max), q,
                              policy, observer)
        population[k + 1] = pop_now[0]
        norm[k + 1] = state.norm()
        discarded[k + 1] = state.discarded_weight
        # only bonds in the window touched this step can have changed
        mb = max(t.shape[2] for t in state.tensors[k:q + k + 2])
        if mb > max_bond_seen:
            max_bond_seen = mb

    leak = _top_state_leak(state)
    traj = Trajectory(times=grid.times, population=population, norm=norm,
                      discarded_weight=discarded, final_state=state, grid=grid,
                      top_state_leak=leak,
                      swaps_per_step=(2 * (q - 1) + 1) if params.feedback_enabled else 1,
                      max_bond=max_bond_seen)
    if leak > TOP_STATE_LEAK_LIMIT:
        raise CutoffOverflowError(leak, n_max)
    return traj


def _top_state_leak(state: TimeBinState) -> float:
    """Summed occupation of the highest Fock state over all bins (normalized)."""
    nsq = state.norm_squared()
    total = 0.0
    for i, label in enumerate(state.labels):
        if label == SYSTEM_LABEL:
            continue
        move_center(state, i)
        t = state.tensors[i]
        top = t[:, -1, :]
        total += float(np.real(np.vdot(top, top)))
    return total / nsq
