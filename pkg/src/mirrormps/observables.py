"""Emitted-field statistics from the final chain.

The time-integrated intensity is the total photon number over all bins,
I = sum_k n_k.  Its normal-ordered moments equal the factorial moments
C_m = <I (I-1) ... (I-m+1)> because the per-bin normal ordering gives
<:n_k^2:> = <n_k (n_k - 1)> and distinct bins commute.  With p(4) taken
negligible these close to the photon-number probabilities

    p1 = C1 - C2 + C3/2,   p2 = (C2 - C3)/2,   p3 = C3/6,
    p0 = 1 - p1 - p2 - p3.

Two evaluation routes are provided: power-sum MPO sweeps (production path)
and the explicit nested sum over ordered time-index tuples with coincidence
multiplicities (cross-validation path).  Both are unnormalized so that
truncation losses stay visible in the closure check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mps_core import (SYSTEM_LABEL, TimeBinState, expectation_local,
                       expectation_mpo, move_center)

#: system excitation above which the emission is considered incomplete
RESIDUAL_EXCITATION_LIMIT = 1e-3

#: bins handled by the nested-sum route at third order
NESTED_SUM_BIN_GUARD = 400


class ResidualExcitationError(RuntimeError):
    """Emission has not completed: the system still carries excitation."""

    def __init__(self, residual: float):
        super().__init__(
            f"system excitation {residual:.3e} at the end of the run exceeds "
            f"{RESIDUAL_EXCITATION_LIMIT:.0e}; extend t_end or pass "
            f"on_residual='ignore' if the trapped population is intended")
        self.residual = residual


class NestedSumGuardError(RuntimeError):
    """Nested-sum evaluation refused: too many bins for the O(N^3) route."""


@dataclass(frozen=True)
class CorrelationSet:
    """Factorial moments C_m = <:I^m:> of the total photon count."""

    c1: float
    c2: float
    c3: float


@dataclass(frozen=True)
class PhotonStats:
    """Photon-number probabilities and the two-to-one ratio r = p2/p1.

    ``ratio_r`` is None when p1 is too small to divide by; ``flags`` carries
    quality markers such as 'ratio_undefined' or 'closure_violation'.
    """

    p0: float
    p1: float
    p2: float
    p3: float
    ratio_r: float | None
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class NormalizedStats:
    """Feedback-to-baseline ratios; entries are None where the baseline vanishes."""

    pbar0: float | None
    pbar1: float | None
    pbar2: float | None
    pbar3: float | None
    r_over_r_baseline: float | None
    flags: tuple[str, ...] = ()


def _number_ops(d: int):
    n = np.diag(np.arange(d, dtype=np.float64)).astype(np.complex128)
    return n


def residual_excitation(state: TimeBinState) -> float:
    """<sigma_+ sigma_-> on the system site of the final chain."""
    excited = np.zeros((2, 2), dtype=np.complex128)
    excited[1, 1] = 1.0
    return float(np.real(expectation_local(state, excited, state.system_position)))


def _check_residual(state: TimeBinState, on_residual: str) -> float:
    res = residual_excitation(state)
    if res > RESIDUAL_EXCITATION_LIMIT and on_residual == "raise":
        raise ResidualExcitationError(res)
    return res


def _bin_sites(state: TimeBinState, bin_range) -> list[int]:
    """Chain slots of the bins to include; ``bin_range`` filters on time index."""
    sites = []
    for i, label in enumerate(state.labels):
        if label == SYSTEM_LABEL:
            continue
        if bin_range is not None and not (bin_range[0] <= label < bin_range[1]):
            continue
        sites.append(i)
    return sites


def _power_sum_mpo(state: TimeBinState, power: int, sites: set[int]):
    """MPO for (sum over selected bins of n_k)^power, bond dimension power+1.

    Upper-triangular site matrices W[i, j] = binom(power-i, j-i) * n^(j-i);
    excluded sites contribute the identity block structure (n -> 0).
    """
    b = power + 1
    mpo = []
    for i, t in enumerate(state.tensors):
        d = t.shape[1]
        x = _number_ops(d) if i in sites else np.zeros((d, d), dtype=np.complex128)
        xp = [np.eye(d, dtype=np.complex128)]
        for _ in range(power):
            xp.append(xp[-1] @ x)
        w = np.zeros((b, b, d, d), dtype=np.complex128)
        for r in range(b):
            for c in range(r, b):
                w[r, c] = math.comb(power - r, c - r) * xp[c - r]
        mpo.append(w)
    mpo[0] = mpo[0][:1]
    mpo[-1] = mpo[-1][:, -1:]
    return mpo


def factorial_moments(state: TimeBinState, max_order: int = 3, bin_range=None,
                      on_residual: str = "raise") -> CorrelationSet:
    """C_1..C_3 by power-sum MPO sweeps (cost linear in the chain length).

    Raises ResidualExcitationError unless the system has decoupled
    (excitation below RESIDUAL_EXCITATION_LIMIT) or ``on_residual='ignore'``.
    """
    if max_order != 3:
        raise ValueError("only max_order=3 is supported")
    _check_residual(state, on_residual)
    sites = set(_bin_sites(state, bin_range))
    i1 = expectation_mpo(state, _power_sum_mpo(state, 1, sites)).real
    i2 = expectation_mpo(state, _power_sum_mpo(state, 2, sites)).real
    i3 = expectation_mpo(state, _power_sum_mpo(state, 3, sites)).real
    return CorrelationSet(c1=i1, c2=i2 - i1, c3=i3 - 3.0 * i2 + 2.0 * i1)


def nested_sum_correlations(state: TimeBinState, max_order: int = 3, bin_range=None,
                            on_residual: str = "raise") -> CorrelationSet:
    """C_1..C_3 as explicit sums over ordered time-index tuples.

    Reordering symmetry reduces the sums to ordered tuples with coincidence
    multiplicities:

        C2 = 2 sum_{k<l} <n_k n_l> + sum_k <n_k(n_k-1)>
        C3 = 6 sum_{k<l<m} <n_k n_l n_m> + 3 sum_{k<l} [<n(n-1)_k n_l> +
             <n_k n(n-1)_l>] + sum_k <n(n-1)(n-2)_k>

    evaluated with an explicit double loop over (k, l) and a precomputed
    suffix accumulator for the third index; the contraction cost of one tuple
    grows linearly with the index span.  Refuses chains beyond
    NESTED_SUM_BIN_GUARD bins.  Serves as the cross-check for
    factorial_moments (agreement to 1e-8 is part of the acceptance suite).
    """
    if max_order != 3:
        raise ValueError("only max_order=3 is supported")
    _check_residual(state, on_residual)
    work = state.copy()
    sites = _bin_sites(work, bin_range)
    if len(sites) > NESTED_SUM_BIN_GUARD:
        raise NestedSumGuardError(
            f"{len(sites)} bins exceed the nested-sum guard of "
            f"{NESTED_SUM_BIN_GUARD}; restrict bin_range or use factorial_moments")
    if not sites:
        return CorrelationSet(0.0, 0.0, 0.0)

    lo, hi = sites[0], sites[-1]
    move_center(work, lo)
    included = set(sites)

    def ops_for(site):
        d = work.tensors[site].shape[1]
        n = _number_ops(d)
        return n, n @ (n - np.eye(d)), n @ (n - np.eye(d)) @ (n - 2 * np.eye(d))

    # suffix accumulator R1[j] = sum_{m >= j, m included} (env with n_m inserted),
    # as a (ket, bra) matrix on the bond left of site j; sites right of the
    # center are right-orthogonal so closing a tuple right of its last insertion
    # is the identity contraction.
    r1 = [None] * (hi + 2)
    dim_r = work.tensors[hi].shape[2]
    r1[hi + 1] = np.zeros((dim_r, dim_r), dtype=np.complex128)
    for j in range(hi, lo, -1):
        t = work.tensors[j]
        carried = np.einsum('apc,bpd,cd->ab', t, t.conj(), r1[j + 1], optimize=True)
        if j in included:
            n = _number_ops(t.shape[1])
            carried = carried + np.einsum('aqc,pq,bpc->ab', t, n, t.conj(), optimize=True)
        r1[j] = carried

    c1 = 0.0
    c2_cross = 0.0
    c2_coinc = 0.0
    c3_distinct = 0.0
    c3_pair = 0.0
    c3_coinc = 0.0

    # sites left of the center are left-orthogonal, so the left environment
    # entering site lo is the identity
    left = np.eye(work.tensors[lo].shape[0], dtype=np.complex128)

    for k in range(lo, hi + 1):
        t_k = work.tensors[k]
        if k in included:
            n_k, nn_k, nnn_k = ops_for(k)
            env_n = np.einsum('ab,aqc,pq,bpd->cd', left, t_k, n_k, t_k.conj(), optimize=True)
            env_nn = np.einsum('ab,aqc,pq,bpd->cd', left, t_k, nn_k, t_k.conj(), optimize=True)
            c1 += np.einsum('aa->', env_n).real
            c2_coinc += np.einsum('aa->', env_nn).real
            c3_coinc += np.einsum('ab,aqc,pq,bpc->', left, t_k, nnn_k, t_k.conj(), optimize=True).real
            # explicit inner loop over the second index l > k; the third index
            # is closed by the suffix accumulator r1
            for l in range(k + 1, hi + 1):
                t_l = work.tensors[l]
                if l in included:
                    n_l, nn_l, _ = ops_for(l)
                    c2_cross += 2.0 * np.einsum(
                        'ab,aqc,pq,bpc->', env_n, t_l, n_l, t_l.conj(), optimize=True).real
                    c3_pair += 3.0 * np.einsum(
                        'ab,aqc,pq,bpc->', env_n, t_l, nn_l, t_l.conj(), optimize=True).real
                    c3_pair += 3.0 * np.einsum(
                        'ab,aqc,pq,bpc->', env_nn, t_l, n_l, t_l.conj(), optimize=True).real
                    if l < hi:
                        c3_distinct += 6.0 * np.einsum(
                            'ab,aqc,pq,bpd,cd->', env_n, t_l, n_l, t_l.conj(),
                            r1[l + 1], optimize=True).real
                if l < hi:
                    env_n = np.einsum('ab,apc,bpd->cd', env_n, t_l, t_l.conj(), optimize=True)
                    env_nn = np.einsum('ab,apc,bpd->cd', env_nn, t_l, t_l.conj(), optimize=True)
        left = np.einsum('ab,apc,bpd->cd', left, t_k, t_k.conj(), optimize=True)

    return CorrelationSet(c1=c1, c2=c2_cross + c2_coinc,
                          c3=c3_distinct + c3_pair + c3_coinc)


def photon_probabilities(corr: CorrelationSet) -> PhotonStats:
    """Close the moment system under the p(4) ~ 0 assumption."""
    p3 = corr.c3 / 6.0
    p2 = (corr.c2 - corr.c3) / 2.0
    p1 = corr.c1 - corr.c2 + corr.c3 / 2.0
    p0 = 1.0 - p1 - p2 - p3
    flags = []
    if min(p0, p1, p2, p3) < -1e-6:
        flags.append("closure_violation")
    if p1 > 1e-9:
        ratio = p2 / p1
    else:
        ratio = None
        flags.append("ratio_undefined")
    return PhotonStats(p0=p0, p1=p1, p2=p2, p3=p3, ratio_r=ratio,
                       flags=tuple(flags))


def vacuum_probability(state: TimeBinState) -> float:
    """Probability that every bin is empty (system traced over), unnormalized."""
    mpo = []
    for i, t in enumerate(state.tensors):
        d = t.shape[1]
        if state.labels[i] == SYSTEM_LABEL:
            op = np.eye(d, dtype=np.complex128)
        else:
            op = np.zeros((d, d), dtype=np.complex128)
            op[0, 0] = 1.0
        mpo.append(op.reshape(1, 1, d, d))
    return float(expectation_mpo(state, mpo).real)


def closure_error(stats: PhotonStats, vacuum_prob: float) -> float:
    """|p(0)_measured + p1 + p2 + p3 - 1| with p(0) measured directly.

    The directly measured vacuum probability is independent of the moment
    inversion, so this residual exposes both truncation losses and a
    non-negligible p(4).
    """
    return abs(vacuum_prob + stats.p1 + stats.p2 + stats.p3 - 1.0)


def normalize_against_baseline(fb: PhotonStats, base: PhotonStats) -> NormalizedStats:
    """Elementwise p(n)_feedback / p(n)_baseline and r/r_baseline.

    Entries whose baseline value is below 1e-9 are omitted (None) and
    flagged rather than divided.
    """
    flags = []
    ratios = []
    for n, (f, b) in enumerate(((fb.p0, base.p0), (fb.p1, base.p1),
                                (fb.p2, base.p2), (fb.p3, base.p3))):
        if b > 1e-9:
            ratios.append(f / b)
        else:
            ratios.append(None)
            flags.append(f"baseline_p{n}_vanishing")
    if fb.ratio_r is not None and base.ratio_r is not None and abs(base.ratio_r) > 1e-12:
        rr = fb.ratio_r / base.ratio_r
    else:
        rr = None
        flags.append("ratio_ratio_undefined")
    return NormalizedStats(pbar0=ratios[0], pbar1=ratios[1], pbar2=ratios[2],
                           pbar3=ratios[3], r_over_r_baseline=rr, flags=tuple(flags))


def bin_occupations(state: TimeBinState) -> tuple[np.ndarray, np.ndarray]:
    """(time indices, <n_k>) over all bins, one canonical sweep."""
    work = state
    labels = []
    values = []
    for i, label in enumerate(work.labels):
        if label == SYSTEM_LABEL:
            continue
        move_center(work, i)
        t = work.tensors[i]
        nsq = float(np.real(np.vdot(t, t)))
        occ = 0.0
        for p in range(1, t.shape[1]):
            occ += p * float(np.real(np.vdot(t[:, p, :], t[:, p, :])))
        labels.append(label)
        values.append(occ / nsq)
    order = np.argsort(labels)
    return np.asarray(labels)[order], np.asarray(values)[order]
