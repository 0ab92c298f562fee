"""Time-bin matrix product state machinery.

A state is a chain of rank-3 tensors (left bond, physical, right bond) in
mixed-canonical form.  One chain site is the two-level system, every other
site is a photon time bin with a fixed per-bin Fock cutoff.  Provided here:
vacuum initialization, orthogonality-center moves, adjacent-site swaps with
SVD truncation, dense gate application on 2-3 adjacent sites, and local/MPO
expectation values.

Gauge convention: sites left of ``state.center`` are left-orthogonal, sites
right of it are right-orthogonal.  The chain is never renormalized; weight
removed by truncation stays removed and is accumulated in
``state.discarded_weight``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

SYSTEM_LABEL = "S"

_LARGE_BOND = 1 << 30


class PreconditionError(ValueError):
    """Operation called with the orthogonality center in the wrong place."""


@dataclass(frozen=True)
class TruncationPolicy:
    """SVD truncation rule.

    Singular values below ``threshold`` relative to the largest one of the
    same decomposition are dropped, and the bond dimension is capped at
    ``max_bond``.  The summed square of dropped values is accumulated on the
    state when ``track_discarded`` is set.
    """

    threshold: float = 1e-7
    max_bond: int = 64
    track_discarded: bool = True

    def __post_init__(self):
        if not 0.0 <= self.threshold < 1.0:
            raise ValueError(f"threshold must lie in [0, 1), got {self.threshold}")
        if self.max_bond < 1:
            raise ValueError(f"max_bond must be >= 1, got {self.max_bond}")


#: no truncation at all (exact splits)
EXACT = TruncationPolicy(threshold=0.0, max_bond=_LARGE_BOND)


class TimeBinState:
    """MPS over (history bins, system site, future bins).

    ``labels[i]`` identifies site ``i``: an integer time-bin index or
    ``SYSTEM_LABEL`` for the emitter site.  ``system_position`` caches the
    emitter's chain slot and is kept current through swaps.
    """

    def __init__(self, tensors, labels=None, center=0):
        self.tensors = list(tensors)
        if labels is None:
            labels = list(range(len(self.tensors)))
        if len(labels) != len(self.tensors):
            raise ValueError("labels must match the number of sites")
        self.labels = list(labels)
        self.center = center
        self.discarded_weight = 0.0
        self.system_position = (
            self.labels.index(SYSTEM_LABEL) if SYSTEM_LABEL in self.labels else None
        )

    def __len__(self):
        return len(self.tensors)

    @property
    def phys_dims(self):
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self):
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self):
        return max(self.bond_dims, default=1)

    def norm_squared(self) -> float:
        """<psi|psi> read off the center tensor (valid in canonical form)."""
        c = self.tensors[self.center]
        return float(np.real(np.vdot(c, c)))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_squared()))

    def copy(self) -> "TimeBinState":
        out = TimeBinState([t.copy() for t in self.tensors], list(self.labels), self.center)
        out.discarded_weight = self.discarded_weight
        return out

    def site_of_bin(self, bin_index: int) -> int:
        return self.labels.index(bin_index)

    def check_canonical(self, tol: float = 1e-10) -> None:
        """Assert the left/right orthogonality pattern around the center."""
        for i, t in enumerate(self.tensors):
            dl, d, dr = t.shape
            if i < self.center:
                g = t.reshape(dl * d, dr)
                err = np.linalg.norm(g.conj().T @ g - np.eye(dr))
                if err > tol:
                    raise AssertionError(f"site {i} not left-orthogonal (err={err:.2e})")
            elif i > self.center:
                g = t.reshape(dl, d * dr)
                err = np.linalg.norm(g @ g.conj().T - np.eye(dl))
                if err > tol:
                    raise AssertionError(f"site {i} not right-orthogonal (err={err:.2e})")


def init_vacuum(num_history_bins: int, num_future_bins: int, bin_dim: int,
                system_level: int = 0) -> TimeBinState:
    """Product state: every bin empty, system in ``system_level``.

    History bins get time indices ``-q .. -1``, future bins ``0 .. N-1``;
    the system sits between them.  All bonds have dimension 1 and the norm
    is exactly 1.  ``system_level=1`` is the initially-excited test hook.
    """
    if num_history_bins < 1 or num_future_bins < 1 or bin_dim < 1:
        raise ValueError("num_history_bins, num_future_bins and bin_dim must be >= 1")
    if system_level not in (0, 1):
        raise ValueError("system_level must be 0 or 1")

    def _unit(dim, level):
        t = np.zeros((1, dim, 1), dtype=np.complex128)
        t[0, level, 0] = 1.0
        return t

    q, n = num_history_bins, num_future_bins
    tensors = [_unit(bin_dim, 0) for _ in range(q)]
    tensors.append(_unit(2, system_level))
    tensors.extend(_unit(bin_dim, 0) for _ in range(n))
    labels = list(range(-q, 0)) + [SYSTEM_LABEL] + list(range(n))
    return TimeBinState(tensors, labels, center=0)


def _truncated_svd(mat: np.ndarray, policy: TruncationPolicy):
    """SVD with relative-threshold and max-bond truncation.

    Returns (u, s, vh, discarded) with `discarded` the summed square of the
    dropped singular values.  At least one value is always kept.
    """
    try:
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")
    keep = s.size
    if s.size and s[0] > 0.0:
        # numerically-zero values are dropped even at threshold 0; they carry
        # no weight and would otherwise inflate product-state bonds
        cut = max(policy.threshold, 1e-14)
        keep = int(np.count_nonzero(s > cut * s[0]))
    keep = max(1, min(keep, policy.max_bond))
    discarded = float(np.sum(s[keep:] ** 2))
    return u[:, :keep], s[:keep], vh[:keep], discarded


def move_center(state: TimeBinState, target: int) -> TimeBinState:
    """Shift the orthogonality center to ``target`` by QR sweeps (no truncation)."""
    n = len(state.tensors)
    if not 0 <= target < n:
        raise ValueError(f"target {target} outside chain of length {n}")
    while state.center < target:
        c = state.center
        a = state.tensors[c]
        dl, d, dr = a.shape
        q, r = np.linalg.qr(a.reshape(dl * d, dr))
        state.tensors[c] = q.reshape(dl, d, -1)
        state.tensors[c + 1] = np.tensordot(r, state.tensors[c + 1], axes=(1, 0))
        state.center = c + 1
    while state.center > target:
        c = state.center
        a = state.tensors[c]
        dl, d, dr = a.shape
        # a = l q with q row-orthonormal, via QR of the conjugate transpose
        q, r = np.linalg.qr(a.reshape(dl, d * dr).conj().T)
        state.tensors[c] = q.conj().T.reshape(-1, d, dr)
        state.tensors[c - 1] = np.tensordot(state.tensors[c - 1], r.conj().T, axes=(2, 0))
        state.center = c - 1
    return state


def swap_adjacent(state: TimeBinState, left_site: int, policy: TruncationPolicy,
                  center_after: int | None = None) -> TimeBinState:
    """Exchange the physical indices of sites ``left_site`` and ``left_site+1``.

    One truncated SVD per call.  The orthogonality center must already sit on
    one of the two sites; afterwards it sits on ``center_after`` (default:
    the right one).  Site labels travel with their physical index.
    """
    ls = left_site
    if not 0 <= ls < len(state.tensors) - 1:
        raise ValueError(f"left_site {ls} out of range")
    if state.center not in (ls, ls + 1):
        raise PreconditionError(
            f"center must be at {ls} or {ls + 1} before a swap, is at {state.center}")
    if center_after is None:
        center_after = ls + 1
    if center_after not in (ls, ls + 1):
        raise ValueError("center_after must be one of the swapped sites")

    a, b = state.tensors[ls], state.tensors[ls + 1]
    dl, d1, _ = a.shape
    _, d2, dr = b.shape
    theta = a.reshape(dl * d1, -1) @ b.reshape(-1, d2 * dr)
    theta = theta.reshape(dl, d1, d2, dr).transpose(0, 2, 1, 3)
    u, s, vh, disc = _truncated_svd(theta.reshape(dl * d2, d1 * dr), policy)
    if policy.track_discarded:
        state.discarded_weight += disc
    if center_after == ls + 1:
        left, right = u, s[:, None] * vh
    else:
        left, right = u * s[None, :], vh
    state.tensors[ls] = left.reshape(dl, d2, -1)
    state.tensors[ls + 1] = right.reshape(-1, d1, dr)
    state.labels[ls], state.labels[ls + 1] = state.labels[ls + 1], state.labels[ls]
    if state.labels[ls] == SYSTEM_LABEL:
        state.system_position = ls
    elif state.labels[ls + 1] == SYSTEM_LABEL:
        state.system_position = ls + 1
    state.center = center_after
    return state


def apply_gate(state: TimeBinState, gate: np.ndarray, first_site: int,
               policy: TruncationPolicy, center_after: int | None = None) -> TimeBinState:
    """Apply a dense gate to 2 or 3 adjacent sites and re-split under ``policy``.

    ``gate`` is a square matrix over the flattened physical indices of the
    targeted sites, the first site's index slowest.  The orthogonality center
    must lie inside the targeted block and ends at ``center_after`` (default:
    ``first_site``).
    """
    n_chain = len(state.tensors)
    dims = [t.shape[1] for t in state.tensors[first_site:first_site + 3]]
    if len(dims) >= 2 and gate.shape == (dims[0] * dims[1],) * 2:
        n = 2
    elif len(dims) == 3 and gate.shape == (dims[0] * dims[1] * dims[2],) * 2:
        n = 3
    else:
        raise ValueError(
            f"gate shape {gate.shape} does not match 2 or 3 sites at {first_site} "
            f"with physical dims {dims}")
    last = first_site + n - 1
    if last >= n_chain:
        raise ValueError("gate extends past the end of the chain")
    if not first_site <= state.center <= last:
        raise PreconditionError(
            f"center must lie in [{first_site}, {last}], is at {state.center}")
    if center_after is None:
        center_after = first_site
    if not first_site <= center_after <= last:
        raise ValueError("center_after must lie inside the gated block")

    block = state.tensors[first_site]
    for j in range(first_site + 1, last + 1):
        dl, p, _ = block.shape
        block = np.tensordot(block, state.tensors[j], axes=(2, 0))
        block = block.reshape(dl, p * state.tensors[j].shape[1], -1)
    dl, p_tot, dr = block.shape
    block = gate @ block.transpose(1, 0, 2).reshape(p_tot, dl * dr)
    block = block.reshape(p_tot, dl, dr).transpose(1, 0, 2)

    if n == 2:
        d1, d2 = dims[0], dims[1]
        mat = block.reshape(dl * d1, d2 * dr)
        u, s, vh, disc = _truncated_svd(mat, policy)
        if policy.track_discarded:
            state.discarded_weight += disc
        if center_after == first_site:
            state.tensors[first_site] = (u * s[None, :]).reshape(dl, d1, -1)
            state.tensors[last] = vh.reshape(-1, d2, dr)
        else:
            state.tensors[first_site] = u.reshape(dl, d1, -1)
            state.tensors[last] = (s[:, None] * vh).reshape(-1, d2, dr)
    else:
        d1, d2, d3 = dims
        if center_after == first_site:
            # split the right edge off first, then the middle, both right-orthogonal
            u, s, vh, disc1 = _truncated_svd(block.reshape(dl * d1 * d2, d3 * dr), policy)
            state.tensors[first_site + 2] = vh.reshape(-1, d3, dr)
            rest = (u * s[None, :]).reshape(dl, d1, d2, -1)
            k2 = rest.shape[3]
            u, s, vh, disc2 = _truncated_svd(rest.reshape(dl * d1, d2 * k2), policy)
            state.tensors[first_site + 1] = vh.reshape(-1, d2, k2)
            state.tensors[first_site] = (u * s[None, :]).reshape(dl, d1, -1)
        elif center_after == last:
            u, s, vh, disc1 = _truncated_svd(block.reshape(dl * d1, d2 * d3 * dr), policy)
            state.tensors[first_site] = u.reshape(dl, d1, -1)
            rest = (s[:, None] * vh).reshape(-1, d2, d3 * dr)
            k1 = rest.shape[0]
            u, s, vh, disc2 = _truncated_svd(rest.reshape(k1 * d2, d3 * dr), policy)
            state.tensors[first_site + 1] = u.reshape(k1, d2, -1)
            state.tensors[last] = (s[:, None] * vh).reshape(-1, d3, dr)
        else:
            u, s, vh, disc1 = _truncated_svd(block.reshape(dl * d1, d2 * d3 * dr), policy)
            state.tensors[first_site] = u.reshape(dl, d1, -1)
            rest = (s[:, None] * vh).reshape(-1, d2, d3 * dr)
            k1 = rest.shape[0]
            u, s, vh, disc2 = _truncated_svd(rest.reshape(k1 * d2, d3 * dr), policy)
            state.tensors[first_site + 1] = (u * s[None, :]).reshape(k1, d2, -1)
            state.tensors[last] = vh.reshape(-1, d3, dr)
        if policy.track_discarded:
            state.discarded_weight += disc1 + disc2
    state.center = center_after
    return state


def expectation_local(state: TimeBinState, op: np.ndarray, site: int) -> complex:
    """Normalized single-site expectation <psi|op_site|psi>/<psi|psi>.

    Contracts only the stretch between the orthogonality center and ``site``;
    the canonical parts collapse to identities.  Does not move the center.
    """
    if not 0 <= site < len(state.tensors):
        raise ValueError(f"site {site} out of range")
    d = state.tensors[site].shape[1]
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not match physical dim {d}")
    c = state.center
    if site == c:
        a = state.tensors[c]
        num = np.einsum('aqc,pq,apc->', a, op, a.conj(), optimize=True)
        den = np.einsum('apc,apc->', a, a.conj())
        return complex(num / den)
    if site > c:
        a = state.tensors[c]
        env = np.tensordot(a, a.conj(), axes=([0, 1], [0, 1]))  # (ket, bra)
        for j in range(c + 1, site):
            t = state.tensors[j]
            env = np.einsum('ab,apc,bpd->cd', env, t, t.conj(), optimize=True)
        t = state.tensors[site]
        num = np.einsum('ab,aqc,pq,bpc->', env, t, op, t.conj(), optimize=True)
        den = np.einsum('ab,apc,bpc->', env, t, t.conj(), optimize=True)
        return complex(num / den)
    a = state.tensors[c]
    env = np.tensordot(a, a.conj(), axes=([1, 2], [1, 2]))  # (ket, bra)
    for j in range(c - 1, site, -1):
        t = state.tensors[j]
        env = np.einsum('apc,bpd,cd->ab', t, t.conj(), env, optimize=True)
    t = state.tensors[site]
    num = np.einsum('aqm,pq,apn,mn->', t, op, t.conj(), env, optimize=True)
    den = np.einsum('apm,apn,mn->', t, t.conj(), env, optimize=True)
    return complex(num / den)


def expectation_mpo(state: TimeBinState, mpo) -> complex:
    """Unnormalized MPO expectation <psi|W|psi>, one left-to-right sweep.

    ``mpo`` is a per-site list of arrays ``W[bl, br, p, q]`` (p bra, q ket);
    the first site must have ``bl == 1`` and the last ``br == 1``.  Cost is
    linear in the chain length.
    """
    if len(mpo) != len(state.tensors):
        raise ValueError(
            f"MPO has {len(mpo)} sites, state has {len(state.tensors)}")
    env = np.ones((1, 1, 1), dtype=np.complex128)  # (mpo bond, ket bond, bra bond)
    for i, (t, w) in enumerate(zip(state.tensors, mpo)):
        d = t.shape[1]
        if w.shape[2] != d or w.shape[3] != d:
            raise ValueError(f"MPO site {i} physical dims {w.shape[2:]} != {d}")
        if w.shape[0] != env.shape[0]:
            raise ValueError(f"MPO bond mismatch entering site {i}")
        # pairwise contraction keeps the sweep at O(chi^3) per site
        tmp = np.tensordot(env, t, axes=(1, 0))           # (w, bra, q, c)
        tmp = np.tensordot(w, tmp, axes=([0, 3], [0, 2]))  # (v, p, bra, c)
        env = np.tensordot(tmp, t.conj(), axes=([2, 1], [0, 1]))  # (v, c, d)
    if env.shape != (1, 1, 1):
        raise ValueError("MPO right boundary bond must have dimension 1")
    return complex(env[0, 0, 0])
