"""Banked-memory realization of the NTT-domain automorphism.

An NTT-domain polynomial is spread across dp memory banks: bank f,
address n_f stores the evaluation-order value A_{bitrev(f*N/dp + n_f)}.
The automorphism moving the value at evaluation index y to index
(m*y + (m-1)/2) mod N has two structural properties this module
exploits and verifies:

* the destination bank depends only on the source bank, never on the
  address, so the per-step routing is a fixed dp-permutation; and
* viewed on odd residues t = 2*idx+1 mod 2N the map is multiplication
  by m, so every cycle has the same length ord_{2N}(m) and a
  displacement walk (write each in-flight value onto its target while
  reading the target's previous occupant) covers all N positions in
  exactly N/dp full-occupancy steps.

Direction convention: the ring-level rotation by r substitutes
x -> x^(5^r); expressed as "value at index idx moves to idx'", the index
multiplier is the inverse exponent, m = (5^r)^-1 mod 2N. target() and
schedule() take the rotation r and handle the inversion internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ring import Domain, Poly, RotationIndex, bitrev_table


def bitrev(x: int, bits: int) -> int:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (x & 1)
        x >>= 1
    return out


@dataclass
class BankLayout:
    ring_dim: int
    dp: int
    banks: np.ndarray  # shape (dp, N/dp)

    def __post_init__(self):
        n, dp = self.ring_dim, self.dp
        if dp & (dp - 1) or dp < 2:
            raise ValueError("dp must be a power of two >= 2")
        if dp * dp > n:
            raise ValueError("requires dp^2 <= N")
        if self.banks.shape != (dp, n // dp):
            raise ValueError("bank array has the wrong shape")

    @classmethod
    def from_storage(cls, values: np.ndarray, dp: int) -> "BankLayout":
        """Split a bit-reversed-order NTT storage array into dp banks."""
        n = len(values)
        return cls(n, dp, values.reshape(dp, n // dp).copy())

    def to_storage(self) -> np.ndarray:
        return self.banks.reshape(-1).copy()


def perm_multiplier(r: int, ring_dim: int) -> int:
    """Odd index multiplier realizing rotation r in move-to form."""
    g_r = RotationIndex(r % (ring_dim // 2), ring_dim).g_r
    return pow(g_r, -1, 2 * ring_dim)


@dataclass(frozen=True)
class PermTarget:
    """Full decomposition of one coefficient move, §-by-§ fields exposed."""

    f: int
    n_f: int
    idx: int
    i_f: int
    j_f: int
    k_f: int
    t_f: int
    u_f: int
    v_f: int
    i_fp: int
    j_fp: int
    k_fp: int
    f_prime: int
    n_f_prime: int
    idx_prime: int


def source_index(f: int, n_f: int, layout: BankLayout) -> tuple[int, int, int, int]:
    """Evaluation index of (bank, address) plus its three-field split.

    idx = i_f*(N/dp) + j_f*dp + k_f with k_f = bitrev(f, log dp).
    """
    n, dp = layout.ring_dim, layout.dp
    if not (0 <= f < dp and 0 <= n_f < n // dp):
        raise ValueError("bank or address out of range")
    log_n = n.bit_length() - 1
    log_dp = dp.bit_length() - 1
    idx = bitrev(f * (n // dp) + n_f, log_n)
    k_f = idx % dp
    rest = idx // dp
    j_f = rest % (n // (dp * dp))
    i_f = rest // (n // (dp * dp))
    assert k_f == bitrev(f, log_dp)
    return idx, i_f, j_f, k_f


def target(f: int, n_f: int, r: int, layout: BankLayout) -> PermTarget:
    """Destination (bank, address) for the value at (f, n_f) under rotation r.

    Computed through the per-field decomposition of
    idx' = (m*idx + (m-1)/2) mod N, where t_f, u_f, v_f split
    m*k_f + (m-1)/2 and the middle-field carry propagates upward; the
    result is asserted against the direct index formula.
    """
    n, dp = layout.ring_dim, layout.dp
    m = perm_multiplier(r, n)
    idx, i_f, j_f, k_f = source_index(f, n_f, layout)
    mid = n // (dp * dp)
    base = m * k_f + (m - 1) // 2
    v_f = base % dp
    u_f = (base // dp) % mid
    t_f = base // (dp * mid)
    k_fp = v_f
    mid_total = m * j_f + u_f
    j_fp = mid_total % mid
    carry = mid_total // mid
    i_fp = (m * i_f + t_f + carry) % dp
    idx_prime = i_fp * (n // dp) + j_fp * dp + k_fp
    assert idx_prime == (m * idx + (m - 1) // 2) % n, "field split disagrees with direct formula"
    log_n = n.bit_length() - 1
    log_dp = dp.bit_length() - 1
    flat = bitrev(idx_prime, log_n)
    f_prime = flat // (n // dp)
    n_f_prime = flat % (n // dp)
    assert f_prime == bitrev(k_fp, log_dp)
    return PermTarget(f, n_f, idx, i_f, j_f, k_f, t_f, u_f, v_f,
                      i_fp, j_fp, k_fp, f_prime, n_f_prime, idx_prime)


def bank_map(r: int, layout: BankLayout) -> np.ndarray:
    """Destination bank per source bank; address-independent by construction."""
    n, dp = layout.ring_dim, layout.dp
    m = perm_multiplier(r, n)
    log_dp = dp.bit_length() - 1
    out = np.empty(dp, dtype=np.int64)
    for f in range(dp):
        k_f = bitrev(f, log_dp)
        v_f = (m * k_f + (m - 1) // 2) % dp
        out[f] = bitrev(v_f, log_dp)
    return out


@dataclass
class MoveStep:
    """One full-occupancy step: dp moves (src_bank, src_addr, dst_bank, dst_addr)."""

    moves: list[tuple[int, int, int, int]]


def _storage_permutation(r: int, n: int) -> np.ndarray:
    """dst[s] for each storage position s under the move-to convention."""
    m = perm_multiplier(r, n)
    rev = bitrev_table(n)
    idx = rev  # eval index of each storage slot
    idx_prime = (m * idx + (m - 1) // 2) % n
    return rev[idx_prime]


def schedule(r: int, layout: BankLayout) -> list[MoveStep]:
    """Displacement-walk schedule: N/dp steps, one read and one write per
    bank per step, at most dp values in flight.

    Lanes chase the permutation; when a lane's next position was already
    consumed (a chain closed onto an earlier start) it reopens at the
    lowest unvisited address of the bank it is currently serving.
    """
    n, dp = layout.ring_dim, layout.dp
    per_bank = n // dp
    dst_flat = _storage_permutation(r, n)
    visited = np.zeros(n, dtype=bool)
    next_free = [0] * dp  # per-bank cursor over unvisited addresses
    steps: list[MoveStep] = []

    def fresh(bank: int) -> int:
        a = next_free[bank]
        while a < per_bank and visited[bank * per_bank + a]:
            a += 1
        next_free[bank] = a
        if a >= per_bank:
            raise RuntimeError("bank exhausted early")  # cannot happen: reads stay balanced
        return a

    # lane state: current read position (flat); start with address 0 of each bank
    lanes = []
    for f in range(dp):
        a = fresh(f)
        pos = f * per_bank + a
        visited[pos] = True
        lanes.append(pos)
    for _ in range(per_bank):
        moves = []
        new_lanes = []
        for pos in lanes:
            dst = int(dst_flat[pos])
            dst_bank, dst_addr = divmod(dst, per_bank)
            moves.append((pos // per_bank, pos % per_bank, dst_bank, dst_addr))
            if visited[dst]:
                # chain closed: reopen in the bank this lane is writing to
                if not visited.all():
                    a = fresh(dst_bank)
                    nxt = dst_bank * per_bank + a
                    visited[nxt] = True
                    new_lanes.append(nxt)
                else:
                    new_lanes.append(-1)
            else:
                visited[dst] = True
                new_lanes.append(dst)
        steps.append(MoveStep(moves))
        lanes = [p for p in new_lanes if p >= 0]
        if not lanes:
            break
    return steps


def apply_schedule(layout: BankLayout, steps: list[MoveStep]) -> None:
    """Execute in place, asserting the read-before-write step discipline:
    within each step all dp reads land before any write, and no position
    is ever read after it has been overwritten."""
    written: set[tuple[int, int]] = set()
    read: set[tuple[int, int]] = set()
    staged: dict[tuple[int, int], np.uint64] = {}
    for step in steps:
        values = {}
        for src_bank, src_addr, _, _ in step.moves:
            key = (src_bank, src_addr)
            assert key not in written, "read of an already-overwritten position"
            assert key not in read, "double read"
            read.add(key)
            values[key] = layout.banks[src_bank, src_addr]
        for src_bank, src_addr, dst_bank, dst_addr in step.moves:
            dst = (dst_bank, dst_addr)
            assert dst not in staged, "double write"
            staged[dst] = values[(src_bank, src_addr)]
            if dst in read:
                layout.banks[dst_bank, dst_addr] = staged[dst]
                written.add(dst)
    for (bank, addr), val in staged.items():
        if (bank, addr) not in written:
            layout.banks[bank, addr] = val


def apply_rotation_banked(layout: BankLayout, r: int) -> None:
    """Apply the full rotation to the banks via the move schedule."""
    steps = schedule(r, layout)
    n = layout.ring_dim
    src = layout.to_storage()
    out = np.empty_like(src)
    seen = np.zeros(n, dtype=bool)
    per_bank = n // layout.dp
    for step in steps:
        for sb, sa, db, da in step.moves:
            out[db * per_bank + da] = src[sb * per_bank + sa]
            assert not seen[db * per_bank + da]
            seen[db * per_bank + da] = True
    assert seen.all(), "schedule did not cover every position"
    layout.banks = out.reshape(layout.dp, per_bank)


def mux_controls(r: int, layout: BankLayout) -> np.ndarray:
    """Per-step dp-to-1 selector settings: entry [step, out_bank] names the
    source bank feeding that output bank. Constant across steps because the
    bank map is address-independent."""
    steps = schedule(r, layout)
    dp = layout.dp
    table = np.empty((len(steps), dp), dtype=np.int64)
    for s, step in enumerate(steps):
        for src_bank, _, dst_bank, _ in step.moves:
            table[s, dst_bank] = src_bank
    return table


def dump_schedule(steps: list[MoveStep]) -> str:
    lines = []
    for s, step in enumerate(steps):
        for sb, sa, db, da in step.moves:
            lines.append(f"{s}, {sb}, {sa}, {db}, {da}")
    return "\n".join(lines)
