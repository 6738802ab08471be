"""RNS tower over Q and PQ: basis conversion, digit decomposition,
modulus reduction, and rescaling.

Limb ordering convention for polynomials over the raised modulus PQ:
the alpha special limbs come first, then the L+1 data limbs, i.e.
[p_0 .. p_{alpha-1}, q_0 .. q_L]. ModDown indexes its inputs under that
convention.

Basis conversion is the fast (error-carrying) variant: the converted
value equals the true one plus u * prod(source basis) for an integer
0 <= u <= len(source basis) - 1. The overshoot is absorbed into
ciphertext noise downstream, never corrected here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod

import numpy as np

from .modarith import Modulus
from .ring import Domain, Poly, mod_mul_vec, mod_sub_vec


class BasisOverlap(ValueError):
    """Source and target bases of a conversion share a modulus."""


class BasisMismatch(ValueError):
    """Polynomial limbs do not match the expected basis."""


class SingleLimb(ValueError):
    """Rescale would drop the last remaining limb."""


@dataclass
class RnsPoly:
    """A polynomial carried limb-wise over a list of moduli."""

    limbs: list[Poly]

    def __post_init__(self):
        if not self.limbs:
            raise BasisMismatch("empty limb list")
        n = self.limbs[0].n
        dom = self.limbs[0].domain
        for limb in self.limbs:
            if limb.n != n or limb.domain != dom:
                raise BasisMismatch("limbs disagree on length or domain")

    @property
    def moduli(self) -> list[Modulus]:
        return [limb.modulus for limb in self.limbs]

    @property
    def domain(self) -> Domain:
        return self.limbs[0].domain

    @property
    def n(self) -> int:
        return self.limbs[0].n

    def copy(self) -> "RnsPoly":
        return RnsPoly([limb.copy() for limb in self.limbs])


@dataclass
class RnsBasis:
    """Moduli of Q = q_0..q_L and P = p_0..p_{alpha-1} plus conversion tables."""

    q_moduli: list[Modulus]
    p_moduli: list[Modulus]
    _conv_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        values = [m.q for m in self.q_moduli + self.p_moduli]
        if len(set(values)) != len(values):
            raise ValueError("moduli must be pairwise distinct")

    @property
    def level_count(self) -> int:
        return len(self.q_moduli)

    @property
    def alpha(self) -> int:
        return len(self.p_moduli)

    @property
    def beta(self) -> int:
        return -(-self.level_count // self.alpha)

    @property
    def pq_moduli(self) -> list[Modulus]:
        return self.p_moduli + self.q_moduli

    @property
    def q_product(self) -> int:
        return prod(m.q for m in self.q_moduli)

    @property
    def p_product(self) -> int:
        return prod(m.q for m in self.p_moduli)

    def digit_group(self, b: int) -> list[int]:
        """Indices into q_moduli forming digit group b."""
        alpha = self.alpha
        return list(range(b * alpha, min((b + 1) * alpha, self.level_count)))

    def digit_modulus(self, b: int) -> int:
        return prod(self.q_moduli[j].q for j in self.digit_group(b))

    def conversion_tables(self, src: tuple[int, ...], dst: tuple[int, ...]):
        """Per-pair constants for bconv: src/dst are modulus values."""
        key = (src, dst)
        cached = self._conv_cache.get(key)
        if cached is not None:
            return cached
        big = prod(src)
        hat = [big // qj for qj in src]
        hat_inv = [pow(h % qj, -1, qj) for h, qj in zip(hat, src)]
        hat_mod_dst = [
            np.array([h % pi for h in hat], dtype=np.uint64) for pi in dst
        ]
        tables = (np.array(hat_inv, dtype=np.uint64), hat_mod_dst)
        self._conv_cache[key] = tables
        return tables


def bconv(p: RnsPoly, target: list[Modulus], basis: RnsBasis) -> RnsPoly:
    """Fast basis conversion of a coefficient-domain polynomial.

    Output limb over p_i is sum_j [qhat_j^-1 a_j]_{q_j} * qhat_j mod p_i,
    which equals the exact value plus u * prod(src) with 0 <= u < len(src).
    """
    if p.domain != Domain.COEF:
        raise BasisMismatch("bconv requires coefficient domain")
    src_vals = tuple(m.q for m in p.moduli)
    dst_vals = tuple(m.q for m in target)
    if set(src_vals) & set(dst_vals):
        raise BasisOverlap("source and target bases overlap")
    hat_inv, hat_mod_dst = basis.conversion_tables(src_vals, dst_vals)
    scaled = [
        mod_mul_vec(limb.coeffs, int(hat_inv[j]), limb.modulus.q)
        for j, limb in enumerate(p.limbs)
    ]
    out = []
    for i, mod in enumerate(target):
        acc = np.zeros(p.n, dtype=np.uint64)
        row = hat_mod_dst[i]
        for j, t in enumerate(scaled):
            acc = acc + mod_mul_vec(t, int(row[j]), mod.q)
        acc = np.remainder(acc.view(np.int64), np.int64(mod.q)).view(np.uint64)
        out.append(Poly(acc, mod, Domain.COEF))
    return RnsPoly(out)


def decompose(c: RnsPoly, basis: RnsBasis) -> list[RnsPoly]:
    """Split into beta digits, each raised to the full PQ basis.

    Digit b keeps its own group's limbs verbatim and fills every other
    modulus of PQ by converting out of the group (the ModUp step).
    """
    if c.domain != Domain.COEF:
        raise BasisMismatch("decompose requires coefficient domain")
    if len(c.limbs) != basis.level_count:
        raise BasisMismatch("decompose expects a full set of Q limbs")
    digits = []
    for b in range(basis.beta):
        group = basis.digit_group(b)
        group_poly = RnsPoly([c.limbs[j] for j in group])
        group_vals = {basis.q_moduli[j].q for j in group}
        others = [m for m in basis.pq_moduli if m.q not in group_vals]
        converted = bconv(group_poly, others, basis)
        conv_iter = iter(converted.limbs)
        limbs = []
        for m in basis.pq_moduli:
            if m.q in group_vals:
                j = next(j for j in group if basis.q_moduli[j].q == m.q)
                limbs.append(c.limbs[j].copy())
            else:
                limbs.append(next(conv_iter))
        digits.append(RnsPoly(limbs))
    return digits


def moddown(c: RnsPoly, basis: RnsBasis) -> RnsPoly:
    """Divide by P and drop the special limbs: out over Q only.

    Expects PQ ordering [p..., q...]; the result approximates round(c/P)
    with additive error at most alpha from the conversion overshoot.
    """
    if c.domain != Domain.COEF:
        raise BasisMismatch("moddown requires coefficient domain")
    alpha = basis.alpha
    if len(c.limbs) != alpha + basis.level_count:
        raise BasisMismatch("moddown expects PQ limbs")
    p_part = RnsPoly(c.limbs[:alpha])
    conv = bconv(p_part, basis.q_moduli, basis)
    p_inv = [pow(basis.p_product % m.q, -1, m.q) for m in basis.q_moduli]
    out = []
    for j, m in enumerate(basis.q_moduli):
        diff = mod_sub_vec(c.limbs[alpha + j].coeffs, conv.limbs[j].coeffs, m.q)
        out.append(Poly(mod_mul_vec(diff, p_inv[j], m.q), m, Domain.COEF))
    return RnsPoly(out)


def rescale(c: RnsPoly) -> RnsPoly:
    """Drop the top limb and divide by its modulus (rounding error <= 1)."""
    if c.domain != Domain.COEF:
        raise BasisMismatch("rescale requires coefficient domain")
    if len(c.limbs) < 2:
        raise SingleLimb("cannot rescale a single-limb polynomial")
    last = c.limbs[-1]
    q_last = last.modulus.q
    out = []
    for limb in c.limbs[:-1]:
        qj = limb.modulus.q
        inv = pow(q_last % qj, -1, qj)
        reduced = np.remainder(last.coeffs.view(np.int64), np.int64(qj)).view(np.uint64)
        diff = mod_sub_vec(limb.coeffs, reduced, qj)
        out.append(Poly(mod_mul_vec(diff, inv, qj), limb.modulus, Domain.COEF))
    return RnsPoly(out)


# ---------------------------------------------------------------------------
# exact reconstruction helpers (shared by decode and the test oracles)


def crt_reconstruct(p: RnsPoly) -> list[int]:
    """Exact values in [0, M) via the Chinese remainder theorem."""
    mods = [m.q for m in p.moduli]
    big = prod(mods)
    coeffs = [big // q for q in mods]
    coeffs = [c * pow(c % q, -1, q) % big for c, q in zip(coeffs, mods)]
    cols = [limb.coeffs.tolist() for limb in p.limbs]
    out = []
    for t in range(p.n):
        acc = 0
        for j, cj in enumerate(coeffs):
            acc += cols[j][t] * cj
        out.append(acc % big)
    return out


def crt_reconstruct_centered(p: RnsPoly) -> list[int]:
    """Exact values lifted into (-M/2, M/2]."""
    mods = [m.q for m in p.moduli]
    big = prod(mods)
    half = big // 2
    return [v - big if v > half else v for v in crt_reconstruct(p)]


def rns_from_ints(values, moduli: list[Modulus], domain: Domain = Domain.COEF) -> RnsPoly:
    """Reduce arbitrary (possibly negative) integers into every limb."""
    limbs = []
    for m in moduli:
        reduced = np.array([v % m.q for v in values], dtype=np.uint64)
        limbs.append(Poly(reduced, m, domain))
    return RnsPoly(limbs)
