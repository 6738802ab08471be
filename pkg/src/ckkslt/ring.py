"""Negacyclic polynomial ring Z_q[x]/(x^N + 1).

Polynomials live either in coefficient form or in evaluation (NTT) form.
The forward transform takes natural-order coefficients to bit-reversed
evaluation order: position s of an NTT-domain polynomial holds the value
at the root psi^(2*bitrev(s)+1). That layout is load-bearing: the banked
permutation network in :mod:`ckkslt.permutation` derives its address math
from it, so it is not configurable.

Vectorized modular multiplication: for q < 2^53 the quotient of the
128-bit product is approximated in float64 and the residual recovered
exactly through uint64 wraparound; the approximation error is at most a
few multiples of q, removed by one exact remainder. Wider moduli fall
back to object-dtype (native big-int) arithmetic.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .modarith import Modulus, mod_pow

_FAST_LIMIT_BITS = 53


class DomainMismatch(ValueError):
    """Operation received a polynomial in the wrong domain."""


class ModulusMismatch(ValueError):
    """Operands carry different moduli or lengths."""


class Domain(enum.Enum):
    COEF = "coefficient"
    NTT = "ntt"


# ---------------------------------------------------------------------------
# vector kernels


def mod_mul_vec(a: np.ndarray, b, q: int) -> np.ndarray:
    """Elementwise a*b mod q for uint64 operands.

    Requires one operand < q and the other < 2^53 when the fast path is
    used; arbitrary word-sized values go through the exact object path.
    """
    if q.bit_length() > _FAST_LIMIT_BITS:
        prod = a.astype(object) * (b.astype(object) if isinstance(b, np.ndarray) else int(b))
        return (prod % q).astype(np.uint64)
    b_arr = b if isinstance(b, np.ndarray) else np.uint64(b)
    quot = np.floor(a.astype(np.float64) * np.asarray(b_arr, np.float64) / q)
    r = a * b_arr - quot.astype(np.uint64) * np.uint64(q)
    return np.remainder(r.view(np.int64), np.int64(q)).view(np.uint64)


def mod_add_vec(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    s = a + b
    return np.where(s >= np.uint64(q), s - np.uint64(q), s)


def mod_sub_vec(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    d = a - b
    return np.where(a >= b, d, d + np.uint64(q))


def mod_neg_vec(a: np.ndarray, q: int) -> np.ndarray:
    return np.where(a == 0, np.uint64(0), np.uint64(q) - a)


@lru_cache(maxsize=None)
def bitrev_table(n: int) -> np.ndarray:
    """Permutation p with p[i] = bit-reversal of i over log2(n) bits."""
    bits = n.bit_length() - 1
    idx = np.arange(n, dtype=np.uint64)
    out = np.zeros(n, dtype=np.uint64)
    for b in range(bits):
        out |= ((idx >> np.uint64(b)) & np.uint64(1)) << np.uint64(bits - 1 - b)
    return out.astype(np.int64)


@lru_cache(maxsize=None)
def _ntt_tables(q: int, ring_dim: int, root: int):
    """Butterfly twiddles: psi powers in bit-reversed index order."""
    n = ring_dim
    rev = bitrev_table(n)
    powers = np.empty(n, dtype=np.uint64)
    ipowers = np.empty(n, dtype=np.uint64)
    inv_root = pow(root, -1, q)
    acc = 1
    iacc = 1
    plain = [0] * n
    iplain = [0] * n
    for i in range(n):
        plain[i] = acc
        iplain[i] = iacc
        acc = acc * root % q
        iacc = iacc * inv_root % q
    for i in range(n):
        powers[i] = plain[rev[i]]
        ipowers[i] = iplain[rev[i]]
    return powers, ipowers


def _forward_ntt(values: np.ndarray, m: Modulus) -> np.ndarray:
    q = m.q
    n = m.ring_dim
    psi_rev, _ = _ntt_tables(q, n, m.two_n_root)
    a = values.copy()
    t = n
    mm = 1
    while mm < n:
        t //= 2
        view = a.reshape(mm, 2 * t)
        lo = view[:, :t].copy()
        tw = psi_rev[mm : 2 * mm].reshape(mm, 1)
        v = mod_mul_vec(view[:, t:], tw, q)
        view[:, :t] = mod_add_vec(lo, v, q)
        view[:, t:] = mod_sub_vec(lo, v, q)
        mm *= 2
    return a


def _inverse_ntt(values: np.ndarray, m: Modulus) -> np.ndarray:
    q = m.q
    n = m.ring_dim
    _, ipsi_rev = _ntt_tables(q, n, m.two_n_root)
    a = values.copy()
    t = 1
    mm = n
    while mm > 1:
        h = mm // 2
        view = a.reshape(h, 2 * t)
        lo = view[:, :t].copy()
        hi = view[:, t:].copy()
        tw = ipsi_rev[h : 2 * h].reshape(h, 1)
        view[:, :t] = mod_add_vec(lo, hi, q)
        view[:, t:] = mod_mul_vec(mod_sub_vec(lo, hi, q), tw, q)
        t *= 2
        mm //= 2
    return mod_mul_vec(a, np.uint64(m.n_inv), q)


# ---------------------------------------------------------------------------
# rotation indices and polynomials

ROTATION_GENERATOR = 5


@dataclass(frozen=True)
class RotationIndex:
    """Slot offset r together with the automorphism exponent g^r mod 2N."""

    r: int
    ring_dim: int
    g_r: int = 0

    def __post_init__(self):
        n = self.ring_dim
        if not 0 <= self.r < n // 2:
            raise ValueError(f"rotation {self.r} outside [0, N/2)")
        g_r = pow(ROTATION_GENERATOR, self.r, 2 * n)
        object.__setattr__(self, "g_r", g_r)
        assert g_r % 2 == 1

    def inverse(self) -> "RotationIndex":
        half = self.ring_dim // 2
        return RotationIndex((half - self.r) % half, self.ring_dim)


@dataclass
class Poly:
    """One residue polynomial: N values mod a single prime."""

    coeffs: np.ndarray
    modulus: Modulus
    domain: Domain

    def __post_init__(self):
        if self.coeffs.dtype != np.uint64:
            self.coeffs = self.coeffs.astype(np.uint64)
        if len(self.coeffs) != self.modulus.ring_dim:
            raise ModulusMismatch("coefficient count != ring dimension")

    @property
    def n(self) -> int:
        return self.modulus.ring_dim

    def copy(self) -> "Poly":
        return Poly(self.coeffs.copy(), self.modulus, self.domain)


def zero_poly(m: Modulus, domain: Domain = Domain.COEF) -> Poly:
    return Poly(np.zeros(m.ring_dim, dtype=np.uint64), m, domain)


def random_poly(m: Modulus, rng: np.random.Generator, domain: Domain = Domain.COEF) -> Poly:
    return Poly(rng.integers(0, m.q, m.ring_dim, dtype=np.uint64), m, domain)


def _require(p: Poly, domain: Domain):
    if p.domain != domain:
        raise DomainMismatch(f"expected {domain}, got {p.domain}")


def ntt(p: Poly) -> Poly:
    _require(p, Domain.COEF)
    return Poly(_forward_ntt(p.coeffs, p.modulus), p.modulus, Domain.NTT)


def intt(p: Poly) -> Poly:
    _require(p, Domain.NTT)
    return Poly(_inverse_ntt(p.coeffs, p.modulus), p.modulus, Domain.COEF)


def _check_pair(a: Poly, b: Poly):
    if a.modulus.q != b.modulus.q or a.n != b.n:
        raise ModulusMismatch("operands disagree on modulus or length")
    if a.domain != b.domain:
        raise DomainMismatch("operands in different domains")


def pointwise_mul(a: Poly, b: Poly) -> Poly:
    _check_pair(a, b)
    return Poly(mod_mul_vec(a.coeffs, b.coeffs, a.modulus.q), a.modulus, a.domain)


def pointwise_add(a: Poly, b: Poly) -> Poly:
    _check_pair(a, b)
    return Poly(mod_add_vec(a.coeffs, b.coeffs, a.modulus.q), a.modulus, a.domain)


def pointwise_sub(a: Poly, b: Poly) -> Poly:
    _check_pair(a, b)
    return Poly(mod_sub_vec(a.coeffs, b.coeffs, a.modulus.q), a.modulus, a.domain)


def scalar_mul(p: Poly, c: int) -> Poly:
    return Poly(mod_mul_vec(p.coeffs, c % p.modulus.q, p.modulus.q), p.modulus, p.domain)


# ---------------------------------------------------------------------------
# automorphisms


def automorphism_coef(p: Poly, rot: RotationIndex) -> Poly:
    """Substitution x -> x^{g_r}: coefficient i lands at g_r*i mod 2N,
    negated whenever the exponent wraps past N."""
    _require(p, Domain.COEF)
    n = p.n
    q = p.modulus.q
    idx = (np.arange(n, dtype=np.int64) * rot.g_r) % (2 * n)
    pos = idx % n
    flip = idx >= n
    vals = np.where(flip, mod_neg_vec(p.coeffs, q), p.coeffs)
    out = np.zeros(n, dtype=np.uint64)
    out[pos] = vals
    return Poly(out, p.modulus, Domain.COEF)


@lru_cache(maxsize=None)
def eval_permutation(ring_dim: int, g_r: int) -> np.ndarray:
    """Gather indices realizing x -> x^{g_r} on bit-reversed NTT storage.

    Storage slot s holds the evaluation at root index bitrev(s); the
    substituted polynomial's value there comes from root index
    ((g_r*(2*bitrev(s)+1) mod 2N) - 1)/2 of the input.
    """
    n = ring_dim
    rev = bitrev_table(n)
    t = rev  # eval index per storage slot
    src_eval = ((g_r * (2 * t + 1)) % (2 * n) - 1) // 2
    src = rev[src_eval]
    assert np.array_equal(np.sort(src), np.arange(n)), "permutation must be a bijection"
    return src


def automorphism_eval(p: Poly, rot: RotationIndex) -> Poly:
    """NTT-domain automorphism: a pure index permutation, no transform."""
    _require(p, Domain.NTT)
    src = eval_permutation(p.n, rot.g_r)
    return Poly(p.coeffs[src], p.modulus, Domain.NTT)


def negacyclic_mul_schoolbook(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """O(N^2) reference product mod (x^N + 1, q), exact big-int arithmetic."""
    n = len(a)
    out = [0] * n
    for i in range(n):
        ai = int(a[i])
        if ai == 0:
            continue
        for j in range(n):
            k = i + j
            term = ai * int(b[j])
            if k >= n:
                out[k - n] = (out[k - n] - term) % q
            else:
                out[k] = (out[k] + term) % q
    return np.array(out, dtype=np.uint64)
