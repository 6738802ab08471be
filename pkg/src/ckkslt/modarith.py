"""Exact modular arithmetic over word-sized NTT-friendly primes.

Every modulus q managed here satisfies q = 1 (mod 2N) for the ring
dimension N it was generated for, so a primitive 2N-th root of unity
exists and negacyclic transforms are available. Scalar reductions go
through a Barrett path with a precomputed constant; a vectorized numpy
kernel lives in :mod:`ckkslt.ring` and is checked against the same
wide-integer oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class NotEnoughPrimes(ValueError):
    """Raised when the requested prime count cannot be met in the bit width."""


class NoInverse(ZeroDivisionError):
    """Raised when a modular inverse of a non-unit is requested."""


_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for every n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_WITNESSES:
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _find_two_n_root(q: int, n: int) -> int:
    """Smallest-base primitive 2n-th root of unity mod q.

    Deterministic: raises successive small bases to (q-1)/2n and takes the
    first result of exact order 2n (equivalently: its n-th power is -1).
    """
    exponent = (q - 1) // (2 * n)
    base = 2
    while True:
        root = pow(base, exponent, q)
        if pow(root, n, q) == q - 1:
            return root
        base += 1
        if base > q:
            raise ValueError(f"no primitive 2N-th root mod {q}")


@dataclass(frozen=True)
class Modulus:
    """A word-sized prime q = 1 (mod 2N) with transform constants.

    Attributes:
        q: the prime.
        ring_dim: N, the transform length the root was generated for.
        reduction_constant: Barrett constant floor(2^(2*shift) / q).
        reduction_shift: bit width used for the Barrett constant.
        two_n_root: primitive 2N-th root of unity mod q.
        n_inv: N^-1 mod q.
    """

    q: int
    ring_dim: int
    reduction_constant: int = field(init=False)
    reduction_shift: int = field(init=False)
    two_n_root: int = field(init=False)
    n_inv: int = field(init=False)

    def __post_init__(self):
        q, n = self.q, self.ring_dim
        if n & (n - 1) or n < 2:
            raise ValueError("ring_dim must be a power of two >= 2")
        if q.bit_length() > 60:
            raise ValueError("modulus wider than 60 bits")
        if q % (2 * n) != 1:
            raise ValueError(f"{q} != 1 mod 2N for N={n}")
        if not is_prime(q):
            raise ValueError(f"{q} is not prime")
        shift = q.bit_length()
        object.__setattr__(self, "reduction_shift", shift)
        object.__setattr__(self, "reduction_constant", (1 << (2 * shift)) // q)
        object.__setattr__(self, "two_n_root", _find_two_n_root(q, n))
        object.__setattr__(self, "n_inv", pow(n, -1, q))

    def __repr__(self):
        return f"Modulus({self.q}, N={self.ring_dim})"


def find_ntt_primes(bit_width: int, ring_dim: int, count: int) -> list[Modulus]:
    """The `count` largest primes of exactly `bit_width` bits, = 1 mod 2N.

    Scans the congruence class k*2N + 1 downward from 2^bit_width, so the
    result is deterministic and sorted descending.
    """
    if not 8 <= bit_width <= 60:
        raise ValueError("bit_width must lie in [8, 60]")
    if ring_dim & (ring_dim - 1) or ring_dim < 2:
        raise ValueError("ring_dim must be a power of two")
    step = 2 * ring_dim
    hi = (1 << bit_width) - 1
    lo = 1 << (bit_width - 1)
    k = (hi - 1) // step
    out: list[Modulus] = []
    while len(out) < count:
        cand = k * step + 1
        if cand < lo:
            raise NotEnoughPrimes(
                f"only {len(out)} primes of {bit_width} bits with q=1 mod {step}"
            )
        if is_prime(cand):
            out.append(Modulus(cand, ring_dim))
        k -= 1
    return out


def barrett_reduce(x: int, m: Modulus) -> int:
    """Reduce 0 <= x < q^2 using the precomputed constant (no division)."""
    approx = (x * m.reduction_constant) >> (2 * m.reduction_shift)
    r = x - approx * m.q
    if r >= m.q:
        r -= m.q
    if r >= m.q:
        r -= m.q
    return r


def mod_add(a: int, b: int, m: Modulus) -> int:
    s = a + b
    return s - m.q if s >= m.q else s


def mod_sub(a: int, b: int, m: Modulus) -> int:
    d = a - b
    return d + m.q if d < 0 else d


def mod_mul(a: int, b: int, m: Modulus) -> int:
    return barrett_reduce(a * b, m)


def mod_pow(a: int, e: int, m: Modulus) -> int:
    if e < 0:
        a = mod_inv(a, m)
        e = -e
    result = 1
    base = a % m.q
    while e:
        if e & 1:
            result = mod_mul(result, base, m)
        base = mod_mul(base, base, m)
        e >>= 1
    return result


def mod_inv(a: int, m: Modulus) -> int:
    if a % m.q == 0:
        raise NoInverse(f"0 has no inverse mod {m.q}")
    return pow(a, -1, m.q)
