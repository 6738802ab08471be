"""Length-prefixed little-endian binary containers for CKKS objects.

Layout: magic b"HLT1", format version u32, object tag u8, then a params
header (ring_dim u32, limb count u32, level i32, scale f64, domain u8,
hoist/meta u32, moduli as u64 each), then each limb as ring_dim 8-byte
words. All integers little-endian.
"""

from __future__ import annotations

import struct

import numpy as np

from .ckks import Ciphertext, Plaintext, SwitchingKey
from .modarith import Modulus
from .ring import Domain, Poly
from .rns import RnsPoly

MAGIC = b"HLT1"
VERSION = 1
TAG_CIPHERTEXT = 1
TAG_SWITCHING_KEY = 2
TAG_PLAINTEXT = 3

_DOMAIN_CODE = {Domain.COEF: 0, Domain.NTT: 1}
_DOMAIN_FROM = {v: k for k, v in _DOMAIN_CODE.items()}


def _pack_rns(out: bytearray, p: RnsPoly):
    out += struct.pack("<I", len(p.limbs))
    for limb in p.limbs:
        out += struct.pack("<QB", limb.modulus.q, _DOMAIN_CODE[limb.domain])
        out += limb.coeffs.astype("<u8").tobytes()


def _unpack_rns(buf: memoryview, off: int, ring_dim: int) -> tuple[RnsPoly, int]:
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    limbs = []
    for _ in range(count):
        q, dom = struct.unpack_from("<QB", buf, off)
        off += 9
        coeffs = np.frombuffer(buf, dtype="<u8", count=ring_dim, offset=off).copy()
        off += 8 * ring_dim
        limbs.append(Poly(coeffs, Modulus(q, ring_dim), _DOMAIN_FROM[dom]))
    return RnsPoly(limbs), off


def save_ciphertext(ct: Ciphertext) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<IBIidI", VERSION, TAG_CIPHERTEXT, ct.c0.n, ct.level,
                       ct.scale, 0)
    _pack_rns(out, ct.c0)
    _pack_rns(out, ct.c1)
    return bytes(out)


def save_plaintext(pt: Plaintext) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<IBIidI", VERSION, TAG_PLAINTEXT, pt.poly.n, 0,
                       pt.scale, 0)
    _pack_rns(out, pt.poly)
    return bytes(out)


def save_switching_key(swk: SwitchingKey) -> bytes:
    ring_dim = swk.digits[0][0].n
    out = bytearray()
    out += MAGIC
    out += struct.pack("<IBIidI", VERSION, TAG_SWITCHING_KEY, ring_dim, 0,
                       0.0, swk.hoist_offset)
    out += struct.pack("<I", len(swk.digits))
    for k0, k1 in swk.digits:
        _pack_rns(out, k0)
        _pack_rns(out, k1)
    return bytes(out)


def _parse_header(data: bytes) -> tuple[int, int, int, float, int, int]:
    if data[:4] != MAGIC:
        raise ValueError("bad magic")
    version, tag, ring_dim, level, scale, meta = struct.unpack_from(
        "<IBIidI", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    return tag, ring_dim, level, scale, meta, 4 + struct.calcsize("<IBIidI")


def load(data: bytes):
    """Parse any container produced by the save_* functions."""
    tag, ring_dim, level, scale, meta, off = _parse_header(data)
    view = memoryview(data)
    if tag == TAG_CIPHERTEXT:
        c0, off = _unpack_rns(view, off, ring_dim)
        c1, off = _unpack_rns(view, off, ring_dim)
        return Ciphertext(c0, c1, level, scale)
    if tag == TAG_PLAINTEXT:
        poly, off = _unpack_rns(view, off, ring_dim)
        return Plaintext(poly, scale)
    if tag == TAG_SWITCHING_KEY:
        (count,) = struct.unpack_from("<I", view, off)
        off += 4
        digits = []
        for _ in range(count):
            k0, off = _unpack_rns(view, off, ring_dim)
            k1, off = _unpack_rns(view, off, ring_dim)
            digits.append((k0, k1))
        return SwitchingKey(digits, hoist_offset=meta)
    raise ValueError(f"unknown object tag {tag}")
