import numpy as np
import pytest

from ckkslt import ckks, serialize


def test_ciphertext_roundtrip(toy_params, toy_keys):
    sk, pk = toy_keys
    rng = np.random.default_rng(0)
    v = rng.uniform(-1, 1, toy_params.slots)
    ct = ckks.encrypt(ckks.encode(v, toy_params), pk, toy_params, rng)
    blob = serialize.save_ciphertext(ct)
    back = serialize.load(blob)
    assert back.level == ct.level and back.scale == ct.scale
    for a, b in zip(back.c0.limbs + back.c1.limbs, ct.c0.limbs + ct.c1.limbs):
        assert a.modulus.q == b.modulus.q
        assert a.domain == b.domain
        assert np.array_equal(a.coeffs, b.coeffs)
    dec = ckks.decode(ckks.decrypt(back, sk), toy_params)
    assert np.max(np.abs(dec - v)) < 2**-15


def test_plaintext_roundtrip(toy_params):
    rng = np.random.default_rng(1)
    v = rng.uniform(-1, 1, toy_params.slots)
    pt = ckks.encode(v, toy_params)
    back = serialize.load(serialize.save_plaintext(pt))
    assert back.scale == pt.scale
    for a, b in zip(back.poly.limbs, pt.poly.limbs):
        assert np.array_equal(a.coeffs, b.coeffs)


def test_switching_key_roundtrip(toy_params, toy_keys):
    sk, _ = toy_keys
    rng = np.random.default_rng(2)
    swk = ckks.rotation_keygen(sk, 9, toy_params, rng, hoisted=True)
    back = serialize.load(serialize.save_switching_key(swk))
    assert back.hoist_offset == 9
    assert len(back.digits) == len(swk.digits)
    for (a0, a1), (b0, b1) in zip(back.digits, swk.digits):
        for x, y in zip(a0.limbs + a1.limbs, b0.limbs + b1.limbs):
            assert np.array_equal(x.coeffs, y.coeffs)


def test_bad_magic_rejected():
    with pytest.raises(ValueError):
        serialize.load(b"XXXX" + b"\x00" * 64)
