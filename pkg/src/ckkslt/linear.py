"""Encrypted linear-transform evaluators.

Four routes from ciphertext to F*v, trading rotation count against
switching-key storage:

* diagonal: one product per matrix diagonal, every rotation hoisted over
  a single shared digit decomposition.
* bsgs: two-layer baby-step giant-step split n = n1*n2 with full
  (unhoisted) rotations.
* dh-bsgs: the two-layer split with hoisting in both layers and the
  inner-layer ModDown delayed onto the accumulated sum.
* th-bsgs: a three-layer split n = n1*n2*n3 with hoisting across all
  layers; only the second baby layer pays per-index ModDown/Decompose,
  so rotation overhead scales with n1 + n3 instead of n2.

Every evaluator records an operation trace (Decompose / ModDown /
coefficient-wise limb multiplies / key offsets touched) that the cost
model and the datapath simulator cross-check.

Zero-offset rotations are identities and never consume a key or a
decomposition; the traces reflect that.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .ckks import (
    Ciphertext,
    CkksParams,
    MissingKey,
    Plaintext,
    SecretKey,
    SwitchingKey,
    apply_rotation,
    decode,
    decrypt,
    encode,
    hoist_digits,
    key_switch,
    moddown_ntt,
    pt_ct_mult,
    raise_to_pq,
    rescale_ct,
    rns_add,
    rotation_keygen,
)
from .ring import RotationIndex, automorphism_coef, ntt, pointwise_mul
from .rns import RnsPoly


class PlanMismatch(ValueError):
    """Plan factors do not fit the method or the diagonal matrix."""


class BadFactors(ValueError):
    """Factorization does not multiply to the transform dimension."""


class DimensionTooLarge(ValueError):
    """Matrix dimension exceeds the slot count."""


class LtMethod(enum.Enum):
    DIAGONAL = "diagonal"
    BSGS = "bsgs"
    DH_BSGS = "dh-bsgs"
    TH_BSGS = "th-bsgs"


@dataclass(frozen=True)
class LtPlan:
    method: LtMethod
    n: int
    factors: tuple[int, ...] = ()

    def __post_init__(self):
        if self.n & (self.n - 1):
            raise BadFactors("transform dimension must be a power of two")
        need = {
            LtMethod.DIAGONAL: 0,
            LtMethod.BSGS: 2,
            LtMethod.DH_BSGS: 2,
            LtMethod.TH_BSGS: 3,
        }[self.method]
        if len(self.factors) != need:
            raise BadFactors(f"{self.method.value} needs {need} factors")
        if self.factors and int(np.prod(self.factors)) != self.n:
            raise BadFactors(f"factors {self.factors} do not multiply to {self.n}")
        if any(f < 1 for f in self.factors):
            raise BadFactors("factors must be >= 1")


@dataclass
class OpTrace:
    decompose: int = 0
    moddown: int = 0
    cwise_mult_limbs: int = 0
    key_offsets: set = field(default_factory=set)


@dataclass
class DiagMatrix:
    plan: LtPlan
    diagonals: list[Plaintext]  # index i holds the (pre-rotated) i-th diagonal
    over_pq: bool


@dataclass
class RotationKeys:
    plain: dict[int, SwitchingKey] = field(default_factory=dict)
    hoisted: dict[int, SwitchingKey] = field(default_factory=dict)

    def get(self, offset: int, hoisted: bool) -> SwitchingKey:
        table = self.hoisted if hoisted else self.plain
        if offset not in table:
            kind = "hoisted" if hoisted else "plain"
            raise MissingKey(f"no {kind} key for rotation offset {offset}")
        return table[offset]


def required_offsets(plan: LtPlan) -> tuple[list[int], bool]:
    """Rotation offsets a plan consumes and whether it wants hoisted keys."""
    if plan.method == LtMethod.DIAGONAL:
        return list(range(1, plan.n)), True
    if plan.method in (LtMethod.BSGS, LtMethod.DH_BSGS):
        n1, n2 = plan.factors
        offs = list(range(1, n1)) + [n1 * j for j in range(1, n2)]
        return offs, plan.method == LtMethod.DH_BSGS
    n1, n2, n3 = plan.factors
    offs = (
        list(range(1, n1))
        + [n1 * j for j in range(1, n2)]
        + [n1 * n2 * k for k in range(1, n3)]
    )
    return offs, True


def generate_lt_keys(sk: SecretKey, plan: LtPlan, params: CkksParams,
                     rng: np.random.Generator) -> RotationKeys:
    offsets, hoisted = required_offsets(plan)
    keys = RotationKeys()
    for off in offsets:
        key = rotation_keygen(sk, off, params, rng, hoisted=hoisted)
        (keys.hoisted if hoisted else keys.plain)[off] = key
    return keys


# ---------------------------------------------------------------------------
# diagonal packing


def diagonalize(f_matrix: np.ndarray, plan: LtPlan, params: CkksParams) -> DiagMatrix:
    """Pack the matrix diagonals, tiled across the slots and pre-rotated.

    Diagonal i at slot t holds F[t mod n, (t+i) mod n]. Methods that
    accumulate over the raised modulus get their diagonals encoded over
    PQ; plain BSGS multiplies over Q.
    """
    f_matrix = np.asarray(f_matrix, dtype=np.float64)
    n = plan.n
    if f_matrix.shape != (n, n):
        raise PlanMismatch(f"matrix shape {f_matrix.shape} != ({n}, {n})")
    if n > params.slots:
        raise DimensionTooLarge(f"n={n} exceeds {params.slots} slots")
    reps = params.slots // n
    over_pq = plan.method != LtMethod.BSGS
    moduli = params.basis.pq_moduli if over_pq else params.basis.q_moduli
    half = params.ring_dim // 2
    diagonals = []
    for i in range(n):
        vec = np.array([f_matrix[t % n, (t + i) % n] for t in range(n)])
        tiled = np.tile(vec, reps)
        pt = encode(tiled, params, moduli=moduli)
        offset = _prerotation_offset(plan, i)
        if offset:
            rot = RotationIndex((-offset) % half, params.ring_dim)
            pt = Plaintext(
                RnsPoly([automorphism_coef(l, rot) for l in pt.poly.limbs]),
                pt.scale,
            )
        pt = Plaintext(RnsPoly([ntt(l) for l in pt.poly.limbs]), pt.scale)
        diagonals.append(pt)
    return DiagMatrix(plan, diagonals, over_pq)


def _prerotation_offset(plan: LtPlan, i: int) -> int:
    if plan.method == LtMethod.DIAGONAL:
        return 0
    if plan.method in (LtMethod.BSGS, LtMethod.DH_BSGS):
        n1, _ = plan.factors
        return n1 * (i // n1)
    n1, n2, _ = plan.factors
    return n1 * n2 * (i // (n1 * n2))


# ---------------------------------------------------------------------------
# shared pieces


def _pq_limb_count(params: CkksParams) -> int:
    return params.basis.level_count + params.basis.alpha


def _mul_pair(f: Plaintext, pair: tuple[RnsPoly, RnsPoly], trace: OpTrace,
              limbs: int) -> tuple[RnsPoly, RnsPoly]:
    fp = f.poly
    out0 = RnsPoly([pointwise_mul(x, y) for x, y in zip(pair[0].limbs, fp.limbs)])
    out1 = RnsPoly([pointwise_mul(x, y) for x, y in zip(pair[1].limbs, fp.limbs)])
    trace.cwise_mult_limbs += 2 * limbs
    return out0, out1


def _key_switch_traced(digits, swk, trace: OpTrace, params: CkksParams):
    out = key_switch(digits, swk)
    trace.cwise_mult_limbs += 2 * len(swk.digits) * _pq_limb_count(params)
    return out


def _hoist_traced(c1: RnsPoly, trace: OpTrace, params: CkksParams):
    trace.decompose += 1
    return hoist_digits(c1, params.basis)


def _moddown_traced(p: RnsPoly, trace: OpTrace, params: CkksParams) -> RnsPoly:
    trace.moddown += 1
    return moddown_ntt(p, params.basis)


def _pair_add(a, b):
    return rns_add(a[0], b[0]), rns_add(a[1], b[1])


def _pair_rotate(pair, rot: RotationIndex):
    return apply_rotation(pair[0], rot), apply_rotation(pair[1], rot)


def _finish(pair, scale: float, level: int, trace: OpTrace,
            params: CkksParams) -> Ciphertext:
    c0 = _moddown_traced(pair[0], trace, params)
    c1 = _moddown_traced(pair[1], trace, params)
    ct = Ciphertext(c0, c1, level, scale)
    return rescale_ct(ct, params)


def _check_plan(dm: DiagMatrix, plan: LtPlan):
    if dm.plan != plan:
        raise PlanMismatch("diagonal matrix was packed for a different plan")


# ---------------------------------------------------------------------------
# evaluators


def lt_diagonal(ct: Ciphertext, dm: DiagMatrix, keys: RotationKeys,
                params: CkksParams) -> tuple[Ciphertext, OpTrace]:
    """Sum of rotated-ciphertext x diagonal products, all rotations hoisted."""
    plan = dm.plan
    if plan.method != LtMethod.DIAGONAL:
        raise PlanMismatch("plan is not diagonal")
    trace = OpTrace()
    limbs = _pq_limb_count(params)
    digits = _hoist_traced(ct.c1, trace, params)
    a0 = raise_to_pq(ct.c0, params.basis)
    b0 = raise_to_pq(ct.c1, params.basis)
    acc = _mul_pair(dm.diagonals[0], (a0, b0), trace, limbs)
    for i in range(1, plan.n):
        rot = RotationIndex(i, params.ring_dim)
        swk = keys.get(i, hoisted=True)
        trace.key_offsets.add(i)
        u0, u1 = _key_switch_traced(digits, swk, trace, params)
        pair = _pair_rotate((rns_add(a0, u0), u1), rot)
        acc = _pair_add(acc, _mul_pair(dm.diagonals[i], pair, trace, limbs))
    out = _finish(acc, ct.scale * dm.diagonals[0].scale, ct.level, trace, params)
    return out, trace


def _rotate_traced(ct: Ciphertext, r: int, keys: RotationKeys, trace: OpTrace,
                   params: CkksParams) -> Ciphertext:
    """Full rotation (automorphism + complete key switch), trace-counted."""
    if r == 0:
        return ct
    rot = RotationIndex(r, params.ring_dim)
    swk = keys.get(r, hoisted=False)
    trace.key_offsets.add(r)
    c0r = apply_rotation(ct.c0, rot)
    c1r = apply_rotation(ct.c1, rot)
    digits = _hoist_traced(c1r, trace, params)
    u0, u1 = _key_switch_traced(digits, swk, trace, params)
    d0 = _moddown_traced(u0, trace, params)
    d1 = _moddown_traced(u1, trace, params)
    return Ciphertext(rns_add(c0r, d0), d1, ct.level, ct.scale)


def lt_bsgs(ct: Ciphertext, dm: DiagMatrix, keys: RotationKeys,
            params: CkksParams) -> tuple[Ciphertext, OpTrace]:
    """Two-layer split with full rotations; products stay over Q."""
    plan = dm.plan
    if plan.method != LtMethod.BSGS:
        raise PlanMismatch("plan is not bsgs")
    n1, n2 = plan.factors
    trace = OpTrace()
    q_limbs = params.basis.level_count
    baby = [ct]
    for i in range(1, n1):
        baby.append(_rotate_traced(ct, i, keys, trace, params))
    acc: Ciphertext | None = None
    for j in range(n2):
        inner: Ciphertext | None = None
        for i in range(n1):
            term = pt_ct_mult(dm.diagonals[n1 * j + i], baby[i])
            trace.cwise_mult_limbs += 2 * q_limbs
            inner = term if inner is None else _add_ct_unchecked(inner, term)
        rotated = _rotate_traced(inner, n1 * j, keys, trace, params)
        acc = rotated if acc is None else _add_ct_unchecked(acc, rotated)
    return rescale_ct(acc, params), trace


def _add_ct_unchecked(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    return Ciphertext(rns_add(a.c0, b.c0), rns_add(a.c1, b.c1), a.level, a.scale)


def lt_dh_bsgs(ct: Ciphertext, dm: DiagMatrix, keys: RotationKeys,
               params: CkksParams) -> tuple[Ciphertext, OpTrace]:
    """Two-layer split, hoisted in both layers, inner ModDowns delayed.

    One decomposition serves every baby rotation; each giant step past
    j=0 pays one ModDown and one Decompose on the accumulated inner sum.
    """
    plan = dm.plan
    if plan.method != LtMethod.DH_BSGS:
        raise PlanMismatch("plan is not dh-bsgs")
    n1, n2 = plan.factors
    trace = OpTrace()
    limbs = _pq_limb_count(params)
    digits0 = _hoist_traced(ct.c1, trace, params)
    a0 = raise_to_pq(ct.c0, params.basis)
    b0 = raise_to_pq(ct.c1, params.basis)
    a = [a0]
    b = [b0]
    for i in range(1, n1):
        rot = RotationIndex(i, params.ring_dim)
        swk = keys.get(i, hoisted=True)
        trace.key_offsets.add(i)
        u0, u1 = _key_switch_traced(digits0, swk, trace, params)
        a.append(apply_rotation(rns_add(a0, u0), rot))
        b.append(apply_rotation(u1, rot))
    acc = None
    for j in range(n2):
        inner = None
        for i in range(n1):
            term = _mul_pair(dm.diagonals[n1 * j + i], (a[i], b[i]), trace, limbs)
            inner = term if inner is None else _pair_add(inner, term)
        if j == 0:
            acc = inner
            continue
        u0, u1 = inner
        u1_down = _moddown_traced(u1, trace, params)
        d = _hoist_traced_from_q(u1_down, trace, params)
        rot = RotationIndex(n1 * j, params.ring_dim)
        swk = keys.get(n1 * j, hoisted=True)
        trace.key_offsets.add(n1 * j)
        v0, v1 = _key_switch_traced(d, swk, trace, params)
        acc = _pair_add(acc, _pair_rotate((rns_add(u0, v0), v1), rot))
    out = _finish(acc, ct.scale * dm.diagonals[0].scale, ct.level, trace, params)
    return out, trace


def _hoist_traced_from_q(p: RnsPoly, trace: OpTrace, params: CkksParams):
    trace.decompose += 1
    return hoist_digits(p, params.basis)


def lt_th_bsgs(ct: Ciphertext, dm: DiagMatrix, keys: RotationKeys,
               params: CkksParams) -> tuple[Ciphertext, OpTrace]:
    """Three-layer split with hoisting across all layers.

    Layer structure: inner offsets i < n1 each pay ModDown + Decompose so
    the middle layer can key-switch them; middle offsets n1*j reuse those
    digit sets; outer offsets n1*n2*k behave like giant steps with the
    ModDown delayed onto accumulated sums. Degenerate factors collapse
    loops cleanly (n3 = 1 reduces to the double-hoisted route).
    """
    plan = dm.plan
    if plan.method != LtMethod.TH_BSGS:
        raise PlanMismatch("plan is not th-bsgs")
    n1, n2, n3 = plan.factors
    trace = OpTrace()
    limbs = _pq_limb_count(params)
    digit_sets = [_hoist_traced(ct.c1, trace, params)]
    a0 = raise_to_pq(ct.c0, params.basis)
    b0 = raise_to_pq(ct.c1, params.basis)
    a = {0: a0}
    b = {0: b0}
    for i in range(1, n1):
        rot = RotationIndex(i, params.ring_dim)
        swk = keys.get(i, hoisted=True)
        trace.key_offsets.add(i)
        u0, u1 = _key_switch_traced(digit_sets[0], swk, trace, params)
        a[i] = apply_rotation(rns_add(a0, u0), rot)
        b[i] = apply_rotation(u1, rot)
        b_down = _moddown_traced(b[i], trace, params)
        digit_sets.append(_hoist_traced_from_q(b_down, trace, params))
    for j in range(1, n2):
        rot = RotationIndex(n1 * j, params.ring_dim)
        swk = keys.get(n1 * j, hoisted=True)
        trace.key_offsets.add(n1 * j)
        for i in range(n1):
            v0, v1 = _key_switch_traced(digit_sets[i], swk, trace, params)
            a[n1 * j + i] = apply_rotation(rns_add(a[i], v0), rot)
            b[n1 * j + i] = apply_rotation(v1, rot)
    acc = None
    for m in range(n1 * n2):
        term = _mul_pair(dm.diagonals[m], (a[m], b[m]), trace, limbs)
        acc = term if acc is None else _pair_add(acc, term)
    for k in range(1, n3):
        u = None
        base = n1 * n2 * k
        for m in range(n1 * n2):
            term = _mul_pair(dm.diagonals[base + m], (a[m], b[m]), trace, limbs)
            u = term if u is None else _pair_add(u, term)
        u0, u1 = u
        u1_down = _moddown_traced(u1, trace, params)
        d = _hoist_traced_from_q(u1_down, trace, params)
        rot = RotationIndex(base, params.ring_dim)
        swk = keys.get(base, hoisted=True)
        trace.key_offsets.add(base)
        v0, v1 = _key_switch_traced(d, swk, trace, params)
        acc = _pair_add(acc, _pair_rotate((rns_add(u0, v0), v1), rot))
    out = _finish(acc, ct.scale * dm.diagonals[0].scale, ct.level, trace, params)
    return out, trace


_EVALUATORS = {
    LtMethod.DIAGONAL: lt_diagonal,
    LtMethod.BSGS: lt_bsgs,
    LtMethod.DH_BSGS: lt_dh_bsgs,
    LtMethod.TH_BSGS: lt_th_bsgs,
}


def evaluate_lt(ct: Ciphertext, dm: DiagMatrix, keys: RotationKeys,
                params: CkksParams) -> tuple[Ciphertext, OpTrace]:
    return _EVALUATORS[dm.plan.method](ct, dm, keys, params)


def lt_equivalence_check(f_matrix: np.ndarray, v: np.ndarray,
                         params: CkksParams, plans: list[LtPlan],
                         seed: int = 0) -> dict:
    """Run every plan on identical inputs and report pairwise differences."""
    from .ckks import encrypt, keygen

    rng = np.random.default_rng(seed)
    sk, pk = keygen(params, rng)
    n = plans[0].n
    reps = params.slots // n
    tiled = np.tile(np.asarray(v, dtype=np.float64), reps)
    ct = encrypt(encode(tiled, params), pk, params, rng)
    expected = np.tile(f_matrix @ np.asarray(v), reps)
    outputs = {}
    traces = {}
    ciphertexts = {}
    for plan in plans:
        keys = generate_lt_keys(sk, plan, params, rng)
        dm = diagonalize(f_matrix, plan, params)
        out, trace = evaluate_lt(ct, dm, keys, params)
        outputs[plan.method.value] = decode(decrypt(out, sk), params)
        traces[plan.method.value] = trace
        ciphertexts[plan.method.value] = out
    report = {
        "errors": {
            name: float(np.max(np.abs(vec - expected)))
            for name, vec in outputs.items()
        },
        "pairwise": {},
        "traces": traces,
        "outputs": outputs,
        "ciphertexts": ciphertexts,
    }
    names = sorted(outputs)
    for x in range(len(names)):
        for y in range(x + 1, len(names)):
            diff = float(np.max(np.abs(outputs[names[x]] - outputs[names[y]])))
            report["pairwise"][f"{names[x]}|{names[y]}"] = diff
    return report
