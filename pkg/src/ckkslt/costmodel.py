"""Closed-form complexity and memory-traffic models.

Operation counts per method (Decompose, ModDown, coefficient-wise limb
multiplies, switching-key limbs) and the six-phase off-chip / on-chip
memory model of the streaming datapath, plus factorization and
parallelism searches and the key-size/compute trade-off sweep.

Two counting conventions exist for the three-layer method: the published
summary table charges n1+n3 Decompose and n1+n3+1 ModDown, while a line
count of the algorithm (zero-offset rotations skipped) gives n1+n3-1 and
n1+n3. The executable evaluators realize the latter, so it is the
default here; the other is selectable per call.

Switching-key byte convention: a key is a pair of polynomials, so
key_bytes = limbs * 2 * N * w / 8. Module constant KEY_PAIR_FACTOR
documents the pair multiplier.

Non-integer division terms in the memory table evaluate as ceilings,
matching the iteration-count reading of the phase descriptions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

KEY_PAIR_FACTOR = 2

PHASES = (1, 2, 3, 4, 5, 6)
CATEGORIES = ("ntt", "lt_matrix", "switching_key", "poly_read", "poly_write")


class ConfigOutOfRange(ValueError):
    """Parallelism parameter outside its loop extent."""


class Infeasible(ValueError):
    """No parallelism configuration fits the on-chip budget."""


class BadFactors(ValueError):
    """Factorization incompatible with the method or dimension."""


@dataclass(frozen=True)
class HeParams:
    """Shape-level parameters: no arithmetic tables, safe at any size."""

    ring_dim: int
    levels: int  # L + 1
    alpha: int
    word_bits: int = 54
    n: int = 0  # transform dimension; defaults to N/2

    def __post_init__(self):
        if self.n == 0:
            object.__setattr__(self, "n", self.ring_dim // 2)
        if self.n & (self.n - 1) or self.n > self.ring_dim // 2:
            raise BadFactors("n must be a power of two <= N/2")

    @property
    def beta(self) -> int:
        return -(-self.levels // self.alpha)

    @property
    def pq_limbs(self) -> int:
        return self.levels + self.alpha

    @property
    def limb_bytes(self) -> int:
        bits = self.ring_dim * self.word_bits
        assert bits % 8 == 0
        return bits // 8


# evaluation parameter sets (N, L+1, alpha, w) with n = N/2
SET_A = HeParams(2**13, 5, 5, 54)
SET_B = HeParams(2**15, 16, 8, 54)
SET_C = HeParams(2**16, 32, 12, 54)
NAMED_SETS = {"set-a": SET_A, "set-b": SET_B, "set-c": SET_C}

# published per-set factorizations and datapath parallelism
# ((n1, n2, n3), (m1..m6), (l1..l5), dp)
REFERENCE_CONFIGS = {
    "set-a": ((8, 64, 8), (7, 7, 63, 1, 103, 8), (5, 10, 1, 1, 5), 2),
    "set-b": ((16, 128, 8), (4, 1, 11, 1, 25, 4), (2, 12, 1, 1, 1), 8),
    "set-c": ((16, 128, 16), (1, 1, 4, 1, 12, 1), (1, 1, 1, 1, 1), 16),
}


@dataclass(frozen=True)
class ParallelismConfig:
    m1: int = 1
    m2: int = 1
    m3: int = 1
    m4: int = 1
    m5: int = 1
    m6: int = 1
    l1: int = 1
    l2: int = 1
    l3: int = 1
    l4: int = 1
    l5: int = 1
    dp: int = 2

    def ms(self):
        return (self.m1, self.m2, self.m3, self.m4, self.m5, self.m6)

    def ls(self):
        return (self.l1, self.l2, self.l3, self.l4, self.l5)


def reference_config(name: str) -> tuple[HeParams, tuple[int, int, int], ParallelismConfig]:
    params = NAMED_SETS[name]
    factors, ms, ls, dp = REFERENCE_CONFIGS[name]
    cfg = ParallelismConfig(*ms, *ls, dp=dp)
    return params, factors, cfg


def validate_config(params: HeParams, factors, cfg: ParallelismConfig):
    n1, n2, n3 = factors
    limbs = params.pq_limbs
    bounds = {
        "m1": max(n1 - 1, 1), "m2": max(n1 - 1, 1), "m3": max(n2 - 1, 1),
        "m4": n1, "m5": n1 * n2, "m6": n3,
    }
    for name, hi in bounds.items():
        val = getattr(cfg, name)
        if not 1 <= val <= hi:
            raise ConfigOutOfRange(f"{name}={val} outside [1, {hi}]")
    for name in ("l1", "l2", "l3", "l4", "l5"):
        val = getattr(cfg, name)
        if not 1 <= val <= limbs:
            raise ConfigOutOfRange(f"{name}={val} outside [1, {limbs}]")


@dataclass
class CostReport:
    method: str
    factors: tuple
    decompose: int
    moddown: int
    cwise_mult_limbs: int
    switching_key_limbs: int
    modmul_total: int = 0

    def key_bytes(self, params: HeParams) -> int:
        return self.switching_key_limbs * KEY_PAIR_FACTOR * params.limb_bytes


def _check_factors(method: str, params: HeParams, factors) -> tuple:
    factors = tuple(factors)
    if method == "diagonal":
        if factors not in ((), (params.n,)):
            raise BadFactors("diagonal takes no factorization")
        return ()
    want = 2 if method in ("bsgs", "dh-bsgs") else 3
    if len(factors) != want or math.prod(factors) != params.n:
        raise BadFactors(f"{method} needs {want} factors multiplying to {params.n}")
    if any(f < 1 for f in factors):
        raise BadFactors("factors must be >= 1")
    return factors


def complexity(method: str, params: HeParams, factors=(),
               convention: str = "algorithm") -> CostReport:
    """Operation counts for one transform evaluation.

    convention: "algorithm" charges the executable line counts for the
    three-layer method; "table" charges the published summary values
    (one Decompose and one ModDown more).
    """
    factors = _check_factors(method, params, factors)
    n = params.n
    beta = params.beta
    limbs = params.pq_limbs
    if method == "diagonal":
        dec, mdown = 1, 2
        cwise = 2 * beta * (n - 1) * limbs + 2 * n * limbs
        keys = beta * (n - 1) * limbs
    elif method == "bsgs":
        n1, n2 = factors
        rot = n1 + n2 - 2
        dec, mdown = rot, 2 * rot
        cwise = 2 * beta * rot * limbs + 2 * n * params.levels
        keys = beta * rot * limbs
    elif method == "dh-bsgs":
        n1, n2 = factors
        dec, mdown = n2, n2 + 1
        cwise = 2 * beta * (n1 + n2 - 2) * limbs + 2 * n * limbs
        keys = beta * (n1 + n2 - 2) * limbs
    elif method == "th-bsgs":
        n1, n2, n3 = factors
        if convention == "table":
            dec, mdown = n1 + n3, n1 + n3 + 1
        else:
            dec, mdown = n1 + n3 - 1, n1 + n3
        cwise = 2 * beta * (n1 + n2 + n3 - 3) * limbs + 2 * n * limbs
        keys = beta * (n1 + n2 + n3 - 3) * limbs
    else:
        raise BadFactors(f"unknown method {method}")
    report = CostReport(method, factors, dec, mdown, cwise, keys)
    report.modmul_total = (
        report.decompose * decompose_modmuls(params)
        + report.moddown * moddown_modmuls(params)
        + report.cwise_mult_limbs * params.ring_dim
    )
    return report


# ---------------------------------------------------------------------------
# modular-multiplication cost constants (documented conventions)


def ntt_limb_modmuls(params: HeParams) -> int:
    n = params.ring_dim
    return (n // 2) * (n.bit_length() - 1)


def _digit_sizes(params: HeParams) -> list[int]:
    sizes = []
    rem = params.levels
    while rem > 0:
        sizes.append(min(params.alpha, rem))
        rem -= params.alpha
    return sizes


def decompose_modmuls(params: HeParams) -> int:
    """One Decompose: input inverse transforms, per-digit conversions,
    forward transforms of the extension limbs."""
    n = params.ring_dim
    total = params.levels * ntt_limb_modmuls(params)
    for k in _digit_sizes(params):
        ext = params.pq_limbs - k
        total += n * k * (1 + ext)
        total += ext * ntt_limb_modmuls(params)
    return total


def moddown_modmuls(params: HeParams) -> int:
    """One ModDown: inverse transforms of all PQ limbs, conversion of the
    special limbs, per-limb scaling, forward transforms back."""
    n = params.ring_dim
    total = params.pq_limbs * ntt_limb_modmuls(params)
    total += n * params.alpha * (1 + params.levels)
    total += n * params.levels
    total += params.levels * ntt_limb_modmuls(params)
    return total


# ---------------------------------------------------------------------------
# factor searches


def _pow2_divisors(n: int) -> list[int]:
    return [1 << k for k in range(n.bit_length()) if (1 << k) <= n]


def _split_two(n: int) -> list[tuple[int, int]]:
    return [(d, n // d) for d in _pow2_divisors(n)]


def _split_three(n: int) -> list[tuple[int, int, int]]:
    out = []
    for a in _pow2_divisors(n):
        for b in _pow2_divisors(n // a):
            out.append((a, b, n // (a * b)))
    return out


def search_factors(method: str, params: HeParams, objective: str = "min_keys"):
    """Pick power-of-two factorizations.

    min_keys minimizes switching-key limbs; min_compute minimizes total
    modular multiplications; pareto returns the full sweep ordered by
    the middle (or giant) factor ascending with one best split each.
    Ties break toward the lexicographically smallest factor tuple.
    """
    n = params.n
    if method == "diagonal":
        return ()
    splits = _split_two(n) if method in ("bsgs", "dh-bsgs") else _split_three(n)
    if objective == "pareto":
        return pareto_factorizations(method, params)
    if objective == "min_keys":
        key = lambda fs: (complexity(method, params, fs).switching_key_limbs, fs)
    elif objective == "min_compute":
        key = lambda fs: (complexity(method, params, fs).modmul_total, fs)
    else:
        raise ValueError(f"unknown objective {objective}")
    return min(splits, key=key)


def pareto_factorizations(method: str, params: HeParams) -> list[tuple]:
    """One point per sweep value: n2 for two-layer splits, the middle
    factor for three-layer splits (outer pair chosen nearly equal,
    smaller factor first)."""
    n = params.n
    out = []
    if method in ("bsgs", "dh-bsgs"):
        for n2 in _pow2_divisors(n):
            out.append((n // n2, n2))
        return out
    for n2 in _pow2_divisors(n):
        rest = n // n2
        best = min(
            ((a, n2, rest // a) for a in _pow2_divisors(rest)),
            key=lambda fs: (complexity(method, params, fs).modmul_total, fs),
        )
        out.append(best)
    return out


# ---------------------------------------------------------------------------
# six-phase memory model


def _ceil(a: int, b: int) -> int:
    return -(-a // b)


def offchip_access(params: HeParams, factors, cfg: ParallelismConfig) -> dict:
    """Off-chip traffic per phase and category, in limbs."""
    validate_config(params, factors, cfg)
    n1, n2, n3 = factors
    n = params.n
    lp = params.levels  # L + 1
    limbs = params.pq_limbs
    beta = params.beta
    c5 = _ceil(n3, cfg.m6)
    c4 = _ceil(n1 * n2, cfg.m5)
    table = {
        1: {
            "ntt": 2 * limbs,
            "lt_matrix": 0,
            "switching_key": 2 * (n1 - 1) * beta * limbs,
            "poly_read": 2 * lp,
            "poly_write": 2 * n1 * limbs,
        },
        2: {
            "ntt": _ceil(n1 - 1, cfg.m1) * limbs,
            "lt_matrix": 0,
            "switching_key": 0,
            "poly_read": (n1 - 1) * limbs,
            "poly_write": (n1 - 1) * beta * limbs,
        },
        3: {
            "ntt": 0,
            "lt_matrix": 0,
            "switching_key": 2 * (n2 - 1) * beta * limbs,
            "poly_read": _ceil(n2 - 1, cfg.m3) * n1 * (beta + 1) * limbs,
            "poly_write": 2 * n1 * n2 * limbs,
        },
        4: {
            "ntt": limbs,
            "lt_matrix": n * limbs,
            "switching_key": 0,
            "poly_read": 2 * (n1 * n2 + (c4 - 1) * n3) * limbs,
            "poly_write": 2 * c4 * n3 * limbs,
        },
        5: {
            "ntt": c5 * limbs,
            "lt_matrix": 0,
            "switching_key": 2 * (n3 - 1) * beta * limbs,
            "poly_read": 2 * (n3 + c5 - 1) * limbs,
            "poly_write": 2 * c5 * limbs,
        },
        6: {
            "ntt": limbs,
            "lt_matrix": 0,
            "switching_key": 0,
            "poly_read": 2 * limbs,
            "poly_write": 2 * lp,
        },
    }
    return table


def peak_onchip(params: HeParams, factors, cfg: ParallelismConfig) -> dict:
    """Peak on-chip residency per phase, in limbs."""
    validate_config(params, factors, cfg)
    lp = params.levels
    limbs = params.pq_limbs
    beta = params.beta
    m1, m2, m3, m4, m5, m6 = cfg.ms()
    l1, l2, l3, l4, l5 = cfg.ls()
    return {
        1: 2 * lp + (beta + 4) * l1 + (4 * beta + 6) * m1 * l1,
        2: m2 * (2 * lp + params.alpha + 2 * beta * l2) + 2 * l2,
        3: 2 * l3 * ((beta + 1) * m4 + 2 * beta * m3 + 2 * m3 * m4),
        4: 6 * m5 * l4 + 5 * l4,
        5: m6 * limbs + (5 * beta * m6 + 2 * m6 + 6) * l5 + 2 * l5,
        6: 2 * limbs,
    }


def total_offchip_limbs(params: HeParams, factors, cfg: ParallelismConfig) -> int:
    table = offchip_access(params, factors, cfg)
    return sum(sum(row.values()) for row in table.values())


def max_peak_limbs(params: HeParams, factors, cfg: ParallelismConfig) -> int:
    return max(peak_onchip(params, factors, cfg).values())


def search_parallelism(params: HeParams, factors, onchip_budget_bytes: int,
                       dp: int = 2) -> ParallelismConfig:
    """Minimize total off-chip limbs subject to every phase peak fitting
    the budget; remaining free parameters then grow as large as the
    budget allows (deterministic greedy, m before l).

    Off-chip traffic depends only on m1, m3, m5, m6 and each of those
    couples to a single phase's peak, so the phases optimize
    independently.
    """
    n1, n2, n3 = factors
    budget_limbs = onchip_budget_bytes // params.limb_bytes
    base = ParallelismConfig(dp=dp)
    if max_peak_limbs(params, factors, base) > budget_limbs:
        raise Infeasible("budget below the minimal-footprint configuration")

    def grows(cfg: ParallelismConfig, name: str, hi: int) -> ParallelismConfig:
        best = cfg
        for val in range(getattr(cfg, name) + 1, hi + 1):
            cand = replace(cfg, **{name: val})
            if max_peak_limbs(params, factors, cand) <= budget_limbs:
                best = cand
            else:
                break
        return best

    cfg = base
    # off-chip-relevant knobs first: larger is never worse for traffic
    cfg = grows(cfg, "m1", max(n1 - 1, 1))
    cfg = grows(cfg, "m3", max(n2 - 1, 1))
    cfg = grows(cfg, "m5", n1 * n2)
    cfg = grows(cfg, "m6", n3)
    # remaining knobs only trade on-chip space
    cfg = grows(cfg, "m2", max(n1 - 1, 1))
    cfg = grows(cfg, "m4", n1)
    for name in ("l1", "l2", "l3", "l4", "l5"):
        cfg = grows(cfg, name, params.pq_limbs)
    return cfg


# ---------------------------------------------------------------------------
# trade-off sweep


@dataclass
class TradeoffPoint:
    method: str
    factors: tuple
    key_limbs: int
    key_bytes: int
    modmul_total: int
    tag: str = ""


def tradeoff_curve(methods, params: HeParams) -> list[TradeoffPoint]:
    """Key-size / compute sweep, one point per factorization, with the
    minimum-memory and best-tradeoff (minimum-compute) points tagged."""
    points: list[TradeoffPoint] = []
    for method in methods:
        if method == "diagonal":
            rep = complexity(method, params)
            points.append(TradeoffPoint(method, (), rep.switching_key_limbs,
                                        rep.key_bytes(params), rep.modmul_total,
                                        "single"))
            continue
        if method == "bsgs":
            # key count and compute both bottom out at a near-square split
            fs = search_factors(method, params, "min_compute")
            rep = complexity(method, params, fs)
            points.append(TradeoffPoint(method, fs, rep.switching_key_limbs,
                                        rep.key_bytes(params), rep.modmul_total,
                                        "single"))
            continue
        sweep = pareto_factorizations(method, params)
        reports = [complexity(method, params, fs) for fs in sweep]
        best_mem = min(range(len(sweep)), key=lambda i: (reports[i].switching_key_limbs, sweep[i]))
        best_cmp = min(range(len(sweep)), key=lambda i: (reports[i].modmul_total, sweep[i]))
        for i, (fs, rep) in enumerate(zip(sweep, reports)):
            tags = []
            if i == best_mem:
                tags.append("min-memory")
            if i == best_cmp:
                tags.append("best-tradeoff")
            points.append(TradeoffPoint(method, fs, rep.switching_key_limbs,
                                        rep.key_bytes(params), rep.modmul_total,
                                        "+".join(tags)))
    return points


TRADEOFF_COLUMNS = ("method", "factors", "key_limbs", "key_bytes", "modmul_total", "tag")


def tradeoff_csv(points: list[TradeoffPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(TRADEOFF_COLUMNS)
    for p in points:
        writer.writerow([p.method, "x".join(map(str, p.factors)), p.key_limbs,
                         p.key_bytes, p.modmul_total, p.tag])
    return buf.getvalue()


def best_tradeoff_ratio(params: HeParams) -> dict:
    """Switching-key ratio between the two-layer and three-layer methods
    at their respective lowest-compute sweep points."""
    dh = [p for p in tradeoff_curve(["dh-bsgs"], params)]
    th = [p for p in tradeoff_curve(["th-bsgs"], params)]
    dh_best = min(dh, key=lambda p: p.modmul_total)
    th_best = [p for p in th if "best-tradeoff" in p.tag][0]
    return {
        "dh_factors": dh_best.factors,
        "th_factors": th_best.factors,
        "dh_key_limbs": dh_best.key_limbs,
        "th_key_limbs": th_best.key_limbs,
        "ratio": dh_best.key_limbs / th_best.key_limbs,
    }
