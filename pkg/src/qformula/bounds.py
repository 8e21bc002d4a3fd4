"""Lower-bound and counting arithmetic.

Element Distinctness, exhaustive subfunction counting over a variable
partition, the branch-count sum log(sigma)/loglog(sigma), and the
sign-assignment counting bounds (Warren's estimate and its plug-in for
quantum circuits of a given size).  All logarithms are base 2 so reports are
reproducible; binomials use exact integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class BooleanFunction:
    """An n-variable Boolean function given by an evaluator over bit tuples."""

    n: int
    fn: object
    name: str = "f"

    def __call__(self, bits) -> int:
        bits = tuple(int(b) for b in bits)
        if len(bits) != self.n:
            raise ValueError(f"{self.name} takes {self.n} bits, got {len(bits)}")
        return int(self.fn(bits)) & 1


SUPPORTED_ELL = (2, 4, 8, 16)


def ed_function(ell: int) -> BooleanFunction:
    """Element Distinctness on ell strings of 2*log2(ell) bits each.

    Returns 1 iff the ell strings are pairwise distinct; n = 2*ell*log2(ell).
    """
    if ell not in SUPPORTED_ELL:
        raise ValueError(f"ell must be one of {SUPPORTED_ELL}")
    logl = ell.bit_length() - 1
    width = 2 * logl
    n = ell * width

    def fn(bits):
        vals = []
        for j in range(ell):
            v = 0
            for k in range(width):
                v = (v << 1) | bits[j * width + k]
            vals.append(v)
        return 1 if len(set(vals)) == ell else 0

    return BooleanFunction(n=n, fn=fn, name=f"ED_{n}")


def majority3() -> BooleanFunction:
    return BooleanFunction(3, lambda bits: 1 if sum(bits) >= 2 else 0, "MAJ3")


@dataclass
class PartitionSpec:
    """Disjoint variable blocks covering {0, ..., n-1}."""

    n: int
    blocks: list[list[int]]

    def __post_init__(self):
        flat = [v for blk in self.blocks for v in blk]
        if sorted(flat) != list(range(self.n)):
            raise ValueError("blocks must partition the variable set")
        if any(len(blk) == 0 for blk in self.blocks):
            raise ValueError("blocks must be nonempty")


def ed_partition(ell: int) -> PartitionSpec:
    """The string partition of ED: block j holds the bits of string j."""
    f = ed_function(ell)
    width = f.n // ell
    return PartitionSpec(
        n=f.n, blocks=[list(range(j * width, (j + 1) * width)) for j in range(ell)]
    )


@dataclass
class SubfunctionCount:
    value: int
    exact: bool
    block: list[int]
    samples: int


def subfunction_count(
    f: BooleanFunction,
    partition: PartitionSpec,
    j: int,
    mode: str = "exhaustive",
    samples: int = 1000,
    seed: int = 0,
) -> SubfunctionCount:
    """Number of distinct subfunctions on block j over outside assignments.

    Exhaustive mode enumerates every assignment of the outside variables and
    collects the truth table of the induced function on the block; sampled
    mode draws random outside assignments and reports a lower bound.
    """
    if partition.n != f.n:
        raise ValueError("partition does not match the function arity")
    block = sorted(partition.blocks[j])
    outside = [v for v in range(f.n) if v not in set(block)]
    nb, no = len(block), len(outside)
    if mode == "exhaustive":
        if no > 24 or nb > 16:
            raise ValueError(
                f"exhaustive budget exceeded: {no} outside vars, {nb} block vars"
            )
        taus = range(1 << no)
        exact = True
        n_samples = 1 << no
    elif mode == "sampled":
        import random

        rng = random.Random(seed)
        taus = [rng.getrandbits(no) if no else 0 for _ in range(samples)]
        exact = False
        n_samples = samples
    else:
        raise ValueError("mode must be 'exhaustive' or 'sampled'")
    tables = set()
    bits = [0] * f.n
    for tau in taus:
        for i, v in enumerate(outside):
            bits[v] = (tau >> (no - 1 - i)) & 1
        table = 0
        for a in range(1 << nb):
            for i, v in enumerate(block):
                bits[v] = (a >> (nb - 1 - i)) & 1
            table = (table << 1) | f(bits)
        tables.add(table)
    return SubfunctionCount(
        value=len(tables), exact=exact, block=block, samples=n_samples
    )


def ed_sigma_lower(ell: int) -> dict:
    """Exact binomial C(ell^2, ell-1), the power ell^(ell-1), and their order."""
    if ell < 2:
        raise ValueError("ell must be at least 2")
    binom = math.comb(ell * ell, ell - 1)
    power = ell ** (ell - 1)
    if not binom > power:
        raise AssertionError(f"C({ell}^2,{ell}-1) = {binom} is not above {power}")
    return {"ell": ell, "binom": binom, "power": power, "strict": True}


@dataclass
class NechiporukReport:
    sigmas: list[int]
    terms: list[float]
    skipped: list[int] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(self.terms))


def nechiporuk_bound(sigmas) -> NechiporukReport:
    """Sum of log2(sigma)/log2(log2(sigma)) over blocks with sigma >= 4.

    Blocks with sigma < 4 make the denominator vanish or turn negative under
    the asymptotic notation and are skipped (listed in the report).
    """
    sigmas = [int(s) for s in sigmas]
    if any(s < 1 for s in sigmas):
        raise ValueError("every sigma must be at least 1")
    terms, skipped = [], []
    for i, s in enumerate(sigmas):
        if s < 4:
            skipped.append(i)
            continue
        lg = math.log2(s)
        terms.append(lg / math.log2(lg))
    return NechiporukReport(sigmas=sigmas, terms=terms, skipped=skipped)


def warren_count(d: int, m: int, t: int) -> float:
    """log2 of Warren's bound (4*e*d*m/t)^t on consistent sign-assignments.

    ``d`` bounds the polynomial degrees, ``m`` counts polynomials and ``t``
    counts real variables.
    """
    if d < 1 or m < 1 or t < 1:
        raise ValueError("d, m, t must all be at least 1")
    return float(t * math.log2(4.0 * math.e * d * m / t))


def appendix_count(n: int, N: int, d: int) -> dict:
    """Counting bound for n-variable functions from size-N circuits of d-bit gates.

    Splits into the number of gate-interconnection equivalence classes,
    at most (dN)^(dN), and Warren's bound on sign-assignments with degree 2N,
    2^(n+1) polynomials and 2*mu real gate-entry variables, mu = d*d*N.
    Returns all three as log2 values; warns (in the result) when the n <= N
    hypothesis fails, but still computes.
    """
    if n < 1 or N < 1 or d < 1:
        raise ValueError("n, N, d must all be at least 1")
    mu = d * d * N
    classes_log2 = float(d * N * math.log2(d * N))
    sign_log2 = warren_count(d=2 * N, m=2 ** (n + 1), t=2 * mu)
    return {
        "n": n,
        "N": N,
        "d": d,
        "mu": mu,
        "log2_equivalence_classes": classes_log2,
        "log2_sign_assignments": sign_log2,
        "log2_total": classes_log2 + sign_log2,
        "hypothesis_ok": n <= N,
    }
