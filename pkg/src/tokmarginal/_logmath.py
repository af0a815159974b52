import math
from typing import Iterable

NEG_INF = float("-inf")


def logsumexp(values: Iterable[float]) -> float:
    vals = list(values)
    if not vals:
        return NEG_INF
    m = max(vals)
    if m == NEG_INF:
        return NEG_INF
    if m == float("inf"):
        return m
    return m + math.log(math.fsum(math.exp(v - m) for v in vals))


def logaddexp(a: float, b: float) -> float:
    return logsumexp((a, b))


def log1mexp(x: float) -> float:
    """log(1 - exp(x)) for x <= 0, accurate on both sides of -log 2."""
    if x > 0:
        raise ValueError("log1mexp requires x <= 0")
    if x == 0:
        return NEG_INF
    if x > -math.log(2):
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))
