"""
Learner pairs, staleness metrics and the gradients of the pair constraints.

Pairs are enumerated lexicographically with 1-based learner ids, so for four
learners the pair matrix is (1,2), (1,3), (1,4), (2,3), (2,4), (3,4).

The multiplier vectors u and u' are the gradients with respect to tau_k of
the two halves of every relaxed staleness constraint

    sum_n mu_n  * (-z + tau_first(n) - tau_second(n))
    sum_n mu'_n * (-z - tau_first(n) + tau_second(n))

`u_vectors_direct` evaluates them by signing every pair; `u_vectors_indexed`
uses the closed block-index form. Both sum the same terms with math.fsum, so
their results agree exactly.
"""
import math
from typing import List, Sequence, Tuple

from app.core.exceptions import InvalidMultipliers, InvalidScenario
from app.schemas import PairMatrix, PairMultipliers, StalenessReport


def pair_count(num_learners: int) -> int:
    """N = K(K-1)/2."""
    return num_learners * (num_learners - 1) // 2


def pair_matrix(num_learners: int) -> PairMatrix:
    """All pairs (k, l), k < l, in lexicographic order."""
    if num_learners < 1:
        raise InvalidScenario(f"At least one learner is required, got K={num_learners}")
    pairs = tuple(
        (k, l)
        for k in range(1, num_learners + 1)
        for l in range(k + 1, num_learners + 1)
    )
    return PairMatrix(num_learners=num_learners, pairs=pairs)


def staleness_report(taus: Sequence[float], pm: PairMatrix) -> StalenessReport:
    """Per-pair |tau_k - tau_l|, their maximum and their mean over the N pairs."""
    if len(taus) != pm.num_learners:
        raise InvalidScenario(
            f"Got {len(taus)} update counts for a pair matrix over {pm.num_learners} learners"
        )
    per_pair = tuple(abs(float(taus[k - 1]) - float(taus[l - 1])) for k, l in pm.pairs)
    if not per_pair:
        return StalenessReport()
    return StalenessReport(
        max_staleness=max(per_pair),
        avg_staleness=math.fsum(per_pair) / len(per_pair),
        per_pair=per_pair,
    )


def _check_multipliers(pm: PairMatrix, mult: PairMultipliers) -> None:
    if len(mult.mu) != pm.size or len(mult.mu_prime) != pm.size:
        raise InvalidMultipliers(
            f"Expected {pm.size} pair multipliers, got mu={len(mult.mu)}, mu'={len(mult.mu_prime)}"
        )
    if any(v < 0 for v in mult.mu) or any(v < 0 for v in mult.mu_prime):
        raise InvalidMultipliers("Pair multipliers must be non-negative")


def u_vectors_direct(pm: PairMatrix, mult: PairMultipliers) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """Sign-sum of the pair multipliers over the pair matrix."""
    _check_multipliers(pm, mult)
    u_terms: List[List[float]] = [[] for _ in range(pm.num_learners)]
    u_prime_terms: List[List[float]] = [[] for _ in range(pm.num_learners)]
    for n, (first, second) in enumerate(pm.pairs):
        u_terms[first - 1].append(mult.mu[n])
        u_terms[second - 1].append(-mult.mu[n])
        u_prime_terms[first - 1].append(-mult.mu_prime[n])
        u_prime_terms[second - 1].append(mult.mu_prime[n])
    return (
        tuple(math.fsum(terms) for terms in u_terms),
        tuple(math.fsum(terms) for terms in u_prime_terms),
    )


# --------------------------------------------------------------------------------
# Closed block-index form
# --------------------------------------------------------------------------------


def block_start(num_learners: int, k: int) -> int:
    """First 1-based pair position whose first element is learner k."""
    return 1 + sum(num_learners - m for m in range(1, k))


def block_end(num_learners: int, k: int) -> int:
    """Last 1-based pair position whose first element is learner k (< start when empty)."""
    return sum(num_learners - m for m in range(1, k + 1))


def uncorrected_block_start(num_learners: int, k: int) -> int:
    """
    The start index as usually printed, 1 + sum_{m=0}^{k-1} (K - m).

    Kept for reference only: it places learner 1's block at K + 1, past the
    pairs that actually start with learner 1.
    """
    return 1 + sum(num_learners - m for m in range(0, k))


def second_positions(num_learners: int, k: int) -> List[int]:
    """1-based pair positions whose second element is learner k: n_j + (k - j - 1) for j < k."""
    return [block_start(num_learners, j) + (k - j - 1) for j in range(1, k)]


def u_vectors_indexed(num_learners: int, mult: PairMultipliers) -> Tuple[Tuple[float, ...], Tuple[float, ...]]:
    """
    u_k  =  sum_{n=n_k}^{N_k} mu_n  - sum_{j<k} mu_{n_j + k - j - 1}
    u'_k = -sum_{n=n_k}^{N_k} mu'_n + sum_{j<k} mu'_{n_j + k - j - 1}
    """
    pm = pair_matrix(num_learners)
    _check_multipliers(pm, mult)
    u: List[float] = []
    u_prime: List[float] = []
    for k in range(1, num_learners + 1):
        block = range(block_start(num_learners, k), block_end(num_learners, k) + 1)
        seconds = second_positions(num_learners, k)
        u.append(math.fsum([mult.mu[n - 1] for n in block] + [-mult.mu[n - 1] for n in seconds]))
        u_prime.append(
            math.fsum([-mult.mu_prime[n - 1] for n in block] + [mult.mu_prime[n - 1] for n in seconds])
        )
    return tuple(u), tuple(u_prime)
