"""Independent reference evaluation of the bound formulas.

Deliberately written without numpy and without importing anything from the
package under test: plain math, different algebraic arrangement. The test
suite compares the library's calculators against these on random inputs.
"""

import math


def ref_zeta_vc(N, d_vc, delta, B):
    # B * sqrt((1/N) * (1 + log(4 (2N)^d / delta))), expanded term by term
    inner = 1.0 + math.log(4.0) + d_vc * (math.log(2.0) + math.log(N)) - math.log(delta)
    return B * math.sqrt(inner / N)


def ref_zeta_rademacher(N, R_N, delta, B):
    return 2.0 * B * R_N + B * math.sqrt(math.log(1.0 / delta) / (2.0 * N))


def ref_multiplier_bound(B, xi):
    return B / xi


def ref_gap_estimate(zetas, Delta, M, nu):
    zeta_bar = zetas[0]
    for z in zetas[1:]:
        if z > zeta_bar:
            zeta_bar = z
    return (1.0 + Delta) * (M * nu + zeta_bar)


def ref_empirical_rademacher_exact(rows):
    """Exact expectation by enumerating all 2^N sign vectors (tiny N only)."""
    n = len(rows[0])
    total = 0.0
    for mask in range(2 ** n):
        signs = [1.0 if (mask >> i) & 1 else -1.0 for i in range(n)]
        best = max(sum(s * a for s, a in zip(signs, row)) / n for row in rows)
        total += best
    return total / (2 ** n)
