"""Walk the dyadic chain for one sample path and one point t.

Shows the quantile partition, the depth rule, the chain indices across
levels and the telescoping terms that reassemble F_n(t) - F_n^(m)(t).
"""

import math

from epl.chaining import build_partition, chain_decomposition, choose_chain_depth, psi_difference_l1
from epl.distmodel import CantorCdf
from epl.procgen import ProcessSpec, generate

if __name__ == "__main__":
    model = CantorCdf()
    n, m, eps, t = 10_000, 10, 0.1, 0.77
    part = build_partition(model, m)
    x = generate(ProcessSpec.cantor_linear(), n, master_seed=3).values
    K = choose_chain_depth(n, part.h, eps)
    print("partition points:", " ".join(f"{p:.4f}" for p in part.points))
    print(f"depth K = {K}: sqrt(n) h / 2^K = {math.sqrt(n) * part.h / 2**K:.5f} in [{eps / 16}, {eps / 8}]")

    ct = chain_decomposition(x, part, t, K)
    print(f"\nt = {t} lies in cell j = {ct.j}; chain indices l(k, t):", ct.indices)
    for k, term in enumerate(ct.terms, start=1):
        print(f"  level {k:>2}: term {term:+.3e}   sqrt(n)-centered {ct.centered[k - 1]:+.3f}")
    print(f"  boundary : {ct.boundary:+.3e}")
    print(f"target F_n(t) - F_n^(m)(t) = {ct.target:+.6e}, telescoping residual {ct.residual:.1e}")
    print(f"sandwich violations: {ct.sandwich_violations}")

    print("\nL1 size of kernel differences against 3h/2^k:")
    for k in (1, 4, 8):
        worst = max(float(psi_difference_l1(part, j, k, l)) for j in range(1, m + 1) for l in range(2**k + 1))
        print(f"  k={k}: max {worst:.3e}  bound {3 * part.h / 2**k:.3e}")
