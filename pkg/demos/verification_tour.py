"""Monte Carlo checks of the limit theory on the i.i.d. and Cantor processes."""

from epl.procgen import ProcessSpec
from epl.verify import LipschitzFn, bridge_covariance, clt_check, cov_kernel, moment4_scan, smoothing_trend

if __name__ == "__main__":
    iid, cantor = ProcessSpec.iid_uniform(), ProcessSpec.cantor_linear()
    ident = LipschitzFn.identity()

    for name, spec in (("iid", iid), ("cantor", cantor)):
        rep = clt_check(spec, ident, 4096, 1000, master_seed=1)
        print(f"CLT {name:>6}: sigma2_hat {rep.sigma2_hat:.4f}  KS {rep.ks:.4f}  pass {rep.passed}")

    pts = [0.25, 0.5, 0.75]
    cov = cov_kernel(iid, pts, 1024, 2000, master_seed=2, expected=bridge_covariance(pts))
    print("\ncovariance of U_n on {0.25, 0.5, 0.75}^2 (iid):")
    print(cov.empirical.round(4))

    m4 = moment4_scan(cantor, ident, [2**p for p in range(6, 13)], 1000, master_seed=3)
    print(f"\nCantor fourth-moment ratios {[round(r, 4) for r in m4.ratios]} slope {m4.slope:.4f}")

    tr = smoothing_trend(iid, 4096, [4, 16, 64], 100, master_seed=4)
    print("median sup|U_n - U_n^(m)| for m = 4, 16, 64:", [round(v, 4) for v in tr.medians])
