"""Optimize the protocol at one distance and print the security breakdown."""

from tfqds import SecurityBudget, SystemParams, optimize

DISTANCE_KM = 100.0


def main() -> None:
    res = optimize(SystemParams(distance_km=DISTANCE_KM), SecurityBudget(), seed=0)
    r = res.report
    print(f"distance {DISTANCE_KM:g} km, {res.evaluations} objective evaluations")
    print(f"protocol: w={res.proto.w:.4g} v={res.proto.v:.4g} u={res.proto.u:.4g} "
          f"p_Z={res.proto.p_Z:.4g} p_s={res.proto.p_s:.4g}")
    print(f"pool {r.n_pool:.4g} bits, L = {r.L}, {r.n_bits:.4g} signable bits")
    print(f"signature rate R = {r.R:.4g} per pulse pair")
    print(f"robust {r.P_robust:.2g}, repudiation {r.P_repudiation:.2g}, forge {r.P_forge:.2g}")


if __name__ == "__main__":
    main()
