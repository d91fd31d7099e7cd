"""Tolerable misalignment error at 50 km for two security targets."""

from tfqds import SecurityBudget, SweepSpec, SystemParams, sweep

GRID = [round(0.02 * i, 2) for i in range(13)]


def main() -> None:
    spec = SweepSpec("e_d", GRID, sys=SystemParams(distance_km=50))
    for target in (1e-5, 1e-10):
        rows = sweep(spec, SecurityBudget(eps_target=target), N=1e13)
        feasible = [row.value for row in rows if row.report.feasible]
        print(f"eps_target {target:g}: max e_d {max(feasible) if feasible else None}")
        for row in rows:
            print(f"  e_d {row.value:.2f}  R {row.report.R:.4g}")


if __name__ == "__main__":
    main()
