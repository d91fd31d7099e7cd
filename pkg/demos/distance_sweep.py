"""Signature rate and block length versus distance, optimized at each point."""

from tfqds import SecurityBudget, SweepSpec, sweep

GRID = [0.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 320.0, 340.0]


def main() -> None:
    print(f"{'km':>5} {'L':>10} {'R':>12}")
    for row in sweep(SweepSpec("distance_km", GRID), SecurityBudget(), N=1e13):
        r = row.report
        L = r.L if r.feasible else "-"
        print(f"{row.value:5.0f} {L:>10} {r.R:12.4g}")


if __name__ == "__main__":
    main()
