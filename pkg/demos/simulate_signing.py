"""Monte Carlo signing rounds and adversary experiments at the reference point."""

import json

from tfqds import REFERENCE_START, ProtocolParams, SecurityBudget, SystemParams, simulate


def main() -> None:
    proto = ProtocolParams(**dict(REFERENCE_START, N=1e13))
    summary = simulate(SystemParams(distance_km=50), proto, SecurityBudget(),
                       trials=10, seed=1, adversary_trials=2000)
    print(json.dumps(summary.to_dict(), indent=2))


if __name__ == "__main__":
    main()
