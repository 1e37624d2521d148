"""Sweep market parameters and chart how equilibrium revenue responds.

Three curves: seller reward falls as bandwidth cost rises, falls as more
sellers compete for the same buyers, and rises with the number of buyers.
"""

from bwmarket import ExperimentConfig, SweepSpec, run_sweep


def show(title, cfg, spec):
    _, aggregate = run_sweep(cfg, spec)
    print(title)
    peak = max(mean for mean, _ in aggregate.values())
    for value, (mean, sd) in aggregate.items():
        bar = "#" * int(round(40 * mean / peak)) if peak > 0 else ""
        print(f"  {spec.parameter}={value:<5} {mean:8.3f} +- {sd:6.3f}  {bar}")
    print()


def dense_config(**kwargs):
    cfg = ExperimentConfig(episodes=1, **kwargs)
    cfg.ranges["similarity"] = (0.85, 1.0)
    cfg.seeds = list(range(10))
    return cfg


def main():
    show("average seller reward vs bandwidth cost",
         dense_config(num_uavs=3, num_rsus=2),
         SweepSpec("c", [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0], list(range(10))))

    show("average seller reward vs number of sellers (15 buyers)",
         dense_config(num_uavs=15, num_rsus=2),
         SweepSpec("J", [2, 3, 4, 5, 6], list(range(10))))

    show("average seller reward vs number of buyers (3 sellers)",
         dense_config(num_uavs=3, num_rsus=3),
         SweepSpec("I", [3, 6, 9, 12, 15], list(range(10))))


if __name__ == "__main__":
    main()
