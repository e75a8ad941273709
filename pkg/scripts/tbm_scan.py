"""Richardson scan of the Minkowski TBM(0, 2) margins over grid resolution.

Runs the placements of a config (default ``configs/tbm_richardson.json``) at
each resolution pair ``[r, 2r]`` and prints the worst direct and
extrapolated margins next to the tolerance ``C h``.

    python scripts/tbm_scan.py --resolutions 16 32 64 --trials 20
"""

import argparse
import time
from pathlib import Path

from lorentz_bm.experiment import ExperimentConfig, run_experiment

HERE = Path(__file__).parent


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(HERE / "configs" / "tbm_richardson.json"))
    p.add_argument("--resolutions", type=int, nargs="+", default=[16, 32, 64])
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    args = p.parse_args()

    cfg = ExperimentConfig.load(args.config)
    if args.trials:
        cfg.measures.trials = args.trials
    cfg.tol_model = "richardson"
    C = cfg.conditions[0].C
    print(f"{'r':>5} {'h':>8} {'tol':>8} {'worst(r)':>10} {'worst(2r)':>10} {'extrap':>10} {'pass':>5} {'sec':>6}")
    for r in args.resolutions:
        cfg.resolutions = [r, 2 * r]
        start = time.perf_counter()
        res = run_experiment(cfg, jobs=args.jobs)
        h = (cfg.space.grid.hi[0] - cfg.space.grid.lo[0]) / r
        worst = {k: min(row.margin for row in res.rows if row.resolution == k) for k in (r, 2 * r, 0)}
        print(f"{r:>5} {h:>8.4f} {C * h:>8.4f} {worst[r]:>10.4f} {worst[2 * r]:>10.4f} {worst[0]:>10.4f} "
              f"{str(res.passed):>5} {time.perf_counter() - start:>6.1f}")


if __name__ == "__main__":
    main()
