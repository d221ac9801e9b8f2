# filename: scripts/reproduce_tables.py
"""
Print the pole / uniform-error tables for the three function-approximation
examples shipped in configs/.

- Example 1: z^(-1/2), normalized poles, fit [1e-8, 1], errors on [1e-6, 1].
- Example 2: (0.1 z^(1/2) + z^(-1/2))^(-1) on [1e-6, 1], 7 terms.
- Example 3: (0.1 z^0.4 + z^0.6)^(-1) with the z^(-eta) dictionary, stopped
  at uniform error 5e-2.

Each example runs OGA, improved OGA (every step) and WCGA with the same seed
and reports the reference error next to the final one.

    python scripts/reproduce_tables.py [--only 1 2] [--seed 0]
"""
from __future__ import annotations

import argparse
import concurrent.futures
import logging.config
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

REPO_ROOT = Path(__file__).resolve().parent.parent
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from ratgreedy.domain import GreedyTrace  # noqa: E402
from ratgreedy.experiment import ExperimentConfig, load_config, run_algorithm  # noqa: E402
from ratgreedy.greedy import Algorithm, ImprovedMode  # noqa: E402
from ratgreedy.settings import get_settings  # noqa: E402

# --- Script Configuration ---
CONFIG_DIR = REPO_ROOT / "configs"
EXAMPLES: Dict[str, Tuple[str, Optional[int]]] = {
    # name: (config file, WCGA term budget when it differs from n)
    "1": ("example1.yaml", None),
    "2": ("example2.yaml", None),
    "3": ("example3.yaml", 18),
}
# Reference final uniform errors (OGA, improved OGA, WCGA).
REFERENCE: Dict[str, Dict[str, Optional[float]]] = {
    "1": {"oga": 1.3e0, "improved_oga": 7.7e-2, "wcga": 2.7e-1},
    "2": {"oga": None, "improved_oga": 3.8e-3, "wcga": 2.2e-2},
    "3": {"oga": None, "improved_oga": 2.5e-2, "wcga": 3.9e-2},
}
ALGORITHMS = (Algorithm.OGA, Algorithm.IMPROVED_OGA, Algorithm.WCGA)


# --- Runs ---
def run_example(name: str, seed: int) -> Dict[str, GreedyTrace]:
    """Run all three algorithms on one example config."""
    file_name, wcga_terms = EXAMPLES[name]
    cfg = load_config(CONFIG_DIR / file_name)
    traces: Dict[str, GreedyTrace] = {}
    for algorithm in ALGORITHMS:
        run_cfg: ExperimentConfig = cfg
        if algorithm is Algorithm.WCGA and wcga_terms is not None:
            run_cfg = cfg.model_copy(update={"n": wcga_terms})
        traces[algorithm.value] = run_algorithm(run_cfg, algorithm, seed, ImprovedMode.EVERY_STEP)
    return traces


# --- Printing ---
def format_table(traces: Dict[str, GreedyTrace]) -> List[str]:
    names = list(traces)
    header = f"{'j':>3}" + "".join(f" | {name + ' p_j':>14} {'error':>9}" for name in names)
    lines = [header, "-" * len(header)]
    depth = max(len(t.iterations) for t in traces.values())
    for j in range(depth):
        cells = []
        for name in names:
            its = traces[name].iterations
            if j < len(its):
                cells.append(f" | {its[j].param:>14.4e} {its[j].uniform_error:>9.2e}")
            else:
                cells.append(f" | {'':>14} {'':>9}")
        lines.append(f"{j + 1:>3}" + "".join(cells))
    return lines


def print_summary(name: str, traces: Dict[str, GreedyTrace], elapsed: float) -> None:
    print(f"\n--- Example {name} ({elapsed:.1f} s) ---")
    for line in format_table(traces):
        print(line)
    print()
    for algorithm, trace in traces.items():
        reference = REFERENCE[name].get(algorithm)
        ref_text = f"{reference:.1e}" if reference is not None else "n/a"
        negative = all(p < 0.0 for p in trace.final.poles)
        print(
            f"  {algorithm:<13} terms={len(trace.final):>2} "
            f"final={trace.final_error:.3e} reference={ref_text:>7} "
            f"{'✅' if negative else '❌'} poles negative"
        )


# --- Main Execution ---
def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--only", nargs="+", choices=sorted(EXAMPLES), default=sorted(EXAMPLES))
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    settings = get_settings()
    logging.config.dictConfig(settings.get_log_config())
    seed = settings.DEFAULT_SEED if args.seed is None else args.seed

    print(time.strftime("Starting at: %Y-%m-%d %H:%M:%S"))
    started = {name: time.time() for name in args.only}
    with concurrent.futures.ProcessPoolExecutor(max_workers=settings.MAX_CONCURRENT_JOBS) as pool:
        future_to_name = {pool.submit(run_example, name, seed): name for name in args.only}
        results = {}
        for future in concurrent.futures.as_completed(future_to_name):
            name = future_to_name[future]
            results[name] = (future.result(), time.time() - started[name])

    for name in args.only:
        traces, elapsed = results[name]
        print_summary(name, traces, elapsed)


if __name__ == "__main__":
    main()
