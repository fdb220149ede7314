"""Run every experiment with the configs in scripts/configs and write CSVs under results/.

    python scripts/run_experiments.py                 # all experiments, full size
    python scripts/run_experiments.py --quick         # small sizes, for a smoke run
    python scripts/run_experiments.py ogl-compare delta-togl --workers 4
"""

import argparse
import json
import sys
import time
from pathlib import Path

from togl.cli import main as togl_main

HERE = Path(__file__).resolve().parent
CONFIGS = {
    "ogl-compare": "ogl_compare.json",
    "togl-compare": "togl_compare.json",
    "delta-togl": "delta_togl.json",
    "cost-profile": "cost_profile.json",
    "phase-diagram": "phase_diagram.json",
    "method-table": "method_table.json",
}


def quick_config(kind: str, outdir: Path) -> Path:
    cfg = json.loads((HERE / "configs" / "quick.json").read_text())
    if kind == "phase-diagram":
        cfg.update(sigmas=[0.1], m_list=[50, 100, 200], accuracies=[0.05, 0.1])
    if kind == "method-table":
        cfg.update(sigmas=[0.1], trials=1, n_list=[60], lasso_max_iter=2000, mode="cv")
    path = outdir / f"{kind}.quick.json"
    path.write_text(json.dumps(cfg))
    return path


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("kinds", nargs="*", help=f"experiments to run (default: all of {list(CONFIGS)})")
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--quick", action="store_true", help="tiny sizes for a smoke run")
    args = ap.parse_args(argv)
    unknown = set(args.kinds) - set(CONFIGS)
    if unknown:
        ap.error(f"unknown experiments: {sorted(unknown)}")
    args.out.mkdir(parents=True, exist_ok=True)
    status = 0
    for kind in args.kinds or list(CONFIGS):
        conf = quick_config(kind, args.out) if args.quick else HERE / "configs" / CONFIGS[kind]
        cmd = [kind, "--config", str(conf), "--out", str(args.out / kind)]
        if args.workers:
            cmd += ["--workers", str(args.workers)]
        t0 = time.perf_counter()
        code = togl_main(cmd)
        print(f"{kind}: exit {code} in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
