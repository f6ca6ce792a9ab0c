"""Closed-loop runs on the three synthetic risk markets.

Usage: python3 scripts/run_cases.py [--out out]
"""

import argparse
import json
import time
from pathlib import Path

from gridloop.runtime.cli import main

ROOT = Path(__file__).resolve().parent.parent
CASES = ("case1_crash", "case2_surge", "case3_trend")


def run(name: str, out: Path) -> dict:
    t0 = time.perf_counter()
    code = main(["optimize", str(ROOT / "configs" / f"{name}.yaml"), "--output-dir", str(out / name)])
    cons = json.loads((out / name / "constraints.json").read_text())
    final = json.loads((out / name / "final_params.json").read_text())
    return {
        "case": name,
        "exit": code,
        "seconds": round(time.perf_counter() - t0, 2),
        "constraints": [c["provenance"] for c in cons],
        "q": final["quantity_fractions"],
        "p": final["price_exponents"],
        "h": final["exit_exponents"],
    }


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "out" / "cases"))
    args = ap.parse_args()
    for name in CASES:
        print(json.dumps(run(name, Path(args.out)), indent=1))
