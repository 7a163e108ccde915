"""Run every CLI command on every benchmark config and tabulate the checks.

    python scripts/run_benchmarks.py [--out bench_out]
"""

import argparse
import json
from pathlib import Path

from magneto_qed.cli import main

ROOT = Path(__file__).resolve().parent.parent
PLAN = {
    "vacuum": ["validate", "modes"],
    "dm1": ["validate", "factorize", "modes", "sumrule", "spectra", "synth"],
    "me_n1": ["validate", "factorize", "modes", "spectra"],
    "n3": ["validate", "factorize"],
    "stack": ["validate", "modes", "synth"],
}


def run(out: Path) -> int:
    worst = 0
    for name, commands in PLAN.items():
        for command in commands:
            target = out / name / command
            code = main([command, "--config", str(ROOT / "benchmarks" / f"{name}.yaml"), "--out", str(target)])
            summary = json.loads((target / "summary.json").read_text())
            checks = ", ".join(f"{c['name']}={c['value']:.2e}" for c in summary.get("checks", []))
            print(f"[{code}] {name:7s} {command:9s} {checks}")
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="bench_out")
    raise SystemExit(run(Path(p.parse_args().out)))
