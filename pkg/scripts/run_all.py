"""Run every experiment with the configurations in scripts/configs.

Usage: python3 scripts/run_all.py [OUT_DIR] [--quick]

``--quick`` caps the ensemble at 2000 samples.  Prints one status line per
experiment and exits nonzero if any of them fails.
"""
import sys
from pathlib import Path

from fermibundle import cli
from fermibundle.experiments import RUNNERS

HERE = Path(__file__).resolve().parent


def main(argv):
    quick = "--quick" in argv
    rest = [a for a in argv if a != "--quick"]
    out = Path(rest[0]) if rest else Path("runs")
    codes = {}
    for name in RUNNERS:
        args = [name, "--config", str(HERE / "configs" / f"{name}.cfg"), "--out", str(out)]
        if quick and name == "bohm-ensemble":
            args += ["--set", "samples=2000"]
        codes[name] = cli.main(args)
    failed = [k for k, c in codes.items() if c != 0]
    print(f"{len(codes) - len(failed)}/{len(codes)} experiments passed")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
