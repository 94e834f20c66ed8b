"""Run the bundled experiment configs and write reports under results/.

    python scripts/reproduce_tables.py                 # every config
    python scripts/reproduce_tables.py table1 coverage # a subset
    python scripts/reproduce_tables.py --replications 200 table2
"""
import argparse
import configparser
import sys
from pathlib import Path

from mompair.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs" / "experiments"
EXPERIMENT_FILES = ("table1", "table2", "quantiles", "coverage")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("names", nargs="*", metavar="NAME", help=f"any of {', '.join(EXPERIMENT_FILES)}")
    ap.add_argument("--replications", type=int, help="override every config's replication count")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    args = ap.parse_args(argv)
    unknown = set(args.names) - set(EXPERIMENT_FILES)
    if unknown:
        ap.error(f"unknown experiment(s): {', '.join(sorted(unknown))}")
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.names or EXPERIMENT_FILES:
        path = CONFIGS / f"{name}.ini"
        parser = configparser.ConfigParser()
        parser.read(path)
        for section in parser.sections():
            verb = parser[section].get("kind", "risk-table")
            cmd = [verb, "--config", str(path), "--section", section, "--threads", str(args.threads),
                   "--output", str(args.out / f"{section}.csv")]
            if args.replications:
                cmd += ["--replications", str(args.replications)]
            print(f"== {section} ({verb})", flush=True)
            status = cli_main(cmd)
            if status:
                return status
    return 0


if __name__ == "__main__":
    sys.exit(main())
