"""Run the fixture suite and print a verdict tally per inequality."""

import argparse
import collections
import json
from pathlib import Path

from extrinsic_spectra import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(Path(__file__).resolve().parents[1] / "configs" / "fixtures.json"))
    ap.add_argument("--out", default="results/fixtures.jsonl")
    args = ap.parse_args()
    status = harness.run(args.config, args.out)
    tally = collections.Counter()
    for line in Path(args.out).read_text().splitlines():
        r = json.loads(line)
        tally[(r["inequality_id"], r["verdict"])] += 1
    for (ineq, verdict), n in sorted(tally.items()):
        print(f"{ineq:14s} {verdict:11s} {n}")
    return status


if __name__ == "__main__":
    raise SystemExit(main())
