"""
Tighten the pointing cone and watch how long the thrust rides its edge.

Uses the command-line sweep, which fans the solves out over processes and
writes one CSV row per value.
"""
import csv
import sys
import tempfile
from pathlib import Path

from pdlanding.cli import main

scenario = Path(__file__).resolve().parents[1] / "scenarios" / "mars_q0_free.json"
with tempfile.TemporaryDirectory() as out:
    code = main(["sweep", str(scenario), "--param", "theta", "--values", "off,60,45,30",
                 "--jobs", "4", "--out-dir", out])
    for row in csv.DictReader(open(Path(out) / "sweep.csv")):
        print(f"theta {row['value']:>4}: {row['status']:<14} cost {row['cost']:<20} "
              f"on the cone {row['pointing_active_s']} s")
sys.exit(code)
