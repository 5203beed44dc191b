"""The full oracle pipeline: render a test set, solve every frame, report.

Uses the library entry point behind the `scrforge e2e-toy` subcommand, with
a reduced frame count so the demo finishes in a few seconds. The report
mirrors the median / 95th-percentile error table structure used to compare
relocalization methods.
"""

import tempfile
from pathlib import Path

from scrforge.cli import e2e_toy
from scrforge.evaluation import markdown_table

with tempfile.TemporaryDirectory() as tmp:
    print("clean run (oracle scene coordinates into PnP-RANSAC)...")
    clean = e2e_toy(Path(tmp) / "clean", seed=0, test_frames=25)
    print("corrupted run (40% of coordinates replaced with noise)...")
    noisy = e2e_toy(Path(tmp) / "noisy", seed=0, test_frames=25,
                    corrupt_fraction=0.4)

print()
print(markdown_table([("oracle coordinates", clean),
                      ("oracle + 40% corruption", noisy)]))
print("Estimates, per-frame JSON, and this table are also written next to "
      "each run's report.json.")
