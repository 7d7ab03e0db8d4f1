"""Confidence regions inside the Bloch ball for one qubit.

Grid points of the ball are classified as inside or outside the
anytime-valid set and the Gaussian credible region at a few times. The
JSON-lines file can be plotted with any 3-D scatter tool.
"""

import os
import tempfile

from avqst import ExperimentConfig, export_bloch_trajectory

cfg = ExperimentConfig(qubits=1, horizon=100, seed=1, bloch_times=(0, 5, 22, 50, 100),
                       bloch_resolution=21)
path = os.path.join(tempfile.gettempdir(), "bloch.jsonl")
records = export_bloch_trajectory(cfg, path)

print(f"wrote {len(records)} records to {path}")
print("   t   AV fraction   B-QST fraction")
for t in cfg.bloch_times:
    grid = [r for r in records if r["kind"] == "grid" and r["t"] == t]
    av = sum(r["in_av"] for r in grid) / len(grid)
    bq = sum(r["in_bqst"] for r in grid) / len(grid)
    print(f"{t:4d}   {av:11.4f}   {bq:14.4f}")
