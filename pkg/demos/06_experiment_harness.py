"""The Monte Carlo experiment harness and its file formats.

Writes a config, runs a size/power experiment through the library API,
shows the deterministic result table (identical bytes regardless of the
thread budget), and prints the equivalent CLI invocation.
"""

import dataclasses
import tempfile
from pathlib import Path

from adaptest.harness import (
    config_digest,
    format_config,
    parse_config,
    plotdata_rows,
    rows_to_csv,
    run_experiment,
)

CONFIG = """
kind = size_power
n = 150
p = 80
k_u = 4
k = 3
reps = 40
loading = regular
loading_k = 4
t0 = 1.2
tau_grid = 0.0,2.5
modes = mixed,plugin
master_seed = 77
"""

cfg = parse_config(CONFIG)
print(f"config digest: {config_digest(cfg)} (excludes thread budget and output path)")

rows = run_experiment(cfg)
table1 = rows_to_csv(rows)
table8 = rows_to_csv(run_experiment(dataclasses.replace(cfg, threads=8)))
print(f"table identical at 1 vs 8 threads: {table1 == table8}")

print("\naggregate rows:")
for r in rows:
    if r.replicate == -1:
        print(f"  {r.metric:<42} {r.value:.4f} (se {r.se:.4f})")

print("\nplot-ready (series, x, y, se) rows:")
for series, x, y, se in plotdata_rows(rows):
    print(f"  {series:<32} x={x!r:<8} y={y:.4f} se={se:.4f}")

with tempfile.TemporaryDirectory() as tmp:
    cfg_path = Path(tmp) / "experiment.cfg"
    cfg_path.write_text(format_config(cfg))
    print(f"\nthe same run from the shell:\n  adaptest simulate --config {cfg_path} --out results/ --emit-plotdata")
