"""
Mini robustness sweep
=====================

Run two policies over a small slice of the preset grid, print the
resulting table, and write the report artifacts.
"""

import tempfile
from pathlib import Path

from loopbench import SweepSpec, run_sweep, setting_by_label
from loopbench.report import write_report_files

# Three settings: the clean baseline is inserted automatically, so we
# only name the perturbed conditions. Each policy gets its own baseline
# and the degradation statistic is relative to it.

settings = (
    setting_by_label("occlusion_0.8"),
    setting_by_label("gps_15m"),
    setting_by_label("latency_500ms"),
)

out_dir = Path(tempfile.mkdtemp(prefix="loopbench_demo_"))
spec = SweepSpec(
    policies=("full-pursuit", "deadreckon"),
    settings=settings,
    seed=0,
    out_dir=str(out_dir),
    sweep_id="mini",
)
report = run_sweep(spec)

# Print the table by hand. Negative RD would mean the perturbation
# helped; None (clean baseline at or below zero) prints as a dash.

for pol in report.policies:
    print()
    print(pol.policy)
    base = pol.baseline
    print("  %-16s ds=%6.2f sr=%5.1f eff=%5.1f comf=%5.1f"
          % ("clean", base.ds, base.sr, base.eff, base.comf))
    for row in pol.rows + list(pol.aggregates.values()):
        rd = "  -  " if row.rd is None else "%5.2f" % row.rd
        print("  %-16s rd=%s ds=%6.2f sr=%5.1f" % (row.label, rd, row.ds,
                                                   row.sr))

# The writer emits csv/markdown tables plus RD and retention matrices
# and two svg charts.

paths = write_report_files(report, out_dir / "report")
print()
for p in paths:
    print("wrote", p)

# Per-rollout records are json-lines files under <out>/<sweep_id>/, one
# per (policy, setting, route), replayable into the same report later.

records = sorted((out_dir / "mini").rglob("*.jsonl"))
print("%d rollout records under %s" % (len(records), out_dir / "mini"))
