"""Report emission: per-policy metric tables (CSV and markdown), plus the
retention heatmap and radar source matrices with simple vector figures.

report.csv and report.md carry the same rows: clean baseline, non-latency
settings, avg_perturb, latency settings, avg_latency, avg_all. Figures are
batch outputs rendered from the matrices; the CSVs are the source of truth.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from loopbench.metrics import PolicyReport, RobustnessReport, SettingRow

COLUMNS = ("rd", "ds", "sr", "eff", "comf")


def _fmt(value, digits=2) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}f}"


def _ordered_rows(policy: PolicyReport) -> list[tuple[str, SettingRow]]:
    out = [("clean", policy.baseline)]
    non_latency = [r for r in policy.rows if not r.is_latency]
    latency = [r for r in policy.rows if r.is_latency]
    out += [(r.label, r) for r in non_latency]
    if "avg_perturb" in policy.aggregates and non_latency:
        out.append(("avg_perturb", policy.aggregates["avg_perturb"]))
    out += [(r.label, r) for r in latency]
    if "avg_latency" in policy.aggregates and latency:
        out.append(("avg_latency", policy.aggregates["avg_latency"]))
    if "avg_all" in policy.aggregates and policy.rows:
        out.append(("avg_all", policy.aggregates["avg_all"]))
    return out


def write_report_csv(report: RobustnessReport, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "setting", "rd", "ds", "sr", "eff",
                         "comf", "n_routes"])
        for policy in report.policies:
            for label, row in _ordered_rows(policy):
                writer.writerow([
                    policy.policy, label, _fmt(row.rd, 4), _fmt(row.ds),
                    _fmt(row.sr), _fmt(row.eff), _fmt(row.comf),
                    row.n_routes,
                ])


def write_report_md(report: RobustnessReport, path: str | Path) -> None:
    lines = ["# Robustness report", ""]
    for policy in report.policies:
        lines.append(f"## {policy.policy}")
        lines.append("")
        lines.append("| Setting | RD | DS | SR | Eff | Comf |")
        lines.append("|---|---:|---:|---:|---:|---:|")
        for label, row in _ordered_rows(policy):
            rd = _fmt(row.rd, 2) if row.rd is not None else "0.00" \
                if label == "clean" else "n/a"
            lines.append(
                f"| {label} | {rd} | {_fmt(row.ds)} | {_fmt(row.sr)} "
                f"| {_fmt(row.eff)} | {_fmt(row.comf)} |")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def _setting_labels(report: RobustnessReport) -> list[str]:
    labels: list[str] = []
    for policy in report.policies:
        for row in policy.rows:
            if row.label not in labels:
                labels.append(row.label)
    return labels


def write_matrix_csv(report: RobustnessReport, path: str | Path,
                     value: str = "rd") -> None:
    """Settings x policies matrix of RD (value="rd") or retention
    DS_p / DS_clean (value="retention")."""
    labels = _setting_labels(report)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting"] + [p.policy for p in report.policies])
        for label in labels:
            cells = []
            for policy in report.policies:
                row = next((r for r in policy.rows if r.label == label), None)
                if row is None or row.rd is None:
                    cells.append("")
                elif value == "rd":
                    cells.append(_fmt(row.rd, 4))
                else:
                    cells.append(_fmt(1.0 - row.rd, 4))
            writer.writerow([label] + cells)


def _matrix_values(report: RobustnessReport):
    labels = _setting_labels(report)
    policies = [p.policy for p in report.policies]
    grid = []
    for label in labels:
        row_vals = []
        for policy in report.policies:
            row = next((r for r in policy.rows if r.label == label), None)
            rd = row.rd if row is not None and row.rd is not None else 0.0
            row_vals.append(1.0 - rd)
        grid.append(row_vals)
    return labels, policies, grid


def write_heatmap_svg(report: RobustnessReport, path: str | Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels, policies, grid = _matrix_values(report)
    # fixed hash salt keeps generated element ids, and so the bytes,
    # identical across runs
    with plt.rc_context({"svg.hashsalt": "loopbench"}):
        fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(policies),
                                        1.2 + 0.4 * len(labels)))
        im = ax.imshow(grid, vmin=0.0, vmax=1.2, cmap="RdYlGn", aspect="auto")
        ax.set_xticks(range(len(policies)), policies, rotation=20, ha="right")
        ax.set_yticks(range(len(labels)), labels)
        for i in range(len(labels)):
            for j in range(len(policies)):
                ax.text(j, i, f"{grid[i][j]:.2f}", ha="center", va="center",
                        fontsize=7)
        ax.set_title("Driving-score retention (1 - RD)")
        fig.colorbar(im, ax=ax, shrink=0.8)
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)


def write_radar_svg(report: RobustnessReport, path: str | Path) -> None:
    import math

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels, policies, grid = _matrix_values(report)
    if not labels:
        return
    angles = [2 * math.pi * i / len(labels) for i in range(len(labels))]
    with plt.rc_context({"svg.hashsalt": "loopbench"}):
        fig, ax = plt.subplots(figsize=(6, 6),
                               subplot_kw={"projection": "polar"})
        for j, policy in enumerate(policies):
            vals = [max(0.0, min(1.2, grid[i][j]))
                    for i in range(len(labels))]
            ax.plot(angles + angles[:1], vals + vals[:1], label=policy,
                    linewidth=1.2)
        ax.set_xticks(angles, labels, fontsize=7)
        ax.set_ylim(0, 1.2)
        ax.set_title("Retention radar")
        ax.legend(loc="lower right", bbox_to_anchor=(1.15, -0.1), fontsize=7)
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)


def write_report_files(report: RobustnessReport,
                       out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / name for name in (
        "report.csv", "report.md", "matrix_rd.csv", "matrix_retention.csv",
        "heatmap.svg", "radar.svg")]
    write_report_csv(report, paths[0])
    write_report_md(report, paths[1])
    write_matrix_csv(report, paths[2], value="rd")
    write_matrix_csv(report, paths[3], value="retention")
    write_heatmap_svg(report, paths[4])
    write_radar_svg(report, paths[5])
    return paths


def report_summary_json(report: RobustnessReport) -> str:
    """Compact JSON view of a report, for quick inspection and tests."""
    data = {}
    for policy in report.policies:
        rows = {}
        for label, row in _ordered_rows(policy):
            rows[label] = {
                "rd": None if row.rd is None else round(row.rd, 4),
                "ds": round(row.ds, 2),
                "sr": round(row.sr, 2),
                "eff": round(row.eff, 2),
                "comf": round(row.comf, 2),
            }
        data[policy.policy] = rows
    return json.dumps(data, indent=2, sort_keys=True)
