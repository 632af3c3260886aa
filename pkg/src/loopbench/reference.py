"""Published reference results used as a regression fixture.

Four end-to-end driving models evaluated on the same eleven perturbation
settings plus their clean baselines. Row values are (RD, DS, SR, Eff, Comf)
as printed in the source table; the aggregate rows are plain column means
over the eight non-latency rows, the three latency rows, and all eleven.
The verify suite recomputes RD and the aggregates from these numbers and
checks them at the rounding tolerances (RD within 0.005, means within 0.01).
"""

from __future__ import annotations

from dataclasses import dataclass

# Canonical setting order, matching the fixture rows below.
SETTING_ORDER = (
    "occlusion_0.5",
    "occlusion_0.8",
    "burst_1s",
    "burst_3s",
    "gps_5m",
    "gps_15m",
    "speed_mu_0.5",
    "speed_mu_0.2",
    "latency_100ms",
    "latency_200ms",
    "latency_500ms",
)

LATENCY_SETTINGS = ("latency_100ms", "latency_200ms", "latency_500ms")

AGGREGATE_ORDER = ("avg_perturb", "avg_latency", "avg_all")


@dataclass(frozen=True)
class RefRow:
    rd: float
    ds: float
    sr: float
    eff: float
    comf: float


def _table(baseline, rows, aggregates):
    return {
        "baseline": RefRow(*baseline),
        "rows": {label: RefRow(*vals) for label, vals in zip(SETTING_ORDER, rows)},
        "aggregates": {label: RefRow(*vals)
                       for label, vals in zip(AGGREGATE_ORDER, aggregates)},
    }


REFERENCE_RESULTS = {
    "tcp_traj": _table(
        baseline=(0.00, 59.90, 30.00, 76.54, 18.08),
        rows=[
            (0.16, 50.16, 24.09, 75.28, 30.24),
            (0.24, 45.54, 18.18, 76.10, 25.24),
            (0.01, 59.17, 28.64, 78.41, 23.84),
            (0.05, 56.80, 25.00, 78.26, 23.67),
            (0.30, 41.88, 18.18, 71.37, 20.04),
            (0.65, 21.12, 0.45, 58.37, 29.22),
            (0.04, 57.49, 27.72, 91.43, 23.82),
            (0.07, 55.61, 23.64, 123.01, 23.73),
            (-0.02, 60.91, 32.27, 77.75, 13.49),
            (0.44, 33.43, 0.00, 77.22, 2.35),
            (0.46, 32.22, 0.00, 80.22, 3.03),
        ],
        aggregates=[
            (0.19, 48.47, 20.74, 81.53, 24.98),
            (0.30, 42.19, 10.76, 78.40, 6.29),
            (0.22, 46.76, 18.02, 80.67, 19.88),
        ],
    ),
    "uniad": _table(
        baseline=(0.00, 45.81, 16.36, 129.21, 43.58),
        rows=[
            (0.11, 40.71, 15.45, 127.46, 42.25),
            (0.39, 28.03, 2.27, 133.95, 46.66),
            (0.03, 44.26, 14.55, 134.70, 27.50),
            (0.08, 42.20, 13.64, 126.88, 43.82),
            (0.15, 39.07, 11.36, 141.52, 51.11),
            (0.55, 20.50, 0.00, 117.55, 48.91),
            (0.19, 37.27, 12.72, 184.92, 51.85),
            (0.37, 29.08, 4.55, 221.40, 54.46),
            (0.19, 37.01, 14.09, 123.44, 47.00),
            (0.26, 33.84, 10.45, 130.93, 8.12),
            (0.30, 31.85, 7.73, 143.88, 5.42),
        ],
        aggregates=[
            (0.23, 35.14, 9.32, 148.55, 45.82),
            (0.25, 34.23, 10.76, 132.75, 20.18),
            (0.24, 34.89, 9.71, 144.24, 38.83),
        ],
    ),
    "vad": _table(
        baseline=(0.00, 42.35, 15.00, 157.94, 46.01),
        rows=[
            (0.00, 42.21, 17.73, 163.26, 41.88),
            (0.22, 33.15, 6.39, 167.09, 49.50),
            (-0.02, 43.04, 17.73, 151.75, 47.69),
            (0.08, 39.09, 13.18, 149.70, 50.76),
            (0.13, 37.02, 12.27, 163.82, 32.64),
            (0.62, 16.26, 0.00, 155.12, 57.99),
            (0.06, 39.64, 14.09, 213.24, 50.31),
            (0.19, 34.33, 8.64, 243.92, 54.21),
            (0.14, 36.52, 11.36, 144.35, 53.10),
            (0.36, 27.15, 3.64, 252.31, 11.70),
            (0.44, 23.55, 2.27, 242.62, 9.75),
        ],
        aggregates=[
            (0.16, 35.59, 11.25, 175.99, 48.12),
            (0.31, 29.07, 5.76, 213.09, 24.85),
            (0.20, 33.81, 9.75, 186.11, 41.78),
        ],
    ),
    "simlingo": _table(
        baseline=(0.00, 85.94, 66.82, 244.18, 25.49),
        rows=[
            (0.29, 60.71, 25.00, 226.06, 37.57),
            (0.83, 14.79, 0.00, 199.93, 70.22),
            (0.01, 85.47, 66.36, 235.40, 31.01),
            (0.00, 85.82, 69.09, 236.16, 31.68),
            (-0.02, 87.91, 73.64, 238.02, 33.41),
            (-0.02, 87.53, 70.91, 238.64, 32.98),
            (0.28, 61.77, 29.09, 276.62, 33.51),
            (0.50, 42.73, 6.36, 282.45, 27.15),
            (0.67, 28.45, 2.27, 218.92, 63.66),
            (0.77, 19.47, 0.00, 189.95, 64.52),
            (0.82, 15.70, 0.00, 177.93, 59.78),
        ],
        aggregates=[
            (0.23, 65.84, 42.56, 241.66, 37.19),
            (0.75, 21.21, 0.76, 195.60, 62.65),
            (0.38, 53.67, 31.16, 229.10, 44.14),
        ],
    ),
}


def check_reference_consistency(rd_tol: float = 0.005,
                                mean_tol: float = 0.01) -> list[str]:
    """Recompute RD and aggregate rows from the fixture; return mismatches.

    An empty list means every published number is reproduced within the
    rounding tolerance of its column.
    """
    problems: list[str] = []
    for model, table in REFERENCE_RESULTS.items():
        clean = table["baseline"].ds
        for label, row in table["rows"].items():
            rd = 1.0 - row.ds / clean
            if abs(rd - row.rd) > rd_tol:
                problems.append(
                    f"{model}/{label}: RD recomputes to {rd:.4f}, "
                    f"published {row.rd:.2f}")
        groups = {
            "avg_perturb": [table["rows"][s] for s in SETTING_ORDER
                            if s not in LATENCY_SETTINGS],
            "avg_latency": [table["rows"][s] for s in LATENCY_SETTINGS],
            "avg_all": list(table["rows"].values()),
        }
        for agg_label, rows in groups.items():
            want = table["aggregates"][agg_label]
            for col in ("rd", "ds", "sr", "eff", "comf"):
                got = sum(getattr(r, col) for r in rows) / len(rows)
                if abs(got - getattr(want, col)) > mean_tol:
                    problems.append(
                        f"{model}/{agg_label}/{col}: mean of rows is "
                        f"{got:.4f}, published {getattr(want, col):.2f}")
    return problems
