"""Report emission: the lap-time table and per-agent trajectory CSVs."""

from __future__ import annotations

from pathlib import Path

from ..dynamics import DT
from ..envloop import LapReport
from .persist import write_csv

LAP_TABLE_FIELDS = ["agent", "lap1_s", "lap2_s", "dnf", "wall_contacts"]
TRAJECTORY_FIELDS = ["tick", "t_s", "s_m", "lateral_m", "speed_mps", "contact"]
CURVE_KIND = "learning-curve"


def lap_table_row(label: str, report: LapReport) -> list:
    lap1 = report.lap_times[0] if report.lap_times else float("nan")
    return [label, float(lap1), float(report.second_lap_time),
            int(report.dnf), report.wall_contact_count]


def write_lap_table(path, rows) -> None:
    write_csv(path, "lap-times", LAP_TABLE_FIELDS, rows)


def write_trajectory(path, report: LapReport, dt: float = DT) -> None:
    rows = [
        [int(tick), float(tick) * dt, float(s), float(lat), float(speed), int(contact)]
        for tick, s, lat, speed, contact in report.trajectory
    ]
    write_csv(path, "trajectory", TRAJECTORY_FIELDS, rows)


def write_learning_curve(path, rows) -> None:
    from ..phase2 import CURVE_FIELDS

    write_csv(path, CURVE_KIND, CURVE_FIELDS, [r.as_list() for r in rows])


def write_regression_history(path, history) -> None:
    write_csv(path, "regression-history",
              ["epoch", "train_loss", "eval_mse_standardized"],
              [[int(e), float(tl), float(ev)] for e, tl, ev in history])


def format_lap_table(rows) -> str:
    out = [f"{'agent':<14} {'lap1 [s]':>10} {'lap2 [s]':>10} {'dnf':>4} {'contacts':>9}"]
    for label, lap1, lap2, dnf, contacts in rows:
        lap1s = f"{lap1:10.3f}" if lap1 == lap1 else "       nan"
        lap2s = f"{lap2:10.3f}" if lap2 == lap2 else "       nan"
        out.append(f"{label:<14} {lap1s} {lap2s} {dnf:>4} {contacts:>9}")
    return "\n".join(out)
