"""On-disk solve artifacts: trajectory table and metrics document.

The trajectory is CSV with a fixed header, every number written with 17
significant digits so that reading it back gives the same doubles. The
metrics document is JSON carrying the SHA-256 of the trajectory file and a
checksum over its own contents; either mismatch is treated as tampering.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ArtifactError
from .model import BoundaryConditions, LanderConfig, ProfileKind, SegmentTimes, derive_params

FORMAT = "tfc-descent/1"
TRAJECTORY_FILE = "trajectory.csv"
METRICS_FILE = "metrics.json"
VALIDATION_FILE = "validation.json"

COLUMNS = (
    "t", "rx", "ry", "rz", "vx", "vy", "vz", "ax", "ay", "az", "T", "m",
    "lam_vx", "lam_vy", "lam_vz", "lam_rx", "lam_ry", "lam_rz", "lam_m", "H", "sigma",
)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_table(solution) -> np.ndarray:
    return np.column_stack([
        solution.t, solution.r, solution.v, solution.a, solution.thrust, solution.mass,
        solution.lam_v, solution.lam_r, solution.lam_m, solution.H, solution.sigma,
    ])


def trajectory_text(table: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write(",".join(COLUMNS) + "\n")
    for row in table:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    return buf.getvalue()


def parse_trajectory(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ArtifactError("trajectory header does not match the expected columns")
    if len(rows) < 3:
        raise ArtifactError("trajectory has fewer than two data rows")
    try:
        table = np.array([[float(x) for x in r] for r in rows[1:]])
    except ValueError as exc:
        raise ArtifactError(f"non-numeric trajectory entry: {exc}") from None
    if table.ndim != 2 or table.shape[1] != len(COLUMNS):
        raise ArtifactError(f"trajectory rows must have {len(COLUMNS)} fields")
    if not np.all(np.isfinite(table)):
        raise ArtifactError("trajectory contains non-finite values")
    return table


def column(table: np.ndarray, *names: str) -> np.ndarray:
    idx = [COLUMNS.index(n) for n in names]
    return table[:, idx[0]] if len(idx) == 1 else table[:, idx]


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _canonical(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def seal(doc: dict) -> dict:
    body = {k: v for k, v in doc.items() if k != "checksum"}
    return {**body, "checksum": _sha256(_canonical(body))}


def check_seal(doc: dict) -> None:
    body = {k: v for k, v in doc.items() if k != "checksum"}
    if doc.get("checksum") != _sha256(_canonical(body)):
        raise ArtifactError("metrics checksum mismatch")


def lander_record(lander: LanderConfig) -> dict:
    return {"a_g": [float(x) for x in lander.a_g], "isp": lander.isp, "g0": lander.g0,
            "t_bar": lander.t_bar, "n_engines": lander.n_engines, "cant_rad": lander.cant}


def boundary_record(bc: BoundaryConditions) -> dict:
    return {"r0": bc.r0.tolist(), "v0": bc.v0.tolist(), "rf": bc.rf.tolist(),
            "vf": bc.vf.tolist(), "m0": float(bc.m0)}


def metrics_document(name: str, solution, lander: LanderConfig, bc: BoundaryConditions,
                     trajectory_sha: str, rows: int) -> dict:
    return seal({
        "format": FORMAT,
        "name": name,
        "profile": solution.kind.value,
        "times": list(solution.times.boundaries),
        "metrics": solution.metrics(),
        "lander": lander_record(lander),
        "boundary": boundary_record(bc),
        "trajectory": {"file": TRAJECTORY_FILE, "sha256": trajectory_sha, "rows": rows},
    })


def write_solution(out_dir, name: str, solution, lander: LanderConfig, bc: BoundaryConditions) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = trajectory_text(trajectory_table(solution))
    data = text.encode()
    doc = metrics_document(name, solution, lander, bc, _sha256(data), text.count("\n") - 1)
    (out / TRAJECTORY_FILE).write_bytes(data)
    (out / METRICS_FILE).write_text(json.dumps(doc, indent=2) + "\n")
    return doc


def read_metrics(path) -> dict:
    p = Path(path)
    if p.is_dir():
        p = p / METRICS_FILE
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ArtifactError(f"cannot read {p}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{p} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ArtifactError(f"{p} is not a {FORMAT} metrics document")
    check_seal(doc)
    return doc


class SolveArtifacts:
    """A solve output directory, integrity-checked on load."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.metrics = read_metrics(self.directory)
        traj = self.directory / self.metrics["trajectory"]["file"]
        try:
            data = traj.read_bytes()
        except OSError as exc:
            raise ArtifactError(f"cannot read {traj}: {exc.strerror}") from None
        if _sha256(data) != self.metrics["trajectory"]["sha256"]:
            raise ArtifactError("trajectory checksum mismatch")
        self.table = parse_trajectory(data.decode())
        if self.table.shape[0] != self.metrics["trajectory"]["rows"]:
            raise ArtifactError("trajectory row count disagrees with metrics")
        try:
            self.kind = ProfileKind(self.metrics["profile"])
            self.times = SegmentTimes.from_boundaries(self.metrics["times"])
            lan = self.metrics["lander"]
            self.lander = derive_params(lan["a_g"], lan["isp"], lan["g0"], lan["t_bar"],
                                        lan["n_engines"], lan["cant_rad"])
            b = self.metrics["boundary"]
            self.bc = BoundaryConditions(b["r0"], b["v0"], b["rf"], b["vf"], b["m0"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ArtifactError(f"metrics document incomplete: {exc}") from None
        t = column(self.table, "t")
        if not (math.isclose(t[0], self.times.t0, abs_tol=1e-12)
                and math.isclose(t[-1], self.times.tf, abs_tol=1e-12)):
            raise ArtifactError("trajectory time span disagrees with the recorded times")

    def initial_costates(self):
        first = self.table[:1]
        return (column(first, "lam_rx", "lam_ry", "lam_rz")[0],
                column(first, "lam_vx", "lam_vy", "lam_vz")[0],
                float(column(first, "lam_m")[0]))


def write_validation(out_dir, doc: dict) -> None:
    Path(out_dir, VALIDATION_FILE).write_text(json.dumps(doc, indent=2) + "\n")
