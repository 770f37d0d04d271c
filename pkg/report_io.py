"""
Deterministic JSON and CSV output.

Every file carries the tool version, the config hash and the seed. Floats
are written in shortest round-trip form so identical runs produce identical
bytes.
"""

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, List, Sequence

from pipeline import OptimizationReport
from simlab import BatchSummary, SweepRow

logger = logging.getLogger(__name__)

TOOL_NAME = "slimedge-optimizer"
TOOL_VERSION = "1.0.0"


@dataclass(frozen=True)
class OutputMeta:
    config_hash: str
    seed: int

    def to_dict(self) -> dict:
        return {"tool": TOOL_NAME, "version": TOOL_VERSION, "config_hash": self.config_hash, "seed": self.seed}

    def header_line(self) -> str:
        return f"# tool={TOOL_NAME} version={TOOL_VERSION} config_hash={self.config_hash} seed={self.seed}"


def config_hash(payload: Any) -> str:
    """SHA-256 of the canonical JSON form of a configuration."""
    canonical = json.dumps(json_safe(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def json_safe(obj: Any) -> Any:
    """Replace non-finite floats with None, recursively."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    return obj


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_json(path: Path, payload: dict, meta: OutputMeta) -> Path:
    body = dict(payload)
    body["meta"] = meta.to_dict()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(json_safe(body), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], meta: OutputMeta) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(meta.header_line() + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    logger.debug(f"Wrote {path}")
    return path


def read_csv(path: Path) -> List[dict]:
    """Rows of a file written by write_csv, skipping the provenance line."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def write_report(report: OptimizationReport, out_dir: Path, meta: OutputMeta) -> List[Path]:
    """report.json, front.csv and generations.csv for one optimization."""
    out_dir = Path(out_dir)
    V = len(report.chosen)
    front_rows = (
        list(c.p.p) + [c.objectives.f1, c.objectives.f2, c.objectives.f3,
                       c.constraints.g1, c.constraints.g2, c.feasible]
        for c in report.front
    )
    gen_rows = (
        [g.stage, g.generation, g.best_f1, g.best_penalty, g.feasible_count, g.mean_violation]
        for g in report.generations
    )
    return [
        write_json(out_dir / "report.json", report.to_dict(), meta),
        write_csv(
            out_dir / "front.csv",
            [f"p{v}" for v in range(V)] + ["f1", "f2", "f3", "g1", "g2", "feasible"],
            front_rows,
            meta,
        ),
        write_csv(
            out_dir / "generations.csv",
            ["stage", "generation", "best_f1", "best_penalty", "feasible_count", "mean_violation"],
            gen_rows,
            meta,
        ),
    ]


def write_sweep(rows: Sequence[SweepRow], path: Path, meta: OutputMeta) -> Path:
    return write_csv(
        path,
        ["level", "accuracy", "size_mb", "latency_norm"],
        ([r.level, r.accuracy, r.size_mb, r.latency_norm] for r in rows),
        meta,
    )


def write_batch(summary: BatchSummary, out_dir: Path, meta: OutputMeta) -> List[Path]:
    out_dir = Path(out_dir)
    return [
        write_csv(
            out_dir / "batch.csv",
            ["instance", "seed", "path", "feasible", "speedup", "violations", "p_min_feasible", "solved"],
            (
                [r.instance, r.seed, r.path, r.feasible, r.speedup, r.violations, r.p_min_feasible, r.solved]
                for r in summary.rows
            ),
            meta,
        ),
        write_json(out_dir / "summary.json", summary.to_dict(), meta),
    ]


def write_importance(importance: Sequence[float], path: Path, meta: OutputMeta) -> Path:
    return write_csv(path, ["view", "importance"], enumerate(float(i) for i in importance), meta)
