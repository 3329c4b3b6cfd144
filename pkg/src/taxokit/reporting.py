"""Serializable evaluation reports with deterministic rendering.

Everything except the ``run`` block (timestamp and per-run telemetry) is
a pure function of inputs and configuration, so re-running a cached
pipeline reproduces the report bytes exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path


@dataclass
class EvalReport:
    task: str
    config_digest: str
    metrics: dict[str, float]
    items: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    def finalize_run(self, cache_stats=None, backend_calls: int | None = None) -> "EvalReport":
        self.run["timestamp"] = datetime.now(timezone.utc).isoformat()
        if cache_stats is not None:
            self.run["cache"] = cache_stats.as_dict()
        if backend_calls is not None:
            self.run["backend_calls"] = backend_calls
        return self

    def to_json(self) -> str:
        payload = {
            "task": self.task,
            "config_digest": self.config_digest,
            "metrics": self.metrics,
            "items": self.items,
            "metadata": self.metadata,
            "run": self.run,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json(), encoding="utf-8", newline="\n")
        return path

    def render_table(self) -> str:
        width = max([len("metric")] + [len(k) for k in self.metrics])
        lines = [
            f"task: {self.task}   items: {len(self.items)}   config: {self.config_digest[:12]}",
            f"{'metric'.ljust(width)}  value",
            f"{'-' * width}  {'-' * 10}",
        ]
        for name in sorted(self.metrics):
            value = self.metrics[name]
            rendered = f"{value:.6f}" if isinstance(value, float) else str(value)
            lines.append(f"{name.ljust(width)}  {rendered}")
        return "\n".join(lines)


def strip_timestamp(report_text: str) -> str:
    """Drop the timestamp line so byte comparisons ignore wall-clock."""
    return "\n".join(
        line for line in report_text.splitlines() if '"timestamp"' not in line
    )
