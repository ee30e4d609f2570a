import logging
import math
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Union

from pydantic import BaseModel

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return ", ".join(format_value(v) for v in value)
    return str(value)


# Builds the human-readable markdown report written next to every CSV
class ReportBuilder:
    def __init__(self, title: str):
        self._lines: List[str] = [f"# {title}", ""]

    def section(self, heading: str) -> "ReportBuilder":
        self._lines += [f"## {heading}", ""]
        return self

    def paragraph(self, text: str) -> "ReportBuilder":
        self._lines += [text, ""]
        return self

    def key_values(self, items: Mapping[str, Any]) -> "ReportBuilder":
        for key, value in items.items():
            self._lines.append(f"- **{key}**: {format_value(value)}")
        self._lines.append("")
        return self

    def table(
        self,
        rows: Iterable[Union[BaseModel, Mapping[str, Any]]],
        columns: Optional[Sequence[str]] = None,
    ) -> "ReportBuilder":
        records = [r.model_dump() if isinstance(r, BaseModel) else dict(r) for r in rows]
        if not records:
            self._lines += ["_no rows_", ""]
            return self
        columns = list(columns or records[0].keys())
        self._lines.append("| " + " | ".join(columns) + " |")
        self._lines.append("|" + "---|" * len(columns))
        for record in records:
            cells = [format_value(record.get(c)) for c in columns]
            self._lines.append("| " + " | ".join(cells) + " |")
        self._lines.append("")
        return self

    def verdict(self, passed: bool, detail: str = "") -> "ReportBuilder":
        status = "PASS" if passed else "FAIL"
        self._lines += [f"**Verdict: {status}**" + (f" ({detail})" if detail else ""), ""]
        return self

    def render(self) -> str:
        return "\n".join(self._lines).rstrip() + "\n"
