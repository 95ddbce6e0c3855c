"""
Rendering of verification reports.

Text output is for people at a terminal; JSON output is the archived artifact
and has to be byte-stable for a given seed and configuration: keys keep
insertion order, floats are written with 17 significant digits and
non-finite values become null.
"""

import enum
import json
import math
from dataclasses import fields, is_dataclass
from typing import Any, Dict, List, Optional

import numpy as np


class JsonEncoder:
    """Deterministic JSON writer for nested report data."""

    @staticmethod
    def to_plain(value: Any) -> Any:
        """Reduce dataclasses, enums and numpy values to JSON-shaped Python data."""
        if hasattr(value, "to_dict"):
            return JsonEncoder.to_plain(value.to_dict())
        if is_dataclass(value) and not isinstance(value, type):
            return {f.name: JsonEncoder.to_plain(getattr(value, f.name)) for f in fields(value)}
        if isinstance(value, enum.Enum):
            return value.value
        if isinstance(value, dict):
            return {str(JsonEncoder.to_plain(k)): JsonEncoder.to_plain(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [JsonEncoder.to_plain(v) for v in value]
        if isinstance(value, np.ndarray):
            return JsonEncoder.to_plain(value.tolist())
        if isinstance(value, (np.bool_, bool)):
            return bool(value)
        if isinstance(value, np.integer):
            return int(value)
        if isinstance(value, (np.floating, float)):
            value = float(value)
            return None if math.isnan(value) or math.isinf(value) else value
        return value

    @staticmethod
    def format_float(value: float) -> str:
        if math.isnan(value) or math.isinf(value):
            return "null"
        text = "%.17g" % value
        if "e" not in text and "." not in text:
            text += ".0"
        return text

    @staticmethod
    def encode(value: Any, indent: Optional[int] = 2) -> str:
        return json.dumps(JsonEncoder.to_plain(value), cls=_FixedDigitsEncoder, indent=indent, ensure_ascii=False)


class _FixedDigitsEncoder(json.JSONEncoder):
    """json.JSONEncoder that writes floats through JsonEncoder.format_float."""

    def iterencode(self, o, _one_shot=False):
        strings = json.encoder.encode_basestring_ascii if self.ensure_ascii else json.encoder.encode_basestring
        return json.encoder._make_iterencode(
            {} if self.check_circular else None, self.default, strings, self.indent, JsonEncoder.format_float,
            self.key_separator, self.item_separator, self.sort_keys, self.skipkeys, _one_shot,
        )(o, 0)


class TextFormatter:
    """Plain-text layout of check records."""

    STATUS = {True: "PASS", False: "FAIL"}

    @staticmethod
    def format_value(value: Any) -> str:
        value = JsonEncoder.to_plain(value)
        if isinstance(value, float):
            return f"{value:.3e}" if value != 0 and (abs(value) < 1e-3 or abs(value) >= 1e4) else f"{value:.6g}"
        if isinstance(value, list) and len(value) > 6:
            return f"[{len(value)} items]"
        if isinstance(value, dict) and len(value) > 8:
            return f"{{{len(value)} entries}}"
        return str(value)

    @staticmethod
    def format_check(record: Dict[str, Any]) -> List[str]:
        header = f"[{TextFormatter.STATUS[bool(record['passed'])]}] {record['name']} ({record['wall_time_s']:.2f}s)"
        lines = [header]
        for key, value in record.get("evidence", {}).items():
            lines.append(f"    {key}: {TextFormatter.format_value(value)}")
        return lines

    @staticmethod
    def format_report(report: Dict[str, Any]) -> str:
        lines = [f"real-moduli {report['artifact_version']} ({report['config']['puncture']} puncture, "
                 f"seed {report['config']['seed']})", ""]
        for record in report["checks"]:
            lines.extend(TextFormatter.format_check(record))
        lines.append("")
        if report.get("betti") is not None:
            lines.append("betti: " + " ".join(str(b) for b in report["betti"]))
        lines.append(f"verdict: {TextFormatter.STATUS[bool(report['verdict'])]}")
        return "\n".join(lines) + "\n"
