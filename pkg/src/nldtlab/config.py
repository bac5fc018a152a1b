"""Minimal ``key = value`` config reader (a TOML subset).

Supports ``[section]`` headers, ``#`` comments, quoted strings, booleans,
ints, floats and comma-separated lists. Section keys are flattened as
``section.key``.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path


def _scalar(text: str):
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_value(text: str):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [_scalar(v) for v in inner.split(",") if v.strip()] if inner else []
    if "," in text and not (text[0] in "\"'"):
        return [_scalar(v) for v in text.split(",") if v.strip()]
    return _scalar(text)


def parse_config(text: str) -> dict:
    out: dict = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[f"{section}.{key}" if section else key] = parse_value(value)
    return out


def read_config(path: str | Path) -> dict:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def section(cfg: dict, name: str) -> dict:
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix)}


def package_defaults() -> dict:
    """Defaults shipped in ``nldtlab/defaults.cfg``."""
    return parse_config(resources.files("nldtlab").joinpath("defaults.cfg").read_text(encoding="utf-8"))
