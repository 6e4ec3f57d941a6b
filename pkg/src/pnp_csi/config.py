"""Plain-text experiment configuration: UTF-8 lines of `key = value`.

Blank lines are skipped and `#` starts a comment.  Values stay strings at
parse time; the typed accessors convert on demand and name the offending key
when a conversion fails.
"""

from __future__ import annotations


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', "
                             f"got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


_MISSING = object()


def _fetch(cfg: dict, key: str, default):
    if key in cfg:
        return cfg[key]
    if default is _MISSING:
        raise KeyError(f"missing required config key {key!r}")
    return default


def get_str(cfg: dict, key: str, default=_MISSING) -> str:
    value = _fetch(cfg, key, default)
    return value if isinstance(value, str) else value


def get_int(cfg: dict, key: str, default=_MISSING) -> int:
    value = _fetch(cfg, key, default)
    if not isinstance(value, str):
        return value
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"config key {key!r}: {value!r} is not an "
                         "integer") from None


def get_float(cfg: dict, key: str, default=_MISSING) -> float:
    value = _fetch(cfg, key, default)
    if not isinstance(value, str):
        return value
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"config key {key!r}: {value!r} is not a "
                         "number") from None


def get_bool(cfg: dict, key: str, default=_MISSING) -> bool:
    value = _fetch(cfg, key, default)
    if not isinstance(value, str):
        return value
    low = value.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"config key {key!r}: {value!r} is not a boolean")


def get_float_list(cfg: dict, key: str, default=_MISSING) -> tuple:
    value = _fetch(cfg, key, default)
    if not isinstance(value, str):
        return tuple(value)
    parts = [p.strip() for p in value.split(",") if p.strip()]
    if not parts:
        raise ValueError(f"config key {key!r}: empty list")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise ValueError(f"config key {key!r}: {value!r} is not a "
                         "comma-separated number list") from None
