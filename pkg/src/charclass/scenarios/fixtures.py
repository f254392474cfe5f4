"""Reference tables shipped as canonical-text fixtures."""

from __future__ import annotations

from importlib import resources

from gmpy2 import mpq

from ..ring import parse_poly


def load(name: str, text: str | None = None) -> dict:
    """{key: Poly or list of Rationals} from ``data/<name>.txt`` (or given text)."""
    if text is None:
        text = resources.files("charclass.data").joinpath(f"{name}.txt").read_text()
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{name}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ValueError(f"{name}:{n}: duplicate key {key}")
        if "," in value:
            out[key] = [mpq(v.strip()) for v in value.split(",")]
        else:
            out[key] = parse_poly(value)
    return out


def d_entries(fx: dict) -> dict:
    return {int(k[1:]): v for k, v in fx.items() if k.startswith("d") and k[1:].isdigit()}


def table_entries(fx: dict, prefix: str) -> dict:
    return {k: v for k, v in fx.items()
            if k.startswith(prefix) and k[len(prefix):].isdigit()}
