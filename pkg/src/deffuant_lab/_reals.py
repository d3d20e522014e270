"""Parsing and formatting of reals in config files."""
import math


class ConfigError(ValueError):
    pass


_CONSTANTS = {"pi": math.pi, "e": math.e, "ln2": math.log(2), "inf": math.inf, "infinity": math.inf}


def _atom(tok: str) -> float:
    tok = tok.strip().lower()
    neg = tok.startswith("-")
    if neg:
        tok = tok[1:].strip()
    val = _CONSTANTS[tok] if tok in _CONSTANTS else float(tok)
    return -val if neg else val


def parse_real(value) -> float:
    """Parse a JSON real: a number, a decimal string, a constant or ``a/b``."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a real, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"expected a real, got {value!r}")
    parts = value.split("/")
    try:
        if len(parts) == 1:
            return _atom(parts[0])
        if len(parts) == 2:
            return _atom(parts[0]) / _atom(parts[1])
    except (ValueError, KeyError, ZeroDivisionError):
        pass
    raise ConfigError(f"cannot parse real {value!r}")


def format_real(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"
