"""Reading the INI-style run configuration (syntax in docs/CONFIG.md)."""

import configparser
import re
from pathlib import Path
from typing import Dict, Optional

from pydantic import ValidationError as PydanticValidationError

from src.errors import ConfigError, GgpmError
from src.state import RunConfig

SECTIONS = ("meta", "likelihood", "kernel", "engine", "fit", "numerics", "data", "sample")


def _line_of(text: str, section: str, key: Optional[str]) -> Optional[int]:
    """1-based line of `key` inside `[section]`, or of the section header."""

    current = None
    header_line = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        match = re.fullmatch(r"\[([^\]]+)\]", line)
        if match:
            current = match.group(1).strip()
            if current == section:
                header_line = number
            continue
        if current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", line):
            return number
    return header_line


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc

    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        line = _line_of(text, unknown[0], None)
        raise ConfigError(f"{source}:{line}: unknown section [{unknown[0]}]")

    raw: Dict[str, Dict[str, str]] = {s: dict(parser.items(s)) for s in parser.sections()}
    try:
        return RunConfig.model_validate(raw)
    except PydanticValidationError as exc:
        err = exc.errors()[0]
        loc = [str(p) for p in err["loc"]]
        section = loc[0] if loc else ""
        key = loc[1] if len(loc) > 1 else None
        line = _line_of(text, section, key)
        where = f"{source}:{line}" if line else source
        raise ConfigError(f"{where}: [{section}] {key or ''}: {err['msg']}".replace(" :", ":")) from exc


def load_config(path, seed: Optional[int] = None) -> RunConfig:
    """
    Read and validate a run configuration.

    `seed`, when given, overrides `[meta] seed`. Ids are resolved
    eagerly so unknown likelihoods, links or kernels fail here.
    """

    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    config = parse_config_text(text, source=str(path))
    if seed is not None:
        config = config.model_copy(update={"meta": config.meta.model_copy(update={"seed": int(seed)})})
    try:
        config.make_likelihood()
        config.make_kernel()
    except GgpmError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config
