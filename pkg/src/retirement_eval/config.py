"""Run configuration files.

A config is sectioned ``key = value`` text. ``[run]`` carries the format
version; every other section is named after a subcommand and holds that
command's parameters, spelled like the long flags with underscores::

    [run]
    format_version = 1

    [did]
    panel = data/panel.csv
    treated = CAM
    policy_year = 2012

Values stay strings here; the CLI converts them with the same parsers it
uses for flags, and flags given on the command line win.
"""

from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

from .errors import DataError, UsageError

FORMAT_VERSION = 1

# parameter names that refer to files which must exist before a run starts
PATH_KEYS = frozenset({"panel", "input", "scenario", "scenario_a", "scenario_b", "change_scenario",
                       "mandate_scenario", "abolished_scenario"})
STOCHASTIC_COMMANDS = frozenset({"bootstrap", "report"})
BUNDLED_PREFIX = "@"


@dataclass
class RunConfig:
    sections: Dict[str, Dict[str, str]] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def for_command(self, command: str) -> Dict[str, str]:
        return dict(self.sections.get(command, {}))

    def with_command(self, command: str, params: Mapping[str, str]) -> "RunConfig":
        sections = {k: dict(v) for k, v in self.sections.items()}
        sections[command] = {str(k): str(v) for k, v in params.items()}
        return RunConfig(sections, self.format_version)

    def to_text(self) -> str:
        lines = ["[run]", f"format_version = {self.format_version}"]
        for name, params in self.sections.items():
            lines += ["", f"[{name}]"]
            for key, value in params.items():
                if "\n" in value:
                    raise DataError(f"config value for {name}.{key} spans lines")
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=None, empty_lines_in_values=False)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise UsageError("config: " + " ".join(str(exc).split())) from None
        version = FORMAT_VERSION
        if cp.has_section("run"):
            raw = cp["run"].get("format_version", str(FORMAT_VERSION))
            try:
                version = int(raw)
            except ValueError:
                raise UsageError(f"config: format_version {raw!r} is not an integer") from None
            extra = set(cp["run"]) - {"format_version"}
            if extra:
                raise UsageError(f"config: unknown [run] keys {sorted(extra)}")
        if version != FORMAT_VERSION:
            raise UsageError(f"config: unsupported format_version {version}; this toolkit reads {FORMAT_VERSION}")
        sections = {name: {k: v for k, v in cp[name].items()} for name in cp.sections() if name != "run"}
        return cls(sections, version)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read config {path!r}: {exc.strerror}") from None

    def validate(self, command: str, base_dir: Optional[str] = None) -> None:
        """Check referenced files exist and that stochastic commands carry a seed."""
        params = self.sections.get(command, {})
        for key in sorted(PATH_KEYS & set(params)):
            value = params[key]
            if not value or value.startswith(BUNDLED_PREFIX):
                continue
            path = value if base_dir is None or os.path.isabs(value) else os.path.join(base_dir, value)
            if not os.path.exists(path):
                raise DataError(f"{command}.{key}: no such file {value!r}")
        if command in STOCHASTIC_COMMANDS and not params.get("seed", "").strip():
            raise UsageError(f"{command} is stochastic and needs an explicit seed")
