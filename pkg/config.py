"""Run configuration, read from the environment and overridden by CLI flags."""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Dict, Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from utils.errors import ParameterError

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_GUARD = 10**6
CAP_KEYS = {"steiner": "steiner_terminal_cap", "edges": "brute_force_edge_cap", "profiles": "profile_cap"}


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = 0
    guard: int = Field(default=DEFAULT_GUARD, ge=1)
    absorb_order: Literal["from-v", "from-r"] = "from-v"
    steiner_terminal_cap: int = Field(default=14, ge=1)
    brute_force_edge_cap: int = Field(default=20, ge=0)
    profile_cap: int = Field(default=10**6, ge=1)
    out_dir: Path = Path("out")
    report_format: Literal["csv", "json"] = "csv"

    @classmethod
    def from_env(cls, **overrides) -> "RunConfig":
        """Defaults from ``MCAST_POS_*`` variables; ``None`` overrides are ignored."""
        values: Dict[str, object] = {}
        env_map = {
            "guard": os.getenv("MCAST_POS_GUARD"),
            "absorb_order": os.getenv("MCAST_POS_ABSORB_ORDER"),
            "report_format": os.getenv("MCAST_POS_FORMAT"),
            "out_dir": os.getenv("MCAST_POS_OUT"),
        }
        values.update({k: v for k, v in env_map.items() if v not in (None, "")})
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**values)
        except ValidationError as exc:
            raise ParameterError(f"invalid run configuration: {exc}") from exc

    def with_caps(self, spec: Optional[str]) -> "RunConfig":
        """Apply ``key=value`` pairs (``steiner``, ``edges``, ``profiles``), comma separated."""
        if not spec:
            return self
        updates: Dict[str, int] = {}
        for item in spec.split(","):
            key, sep, value = item.strip().partition("=")
            if not sep or key not in CAP_KEYS:
                raise ParameterError(f"unknown oracle cap {item!r}; expected one of {sorted(CAP_KEYS)}")
            try:
                updates[CAP_KEYS[key]] = int(value)
            except ValueError:
                raise ParameterError(f"oracle cap {key} needs an integer, got {value!r}") from None
        try:
            return self.model_validate({**self.model_dump(), **updates})
        except ValidationError as exc:
            raise ParameterError(f"invalid oracle caps: {exc}") from exc


__all__ = ["DEFAULT_GUARD", "RunConfig"]
