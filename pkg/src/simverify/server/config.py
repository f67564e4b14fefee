"""Server configuration from a flat key = value file."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

__all__ = ["ServerConfig", "load_server_config"]


@dataclass
class ServerConfig:
    listen: str = "127.0.0.1:8421"
    journal: str | None = None
    gibbs_iters: int = 20000
    gibbs_burnin: int = 2000
    max_m: int = 1000

    def __post_init__(self):
        if self.gibbs_iters <= self.gibbs_burnin or self.gibbs_burnin < 0:
            raise ValueError("need gibbs_iters > gibbs_burnin >= 0")
        if self.max_m < 2:
            raise ValueError("max_m must be at least 2")

    @property
    def host(self) -> str:
        return self.listen.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen.rsplit(":", 1)[1])


def load_server_config(path: str | Path) -> ServerConfig:
    """Parse `key = value` lines; '#' starts a comment.

    Keys: listen, journal, gibbs_iters, gibbs_burnin, max_m.
    """
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in ("gibbs_iters", "gibbs_burnin", "max_m"):
            values[key] = int(value)
        elif key in ("listen", "journal"):
            values[key] = value
        else:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    return ServerConfig(**values)
