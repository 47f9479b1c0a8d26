"""Engine tunables and their ``key=value`` file format."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class EngineConfig:
    max_features_per_frame: int = 500
    fast_threshold: int = 20
    max_ham: int = 20
    max_px: float = 100.0
    min_track_len: int = 8
    leaf_cap: int = 100
    backtracks: int = 50
    min_query_features: int = 10
    tau: float = 0.15
    width: int = 720

    def __post_init__(self):
        for name in ("max_features_per_frame", "fast_threshold", "max_ham", "min_track_len",
                     "leaf_cap", "min_query_features", "width"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.backtracks < 0:
            raise ValueError(f"backtracks must be >= 0, got {self.backtracks}")
        if not self.max_px > 0:
            raise ValueError(f"max_px must be > 0, got {self.max_px}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")

    def with_(self, **changes) -> "EngineConfig":
        return replace(self, **changes)

    def dumps(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in asdict(self).items())

    @classmethod
    def loads(cls, text: str) -> "EngineConfig":
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for n, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {n}: expected key=value, got {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"config line {n}: unknown key {key!r}")
            values[key] = float(val) if types[key] in (float, "float") else int(val)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "EngineConfig":
        with open(path, encoding="utf-8") as f:
            return cls.loads(f.read())
