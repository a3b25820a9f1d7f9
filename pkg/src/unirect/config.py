"""Free parameters of the probes.

None of the defaults are constants taken from the theory (which leaves them
unquantified); they are chosen so the code paths are exercised at desk scale.
"""
from dataclasses import asdict, dataclass, fields, replace

from .errors import ParameterError


@dataclass(frozen=True)
class ProbeConfig:
    eps: float = 0.05
    delta: float = 0.05
    delta0: float = 0.05
    delta1: float = 0.05
    eta: float = 0.1
    tau: float = 1 / 64
    tau0: float = 0.05
    kappa: float = 1 / 32
    N: int = 8
    M: float = 10.0
    c1: float = 10.0
    c2: float = 0.02
    seed: int = 0
    samples: int = 100

    def __post_init__(self):
        for f in fields(self):
            if f.name in ("seed",):
                continue
            if not getattr(self, f.name) > 0:
                raise ParameterError(f"{f.name} must be positive")
        if self.N < 1:
            raise ParameterError("N must be at least 1")

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_mapping(cls, data):
        names = {f.name: f.type for f in fields(cls)}
        kw = {}
        for k, v in data.items():
            if k not in names:
                raise ParameterError(f"unknown probe parameter {k!r}")
            kw[k] = int(v) if k in ("N", "seed", "samples") else float(v)
        return cls(**kw)
