"""Pipeline parameters with the published defaults."""
from dataclasses import asdict, dataclass, fields, replace
import hashlib
import json

FOG_BETA_MIN = 2.996e-3  # 1/m; visibility below 1 km
MOR_CONTRAST = 2.996  # -ln(0.05)
DEFAULT_BETAS = (0.005, 0.01, 0.02, 0.03, 0.06)
DEFAULT_SEED = 20180101


@dataclass(frozen=True)
class PipelineParams:
    epsilon: float = 12 / 255
    k_hat: int = 2048
    m: float = 10.0
    P: int = 20
    lambda_: float = 0.6
    ransac_max_iters: int = 2000
    ransac_p: float = 0.99
    theta_factor: float = 0.01
    theta_hat: float = 50.0
    depth_floor: float = 0.1
    radius: int = 20
    mu: float = 1e-3

    def __post_init__(self):
        if not 0 < self.lambda_ < 1:
            raise ValueError("lambda_ must lie in (0, 1)")
        if self.P < 1:
            raise ValueError("P must be >= 1")
        if self.k_hat < 1:
            raise ValueError("k_hat must be >= 1")
        if self.radius < 1 or self.mu <= 0:
            raise ValueError("guided filter needs radius >= 1 and mu > 0")
        if not 0 < self.ransac_p < 1:
            raise ValueError("ransac_p must lie in (0, 1)")
        for name in ("epsilon", "m", "theta_factor", "theta_hat", "depth_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        return cls(**d)

    def updated(self, **overrides):
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def sha256(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
