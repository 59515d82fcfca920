"""Scenario specifications and deterministic seed derivation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .fields import GridSpec

__all__ = ["ScenarioSpec", "derive_seed", "STREAMS"]

# Independent random streams drawn per scenario.
STREAMS = ("field", "pref", "uniform", "marks", "test")


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of the factorial design, plus the fixed simulation constants.

    ``spatial_range`` is the practical range of the generating field,
    ``prop_random`` the fraction of the n_total samples placed uniformly
    (the rest follow the preferential design), ``replicate`` the repeat
    index within the cell.
    """

    spatial_range: float
    prop_random: float
    n_total: int
    replicate: int
    grid: GridSpec
    eta: float = 0.0
    tau: float = 0.3
    alpha_sim: float = 1.5
    sigma: float = 1.0
    nu: float = 1.0
    n_test: int = 400

    def __post_init__(self):
        if not 0.0 <= self.prop_random <= 1.0:
            raise ValueError("prop_random must lie in [0, 1]")
        if self.n_total < 1:
            raise ValueError("n_total must be >= 1")
        if self.replicate < 0:
            raise ValueError("replicate must be >= 0")
        if self.n_test < 1:
            raise ValueError("n_test must be >= 1")

    @property
    def scenario_id(self) -> str:
        return (
            f"r{self.spatial_range:g}_p{self.prop_random:.2f}"
            f"_n{self.n_total}_rep{self.replicate}"
        )


def derive_seed(master_seed: int, spec: ScenarioSpec, stream: str) -> int:
    """Stable 63-bit seed for one random stream of one scenario.

    Hashes the master seed, the scenario's factor levels, and the stream
    label, so every (scenario, stream) pair gets its own reproducible
    generator key and distinct scenarios never share a stream seed.
    """
    key = (
        f"{master_seed}|range={spec.spatial_range!r}|prop={spec.prop_random!r}"
        f"|n={spec.n_total}|rep={spec.replicate}|stream={stream}"
    )
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & (2**63 - 1)
