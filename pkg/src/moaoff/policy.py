"""Per-modality edge/cloud routing.

A modality stays on the edge only when its complexity is within the
modality threshold, the edge load is within ``ell_max`` and the bandwidth
gate holds. Anything else goes to the cloud.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DomainError


class Modality(enum.Enum):
    TEXT = "text"
    IMAGE = "image"


class Decision(enum.Enum):
    EDGE = "edge"
    CLOUD = "cloud"


@dataclass(frozen=True)
class SystemState:
    edge_load: float
    bandwidth_mbps: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.edge_load <= 1.0:
            raise DomainError(f"edge_load must be in [0, 1], got {self.edge_load}")
        if not self.bandwidth_mbps > 0:
            raise DomainError(f"bandwidth must be positive, got {self.bandwidth_mbps}")


@dataclass(frozen=True)
class PolicyConfig:
    """Routing thresholds.

    ``bandwidth_gate_literal`` keeps the edge branch conditional on
    ``b <= beta_bw_mbps``, so links faster than the limit push work to the
    cloud. Setting it to False flips the gate to ``b >= beta_bw_mbps``.
    """

    tau_text: float = 0.5
    tau_image: float = 0.5
    ell_max: float = 0.8
    beta_bw_mbps: float = 400.0
    bandwidth_gate_literal: bool = True

    def __post_init__(self) -> None:
        for name in ("tau_text", "tau_image", "ell_max"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {v}")
        if not self.beta_bw_mbps > 0:
            raise DomainError(f"beta_bw_mbps must be positive, got {self.beta_bw_mbps}")

    def threshold(self, modality: Modality) -> float:
        return self.tau_text if modality is Modality.TEXT else self.tau_image

    def bandwidth_ok(self, bandwidth_mbps: float) -> bool:
        if self.bandwidth_gate_literal:
            return bandwidth_mbps <= self.beta_bw_mbps
        return bandwidth_mbps >= self.beta_bw_mbps

    def state_ok(self, state: SystemState) -> bool:
        return state.edge_load <= self.ell_max and self.bandwidth_ok(state.bandwidth_mbps)


@dataclass(frozen=True)
class RoutedModality:
    modality: Modality
    complexity: float
    decision: Decision


DecisionVector = tuple[RoutedModality, ...]


def _check_score(c: float) -> None:
    if not (0.0 <= c <= 1.0) or math.isnan(c):
        raise DomainError(f"complexity must be in [0, 1], got {c}")


def decide_modality(
    c: float, m: Modality, state: SystemState, cfg: PolicyConfig, *, use_state: bool = True
) -> Decision:
    """Route one modality. ``use_state=False`` drops the load and bandwidth conjuncts."""
    _check_score(c)
    if c <= cfg.threshold(m) and (not use_state or cfg.state_ok(state)):
        return Decision.EDGE
    return Decision.CLOUD


def decide_request(
    scores: Iterable[tuple[Modality, float]],
    state: SystemState,
    cfg: PolicyConfig,
    *,
    use_state: bool = True,
) -> DecisionVector:
    """Route every modality of one request against a single state snapshot."""
    scores = list(scores)
    if not scores:
        raise DomainError("a request needs at least one modality")
    return tuple(
        RoutedModality(m, c, decide_modality(c, m, state, cfg, use_state=use_state))
        for m, c in scores
    )


def decisions(vector: Sequence[RoutedModality]) -> list[Decision]:
    return [r.decision for r in vector]
