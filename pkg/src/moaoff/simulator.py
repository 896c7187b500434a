"""Discrete-event simulation of one edge device and an elastic cloud.

The edge is a single FIFO server with a bounded resident queue; the cloud
runs every task immediately on its own server after the upload and round
trip. Requests arrive in time order, each carrying one task per modality.
"""

from __future__ import annotations

import csv
import enum
import heapq
import io
import math
from dataclasses import dataclass, fields
from typing import Callable, Iterable, Sequence

from .errors import DomainError
from .perception import percentile
from .policy import Decision, Modality, PolicyConfig, SystemState, decide_request
from .rng import SplitMix64


class Strategy(enum.Enum):
    MOA_OFF = "moa-off"
    EDGE_ONLY = "edge-only"
    CLOUD_ONLY = "cloud-only"
    UNIFORM = "uniform"

    @classmethod
    def parse(cls, name: str) -> Strategy:
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(s.value for s in cls)
            raise DomainError(f"unknown strategy {name!r} (choose from {choices})") from None


ALL_STRATEGIES = (Strategy.MOA_OFF, Strategy.EDGE_ONLY, Strategy.CLOUD_ONLY, Strategy.UNIFORM)


class Variant(enum.Enum):
    """Ablation switches for the MoA-Off router."""

    FULL = "full"
    MODALITY_BLIND = "modality-blind"
    NO_SCHEDULING = "no-scheduling"


@dataclass(frozen=True)
class ModalityTask:
    modality: Modality
    complexity: float
    payload_bytes: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.complexity <= 1.0:
            raise DomainError(f"task complexity must be in [0, 1], got {self.complexity}")
        if self.payload_bytes < 0:
            raise DomainError(f"payload_bytes must be non-negative, got {self.payload_bytes}")


@dataclass(frozen=True)
class Request:
    id: int
    arrival_time: float
    tasks: tuple[ModalityTask, ...]

    def __post_init__(self) -> None:
        if not self.tasks:
            raise DomainError(f"request {self.id} has no tasks")
        if not self.arrival_time >= 0:
            raise DomainError(f"request {self.id} has negative arrival time")
        object.__setattr__(self, "tasks", tuple(self.tasks))

    @property
    def mean_complexity(self) -> float:
        return math.fsum(t.complexity for t in self.tasks) / len(self.tasks)


@dataclass(frozen=True)
class CostModel:
    """Synthetic stand-in for a small edge MLLM and a large cloud MLLM.

    Service times are affine in task complexity. Edge accuracy decays
    linearly with complexity; cloud accuracy is flat.
    """

    edge_base_s: float = 0.03
    edge_slope_s: float = 0.25
    cloud_base_s: float = 0.42
    cloud_slope_s: float = 0.55
    rtt_s: float = 0.30
    edge_acc_base: float = 0.90
    edge_acc_slope: float = 0.45
    cloud_acc: float = 0.77
    edge_mem_mb: float = 4500.0
    cloud_mem_mb: float = 16500.0
    edge_queue_cap: int | None = 10

    def __post_init__(self) -> None:
        for f in ("edge_base_s", "edge_slope_s", "cloud_base_s", "cloud_slope_s", "rtt_s"):
            if not getattr(self, f) >= 0:
                raise DomainError(f"{f} must be non-negative")
        if not 0.0 <= self.cloud_acc <= 1.0:
            raise DomainError(f"cloud_acc must be in [0, 1], got {self.cloud_acc}")
        if self.edge_mem_mb < 0 or self.cloud_mem_mb < 0:
            raise DomainError("memory footprints must be non-negative")
        if self.edge_queue_cap is not None and self.edge_queue_cap < 1:
            raise DomainError(f"edge_queue_cap must be >= 1, got {self.edge_queue_cap}")

    def edge_accuracy(self, c: float) -> float:
        return min(1.0, max(0.0, self.edge_acc_base - self.edge_acc_slope * c))


def edge_service_time(task: ModalityTask, model: CostModel) -> float:
    return model.edge_base_s + model.edge_slope_s * task.complexity


def cloud_service_time(task: ModalityTask, model: CostModel) -> float:
    return model.cloud_base_s + model.cloud_slope_s * task.complexity


def transfer_time(payload_bytes: int, bandwidth_mbps: float) -> float:
    return payload_bytes * 8 / (bandwidth_mbps * 1e6)


def cloud_total_time(task: ModalityTask, bandwidth_mbps: float, model: CostModel) -> float:
    return (
        transfer_time(task.payload_bytes, bandwidth_mbps)
        + model.rtt_s
        + cloud_service_time(task, model)
    )


@dataclass(frozen=True)
class SimReport:
    strategy: str
    bandwidth_mbps: float
    requests: int
    tasks: int
    mean_s: float
    p50_s: float
    p95_s: float
    p99_s: float
    acc_proxy: float
    frac_offloaded: float
    edge_busy_s: float
    cloud_busy_s: float
    bytes_uploaded: int
    peak_edge_mem_mb: float
    peak_cloud_mem_mb: float
    edge_spills: int

    def metrics(self) -> tuple:
        """Every field except the strategy label, for cross-strategy comparisons."""
        return tuple(getattr(self, f.name) for f in fields(self) if f.name != "strategy")


@dataclass(frozen=True)
class TaskRecord:
    request_id: int
    index: int
    where: Decision
    spilled: bool
    start_s: float
    finish_s: float
    service_s: float
    correct: bool


Router = Callable[[Request, SystemState], list[Decision]]


def make_router(
    strategy: Strategy,
    cfg: PolicyConfig,
    *,
    variant: Variant = Variant.FULL,
    uniform_threshold: float = 0.5,
) -> Router:
    if strategy is Strategy.EDGE_ONLY:
        return lambda req, state: [Decision.EDGE] * len(req.tasks)
    if strategy is Strategy.CLOUD_ONLY:
        return lambda req, state: [Decision.CLOUD] * len(req.tasks)
    if strategy is Strategy.UNIFORM:

        def uniform(req: Request, state: SystemState) -> list[Decision]:
            d = Decision.CLOUD if req.mean_complexity > uniform_threshold else Decision.EDGE
            return [d] * len(req.tasks)

        return uniform

    use_state = variant is not Variant.NO_SCHEDULING

    def moa_off(req: Request, state: SystemState) -> list[Decision]:
        if variant is Variant.MODALITY_BLIND:
            mean = req.mean_complexity
            scores = [(t.modality, mean) for t in req.tasks]
        else:
            scores = [(t.modality, t.complexity) for t in req.tasks]
        return [r.decision for r in decide_request(scores, state, cfg, use_state=use_state)]

    return moa_off


def simulate(
    workload: Sequence[Request],
    strategy: Strategy,
    cfg: PolicyConfig,
    model: CostModel,
    bandwidth_mbps: float,
    seed: int,
    *,
    variant: Variant = Variant.FULL,
    uniform_threshold: float = 0.5,
    trace: list[TaskRecord] | None = None,
) -> SimReport:
    """Run one strategy over a time-ordered workload.

    Edge completions at the same instant as an arrival are processed first.
    Edge-only runs have nowhere to spill, so they ignore the queue cap.
    """
    if not workload:
        raise DomainError("workload is empty")
    if not bandwidth_mbps > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth_mbps}")
    for prev, cur in zip(workload, workload[1:]):
        if cur.arrival_time < prev.arrival_time:
            raise DomainError(
                f"workload not sorted: request {cur.id} arrives before request {prev.id}"
            )

    route = make_router(strategy, cfg, variant=variant, uniform_threshold=uniform_threshold)
    cap = None if strategy is Strategy.EDGE_ONLY else model.edge_queue_cap
    root = SplitMix64(seed)

    edge_done: list[float] = []  # min-heap of finish times of resident edge tasks
    edge_free_at = 0.0
    latencies: list[float] = []
    edge_busy: list[float] = []
    cloud_busy: list[float] = []
    bytes_up = 0
    n_tasks = n_cloud = n_correct = spills = 0
    edge_used = cloud_used = False

    for req in workload:
        t = req.arrival_time
        while edge_done and edge_done[0] <= t:
            heapq.heappop(edge_done)
        resident = len(edge_done)
        load = 0.0 if cap is None else min(1.0, resident / cap)
        targets = route(req, SystemState(load, bandwidth_mbps))

        draws = root.split(req.id)
        finish_max = t
        all_correct = True
        for i, (task, where) in enumerate(zip(req.tasks, targets)):
            spilled = False
            if where is Decision.EDGE and cap is not None and len(edge_done) >= cap:
                where, spilled = Decision.CLOUD, True
                spills += 1
            if where is Decision.EDGE:
                svc = edge_service_time(task, model)
                start = max(t, edge_free_at)
                finish = start + svc
                edge_free_at = finish
                heapq.heappush(edge_done, finish)
                edge_busy.append(svc)
                edge_used = True
                acc = model.edge_accuracy(task.complexity)
            else:
                svc = cloud_service_time(task, model)
                start = t + transfer_time(task.payload_bytes, bandwidth_mbps) + model.rtt_s
                finish = start + svc
                cloud_busy.append(svc)
                bytes_up += task.payload_bytes
                n_cloud += 1
                cloud_used = True
                acc = model.cloud_acc
            correct = draws.random() < acc
            all_correct = all_correct and correct
            finish_max = max(finish_max, finish)
            n_tasks += 1
            if trace is not None:
                trace.append(TaskRecord(req.id, i, where, spilled, start, finish, svc, correct))
        latencies.append(finish_max - t)
        n_correct += all_correct

    return SimReport(
        strategy=strategy.value if variant is Variant.FULL else f"{strategy.value}/{variant.value}",
        bandwidth_mbps=float(bandwidth_mbps),
        requests=len(workload),
        tasks=n_tasks,
        mean_s=math.fsum(latencies) / len(latencies),
        p50_s=percentile(latencies, 50),
        p95_s=percentile(latencies, 95),
        p99_s=percentile(latencies, 99),
        acc_proxy=n_correct / len(workload),
        frac_offloaded=n_cloud / n_tasks,
        edge_busy_s=math.fsum(edge_busy),
        cloud_busy_s=math.fsum(cloud_busy),
        bytes_uploaded=bytes_up,
        peak_edge_mem_mb=model.edge_mem_mb if edge_used else 0.0,
        peak_cloud_mem_mb=model.cloud_mem_mb if cloud_used else 0.0,
        edge_spills=spills,
    )


def run_comparison(
    workload: Sequence[Request],
    cfg: PolicyConfig,
    model: CostModel,
    bandwidths: Iterable[float],
    seed: int,
    *,
    strategies: Sequence[Strategy] = ALL_STRATEGIES,
    uniform_threshold: float = 0.5,
) -> list[SimReport]:
    """Bandwidth-major grid: for each bandwidth in the given order, each strategy in order."""
    return [
        simulate(workload, s, cfg, model, bw, seed, uniform_threshold=uniform_threshold)
        for bw in bandwidths
        for s in strategies
    ]


@dataclass(frozen=True)
class AblationReport:
    full: SimReport
    modality_blind: SimReport
    no_scheduling: SimReport

    def deltas(self) -> dict[str, dict[str, float]]:
        """Variant minus full; negative accuracy or positive latency means the variant is worse."""
        out = {}
        for name, rep in (("modality-blind", self.modality_blind), ("no-scheduling", self.no_scheduling)):
            out[name] = {
                "acc_proxy": rep.acc_proxy - self.full.acc_proxy,
                "mean_s": rep.mean_s - self.full.mean_s,
                "p95_s": rep.p95_s - self.full.p95_s,
                "edge_busy_s": rep.edge_busy_s - self.full.edge_busy_s,
                "cloud_busy_s": rep.cloud_busy_s - self.full.cloud_busy_s,
            }
        return out


def ablation(
    workload: Sequence[Request],
    cfg: PolicyConfig,
    model: CostModel,
    bandwidth_mbps: float,
    seed: int,
) -> AblationReport:
    run = lambda v: simulate(workload, Strategy.MOA_OFF, cfg, model, bandwidth_mbps, seed, variant=v)  # noqa: E731
    return AblationReport(run(Variant.FULL), run(Variant.MODALITY_BLIND), run(Variant.NO_SCHEDULING))


# -- serialization -----------------------------------------------------------

CSV_COLUMNS = (
    "strategy",
    "bandwidth_mbps",
    "mean_s",
    "p50_s",
    "p95_s",
    "p99_s",
    "acc_proxy",
    "frac_offloaded",
    "edge_busy_s",
    "cloud_busy_s",
    "bytes_uploaded",
    "peak_edge_mem_mb",
    "peak_cloud_mem_mb",
    "edge_spills",
)


def reports_to_csv(reports: Iterable[SimReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        writer.writerow([_fmt(getattr(rep, col)) for col in CSV_COLUMNS])
    return buf.getvalue()


def _fmt(v: object) -> str:
    # repr gives the shortest round-tripping form on every platform
    return repr(v) if isinstance(v, float) else str(v)


def summary_table(reports: Sequence[SimReport]) -> str:
    header = f"{'strategy':<26}{'bw_mbps':>8}{'mean_s':>9}{'p95_s':>9}{'acc':>7}{'offload':>8}{'edge_s':>10}{'cloud_s':>10}{'spills':>7}"
    lines = [header, "-" * len(header)]
    for r in reports:
        lines.append(
            f"{r.strategy:<26}{r.bandwidth_mbps:>8.0f}{r.mean_s:>9.4f}{r.p95_s:>9.4f}"
            f"{r.acc_proxy:>7.3f}{r.frac_offloaded:>8.3f}{r.edge_busy_s:>10.1f}"
            f"{r.cloud_busy_s:>10.1f}{r.edge_spills:>7d}"
        )
    return "\n".join(lines)
