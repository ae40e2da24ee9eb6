"""Experiment engine: replay a request trace against a policy and
accumulate hit ratio, average access delay, and backhaul traffic.

Seed discipline: one master seed deterministically derives labeled child
seeds (topology, user assignment, workload), so a sweep varies exactly the
factor on its axis and nothing else. Identical configs produce identical
metrics.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .errors import ConfigError, TraceError
from .policies import POLICY_NAMES, LfuPolicy, LruPolicy, make_policy
from .topology import (Catalog, build_paper_topology, capacities_from_budget)
from .workload import (assign_users, estimate_popularity, generate_requests,
                       parse_trace_file, zipf_popularity)

SWEEP_AXES = ("total_cache_bytes", "zipf_alpha", "policy")

CSV_COLUMNS = ("policy", "axis_value", "seed", "requests", "hit_ratio",
               "avg_delay_ms", "backhaul_bytes", "local_hits", "cloud_hits",
               "neighbor_hits", "cdn_fetches")


def derive_seed(master, label):
    """Stable 63-bit child seed for a labeled role under one master seed."""
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class Metrics:
    """Counters accumulated over the evaluation window of one replay."""

    requests_total: int = 0
    local_hits: int = 0
    cloud_hits: int = 0
    neighbor_hits: int = 0
    cdn_fetches: int = 0
    sum_delay_ms: float = 0.0
    file_size_bytes: int = 0
    malformed_events: int = 0

    @property
    def cache_hits(self):
        return self.local_hits + self.cloud_hits + self.neighbor_hits

    @property
    def hit_ratio(self):
        return self.cache_hits / self.requests_total if self.requests_total else 0.0

    @property
    def avg_access_delay(self):
        return self.sum_delay_ms / self.requests_total if self.requests_total else 0.0

    @property
    def backhaul_bytes(self):
        return self.cdn_fetches * self.file_size_bytes

    def record(self, source):
        self.requests_total += 1
        self.sum_delay_ms += source.delay_cost
        kind = source.kind.value
        if kind == "local":
            self.local_hits += 1
        elif kind == "cloud":
            self.cloud_hits += 1
        elif kind == "neighbor":
            self.neighbor_hits += 1
        else:
            self.cdn_fetches += 1

    def as_dict(self):
        return {
            "requests_total": self.requests_total,
            "cache_hits": self.cache_hits,
            "hit_ratio": self.hit_ratio,
            "sum_delay_ms": self.sum_delay_ms,
            "avg_access_delay": self.avg_access_delay,
            "backhaul_bytes": self.backhaul_bytes,
            "local_hits": self.local_hits,
            "cloud_hits": self.cloud_hits,
            "neighbor_hits": self.neighbor_hits,
            "cdn_fetches": self.cdn_fetches,
            "malformed_events": self.malformed_events,
        }


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one replay.

    Exactly one workload source must be set: a trace path, or a Zipf alpha
    for synthetic generation. Capacities come either explicitly or from a
    total byte budget. The optional explicit fields (topology, popularity,
    user_assignment, capacities) override the seeded constructions; when a
    trace workload is used the catalog size comes from the trace.
    """

    policy: str
    num_bs: int = 7
    num_files: int = 10_000
    file_size_mb: float = 20.0
    total_cache_bytes: int | None = None
    cloud_edge_ratio: int = 4
    capacities: object = None
    trace_path: str | None = None
    zipf_alpha: float | None = None
    num_requests: int = 100_000
    num_users: int = 1_000
    warmup_frac: float = 0.2
    master_seed: int = 0
    smoothing: float = 1.0
    rcr_enabled: bool = True
    topology: object = None
    popularity: object = None
    user_assignment: dict | None = None

    def validate(self):
        if self.policy not in POLICY_NAMES:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of "
                              + ", ".join(POLICY_NAMES))
        if (self.trace_path is None) == (self.zipf_alpha is None):
            raise ConfigError("exactly one workload source required: "
                              "trace_path or zipf_alpha")
        if self.capacities is None and self.total_cache_bytes is None:
            raise ConfigError("capacities or total_cache_bytes required")
        if not 0.0 <= self.warmup_frac < 1.0:
            raise ConfigError("warmup_frac must lie in [0, 1)")

    def seeds(self):
        m = self.master_seed
        return {"master": m,
                "topology": derive_seed(m, "topology"),
                "assignment": derive_seed(m, "assignment"),
                "workload": derive_seed(m, "workload")}


def _resolve_workload(config, seeds):
    if config.trace_path is not None:
        try:
            trace = parse_trace_file(config.trace_path)
        except OSError as exc:
            raise TraceError(f"cannot read trace {config.trace_path}: {exc}") from exc
        return trace, None
    popularity = zipf_popularity(config.num_files, config.zipf_alpha)
    users = list(range(1, config.num_users + 1))
    trace = generate_requests(popularity, config.num_requests, users,
                              seeds["workload"])
    return trace, popularity


def run_experiment(config):
    """Replay one configured experiment and return its metrics.

    Builds topology and workload from derived seeds, estimates popularity
    over the warm-up window (unless given explicitly), constructs the
    policy, feeds warm-up events to the cold reactive policies (lfu, lru)
    without metrics, then replays the evaluation window. Deterministic per
    master seed.
    """
    config.validate()
    seeds = config.seeds()

    trace, true_popularity = _resolve_workload(config, seeds)
    catalog = Catalog(num_files=trace.catalog_size,
                      file_size_mb=config.file_size_mb)

    topology = config.topology
    if topology is None:
        topology = build_paper_topology(config.num_bs, seeds["topology"])
    assignment = config.user_assignment
    if assignment is None:
        assignment = assign_users(trace.users(), topology.num_bs,
                                  seeds["assignment"])
    if all(user in assignment for user in trace.users()):
        trace = trace.with_assignment(assignment)
    # else: uncovered events are skipped during replay and tallied malformed
    topology = topology.with_users(assignment)

    capacities = config.capacities
    if capacities is None:
        capacities = capacities_from_budget(config.total_cache_bytes, topology,
                                            catalog, config.cloud_edge_ratio)

    warm_count = int(len(trace.events) * config.warmup_frac)
    eval_events = trace.events[warm_count:]
    if not eval_events:
        raise ConfigError("empty evaluation window after warm-up split")

    popularity = config.popularity
    if popularity is None:
        popularity = estimate_popularity(trace, warm_count,
                                         smoothing=config.smoothing)

    policy = make_policy(config.policy, topology, catalog, popularity,
                         capacities, assignment, rcr_enabled=config.rcr_enabled)

    metrics = Metrics(file_size_bytes=catalog.file_size_bytes)
    if isinstance(policy, (LfuPolicy, LruPolicy)):
        # cold policies warm up on the estimation window, metrics excluded
        for event in trace.events[:warm_count]:
            policy.on_request(event)
    num_files = catalog.num_files
    for event in eval_events:
        if event.user_id not in assignment or not 1 <= event.file_id <= num_files:
            metrics.malformed_events += 1
            continue
        metrics.record(policy.on_request(event))
    return metrics


@dataclass
class SweepRow:
    policy: str
    axis_value: object
    seed: int
    metrics: Metrics


def _sweep_cell(args):
    axis, value, config = args
    if axis == "policy":
        cell = replace(config, policy=value)
    elif axis == "total_cache_bytes":
        cell = replace(config, total_cache_bytes=value, capacities=None)
    else:
        cell = replace(config, zipf_alpha=value)
    return SweepRow(policy=cell.policy, axis_value=value,
                    seed=cell.master_seed, metrics=run_experiment(cell))


def run_sweep(base, axis, values, jobs=1):
    """Run one experiment per axis value, all from the same master seed so
    the resulting curves are comparable. Returns rows in input order.

    ``jobs`` > 1 runs cells in parallel processes; ordering is deterministic
    regardless.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of "
                          + ", ".join(SWEEP_AXES))
    cells = [(axis, value, base) for value in values]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_sweep_cell, cells))
    return [_sweep_cell(cell) for cell in cells]


def format_row(row):
    """One CSV line per the metrics contract columns."""
    m = row.metrics
    fields = (row.policy, row.axis_value if row.axis_value is not None else "",
              row.seed, m.requests_total, format(m.hit_ratio, ".10g"),
              format(m.avg_access_delay, ".10g"), m.backhaul_bytes,
              m.local_hits, m.cloud_hits, m.neighbor_hits, m.cdn_fetches)
    return ",".join(str(f) for f in fields)


def rows_to_csv(rows, header_lines=()):
    """Render sweep rows as CSV, with '#'-prefixed reproducibility header
    lines carrying the resolved configuration and seeds."""
    out = [f"# {line}" for line in header_lines]
    out.append(",".join(CSV_COLUMNS))
    out.extend(format_row(row) for row in rows)
    return "\n".join(out) + "\n"


def rows_to_json(rows, header=None):
    import json

    records = []
    for row in rows:
        rec = {"policy": row.policy, "axis_value": row.axis_value,
               "seed": row.seed}
        rec.update(row.metrics.as_dict())
        records.append(rec)
    payload = {"rows": records}
    if header is not None:
        payload["config"] = header
    return json.dumps(payload, indent=2, sort_keys=True)
