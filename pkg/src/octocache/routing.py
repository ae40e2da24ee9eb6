"""Request routing and the delay-reduction objective.

A request from BS r for file i is served from the cheapest feasible source:
the local edge cache (cost 0), the cloud cache (cost d_r), a neighbor's edge
cache (cost d_rk), or the CDN origin (cost d_0). The objective optimized by
the placement algorithms is the total expected delay *reduction* relative to
fetching everything from the CDN: a copy of file i in cache k is worth

* t = d_0        when k is the requesting BS itself (local hit),
* t = d_0 - d_r  when k is the cloud cache,
* t = d_0 - d_rk when k is a neighbor BS,

and each user's per-file value is the best t among the caches currently
holding the file (0 if uncached). The two views are dual: for any feasible
placement, utility + total expected delay = U * d_0.

The utility is monotone and submodular in the set of (file, cache) copies,
which is what makes the greedy placement in :mod:`octocache.placement` carry
a 1/2 approximation guarantee. This module keeps the two computations on
independent code paths (max over t-values vs. min over source costs) so the
duality can be checked rather than assumed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class RoutingMode(enum.Enum):
    """Which caches a user's request may be served from.

    FULL is the cooperative hierarchy (local, cloud, neighbors, CDN).
    EDGE_CLOUD forbids the neighbor U-turn; EDGE_ONLY additionally forbids
    the cloud cache. The CDN is always reachable.
    """

    FULL = "full"
    EDGE_CLOUD = "edge-cloud"
    EDGE_ONLY = "edge-only"


class SourceKind(enum.Enum):
    LOCAL_EDGE = "local"
    CLOUD = "cloud"
    NEIGHBOR_EDGE = "neighbor"
    CDN = "cdn"


@dataclass(frozen=True)
class Source:
    """Where a request was served from and at what delay cost.

    ``cache`` is the serving cache index (0 = cloud, 1..R = edge), or None
    for a CDN fetch. The cost is 0 exactly when the source is the local
    edge cache.
    """

    kind: SourceKind
    cache: int | None
    delay_cost: float

    @property
    def is_hit(self):
        return self.kind is not SourceKind.CDN


class Placement:
    """Cache contents: one set of file indices per cache, 0 = cloud.

    A placement is feasible when every cache holds at most its capacity.
    The same file may be replicated across caches but appears at most once
    within a cache. ``add``/``remove`` enforce feasibility; mutation
    requires exclusive access, reads of a stable placement are safe to
    share.
    """

    __slots__ = ("capacities", "num_files", "contents")

    def __init__(self, capacities, num_files, contents=None):
        self.capacities = capacities
        self.num_files = num_files
        caps = capacities.as_list()
        if contents is None:
            self.contents = [set() for _ in caps]
        else:
            if len(contents) != len(caps):
                raise ValueError(f"expected {len(caps)} cache sets, got {len(contents)}")
            self.contents = [set(c) for c in contents]
            for r, files in enumerate(self.contents):
                for f in files:
                    self._check_file(f)
                if len(files) > caps[r]:
                    raise ValueError(f"cache {r} over capacity: {len(files)} > {caps[r]}")

    def _check_file(self, file):
        if not 1 <= file <= self.num_files:
            raise ValueError(f"file index {file} outside 1..{self.num_files}")

    def _check_cache(self, cache):
        if not 0 <= cache < len(self.contents):
            raise ValueError(f"cache index {cache} outside 0..{len(self.contents) - 1}")

    @property
    def num_caches(self):
        return len(self.contents)

    def contains(self, file, cache):
        return file in self.contents[cache]

    def cached_anywhere(self, file):
        return any(file in c for c in self.contents)

    def holders(self, file):
        """Caches currently holding ``file``, in ascending index order."""
        return [r for r, c in enumerate(self.contents) if file in c]

    def cache_size(self, cache):
        return len(self.contents[cache])

    def is_full(self, cache):
        return len(self.contents[cache]) >= self.capacities.as_list()[cache]

    def add(self, file, cache):
        self._check_file(file)
        self._check_cache(cache)
        if file in self.contents[cache]:
            raise ValueError(f"file {file} already placed in cache {cache}")
        if self.is_full(cache):
            raise ValueError(f"cache {cache} is full")
        self.contents[cache].add(file)

    def remove(self, file, cache):
        self._check_cache(cache)
        if file not in self.contents[cache]:
            raise ValueError(f"file {file} not in cache {cache}")
        self.contents[cache].remove(file)

    def elements(self):
        """All (file, cache) copies, sorted by cache then file."""
        return [(f, r) for r, c in enumerate(self.contents) for f in sorted(c)]

    def size(self):
        return sum(len(c) for c in self.contents)

    def is_feasible(self):
        caps = self.capacities.as_list()
        for r, files in enumerate(self.contents):
            if len(files) > caps[r]:
                return False
            if any(not 1 <= f <= self.num_files for f in files):
                return False
        return True

    def copy(self):
        return Placement(self.capacities, self.num_files, self.contents)

    def __eq__(self, other):
        return (isinstance(other, Placement)
                and self.num_files == other.num_files
                and self.capacities == other.capacities
                and self.contents == other.contents)

    def __repr__(self):
        sets = ", ".join(f"C{r}={sorted(c)}" for r, c in enumerate(self.contents))
        return f"Placement({sets})"

    def to_text(self):
        """Line-oriented export: ``cache_index<TAB>file_index``, sorted."""
        return "".join(f"{r}\t{f}\n" for f, r in self.elements())

    @classmethod
    def from_text(cls, text, capacities, num_files):
        placement = cls(capacities, num_files)
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected cache<TAB>file")
            placement.add(int(parts[1]), int(parts[0]))
        return placement


def feasible(placement):
    """True when the placement respects every cache capacity (partition
    matroid membership)."""
    return placement.is_feasible()


def t_value_table(topology, mode=RoutingMode.FULL):
    """Delay reduction t of one cached copy, per (requesting BS, cache).

    Returns an array of shape (R, R+1) where entry [b-1, k] is the delay
    reduction a user at BS b gets from a copy in cache k, given the routing
    mode. Sources a mode forbids contribute 0, i.e. the copy is worthless
    to that user.
    """
    R = topology.num_bs
    d0 = topology.cdn_delay
    t = np.zeros((R, R + 1))
    for b in range(1, R + 1):
        t[b - 1, b] = d0
        if mode is not RoutingMode.EDGE_ONLY:
            t[b - 1, 0] = d0 - topology.edge_delay[b - 1]
        if mode is RoutingMode.FULL:
            for k in range(1, R + 1):
                if k != b:
                    t[b - 1, k] = d0 - topology.peer_delay[b - 1][k - 1]
    return t


def source_cost_table(topology, mode=RoutingMode.FULL):
    """Delay cost of serving BS b from cache k, shape (R, R+1), with
    ``inf`` for sources the routing mode forbids."""
    R = topology.num_bs
    cost = np.full((R, R + 1), np.inf)
    for b in range(1, R + 1):
        cost[b - 1, b] = 0.0
        if mode is not RoutingMode.EDGE_ONLY:
            cost[b - 1, 0] = topology.edge_delay[b - 1]
        if mode is RoutingMode.FULL:
            for k in range(1, R + 1):
                if k != b:
                    cost[b - 1, k] = topology.peer_delay[b - 1][k - 1]
    return cost


def route_request(placement, topology, bs, file, mode=RoutingMode.FULL):
    """Route one request to the cheapest feasible source.

    Exactly one source is chosen: the minimum-cost cache currently holding
    the file among those the mode allows, or the CDN if none does. Cost ties
    are broken toward the lower cache index (cloud first), and any cache
    beats the CDN at equal cost.

    Parameters
    ----------
    placement : Placement
    topology : Topology
    bs : int
        Requesting base station, 1..R.
    file : int
        Requested file, 1..F.
    mode : RoutingMode

    Returns
    -------
    Source
    """
    R = topology.num_bs
    if not 1 <= bs <= R:
        raise ValueError(f"bs index {bs} outside 1..{R}")
    if not 1 <= file <= placement.num_files:
        raise ValueError(f"file index {file} outside 1..{placement.num_files}")
    contents = placement.contents
    if file in contents[bs]:
        return Source(SourceKind.LOCAL_EDGE, bs, 0.0)
    best_cost = topology.cdn_delay
    best_cache = None
    if mode is not RoutingMode.EDGE_ONLY and file in contents[0]:
        cost = topology.edge_delay[bs - 1]
        if cost < best_cost:
            best_cost, best_cache = cost, 0
    if mode is RoutingMode.FULL:
        for k in range(1, R + 1):
            if k != bs and file in contents[k]:
                cost = topology.peer_delay[bs - 1][k - 1]
                if cost < best_cost:
                    best_cost, best_cache = cost, k
    if best_cache is None:
        return Source(SourceKind.CDN, None, topology.cdn_delay)
    kind = SourceKind.CLOUD if best_cache == 0 else SourceKind.NEIGHBOR_EDGE
    return Source(kind, best_cache, best_cost)


def _cached_mask(placement, num_caches):
    mask = np.zeros((num_caches, placement.num_files), dtype=bool)
    for r, files in enumerate(placement.contents):
        if files:
            mask[r, np.fromiter(files, dtype=int) - 1] = True
    return mask


def _delay_matrix(placement, topology, mode):
    """Per (BS, file) optimal-route delay cost, shape (R, F), computed as a
    min over explicit source costs (independently of the t-value path)."""
    mask = _cached_mask(placement, topology.num_bs + 1)
    cost = source_cost_table(topology, mode)
    candidates = np.where(mask[None, :, :], cost[:, :, None], np.inf)
    return np.minimum(candidates.min(axis=1), topology.cdn_delay)


def user_expected_delay(placement, topology, popularity, user,
                        mode=RoutingMode.FULL):
    """Expected delay [ms] of one user: sum over files of p_i times the
    optimal route cost from the user's home BS."""
    home = topology.home_bs(user)
    delays = _delay_matrix(placement, topology, mode)
    return float(popularity.as_array() @ delays[home - 1])


def total_expected_delay(placement, topology, popularity,
                         mode=RoutingMode.FULL):
    """Total expected delay [ms] summed over every user in the topology."""
    delays = _delay_matrix(placement, topology, mode)
    counts = topology.bs_user_counts()
    return float(counts @ delays @ popularity.as_array())


def utility(placement, topology, popularity, mode=RoutingMode.FULL):
    """Total expected delay reduction of a placement over all users.

    Equals ``U * d_0 - total_expected_delay`` for every feasible placement;
    monotone and submodular in the set of (file, cache) copies.
    """
    return UtilityEvaluator(topology, popularity, placement, mode=mode).utility()


def marginal_gain(placement, candidate, topology, popularity,
                  mode=RoutingMode.FULL):
    """Utility increase from adding ``candidate = (file, cache)``.

    Always non-negative (monotonicity). Raises ``ValueError`` when the
    candidate is already placed or its cache is full.
    """
    ev = UtilityEvaluator(topology, popularity, placement, mode=mode)
    return ev.marginal_gain(*candidate)


def marginal_loss(placement, member, topology, popularity,
                  mode=RoutingMode.FULL):
    """Utility decrease from removing ``member = (file, cache)``.

    Always non-negative; equals ``marginal_gain(placement - member, member)``.
    Raises ``ValueError`` when the member is not placed.
    """
    ev = UtilityEvaluator(topology, popularity, placement, mode=mode)
    return ev.marginal_loss(*member)


class UtilityEvaluator:
    """Incremental utility bookkeeping for one mutable placement.

    Keeps, for every (BS, file) pair, the best and second-best t-values over
    the caches currently holding the file, so a marginal gain or loss costs
    O(R) instead of a pass over the catalog. The evaluator owns its
    placement copy: mutate through :meth:`add` / :meth:`remove` only.
    Reads of a quiescent evaluator are safe to share; mutation requires
    exclusive access.
    """

    def __init__(self, topology, popularity, placement, mode=RoutingMode.FULL):
        if popularity.num_files != placement.num_files:
            raise ValueError("popularity length does not match placement catalog")
        if placement.num_caches != topology.num_bs + 1:
            raise ValueError("placement cache count does not match topology")
        self.topology = topology
        self.mode = mode
        self.placement = placement.copy()
        self.probs = popularity.as_array()
        self.counts = topology.bs_user_counts()
        self.t_table = t_value_table(topology, mode)
        R, F = topology.num_bs, placement.num_files
        self.num_bs = R
        self.num_files = F
        self._cols = np.tile(np.arange(F), R)
        mask = _cached_mask(self.placement, R + 1)
        self.mask = mask
        vals = np.where(mask[None, :, :], self.t_table[:, :, None], 0.0)
        self.best1 = vals.max(axis=1)
        self.best2 = np.partition(vals, -2, axis=1)[:, -2, :]
        self.src1 = np.where(self.best1 > 0, vals.argmax(axis=1), -1)

    # -- queries ----------------------------------------------------------

    def utility(self):
        return float(self.counts @ self.best1 @ self.probs)

    def snapshot(self):
        """Immutable-by-convention copy of the current placement."""
        return self.placement.copy()

    def _gain(self, file, cache):
        j = file - 1
        t = self.t_table[:, cache]
        return float(self.probs[j]
                     * (self.counts @ np.maximum(t - self.best1[:, j], 0.0)))

    def _loss(self, file, cache):
        j = file - 1
        hit = self.src1[:, j] == cache
        return float(self.probs[j]
                     * (self.counts @ ((self.best1[:, j] - self.best2[:, j]) * hit)))

    def marginal_gain(self, file, cache):
        self.placement._check_file(file)
        self.placement._check_cache(cache)
        if self.placement.contains(file, cache):
            raise ValueError(f"file {file} already placed in cache {cache}")
        if self.placement.is_full(cache):
            raise ValueError(f"cache {cache} is full")
        return self._gain(file, cache)

    def marginal_loss(self, file, cache):
        self.placement._check_cache(cache)
        if not self.placement.contains(file, cache):
            raise ValueError(f"file {file} not in cache {cache}")
        return self._loss(file, cache)

    def min_loss_element(self):
        """The cached copy with the smallest marginal loss, as a tuple
        (loss, file, cache); ties prefer the lower file then cache index.
        Returns None when nothing is cached."""
        if self.placement.size() == 0:
            return None
        diff = self.best1 - self.best2
        weighted = self.counts[:, None] * diff
        keys = (self.src1.ravel() + 1) * self.num_files + self._cols
        sums = np.bincount(keys, weights=weighted.ravel(),
                           minlength=(self.num_bs + 2) * self.num_files)
        loss = sums.reshape(self.num_bs + 2, self.num_files)[1:] * self.probs
        cand = np.where(self.mask, loss, np.inf)
        best = cand.min()
        file_idx = int(np.nonzero((cand == best).any(axis=0))[0][0])
        cache = int(np.nonzero(cand[:, file_idx] == best)[0][0])
        return float(best), file_idx + 1, cache

    # -- mutation ---------------------------------------------------------

    def add(self, file, cache):
        self.placement.add(file, cache)
        j = file - 1
        self.mask[cache, j] = True
        t = self.t_table[:, cache]
        b1 = self.best1[:, j]
        self.best2[:, j] = np.where(t >= b1, b1, np.maximum(self.best2[:, j], t))
        better = t > b1
        self.best1[:, j] = np.where(better, t, b1)
        self.src1[:, j] = np.where(better, cache, self.src1[:, j])

    def remove(self, file, cache):
        self.placement.remove(file, cache)
        j = file - 1
        self.mask[cache, j] = False
        holders = self.placement.holders(file)
        if not holders:
            self.best1[:, j] = 0.0
            self.best2[:, j] = 0.0
            self.src1[:, j] = -1
            return
        vals = self.t_table[:, holders]
        b1 = vals.max(axis=1)
        self.best1[:, j] = b1
        if len(holders) >= 2:
            self.best2[:, j] = np.partition(vals, -2, axis=1)[:, -2]
        else:
            self.best2[:, j] = 0.0
        src = np.asarray(holders)[vals.argmax(axis=1)]
        self.src1[:, j] = np.where(b1 > 0, src, -1)
