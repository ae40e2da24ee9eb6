"""Cache-management policies driven by the request stream.

Policies resolve each request against their current cache contents (the
routing mode is a property of the policy) and update state on misses:

* ``octopus``  - greedy warm placement, then reactive replacement on every
  miss; full cooperative routing.
* ``eo`` / ``ecnc`` / ``exmpc`` / ``femtox`` - static placements, no
  reactive updates; ``eo`` routes edge-only, ``ecnc`` edge+cloud, the rest
  use full cooperative routing.
* ``lfu`` / ``lru`` - classic reactive replacement applied hierarchically:
  a CDN miss inserts the file into both the requesting BS's edge cache and
  the cloud cache, each applying its own eviction rule. Both start cold.

Observation scopes for the reactive bookkeeping: an edge cache sees the
requests of the users homed at its BS; the cloud cache (managed centrally)
sees every request.
"""

from __future__ import annotations

import heapq
from collections import OrderedDict

from .placement import _rcr_swaps, pcd, place_ecnc, place_eo, place_exmpc, place_femtox
from .routing import Placement, RoutingMode, SourceKind, UtilityEvaluator, route_request

POLICY_NAMES = ("octopus", "eo", "ecnc", "exmpc", "femtox", "lfu", "lru")

#: Routing restriction implied by each policy during evaluation.
POLICY_ROUTING = {
    "octopus": RoutingMode.FULL,
    "eo": RoutingMode.EDGE_ONLY,
    "ecnc": RoutingMode.EDGE_CLOUD,
    "exmpc": RoutingMode.FULL,
    "femtox": RoutingMode.FULL,
    "lfu": RoutingMode.FULL,
    "lru": RoutingMode.FULL,
}


class Policy:
    """Base class: route a request, update internal state, report the source."""

    name = "base"

    def __init__(self, topology, assignment, routing_mode):
        self.topology = topology
        self.assignment = dict(assignment)
        self.routing_mode = routing_mode

    @property
    def placement(self):
        raise NotImplementedError

    def home_bs(self, user):
        try:
            return self.assignment[user]
        except KeyError:
            raise ValueError(f"unknown user {user!r}") from None

    def on_request(self, event):
        """Serve one request and apply the policy's update rule.

        Returns the :class:`Source` used, for metric accounting. Raises
        ``ValueError`` on an unknown user or an out-of-range file; callers
        doing bulk replay skip such events and tally them as malformed.
        """
        raise NotImplementedError


class StaticPlacementPolicy(Policy):
    """A fixed placement; requests never change the caches."""

    def __init__(self, name, placement, topology, assignment, routing_mode):
        super().__init__(topology, assignment, routing_mode)
        self.name = name
        self._placement = placement

    @property
    def placement(self):
        return self._placement

    def on_request(self, event):
        bs = self.home_bs(event.user_id)
        return route_request(self._placement, self.topology, bs, event.file_id,
                             self.routing_mode)


class OctopusPolicy(Policy):
    """Greedy warm placement plus reactive replacement on each miss.

    The popularity snapshot is fixed when the policy is built; replacement
    decisions during replay reuse it unchanged. Hits are read-only.
    """

    name = "octopus"

    def __init__(self, topology, assignment, popularity, placement,
                 rcr_enabled=True):
        super().__init__(topology, assignment, RoutingMode.FULL)
        self.rcr_enabled = rcr_enabled
        self._ev = UtilityEvaluator(topology, popularity, placement,
                                    mode=RoutingMode.FULL)

    @property
    def placement(self):
        return self._ev.placement

    def utility(self):
        return self._ev.utility()

    def on_request(self, event):
        bs = self.home_bs(event.user_id)
        src = route_request(self._ev.placement, self.topology, bs, event.file_id,
                            self.routing_mode)
        if src.kind is SourceKind.CDN and self.rcr_enabled:
            self.on_miss(event.file_id)
        return src

    def on_miss(self, file):
        """Reactive replacement for a file just fetched from the CDN."""
        if self._ev.placement.cached_anywhere(file):
            raise ValueError(f"file {file} is already cached")
        return _rcr_swaps(self._ev, file)


class _LfuBookkeeping:
    """Per-cache LFU state: request counters, recency for tie-breaks, and a
    lazy min-heap over (count, last_use, file) keys of resident files."""

    __slots__ = ("counts", "last_use", "heap")

    def __init__(self, num_files):
        self.counts = [0] * (num_files + 1)
        self.last_use = {}
        self.heap = []

    def observe(self, file, seq, resident):
        self.counts[file] += 1
        if resident:
            self.last_use[file] = seq
            heapq.heappush(self.heap, (self.counts[file], seq, file))

    def note_inserted(self, file, seq):
        self.last_use[file] = seq
        heapq.heappush(self.heap, (self.counts[file], seq, file))

    def victim(self, residents):
        """Resident file with the lowest (count, last_use, file) key."""
        while self.heap:
            count, seq, file = self.heap[0]
            if (file in residents and self.counts[file] == count
                    and self.last_use.get(file) == seq):
                return file
            heapq.heappop(self.heap)
        return None


class LfuPolicy(Policy):
    """Hierarchical least-frequently-used replacement.

    Every observed request bumps the file's counter at the observing caches
    (edge cache of the home BS, plus the cloud). On a CDN miss the file is
    inserted at both caches, evicting the lowest-count resident, but only if
    the new file's count strictly exceeds the victim's. Counter ties evict
    the least recently used, then the lowest file index. Counters never
    decay.
    """

    name = "lfu"

    def __init__(self, topology, assignment, capacities, num_files):
        super().__init__(topology, assignment, RoutingMode.FULL)
        self._placement = Placement(capacities, num_files)
        self._books = [_LfuBookkeeping(num_files)
                       for _ in range(topology.num_bs + 1)]
        self._seq = 0

    @property
    def placement(self):
        return self._placement

    def counts(self, cache):
        """Observed request counts at one cache (index 0 is unused)."""
        return self._books[cache].counts

    def on_request(self, event):
        bs = self.home_bs(event.user_id)
        src = route_request(self._placement, self.topology, bs, event.file_id,
                            self.routing_mode)
        self._seq += 1
        file = event.file_id
        for cache in (bs, 0):
            self._books[cache].observe(file, self._seq,
                                       self._placement.contains(file, cache))
        if src.kind is SourceKind.CDN:
            self._admit(bs, file)
            self._admit(0, file)
        return src

    def _admit(self, cache, file):
        caps = self._placement.capacities.as_list()
        if caps[cache] == 0 or self._placement.contains(file, cache):
            return
        book = self._books[cache]
        if self._placement.cache_size(cache) < caps[cache]:
            self._placement.add(file, cache)
            book.note_inserted(file, self._seq)
            return
        victim = book.victim(self._placement.contents[cache])
        if victim is not None and book.counts[file] > book.counts[victim]:
            self._placement.remove(victim, cache)
            self._placement.add(file, cache)
            book.note_inserted(file, self._seq)


class LruPolicy(Policy):
    """Hierarchical least-recently-used replacement.

    A request refreshes the file's recency at the observing caches where it
    is resident (edge of the home BS, plus the cloud). A CDN miss inserts
    unconditionally at both, evicting the least recently used resident;
    insertion counts as a use.
    """

    name = "lru"

    def __init__(self, topology, assignment, capacities, num_files):
        super().__init__(topology, assignment, RoutingMode.FULL)
        self._placement = Placement(capacities, num_files)
        self._recency = [OrderedDict() for _ in range(topology.num_bs + 1)]

    @property
    def placement(self):
        return self._placement

    def on_request(self, event):
        bs = self.home_bs(event.user_id)
        file = event.file_id
        src = route_request(self._placement, self.topology, bs, file,
                            self.routing_mode)
        for cache in (bs, 0):
            if self._placement.contains(file, cache):
                self._recency[cache].move_to_end(file)
        if src.kind is SourceKind.CDN:
            self._insert(bs, file)
            self._insert(0, file)
        return src

    def _insert(self, cache, file):
        caps = self._placement.capacities.as_list()
        if caps[cache] == 0:
            return
        if self._placement.cache_size(cache) >= caps[cache]:
            evicted, _ = self._recency[cache].popitem(last=False)
            self._placement.remove(evicted, cache)
        self._placement.add(file, cache)
        self._recency[cache][file] = None


def make_policy(name, topology, catalog, popularity, capacities, assignment,
                rcr_enabled=True):
    """Build a replay-ready policy by its contract name.

    ``octopus`` runs the greedy warm placement here; the static baselines
    compute their placements; ``lfu``/``lru`` start cold.
    """
    if name not in POLICY_NAMES:
        raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
    mode = POLICY_ROUTING[name]
    if name == "octopus":
        report = pcd(topology, catalog, popularity, capacities)
        return OctopusPolicy(topology, assignment, popularity, report.placement,
                             rcr_enabled=rcr_enabled)
    if name == "lfu":
        return LfuPolicy(topology, assignment, capacities, catalog.num_files)
    if name == "lru":
        return LruPolicy(topology, assignment, capacities, catalog.num_files)
    builder = {"eo": place_eo, "ecnc": place_ecnc,
               "exmpc": place_exmpc, "femtox": place_femtox}[name]
    placement = builder(topology, catalog, popularity, capacities)
    return StaticPlacementPolicy(name, placement, topology, assignment, mode)
