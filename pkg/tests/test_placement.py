import numpy as np
import pytest

from octocache import (CacheCapacities, Catalog, OracleSizeError, Placement,
                       Popularity, Topology, brute_force_optimal,
                       marginal_loss, pcd, place_ecnc, place_eo, place_exmpc,
                       place_femtox, rcr, top_popular, utility)

from conftest import enumerate_optimal, random_instance

# --------------------------------------------------------------------- pcd

def test_pcd_canonical(canonical):
    topo, catalog, pop, caps = canonical
    report = pcd(topo, catalog, pop, caps)
    assert report.placement.contents == [{1}, {2}, {3}]
    assert report.final_utility == pytest.approx(170.0)
    assert report.iterations == 3
    # hand-traceable greedy: cloud gets f1 (85), then f2 at BS1 (51),
    # then f3 at BS2 (34)
    chosen = [(s["file"], s["cache"]) for s in report.steps]
    assert chosen == [(1, 0), (2, 1), (3, 2)]
    gains = [s["gain"] for s in report.steps]
    assert gains == pytest.approx([85.0, 51.0, 34.0])


def test_pcd_matches_bruteforce_on_canonical(canonical):
    topo, catalog, pop, caps = canonical
    best_val, best_contents = enumerate_optimal(topo, catalog, pop, caps)
    assert best_val == pytest.approx(170.0)
    report = pcd(topo, catalog, pop, caps)
    assert report.final_utility == pytest.approx(best_val)
    assert report.placement.contents == best_contents


def test_pcd_zero_capacity(canonical):
    topo, catalog, pop, _ = canonical
    report = pcd(topo, catalog, pop, CacheCapacities(cloud=0, edge=(0, 0)))
    assert report.placement.size() == 0
    assert report.final_utility == 0.0
    assert report.iterations == 0


def test_pcd_saturation(canonical):
    topo, catalog, pop, _ = canonical
    caps = CacheCapacities(cloud=3, edge=(3, 3))
    report = pcd(topo, catalog, pop, caps)
    assert all(c == {1, 2, 3} for c in report.placement.contents)
    assert report.final_utility == pytest.approx(2 * 100.0)


def test_pcd_clamps_oversized_capacity(canonical):
    topo, catalog, pop, _ = canonical
    report = pcd(topo, catalog, pop, CacheCapacities(cloud=10, edge=(1, 1)))
    assert report.warnings and "clamped" in report.warnings[0]
    assert report.placement.cache_size(0) == 3


def test_pcd_fills_every_cache_and_trace_monotone():
    rng = np.random.default_rng(8)
    for _ in range(30):
        topo, catalog, pop, caps = random_instance(rng, max_bs=3, max_files=7, max_cap=3)
        report = pcd(topo, catalog, pop, caps)
        expected_iters = sum(min(c, catalog.num_files) for c in caps.as_list())
        assert report.iterations == expected_iters
        for cache, cap in enumerate(caps.as_list()):
            assert report.placement.cache_size(cache) == min(cap, catalog.num_files)
        trace = report.utility_trace
        assert all(b >= a - 1e-12 for a, b in zip(trace, trace[1:]))
        assert report.placement.is_feasible()
        # reported utility is consistent with a fresh evaluation
        assert report.final_utility == pytest.approx(
            utility(report.placement, topo, pop), rel=1e-9)


def test_report_records_are_json_ready(canonical):
    import json

    topo, catalog, pop, caps = canonical
    report = pcd(topo, catalog, pop, caps)
    records = report.to_records()
    assert [r["iteration"] for r in records] == [1, 2, 3]
    assert {"file", "cache", "gain", "utility"} <= set(records[0])
    json.dumps(records)  # plain structures only


def test_pcd_deterministic(canonical):
    topo, catalog, pop, caps = canonical
    a = pcd(topo, catalog, pop, caps)
    b = pcd(topo, catalog, pop, caps)
    assert a.placement == b.placement
    assert a.utility_trace == b.utility_trace


def test_pcd_tiebreak_lowest_file_then_cache():
    # one BS, uniform popularity: the local slot wins first (0.5 * 100 over
    # the cloud's 0.5 * 90) and takes file 1 by the file-index tie rule;
    # the cloud then prefers fresh f2 (45) over duplicating f1 (0)
    topo = Topology(num_bs=1, edge_delay=(10.0,), peer_delay=((0.0,),),
                    cdn_delay=100.0, users=(("u", 1),))
    catalog = Catalog(num_files=2)
    pop = Popularity(np.array([0.5, 0.5]))
    report = pcd(topo, catalog, pop, CacheCapacities(cloud=1, edge=(1,)))
    chosen = [(s["file"], s["cache"]) for s in report.steps]
    assert chosen == [(1, 1), (2, 0)]


# --------------------------------------------------------------------- rcr

@pytest.fixture
def shifted(canonical):
    # catalog grown to four files; popularity re-weighted so the newcomer
    # f4 outranks f3
    topo, _, _, caps = canonical
    catalog = Catalog(num_files=4)
    pop = Popularity(np.array([0.45, 0.27, 0.09, 0.19]))
    placement = Placement(caps, 4)
    placement.add(1, 0)
    placement.add(2, 1)
    placement.add(3, 2)
    return topo, catalog, pop, placement


def test_rcr_evicts_least_valuable(shifted):
    topo, _, pop, placement = shifted
    report = rcr(placement, 4, topo, pop)
    assert report.placement.contents == [{1}, {2}, {4}]
    assert report.iterations == 1
    # recomputed from scratch: swap moves utility 137.7 -> 154.7
    assert report.utility_trace[0] == pytest.approx(137.7)
    assert report.final_utility == pytest.approx(154.7)
    assert report.final_utility == pytest.approx(utility(report.placement, topo, pop))


def test_rcr_zero_popularity_newcomer(canonical):
    topo, _, _, caps = canonical
    pop = Popularity(np.array([0.5, 0.3, 0.2, 0.0]))
    placement = Placement(caps, 4)
    placement.add(1, 0)
    placement.add(2, 1)
    placement.add(3, 2)
    report = rcr(placement, 4, topo, pop)
    assert report.placement == placement
    assert report.iterations == 0


def test_rcr_rejects_cached_file(shifted):
    topo, _, pop, placement = shifted
    with pytest.raises(ValueError):
        rcr(placement, 3, topo, pop)


def test_rcr_copy_equivalent_file_no_swap(shifted):
    # after f4 displaces f3, a fifth file with identical popularity cannot
    # strictly improve on f4's slot, so nothing moves
    topo, _, _, placement = shifted
    pop5 = Popularity(np.array([0.45, 0.27, 0.09, 0.095, 0.095]))
    placement5 = Placement(placement.capacities, 5)
    for f, c in placement.elements():
        placement5.add(f, c)
    first = rcr(placement5, 4, topo, pop5)
    again = rcr(first.placement, 5, topo, pop5)
    assert again.iterations == 0
    assert again.placement == first.placement


def test_rcr_never_decreases_utility_and_respects_capacity():
    rng = np.random.default_rng(17)
    done = 0
    while done < 40:
        topo, catalog, pop, caps = random_instance(rng, max_files=8, max_cap=2)
        report = pcd(topo, catalog, pop, caps)
        uncached = [f for f in range(1, catalog.num_files + 1)
                    if not report.placement.cached_anywhere(f)]
        if not uncached:
            continue
        new_file = uncached[int(rng.integers(len(uncached)))]
        before = report.final_utility
        after = rcr(report.placement, new_file, topo, pop)
        assert after.final_utility >= before - 1e-9
        assert all(b > a for a, b in zip(after.utility_trace, after.utility_trace[1:]))
        assert after.placement.is_feasible()
        for cache in range(after.placement.num_caches):
            assert after.placement.cache_size(cache) == report.placement.cache_size(cache)
        assert after.iterations <= topo.num_bs + 1
        done += 1


def test_rcr_swapped_out_element_had_minimum_loss(shifted):
    topo, _, pop, placement = shifted
    losses = {(f, c): marginal_loss(placement, (f, c), topo, pop)
              for f, c in placement.elements()}
    report = rcr(placement, 4, topo, pop)
    evicted = (report.steps[0]["evicted_file"], report.steps[0]["cache"])
    assert losses[evicted] == min(losses.values())


# ------------------------------------------------------------------ oracle

def test_bruteforce_canonical(canonical):
    topo, catalog, pop, caps = canonical
    best = brute_force_optimal(topo, catalog, pop, caps)
    assert utility(best, topo, pop) == pytest.approx(170.0)
    assert best.contents == [{1}, {2}, {3}]


def test_bruteforce_zero_capacity(canonical):
    topo, catalog, pop, _ = canonical
    best = brute_force_optimal(topo, catalog, pop, CacheCapacities(cloud=0, edge=(0, 0)))
    assert best.size() == 0


def test_bruteforce_single_file(canonical):
    topo, _, _, caps = canonical
    catalog = Catalog(num_files=1)
    pop = Popularity(np.array([1.0]))
    best = brute_force_optimal(topo, catalog, pop, caps)
    assert best.contents == [{1}, {1}, {1}]


def test_bruteforce_size_guard(canonical):
    topo, _, _, _ = canonical
    catalog = Catalog(num_files=40)
    pop = Popularity(np.full(40, 1 / 40))
    caps = CacheCapacities(cloud=20, edge=(10, 10))
    with pytest.raises(OracleSizeError, match="enumeration bound"):
        brute_force_optimal(topo, catalog, pop, caps)


def test_bruteforce_tie_break_is_first_in_lexicographic_order():
    # uniform popularity over two files with one BS: {1},{2} and {2},{1}
    # both reach 0.5*90 + 0.5*100, and the lexicographically smaller
    # serialization must win deterministically
    topo = Topology(num_bs=1, edge_delay=(10.0,), peer_delay=((0.0,),),
                    cdn_delay=100.0, users=(("u", 1),))
    catalog = Catalog(num_files=2)
    pop = Popularity(np.array([0.5, 0.5]))
    caps = CacheCapacities(cloud=1, edge=(1,))
    best = brute_force_optimal(topo, catalog, pop, caps)
    assert best.contents == [{1}, {2}]


def test_bruteforce_matches_independent_enumeration():
    rng = np.random.default_rng(29)
    for _ in range(15):
        topo, catalog, pop, caps = random_instance(rng, max_bs=2, max_files=5, max_cap=2)
        best = brute_force_optimal(topo, catalog, pop, caps)
        want_val, _ = enumerate_optimal(topo, catalog, pop, caps)
        assert utility(best, topo, pop) == pytest.approx(want_val, rel=1e-9)


def test_pcd_half_approximation_small_batch():
    rng = np.random.default_rng(37)
    for _ in range(25):
        topo, catalog, pop, caps = random_instance(rng, max_bs=3, max_files=6, max_cap=2)
        opt = utility(brute_force_optimal(topo, catalog, pop, caps), topo, pop)
        greedy = pcd(topo, catalog, pop, caps).final_utility
        assert greedy >= 0.5 * opt - 1e-9
        assert greedy <= opt + 1e-9


# --------------------------------------------------------------- baselines

def test_top_popular_tiebreak():
    pop = Popularity(np.array([0.25, 0.25, 0.25, 0.25]))
    assert top_popular(pop, 2) == [1, 2]


def test_place_eo_canonical(canonical):
    topo, catalog, pop, caps = canonical
    placement = place_eo(topo, catalog, pop, caps)
    assert placement.contents == [set(), {1}, {1}]


def test_place_eo_everything_fits(canonical):
    topo, catalog, pop, _ = canonical
    caps = CacheCapacities(cloud=0, edge=(3, 3))
    placement = place_eo(topo, catalog, pop, caps)
    assert placement.contents[1] == {1, 2, 3} and placement.contents[2] == {1, 2, 3}


def test_place_ecnc_canonical(canonical):
    topo, catalog, pop, caps = canonical
    placement = place_ecnc(topo, catalog, pop, caps)
    assert placement.contents == [{1}, {1}, {1}]


def test_place_ecnc_cloud_covers_catalog(canonical):
    topo, catalog, pop, _ = canonical
    caps = CacheCapacities(cloud=3, edge=(1, 1))
    placement = place_ecnc(topo, catalog, pop, caps)
    assert placement.contents[0] == {1, 2, 3}


def test_place_exmpc_canonical(canonical):
    topo, catalog, pop, caps = canonical
    placement = place_exmpc(topo, catalog, pop, caps)
    assert placement.contents == [{2}, {1}, {1}]


def test_place_exmpc_cloud_takes_second_tier():
    rng = np.random.default_rng(2)
    topo, catalog, pop, caps = random_instance(rng, max_bs=3, max_files=8, max_cap=2)
    placement = place_exmpc(topo, catalog, pop, caps)
    edge_files = set().union(*placement.contents[1:]) if topo.num_bs else set()
    assert placement.contents[0].isdisjoint(edge_files)
    # identical edges imply the cloud holds the next-ranked prefix
    sizes = [min(c, catalog.num_files) for c in caps.as_list()]
    if len(set(sizes[1:])) == 1:
        ranked = top_popular(pop, catalog.num_files)
        edge_rank = sizes[1]
        want = set(ranked[edge_rank:edge_rank + sizes[0]])
        assert placement.contents[0] == want


def test_place_femtox_single_bs_equals_pcd():
    topo = Topology(num_bs=1, edge_delay=(12.0,), peer_delay=((0.0,),),
                    cdn_delay=90.0, users=(("u", 1), ("v", 1)))
    catalog = Catalog(num_files=5)
    pop = Popularity.from_weights(np.array([5.0, 4.0, 3.0, 2.0, 1.0]))
    caps = CacheCapacities(cloud=2, edge=(2,))
    assert place_femtox(topo, catalog, pop, caps) == pcd(topo, catalog, pop, caps).placement


def test_place_femtox_canonical_weaker_than_pcd(canonical):
    topo, catalog, pop, caps = canonical
    femto = place_femtox(topo, catalog, pop, caps)
    assert femto.contents == [{1}, {2}, {2}]
    assert utility(femto, topo, pop) == pytest.approx(145.0)
    assert utility(femto, topo, pop) <= pcd(topo, catalog, pop, caps).final_utility


def test_place_femtox_zero_capacity(canonical):
    topo, catalog, pop, _ = canonical
    placement = place_femtox(topo, catalog, pop, CacheCapacities(cloud=0, edge=(0, 0)))
    assert placement.size() == 0


def test_baselines_feasible_and_below_optimum():
    rng = np.random.default_rng(41)
    for _ in range(10):
        topo, catalog, pop, caps = random_instance(rng, max_bs=2, max_files=5, max_cap=2)
        opt = utility(brute_force_optimal(topo, catalog, pop, caps), topo, pop)
        for builder in (place_eo, place_ecnc, place_exmpc, place_femtox):
            placement = builder(topo, catalog, pop, caps)
            assert placement.is_feasible()
            assert utility(placement, topo, pop) <= opt + 1e-9
