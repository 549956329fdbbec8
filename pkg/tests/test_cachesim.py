import random

import pytest

from src.tools.cachesim import (
    CacheConfig,
    CacheSimulator,
    policy_sweep,
    simulate,
    total_writes_model,
)
from src.tools.classifier import (
    AccessClassifier,
    classify,
)
from src.tools.models import (
    AccessClass,
    WritePolicy,
)
from src.utils.workloads import (
    CornerCase,
    CornerCaseParams,
    gen_corner_case,
)
from tests.conftest import make_stream


def random_stream(rng, max_len=300, max_blocks=64):
    blocks = rng.randint(1, max_blocks)
    return make_stream(
        [(rng.choice("RW"), rng.randrange(blocks)) for _ in range(rng.randint(1, max_len))]
    )


# Test that both candidate sizes of the example workload give the same hits
def test_seven_hits_equal(seven_stream):
    tagged = classify(seven_stream)
    urd_sized = simulate(tagged, CacheConfig(2, WritePolicy.WB))
    trd_sized = simulate(tagged, CacheConfig(5, WritePolicy.WB))
    assert urd_sized.read_hits == trd_sized.read_hits == 1
    assert urd_sized.reads == 3


# Test write-back and write-through latency accounting
def test_latency_accounting(seven_stream):
    tagged = classify(seven_stream)
    wb = simulate(tagged, CacheConfig(2, WritePolicy.WB, t_hdd_us=5000.0, t_ssd_us=100.0))
    wt = simulate(tagged, CacheConfig(2, WritePolicy.WT, t_hdd_us=5000.0, t_ssd_us=100.0))
    assert wb.latency_total_us == pytest.approx(2 * 5000 + 100 + 4 * 100)
    assert wt.latency_total_us == pytest.approx(2 * 5000 + 100 + 4 * 5000)
    assert wb.mean_latency_us == pytest.approx(wb.latency_total_us / 7)


# Test the analytic write model under a write-back cache that never evicts
def test_write_model():
    rng = random.Random(31)
    for _ in range(50):
        stream = random_stream(rng)
        classifier = AccessClassifier()
        tagged = classifier.classify(stream)
        size = len({r.block for r in stream})
        report = simulate(tagged, CacheConfig(size, WritePolicy.WB))
        assert report.ssd_writes == total_writes_model(
            classifier.counts
        ), "SSD writes should equal CR + CW + WAR + WAW."


# Test that read hits never drop as the cache grows
def test_hits_monotone_in_size():
    rng = random.Random(8)
    for _ in range(10):
        tagged = classify(random_stream(rng))
        hits = [simulate(tagged, CacheConfig(size)).read_hits for size in range(0, 40)]
        assert hits == sorted(hits), "LRU is a stack algorithm."


# Test the endurance ordering of the three policies
def test_policy_endurance_ordering():
    rng = random.Random(13)
    for _ in range(30):
        stream = random_stream(rng)
        classifier = AccessClassifier()
        classifier.classify(stream)
        counts = classifier.counts
        size = len({r.block for r in stream})
        results = policy_sweep(stream, size)
        assert results[WritePolicy.RO].ssd_writes == counts[AccessClass.CR] + counts[AccessClass.RAW]
        assert results[WritePolicy.RO].ssd_writes <= results[WritePolicy.WB].ssd_writes
        assert results[WritePolicy.WT].ssd_writes == results[WritePolicy.WB].ssd_writes


# Test that a read-only cache misses reads after writes
def test_read_only_bypasses_writes():
    tagged = classify(make_stream([("W", 1), ("R", 1)]))
    ro = simulate(tagged, CacheConfig(4, WritePolicy.RO))
    wb = simulate(tagged, CacheConfig(4, WritePolicy.WB))
    assert ro.read_hits == 0 and ro.hdd_writes == 1 and ro.ssd_writes == 1
    assert wb.read_hits == 1 and wb.ssd_writes == 1


# Test that a write invalidates the cached copy under read-only
def test_read_only_invalidates():
    tagged = classify(make_stream([("R", 1), ("W", 1), ("R", 1)]))
    assert simulate(tagged, CacheConfig(4, WritePolicy.RO)).read_hits == 0
    assert simulate(tagged, CacheConfig(4, WritePolicy.WT)).read_hits == 1


# Test a zero-size cache
def test_zero_size():
    tagged = classify(make_stream([("W", 1), ("R", 1), ("W", 2)]))
    report = simulate(tagged, CacheConfig(0, WritePolicy.WB))
    assert report.ssd_writes == 0 and report.hdd_writes == 2 and report.read_hits == 0


# Test that shrinking writes back dirty blocks
def test_resize_writes_back():
    sim = CacheSimulator(CacheConfig(4, WritePolicy.WB))
    sim.replay(classify(make_stream([("W", b) for b in range(4)])))
    assert sim.dirty_blocks == 4
    sim.resize(1)
    assert len(sim) == 1 and 3 in sim, "The most recent block survives."
    assert sim.take_report().hdd_writes == 3


# Test that leaving write-back flushes dirty blocks
def test_policy_switch_flushes():
    sim = CacheSimulator(CacheConfig(4, WritePolicy.WB))
    sim.replay(classify(make_stream([("W", 1), ("W", 2), ("R", 3)])))
    sim.set_policy(WritePolicy.RO)
    assert sim.dirty_blocks == 0 and len(sim) == 3, "Contents stay, dirt is written back."
    assert sim.take_report().hdd_writes == 2


# Test the RandomSeq corner case: the sequential writes flush the reused blocks
def test_random_seq_zero_hits():
    params = CornerCaseParams(run_length=8, reuse_set=4, repeats=3, seed=1)
    reqs = gen_corner_case(CornerCase.RANDOM_SEQ, params)
    tagged = classify(reqs)
    sim = CacheSimulator(CacheConfig(params.run_length, WritePolicy.WB))
    hits_by_interval = {}
    for req, cls in tagged:
        if sim.access(req, cls) and cls in (AccessClass.RAR, AccessClass.RAW):
            interval = req.ts // params.interval_ticks
            hits_by_interval[interval] = hits_by_interval.get(interval, 0) + 1
    assert hits_by_interval.get(0) == 8, "Repeats inside interval 1 hit."
    assert 2 not in hits_by_interval, "Interval 3 finds the cache full of interval 2 writes."


# Test configuration validation
def test_cache_config_invalid():
    with pytest.raises(ValueError):
        CacheConfig(-1)
    with pytest.raises(ValueError):
        CacheConfig(4, t_hdd_us=100.0, t_ssd_us=100.0)
