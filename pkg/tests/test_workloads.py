import pytest

from src.tools.classifier import (
    AccessClassifier,
    classify,
    write_ratio,
)
from src.tools.models import Op
from src.tools.rdist import stack_distance
from src.utils.workloads import (
    CornerCase,
    CornerCaseParams,
    MixKind,
    default_mix,
    gen_corner_case,
    gen_reuse_stable_mix,
)


def _by_interval(reqs, interval_ticks):
    phases = {}
    for req in reqs:
        phases.setdefault(req.ts // interval_ticks, []).append(req)
    return [phases[k] for k in sorted(phases)]


# Test the sequential first interval of SeqRandom
def test_seq_random_first_interval():
    params = CornerCaseParams(run_length=10, reuse_set=4, repeats=2)
    phases = _by_interval(gen_corner_case(CornerCase.SEQ_RANDOM, params), params.interval_ticks)
    blocks = [r.block for r in phases[0]]
    assert blocks == list(range(10)), "Interval 1 should be a sequential pass over 0..9."
    profile = stack_distance(classify(phases[0]))
    assert profile.max_urd == -1, "A sequential pass has no reuse."
    assert len(phases) == 3
    assert {r.block for r in phases[1]} <= set(blocks), "Random re-accesses reuse the run."
    assert len(phases[1]) == 8 and len(phases[2]) == 2


# Test the shape of RandomSeq
def test_random_seq_shape():
    params = CornerCaseParams(run_length=6, reuse_set=3, repeats=3, seed=4)
    phases = _by_interval(gen_corner_case(CornerCase.RANDOM_SEQ, params), params.interval_ticks)
    first = [r.block for r in phases[0]]
    assert len(first) == 9 and len(set(first)) == 3
    assert all(r.op is Op.WRITE for r in phases[1]), "Interval 2 is a write-only pass."
    assert not {r.block for r in phases[1]} & set(first), "Interval 2 touches fresh blocks."
    assert [r.block for r in phases[2]] == first[:3], "Interval 3 repeats interval 1 addresses."


# Test the second pass of a short SemiSequential run
def test_semi_sequential_trd():
    params = CornerCaseParams(run_length=4, repeats=2)
    reqs = gen_corner_case(CornerCase.SEMI_SEQUENTIAL, params)
    phases = _by_interval(reqs, params.interval_ticks)
    assert len(phases) == 4, "repeats + fresh pass + final pass."
    profile = stack_distance(classify(phases[0] + phases[1]))
    assert profile.max_trd == 3, "Second pass over [0,1,2,3] has TRD 3."


# Test that timestamps stay inside their intervals
def test_timestamps_within_intervals():
    params = CornerCaseParams(run_length=50, reuse_set=5, repeats=40, interval_ticks=64)
    for kind in CornerCase:
        reqs = gen_corner_case(kind, params)
        assert [r.ts for r in reqs] == sorted(r.ts for r in reqs), f"{kind} must be time-sorted."
        for index, phase in enumerate(_by_interval(reqs, params.interval_ticks)):
            assert all(
                index * 64 <= r.ts < (index + 1) * 64 for r in phase
            ), f"{kind} phase {index} leaks out of its interval."


# Test determinism under a fixed seed
def test_corner_case_deterministic():
    params = CornerCaseParams(seed=11)
    for kind in CornerCase:
        assert gen_corner_case(kind, params) == gen_corner_case(kind, params)


# Test invalid parameters
def test_corner_case_invalid():
    with pytest.raises(ValueError):
        gen_corner_case(CornerCase.SEQ_RANDOM, CornerCaseParams(run_length=3, reuse_set=5))
    with pytest.raises(ValueError):
        gen_corner_case(CornerCase.SEMI_SEQUENTIAL, CornerCaseParams(run_length=0))


# Test the default mix layout
def test_default_mix():
    mix = default_mix(4)
    assert [p.kind for p in mix] == [
        MixKind.WRITE_HEAVY,
        MixKind.READ_HEAVY,
        MixKind.WRITE_HEAVY,
        MixKind.READ_HEAVY,
    ]


# Test that the mix repeats its structure and hits the write share
def test_reuse_stable_mix():
    traces = gen_reuse_stable_mix(default_mix(4), intervals=3, interval_ticks=1000, seed=2)
    assert list(traces) == [0, 1, 2, 3]
    for vm_id, reqs in traces.items():
        phases = _by_interval(reqs, 1000)
        assert len(phases) == 3
        assert [r.block for r in phases[1]] == [r.block for r in phases[2]]
        classifier = AccessClassifier()
        classifier.classify(phases[0])
        classifier.take_counts()
        classifier.classify(phases[1])
        ratio = write_ratio(classifier.take_counts())
        if vm_id % 2 == 0:
            assert ratio >= 0.4, "Write-heavy VMs need at least 40% WAW+WAR."
        else:
            assert ratio == 0.0, "Read-heavy VMs never overwrite."


# Test mix input validation
def test_reuse_stable_mix_invalid():
    with pytest.raises(ValueError):
        gen_reuse_stable_mix(default_mix(2), intervals=0)
