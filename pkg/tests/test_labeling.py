"""Block/idle labeling by parity propagation, plus ambiguity detection."""

import pytest

from xdicheck import labeling
from xdicheck.labeling import (
    AmbiguousMachineError,
    UnknownHandshakeError,
    check_unambiguous,
    compute_block_idle,
)
from xdicheck.machine import parse_machine

BLOCKING_A = {"s1", "s3", "s4", "s5", "s7", "s8", "s9"}
IDLING_A = {"s0", "s2", "s6"}


def test_join_labels_for_a(join):
    labels = compute_block_idle(join, "a")
    assert {s for s, odd in labels.labels.items() if odd} == BLOCKING_A
    assert {s for s, odd in labels.labels.items() if not odd} == IDLING_A


def test_join_labels_for_b_mirror_a(join):
    labels = compute_block_idle(join, "b")
    assert {s for s, odd in labels.labels.items() if odd} == {
        "s2", "s3", "s4", "s5", "s6", "s8", "s9"
    }
    assert {s for s, odd in labels.labels.items() if not odd} == {"s0", "s1", "s7"}


def test_join_labels_for_c(join):
    labels = compute_block_idle(join, "c")
    # c.R flips at s3 -> s4, c.A flips back at s4 -> s5
    assert {s for s, odd in labels.labels.items() if odd} == {"s4"}


def test_mode_accessor_matches_raw_labels(join):
    labels = compute_block_idle(join, "a")
    assert labels.mode("s1") == "blocking"
    assert labels.mode("s0") == "idling"


def test_blocking_and_idling_helpers(join):
    assert labeling.blocking(join, "s3", "a")
    assert not labeling.blocking(join, "s6", "a")
    assert labeling.idling(join, "s6", "a")


def test_parity_toggles_on_both_phases():
    text = """
    (machine loop
      (s0 t box (((a R I) s1)))
      (s1 nil transient (((a A O) s0))))
    """
    labels = compute_block_idle(parse_machine(text), "a")
    assert labels.labels == {"s0": False, "s1": True}


def test_unknown_handshake_raises(join):
    with pytest.raises(UnknownHandshakeError):
        compute_block_idle(join, "zz")
    with pytest.raises(UnknownHandshakeError):
        check_unambiguous(join, "zz")


def test_library_style_machines_are_unambiguous(join, distributor):
    for mach in (join, distributor):
        for handshake in sorted(mach.handshakes):
            report = check_unambiguous(mach, handshake)
            assert not report.ambiguous
            assert report.witnesses == ()


def test_twopath_counterexample_is_ambiguous(twopath):
    report = check_unambiguous(twopath, "a")
    assert report.ambiguous
    conflict = report.witnesses[0]
    assert conflict.state == "s3"
    assert conflict.idling_path == ("s0", "s2", "s3")
    assert conflict.blocking_path == ("s0", "s1", "s3")


def test_twopath_ambiguity_is_per_handshake(twopath):
    # both routes to s3 cross b exactly once, so b labels are consistent
    assert not check_unambiguous(twopath, "b").ambiguous
    # only the s2 route crosses h, so h conflicts at s3 as well
    assert check_unambiguous(twopath, "h").ambiguous


def test_compute_block_idle_refuses_ambiguous_machine(twopath):
    with pytest.raises(AmbiguousMachineError) as info:
        compute_block_idle(twopath, "a")
    assert info.value.report.ambiguous


def test_transient_only_conflict_is_a_warning_not_ambiguity():
    # the conflicting state s3 is transient, so labels never get consulted
    text = """
    (machine softclash
      (s0 t box (((a R I) s1) ((b R I) s2)))
      (s1 nil box (((b R I) s3)))
      (s2 nil box (((h R I) s3)))
      (s3 nil transient ()))
    """
    report = check_unambiguous(parse_machine(text), "a")
    assert not report.ambiguous
    assert report.witnesses == ()
    assert len(report.warnings) == 1
    assert report.warnings[0].state == "s3"


def test_first_visit_wins_on_diamonds(join):
    # s5 branches to s7 then s6; both rejoin s0 with equal parity, so the
    # propagation must terminate with a single consistent assignment
    labels = compute_block_idle(join, "a")
    assert labels.labels["s0"] is False


def test_results_are_cached_by_machine_and_handshake(join):
    first = compute_block_idle(join, "a")
    second = compute_block_idle(join, "a")
    assert first is second
