import numpy as np
import pandas as pd
import pytest

from models.errors import ElementRangeError, RegisterRangeError
from services.vrf import (
    BankArbiter, BankRequest, OperandQueueSet, Priority, QueueEntry, QueueStatus, VrfState,
    count_conflicts, map_element,
)


def test_register_zero_starts_at_bank_zero():
    assert map_element(0, 0, lanes=1) == (0, 0, 0)


def test_each_register_is_shifted_by_one_bank():
    assert map_element(1, 0, lanes=1)[1] == 1


def test_layout_of_v2_matches_barbers_pole_pattern():
    for element in range(16):
        lane, bank, row = map_element(2, element, lanes=1)
        assert lane == 0
        assert bank == (element + 2) % 8
        assert row == 16 + element // 8
    assert map_element(2, 14, lanes=1) == (0, 0, 17)


def test_elements_interleave_across_lanes():
    lanes = [map_element(3, e, lanes=4)[0] for e in range(8)]
    assert lanes == [0, 1, 2, 3, 0, 1, 2, 3]


def test_map_element_bounds():
    with pytest.raises(ElementRangeError):
        map_element(0, 64, lanes=1)
    with pytest.raises(RegisterRangeError):
        map_element(32, 0, lanes=1)


def test_shifted_mapping_removes_first_element_conflicts():
    reads = [(register, 0) for register in range(8)]
    assert count_conflicts(reads, shifted=True) == 0
    assert count_conflicts(reads, shifted=False) == 7


def test_high_priority_wins_bank():
    arbiter = BankArbiter(8)
    low = BankRequest(requester=1, register=0, row=0, bank=3, write=False, priority=Priority.LOW)
    high = BankRequest(requester=2, register=1, row=8, bank=3, write=True, priority=Priority.HIGH)
    assert arbiter.grant([low, high]) == [high]
    assert arbiter.conflicts == 1


def test_round_robin_rotates_between_equal_requesters():
    arbiter = BankArbiter(8)

    def requests():
        return [BankRequest(requester=r, register=r, row=0, bank=0, write=False, priority=Priority.HIGH)
                for r in (4, 7)]

    winners = [arbiter.grant(requests())[0].requester for _ in range(4)]
    assert winners == [4, 7, 4, 7]


def test_operand_queue_reports_full_and_empty():
    queues = OperandQueueSet(fpu_depth=2, alu_depth=2, vlsu_depth=2, wb_depth=2)
    assert queues.queue_pop("fpu0") == (QueueStatus.EMPTY, None)
    assert queues.queue_push("fpu0", QueueEntry(element=0)) is QueueStatus.OK
    assert queues.queue_push("fpu0", QueueEntry(element=1)) is QueueStatus.OK
    assert queues.queue_push("fpu0", QueueEntry(element=2)) is QueueStatus.FULL
    status, entry = queues.queue_pop("fpu0")
    assert status is QueueStatus.OK and entry.element == 0
    assert len(queues.operand_queues) == 10


def test_narrow_elements_share_words_without_clobbering():
    vrf = VrfState(lanes=2)
    values = np.arange(1, 17, dtype=np.uint64)
    vrf.write(5, values, sew=32)
    vrf.write(6, values * 3, sew=32)
    np.testing.assert_array_equal(vrf.read(5, 16, sew=32), values)
    np.testing.assert_array_equal(vrf.read(6, 16, sew=32), values * 3)


def test_scalar_register_reads_as_broadcast():
    vrf = VrfState(lanes=4)
    vrf.write_scalar(0, 42)
    np.testing.assert_array_equal(vrf.read(0, 8), np.full(8, 42, dtype=np.uint64))
    assert vrf.read_scalar(0) == 42


def test_vrf_dump_lists_every_element(tmp_path):
    vrf = VrfState(lanes=2)
    vrf.write(1, np.arange(4, dtype=np.uint64))
    path = tmp_path / "vrf.csv"
    vrf.dump_csv(str(path), [1], vl=4)
    lines = path.read_text().splitlines()
    assert lines[0] == "register,element,lane,bank,row,value"
    assert len(lines) == 5


def test_vrf_dump_reads_back_as_frame(tmp_path):
    vrf = VrfState(lanes=2)
    vrf.write(3, np.arange(10, 16, dtype=np.uint64))
    path = tmp_path / "vrf.csv"
    vrf.dump_csv(str(path), [3], vl=6)
    frame = pd.read_csv(path)
    assert frame["value"].tolist() == list(range(10, 16))
    assert frame["lane"].tolist() == [0, 1, 0, 1, 0, 1]
    expected = [map_element(3, e, lanes=2) for e in range(6)]
    assert list(zip(frame["lane"], frame["bank"], frame["row"])) == expected


def test_round_robin_shares_a_bank_evenly_between_three_requesters():
    arbiter = BankArbiter(8)
    wins = {1: 0, 5: 0, 9: 0}
    for _ in range(300):
        requests = [BankRequest(requester=r, register=r, row=0, bank=2, write=False,
                                priority=Priority.HIGH) for r in wins]
        wins[arbiter.grant(requests)[0].requester] += 1
    for count in wins.values():
        assert count == pytest.approx(100, abs=1)
    assert arbiter.conflicts == 600
