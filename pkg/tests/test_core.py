import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitprobe.core import (
    BitMemory,
    Kind,
    Scheme,
    SchemeParams,
    build_charvec_scheme,
    count_sets,
    evaluate_table,
    make_systematic,
    query,
    random_tree_scheme,
    store_charvec,
    store_charvec_batch,
    verify_exhaustive,
    verify_exhaustive_batched,
    verify_sampled,
)
from bitprobe.errors import CorruptScheme
from bitprobe.twoprobe import build_two_probe_scheme, store_two_probe

from oracles import tree_answer


class TestBitMemory:
    def test_out_of_range_read_is_an_error(self):
        mem = BitMemory([0, 1, 1])
        with pytest.raises(IndexError):
            mem[3]
        with pytest.raises(IndexError):
            mem[-1]

    def test_packing_layout(self):
        bits = [1, 0, 0, 0, 0, 0, 0, 0, 0, 1]
        assert BitMemory(bits).to_bytes() == bytes([0b00000001, 0b00000010])

    @given(st.lists(st.integers(0, 1), max_size=70))
    def test_round_trip_is_identity(self, bits):
        mem = BitMemory(bits)
        assert BitMemory.from_bytes(mem.to_bytes(), len(bits)) == mem

    def test_nonzero_padding_rejected(self):
        with pytest.raises(CorruptScheme):
            BitMemory.from_bytes(bytes([0b11111111]), 3)

    def test_rejects_non_bits(self):
        with pytest.raises(ValueError):
            BitMemory([0, 2])


class TestSchemeParams:
    @pytest.mark.parametrize("kind,t,s,m,total", [
        (Kind.TWO_PROBE, 2, 5, 100, 15),
        (Kind.THREE_PROBE, 3, 5, 100, 35),
        (Kind.NON_ADAPTIVE, 5, 5, 100, 25),
        (Kind.ADAPTIVE, 5, 5, 100, 5 + 15 * 5),
        (Kind.CHARVEC, 1, 100, 100, 100),
    ])
    def test_total_bits_per_kind(self, kind, t, s, m, total):
        SchemeParams(m=m, n=2, t=t, s=s, total_bits=total, kind=kind)
        with pytest.raises(ValueError):
            SchemeParams(m=m, n=2, t=t, s=s, total_bits=total + 1, kind=kind)

    def test_n_bounds(self):
        with pytest.raises(ValueError):
            SchemeParams(m=5, n=6, t=1, s=5, total_bits=5, kind=Kind.CHARVEC)
        with pytest.raises(ValueError):
            SchemeParams(m=5, n=0, t=1, s=5, total_bits=5, kind=Kind.CHARVEC)


class TestQuery:
    def test_charvec_reads_own_bit(self):
        scheme = build_charvec_scheme(10, 3)
        mem = store_charvec(scheme, [2])
        res = query(scheme, mem, 2)
        assert res.answer is True
        assert len(res.trace) == 1
        assert query(scheme, mem, 3).answer is False

    def test_systematic_all_zero_memory_answers_no(self):
        scheme = build_two_probe_scheme(200, 2, seed=0, fallback=False)
        zero = BitMemory.zeros(scheme.total_bits)
        for u in range(scheme.m):
            res = query(scheme, zero, u)
            assert res.answer is False
            assert len(res.trace) == 2

    def test_two_probe_seed_42(self):
        scheme = build_two_probe_scheme(40, 2, seed=42, fallback=False)
        mem = store_two_probe(scheme, {5, 9})
        assert query(scheme, mem, 5).answer
        assert not query(scheme, mem, 6).answer
        assert [u for u in range(40) if query(scheme, mem, u).answer] == [5, 9]

    def test_query_is_pure(self):
        scheme = random_tree_scheme(8, 3, 10, seed=1)
        mem = BitMemory(np.random.default_rng(0).integers(0, 2, 10))
        assert query(scheme, mem, 4).trace == query(scheme, mem, 4).trace

    def test_bad_element_and_memory_length(self):
        scheme = build_charvec_scheme(4, 1)
        with pytest.raises(ValueError):
            query(scheme, BitMemory.zeros(4), 4)
        with pytest.raises(ValueError):
            query(scheme, BitMemory.zeros(3), 0)

    def test_address_out_of_range_is_corruption(self):
        params = SchemeParams(m=1, n=1, t=1, s=2, total_bits=2, kind=Kind.TREES)
        with pytest.raises(CorruptScheme):
            Scheme(params, np.array([[2]]))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4), st.integers(2, 9), st.integers(0, 10**6), st.booleans())
    def test_vectorised_matches_recursive_walk(self, t, bits, seed, systematic):
        scheme = random_tree_scheme(6, t, bits, seed, systematic=systematic)
        mems = np.random.default_rng(seed).integers(0, 2, size=(5, bits)).astype(np.uint8)
        got = scheme.answer_matrix(mems)
        for r, mem in enumerate(mems):
            for u in range(6):
                lv = None if scheme.leaves is None else scheme.leaves[u]
                assert got[r, u] == tree_answer(scheme.addresses[u], lv, mem)
                assert query(scheme, BitMemory(mem), u).answer == got[r, u]


class TestMakeSystematic:
    def _tree(self, leaves):
        params = SchemeParams(m=1, n=1, t=2, s=3, total_bits=3, kind=Kind.TREES)
        return Scheme(params, np.array([[0, 1, 2]]), np.array([leaves], dtype=bool))

    def test_constant_no_goes_to_zero_cell(self):
        sys, _ = make_systematic(self._tree([False, False, True, False]))
        assert sys.addresses[0, 1] == 2 * 3  # after a 0 at the root: both leaves No

    def test_identity_case_keeps_cell(self):
        sys, _ = make_systematic(self._tree([False, True, False, True]))
        assert sys.addresses[0, 1] == 1 and sys.addresses[0, 2] == 2

    def test_negation_goes_to_complement(self):
        sys, _ = make_systematic(self._tree([True, False, True, True]))
        assert sys.addresses[0, 1] == 3 + 1
        assert sys.addresses[0, 2] == 2 * 3 + 1

    @pytest.mark.parametrize("seed", range(5))
    def test_answers_agree_on_all_memories(self, seed):
        s = 8
        scheme = random_tree_scheme(12, 3, s, seed)
        sys, _ = make_systematic(scheme)
        assert sys.total_bits == 2 * s + 2 and sys.is_systematic
        mems = ((np.arange(2**s)[:, None] >> np.arange(s)) & 1).astype(np.uint8)
        ext = np.concatenate([mems, 1 - mems, np.tile([0, 1], (2**s, 1)).astype(np.uint8)], axis=1)
        assert (scheme.answer_matrix(mems) == sys.answer_matrix(ext)).all()

    def test_storer_is_carried_over(self):
        scheme = build_charvec_scheme(6, 2)
        sys, storer = make_systematic(scheme, store_charvec)
        assert verify_exhaustive(sys, storer, 2).ok


class TestVerify:
    def test_charvec_zero_failures(self):
        scheme = build_charvec_scheme(12, 3)
        rep = verify_exhaustive(scheme, store_charvec, 3)
        assert rep.ok and rep.sets_tested == count_sets(12, 3)

    def test_batched_agrees_with_plain(self):
        scheme = build_charvec_scheme(15, 3)
        a = verify_exhaustive(scheme, store_charvec, 3)
        b = verify_exhaustive_batched(scheme, store_charvec_batch, 3)
        assert a.sets_tested == b.sets_tested == count_sets(15, 3)
        assert a.ok and b.ok

    def test_batched_reports_failure(self):
        scheme = build_charvec_scheme(10, 2)

        def broken(sch, sets):
            out = store_charvec_batch(sch, sets)
            out[:, 7] = 1
            return out

        rep = verify_exhaustive_batched(scheme, broken, 2)
        assert not rep.ok
        assert rep.failures[0].S == () and rep.failures[0].u == 7

    def test_corrupted_collision_reports_the_pair(self):
        base = build_two_probe_scheme(40, 2, seed=1, fallback=False)
        x, y = 3, 17
        addr = base.addresses.copy()
        addr[y] = addr[x]  # y now probes exactly like x
        corrupt = Scheme(base.params, addr, None, graph=base.graph)
        rep = verify_exhaustive(corrupt, store_two_probe, 2, max_failures=10**6)
        hits = [f for f in rep.failures if x in f.S and y not in f.S]
        assert hits, "storing x without y must fail"
        assert all(f"element {y}" in f.reason or f"element {x}" in f.reason for f in hits)
        assert all((x in f.S) != (y in f.S) for f in rep.failures)

    def test_sampled_is_deterministic(self):
        scheme = build_two_probe_scheme(60, 1, seed=2, fallback=False)
        a = verify_sampled(scheme, store_two_probe, 1, 50, seed=9)
        b = verify_sampled(scheme, store_two_probe, 1, 50, seed=9)
        assert a.ok and a.sets_tested == b.sets_tested == 50


def test_evaluate_table_one_memory_and_stack():
    addr = np.array([[0, 1, 2], [2, 0, 1]])
    bits = np.array([1, 0, 1], dtype=np.uint8)
    single = evaluate_table(addr, None, bits)
    stacked = evaluate_table(addr, None, np.stack([bits, 1 - bits]))
    assert single.tolist() == [True, False]
    assert stacked[0].tolist() == single.tolist()


def test_count_sets():
    assert count_sets(200, 2) == 20101
    assert count_sets(60, 2) == 1831
    assert count_sets(5, 9) == 32
    assert count_sets(7, 3) == sum(1 for k in range(4) for _ in itertools.combinations(range(7), k))
