import pytest
from hypothesis import given, settings, strategies as st
import numpy as np

from otvsim.tangle import (Block, DuplicateBlock, MalformedBlock, TangleView, ThetaOutOfRange, WitnessTracker,
                           block_ref, block_supporters, future_cone, is_block_confirmed, iter_blocks_jsonl,
                           past_cone, receive_block, tips, tx_ref, witness_weight)
from otvsim.toy import BLUE, BROWN, GREEN, RED, build_toy

from randtangle import build_view, random_history

G = Block(1, (), 100, -1, 0.0)


def blk(i, *parents, issuer=0, tx=False):
    ref = tx_ref if tx else block_ref
    return Block(i, tuple(ref(p) for p in parents), 100 + i, issuer, float(i))


@pytest.fixture(scope="module")
def toy():
    return build_toy()


def test_genesis_child_solidifies():
    v = TangleView(G)
    out = receive_block(v, blk(2, 1, 1), 1.0)
    assert out.solidified == [2] and out.missing == []


def test_missing_parent_then_release():
    v = TangleView(G)
    out = v.receive_block(blk(3, 2, 2), 1.0)
    assert out.solidified == [] and out.missing == [2]
    out = v.receive_block(blk(2, 1, 1), 2.0)
    assert out.solidified == [2, 3]
    assert v.solid_time[3] == 2.0


def test_one_reference_rejected():
    v = TangleView(G)
    with pytest.raises(MalformedBlock):
        v.receive_block(Block(2, (block_ref(1),), 102, 0), 1.0)


def test_duplicate_rejected():
    v = TangleView(G)
    v.receive_block(blk(2, 1, 1), 1.0)
    with pytest.raises(DuplicateBlock):
        v.receive_block(blk(2, 1, 1), 1.0)


def test_max_refs():
    v = TangleView(G, max_refs=2)
    with pytest.raises(MalformedBlock):
        v.receive_block(blk(2, 1, 1, 1), 1.0)


def test_tips_simple():
    v = TangleView(G)
    assert tips(v) == {1}
    v.receive_block(blk(2, 1, 1), 1)
    v.receive_block(blk(3, 2, 2), 2)
    assert tips(v) == {3}
    assert past_cone(v, 1) == {1}


def test_toy_cones(toy):
    b = toy.block
    name = {v: k for k, v in b.items()}
    assert {name[x] for x in toy.tangle.tips()} == {"u", "w", "v"}
    assert {name[x] for x in future_cone(toy.tangle, b["x"])} == {"x", "u", "w"}
    assert {name[x] for x in past_cone(toy.tangle, b["w"])} == {"w", "x", "z", "y", "rho"}


def test_toy_supporters(toy):
    b = toy.block
    assert block_supporters(toy.tangle, b["x"]) == {RED, GREEN}
    assert block_supporters(toy.tangle, b["y"]) == {BLUE, BROWN, GREEN}
    assert witness_weight(toy.tangle, b["rho"], toy.table) == pytest.approx(1.0)
    assert witness_weight(toy.tangle, b["v"], toy.table) == pytest.approx(0.1)


def test_lone_child_supporter():
    v = TangleView(G)
    v.receive_block(blk(2, 1, 1, issuer=3), 1)
    assert block_supporters(v, 2) == {3}


def test_block_confirmation(toy):
    hist = {}
    assert is_block_confirmed(toy.tangle, toy.block["x"], 2 / 3, hist, toy.table)
    assert not is_block_confirmed(toy.tangle, toy.block["v"], 2 / 3, hist, toy.table)
    assert not is_block_confirmed(toy.tangle, toy.block["x"], 1.0, hist, toy.table)
    assert is_block_confirmed(toy.tangle, toy.block["rho"], 1.0, hist, toy.table)
    with pytest.raises(ThetaOutOfRange):
        is_block_confirmed(toy.tangle, toy.block["x"], 0.5, hist, toy.table)


def test_jsonl_roundtrip(toy):
    blocks = list(iter_blocks_jsonl(toy.tangle.snapshot_jsonl()))
    assert [b.id for b in blocks] == toy.tangle.solid_order
    assert blocks == [toy.tangle.blocks[i] for i in toy.tangle.solid_order]


def test_tracker_matches_toy(toy):
    tr = WitnessTracker(toy.tangle, toy.table)
    for n, bid in toy.block.items():
        assert tr.ww[bid] == pytest.approx(witness_weight(toy.tangle, bid, toy.table), abs=1e-12)


# -- WW lemmas on random Tangles ----------------------------------------------------


@settings(max_examples=1000)
@given(st.integers(0, 2 ** 32), st.integers(3, 14))
def test_ww_monotone_and_growing(seed, n):
    blocks, txs, table = random_history(seed, n_blocks=n)
    rng = np.random.default_rng(seed)
    order = (rng.permutation(len(blocks) - 1) + 1).tolist()
    tangle, _, _ = build_view(blocks, txs, table, order=order)
    tr = WitnessTracker(TangleView(blocks[0]), table)
    seen = {}
    # replay the solid order, checking growth after every step
    for bid in tangle.solid_order[1:]:
        tr.view.receive_block(tangle.blocks[bid], tangle.solid_time[bid])
        tr.observe(bid)
        for b, w in tr.ww.items():
            assert w >= seen.get(b, 0.0) - 1e-12
            seen[b] = w
    # monotonicity along references, and the tracker agrees with the direct count
    for bid in tangle.solid_order:
        ww = witness_weight(tangle, bid, table)
        assert tr.ww[bid] == pytest.approx(ww, abs=1e-12)
        for p in tangle.blocks[bid].parents:
            assert witness_weight(tangle, p, table) >= ww - 1e-12
    # the solid set is closed under past cones
    for bid in tangle.solid_order:
        assert past_cone(tangle, bid) <= tangle.solid


@settings(max_examples=100)
@given(st.integers(0, 2 ** 32))
def test_delivery_order_does_not_change_final_tangle(seed):
    blocks, txs, table = random_history(seed, n_blocks=10)
    a, _, _ = build_view(blocks, txs, table)
    order = (np.random.default_rng(seed).permutation(len(blocks) - 1) + 1).tolist()
    b, _, _ = build_view(blocks, txs, table, order=order)
    assert a.solid == b.solid and a.tips() == b.tips()
