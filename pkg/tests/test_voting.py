import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otvsim.ledger import LedgerState, Output, OutputId, Transaction, conflicting
from otvsim.tangle import Block, TangleView, block_ref, tx_ref
from otvsim.toy import BLUE, BROWN, brown_revote, build_toy
from otvsim.voting import (InvalidVotingBranch, NotABranch, approval_weight, branch_approval_weight,
                           conflict_weight_fn, is_tx_confirmed, recompute_supporters, update_supporters_on_block,
                           voting_branch, voting_past_cone)
from otvsim.weights import new_weight_table

from randtangle import build_view, random_history


@pytest.fixture
def toy():
    return build_toy()


def aw(toy, n):
    return round(toy.voting.approval_weight(toy.tx[n]), 12)


def test_aw_table(toy):
    want = {"rho": 1.0, "x": 0.7, "y": 0.3, "u": 0.3, "z": 0.7, "w": 0.4, "v": 0.1}
    assert {n: aw(toy, n) for n in want} == want
    assert toy.voting.supporters(toy.tx["y"]) == {BLUE, BROWN}


def test_cone_of_w_avoids_y(toy):
    cone = voting_past_cone(toy.voting, toy.block["w"])
    tx = toy.tx
    assert tx["z"] in cone.transactions and tx["rho"] in cone.transactions
    assert tx["y"] not in cone.transactions
    assert toy.block["z"] not in cone.blocks
    assert voting_branch(toy.voting, toy.block["w"]).branch == {tx["x"], tx["w"]}


def test_genesis_child_cone():
    g_tx = Transaction(10, (), (Output(1.0, "g"),), 0.0)
    g = Block(1, (), 10, -1)
    t = TangleView(g)
    led = LedgerState(g_tx)
    from otvsim.voting import VotingView
    v = VotingView(t, led, new_weight_table([1]))
    tx = Transaction(11, (OutputId(10, 0),), (Output(1.0, "a"),), 1.0)
    led.apply(tx)
    b = Block(2, (block_ref(1), block_ref(1)), 11, 0, 1.0)
    v.observe(t.receive_block(b, 1.0).solidified)
    cone = voting_past_cone(v, 2)
    assert cone.blocks == {1, 2} and cone.transactions == {10, 11}
    assert approval_weight(v, 11) == 1.0


def test_block_ref_inherits_and_tx_ref_does_not(toy):
    # a block tx-referencing u only votes u's ledger past; a block-ref pulls in u's whole cone
    tx = toy.tx
    toy.ledger.apply(Transaction(901, (OutputId(tx["z"], 1),), (Output(toy.ledger.tx(tx["z"]).outputs[1].value, "b"),), 9.0))
    b = Block(900, (tx_ref(toy.block["u"]), tx_ref(toy.block["u"])), 901, BLUE, 9.0)
    toy.tangle.receive_block(b, 9.0)
    assert voting_branch(toy.voting, 900).branch == {tx["x"], tx["u"]}


def test_conflicting_references_are_invalid(toy):
    tx = toy.tx
    toy.ledger.apply(Transaction(801, (OutputId(tx["z"], 1),), (Output(toy.ledger.tx(tx["z"]).outputs[1].value, "b"),), 9.0))
    b = Block(800, (block_ref(toy.block["u"]), block_ref(toy.block["v"])), 801, BLUE, 9.0)
    toy.tangle.receive_block(b, 9.0)
    assert not voting_branch(toy.voting, 800).valid
    with pytest.raises(InvalidVotingBranch):
        update_supporters_on_block(toy.voting, b)
    # an invalid block leaves every vote alone
    assert aw(toy, "y") == 0.3


def test_brown_revote(toy):
    before = toy.voting.approval_weight(toy.tx["y"])
    assert before == pytest.approx(0.3)
    cw = conflict_weight_fn(toy.voting)
    brown_revote(toy)
    assert aw(toy, "y") == 0.1
    assert aw(toy, "x") == 0.9
    assert cw(toy.tx["y"]) == pytest.approx(0.1)
    # sticky confirmation: x was confirmed before and stays so
    assert is_tx_confirmed(toy.voting, toy.tx["x"], 2 / 3)


def test_revote_changeset(toy):
    b = brown_revote(toy)
    # re-deliver an identical vote: nothing new is added, nothing revoked
    cs = toy.voting.update(toy.tangle.blocks[b.id])
    assert cs.added == [] and cs.revoked == []


def test_branch_aw(toy):
    tx = toy.tx
    assert branch_approval_weight(toy.voting, set()) == 1.0
    assert branch_approval_weight(toy.voting, {tx["x"]}) == pytest.approx(0.7)
    assert branch_approval_weight(toy.voting, {tx["x"], tx["w"]}) == pytest.approx(0.4)
    with pytest.raises(NotABranch):
        branch_approval_weight(toy.voting, {tx["w"]})


def test_confirmation_table(toy):
    conf = {n for n in ("x", "y", "u", "z", "w", "v") if is_tx_confirmed(toy.voting, toy.tx[n], 2 / 3)}
    assert conf == {"x", "z"}
    assert not is_tx_confirmed(toy.voting, toy.tx["x"], 0.71)


def test_conflict_weight_fn(toy):
    cw = conflict_weight_fn(toy.voting)
    assert {n: round(cw(toy.tx[n]), 12) for n in ("x", "y", "u", "w")} == {"x": 0.7, "y": 0.3, "u": 0.3, "w": 0.4}


def test_mutated_fixtures():
    # w block-references both x and z, so its cone holds x and y: the block is
    # invalid, green backs nothing, and x falls back to red alone
    t = build_toy(w_tx_ref_to_z=False)
    assert not voting_branch(t.voting, t.block["w"]).valid
    assert aw(t, "y") == 0.3 and aw(t, "x") == 0.3
    t = build_toy(include_v=False)
    assert aw(t, "z") == 0.6


# -- incremental vs from-scratch -------------------------------------------------------


@settings(max_examples=500)
@given(st.integers(0, 2 ** 32), st.integers(4, 16), st.integers(2, 5))
def test_incremental_matches_recompute(seed, n, nodes):
    blocks, txs, table = random_history(seed, n_blocks=n, n_nodes=nodes)
    order = (np.random.default_rng(seed).permutation(len(blocks) - 1) + 1).tolist()
    tangle, ledger, voting = build_view(blocks, txs, table, order=order)
    slow = recompute_supporters(tangle, ledger)
    fast = {t: s for t, s in voting.tx_supporters.items() if s}
    assert fast == {t: s for t, s in slow.items() if s}
    # no node backs two conflicting transactions, and support is branch-consistent
    for j in range(nodes):
        backed = [t for t, s in fast.items() if j in s]
        for a in backed:
            for b in backed:
                assert not conflicting(ledger, a, b)
    for c in ledger.conflicts:
        for a in ledger.branch(c):
            assert voting.supporters(c) <= voting.supporters(a)
