"""The four-node worked example: six blocks, seven transactions, one double spend
on the genesis output and one on x's output.

Every table the library should reproduce is kept here next to the builder, so
``verify-toy`` and the test suite read the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ids import digest64
from .ledger import LedgerState, Output, OutputId, Transaction
from .reality import select_reality
from .tangle import Block, TangleView, block_ref, tx_ref, witness_weight
from .voting import VotingView, branch_approval_weight, conflict_weight_fn
from .weights import new_weight_table

RED, BLUE, BROWN, GREEN = 0, 1, 2, 3
NODE_NAMES = {RED: "red", BLUE: "blue", BROWN: "brown", GREEN: "green"}
TOY_WEIGHTS = [0.3, 0.1, 0.2, 0.4]

EXPECTED_WW = {"rho": 1.0, "x": 0.7, "y": 0.7, "u": 0.3, "z": 0.7, "w": 0.4, "v": 0.1}
EXPECTED_AW = {"rho": 1.0, "x": 0.7, "y": 0.3, "u": 0.3, "z": 0.7, "w": 0.4, "v": 0.1}
EXPECTED_REALITY = frozenset({"x", "w"})
EXPECTED_REVOTE_AW = {"y": 0.1, "x": 0.9}

# exact decimal comparison: the tables are sums of one-decimal weights, so
# rounding to 12 places removes binary noise without admitting a real error
DECIMALS = 12


def _id(kind: str, name: str) -> int:
    return digest64(b"toy", kind.encode(), name.encode())


@dataclass
class Toy:
    tangle: TangleView
    ledger: LedgerState
    voting: VotingView
    block: dict = field(default_factory=dict)  # name -> BlockId
    tx: dict = field(default_factory=dict)  # name -> TransactionId
    clock: float = 0.0

    @property
    def table(self):
        return self.voting.table

    def name_of_tx(self, tx_id) -> str:
        return {v: k for k, v in self.tx.items()}[tx_id]

    def add(self, name, issuer, refs, inputs, n_outputs=1, value=None):
        """Issue block ``name`` carrying a fresh transaction ``name`` that spends ``inputs``."""
        self.clock += 1.0
        ins = tuple(OutputId(self.tx[t], i) for t, i in inputs)
        if value is None:
            value = sum(self.ledger.txs[o.tx].outputs[o.index].value for o in ins)
        outs = tuple(Output(value / n_outputs, NODE_NAMES[issuer]) for _ in range(n_outputs))
        t = Transaction(_id("tx", name), ins, outs, self.clock)
        self.ledger.apply(t)
        self.tx[name] = t.id
        b = Block(_id("block", name), tuple(refs(self.block)), t.id, issuer, self.clock)
        out = self.tangle.receive_block(b, self.clock)
        self.voting.observe(out.solidified)
        self.block[name] = b.id
        return b


def build_toy(*, w_tx_ref_to_z: bool = True, include_v: bool = True) -> Toy:
    """Build the example.  The two switches produce the mutated fixtures used to
    check that ``verify_toy`` notices a wrong edge or a missing block."""
    g_tx = Transaction(_id("tx", "rho"), (), (Output(1.0, "genesis"), Output(1.0, "genesis")), 0.0)
    g_block = Block(_id("block", "rho"), (), g_tx.id, -1, 0.0)
    ledger = LedgerState(g_tx)
    tangle = TangleView(g_block)
    toy = Toy(tangle, ledger, VotingView(tangle, ledger, new_weight_table(TOY_WEIGHTS)))
    toy.block["rho"] = g_block.id
    toy.tx["rho"] = g_tx.id

    toy.add("x", RED, lambda b: [block_ref(b["rho"]), block_ref(b["rho"])], [("rho", 0)])
    toy.add("y", BLUE, lambda b: [block_ref(b["rho"]), block_ref(b["rho"])], [("rho", 0)])
    toy.add("u", RED, lambda b: [block_ref(b["x"]), block_ref(b["x"])], [("x", 0)])
    # z keeps a second output so brown can later spend it in the re-vote block
    toy.add("z", BROWN, lambda b: [block_ref(b["y"]), block_ref(b["y"])], [("rho", 1)], n_outputs=2)
    second = tx_ref if w_tx_ref_to_z else block_ref
    toy.add("w", GREEN, lambda b: [block_ref(b["x"]), second(b["z"])], [("x", 0)])
    if include_v:
        toy.add("v", BLUE, lambda b: [block_ref(b["z"]), block_ref(b["z"])], [("z", 0)])
    return toy


def brown_revote(toy: Toy):
    """Brown attaches a new block that block-references w (and spends z's spare output)."""
    return toy.add("brown2", BROWN, lambda b: [block_ref(b["w"]), block_ref(b["w"])], [("z", 1)])


def _r(v: float) -> float:
    return round(v, DECIMALS)


def toy_tables(toy: Toy) -> dict:
    names = [n for n in EXPECTED_WW if n in toy.block]
    ww = {n: _r(witness_weight(toy.tangle, toy.block[n], toy.table)) for n in names}
    aw = {n: _r(toy.voting.approval_weight(toy.tx[n])) for n in names}
    graph = toy.ledger.conflict_graph()
    reality = select_reality(graph, conflict_weight_fn(toy.voting))
    return {"ww": ww, "aw": aw, "reality": frozenset(toy.name_of_tx(c) for c in reality)}


def verify_toy(toy: Toy | None = None) -> list[tuple[str, object, object]]:
    """Return the mismatches as ``(what, expected, got)``; empty means the example is reproduced."""
    toy = toy or build_toy()
    bad = []
    tables = toy_tables(toy)
    for n, want in EXPECTED_WW.items():
        got = tables["ww"].get(n)
        if got != _r(want):
            bad.append((f"WW({n})", want, got))
    for n, want in EXPECTED_AW.items():
        got = tables["aw"].get(n)
        if got != _r(want):
            bad.append((f"AW({n})", want, got))
    if tables["reality"] != EXPECTED_REALITY:
        bad.append(("reality", sorted(EXPECTED_REALITY), sorted(tables["reality"])))
    bab = _r(branch_approval_weight(toy.voting, {toy.tx["x"], toy.tx["w"]}))
    if bab != 0.4:
        bad.append(("AW({x,w})", 0.4, bab))
    if bad:
        return bad

    brown_revote(toy)
    for n, want in EXPECTED_REVOTE_AW.items():
        got = _r(toy.voting.approval_weight(toy.tx[n]))
        if got != _r(want):
            bad.append((f"AW({n}) after brown re-vote", want, got))
    return bad
