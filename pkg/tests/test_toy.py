import time

from otvsim.toy import build_toy, toy_tables, verify_toy


def test_stock_fixture_passes_fast():
    t = time.perf_counter()
    assert verify_toy() == []
    assert time.perf_counter() - t < 1.0


def test_ww_table():
    tables = toy_tables(build_toy())
    assert tables["ww"] == {"rho": 1.0, "x": 0.7, "y": 0.7, "u": 0.3, "z": 0.7, "w": 0.4, "v": 0.1}
    assert tables["reality"] == {"x", "w"}


def test_flipped_edge_is_caught():
    bad = dict((what, got) for what, _, got in verify_toy(build_toy(w_tx_ref_to_z=False)))
    assert bad  # the verifier notices
    assert "AW(x)" in bad


def test_missing_v_is_caught():
    toy = build_toy(include_v=False)
    tables = toy_tables(toy)
    assert tables["ww"]["y"] == 0.7
    assert tables["aw"]["z"] == 0.6
    assert any(what.startswith("AW(z)") for what, _, _ in verify_toy(toy))
