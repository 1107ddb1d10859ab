import pytest

from maskcc.target import (
    PRESETS,
    OpInfo,
    TargetDesc,
    TargetError,
    load_target,
    render_target,
    resolve_target,
)


def test_thumb_like_preset_shape():
    t = PRESETS["thumb-like"]
    assert t.registers == tuple(f"R{i}" for i in range(8))
    assert t.args == ("R0", "R1", "R2", "R3")
    assert t.result == "R0"
    assert t.two_address("xor") and t.two_address("add")
    assert not t.two_address("gf_mul")
    assert t.latency("load") == 2 and t.latency("xor") == 1
    assert t.ops["load"].is_memory and t.ops["store"].is_memory


def test_mips_like_preset_shape():
    t = PRESETS["mips-like"]
    assert len(t.registers) == 16
    assert not any(t.two_address(op) for op in t.ops)
    assert t.latency("store") == 2


def test_round_trip():
    for t in PRESETS.values():
        assert load_target(render_target(t)) == t


def test_zero_latency_rejected():
    cfg = render_target(PRESETS["thumb-like"]).replace(
        "op xor latency=1 two_address=true", "op xor latency=0 two_address=true"
    )
    with pytest.raises(TargetError):
        load_target(cfg)


def test_duplicate_register_rejected():
    with pytest.raises(TargetError):
        TargetDesc(
            name="bad",
            registers=("R0", "R0"),
            args=("R0",),
            result="R0",
            stack_slots=0,
            ops=PRESETS["thumb-like"].ops,
        )


def test_unknown_opcode_rejected():
    cfg = render_target(PRESETS["thumb-like"]) + "op frobnicate latency=1\n"
    with pytest.raises(TargetError):
        load_target(cfg)


def test_two_address_on_unary_rejected():
    ops = dict(PRESETS["thumb-like"].ops)
    ops["not"] = OpInfo(1, two_address=True)
    with pytest.raises(TargetError):
        TargetDesc(
            name="bad",
            registers=("R0", "R1"),
            args=("R0",),
            result="R0",
            stack_slots=0,
            ops=ops,
        )


def test_args_must_prefix_registers():
    with pytest.raises(TargetError):
        TargetDesc(
            name="bad",
            registers=("R0", "R1"),
            args=("R1",),
            result="R0",
            stack_slots=0,
            ops=PRESETS["thumb-like"].ops,
        )


def test_missing_op_entry_rejected():
    ops = dict(PRESETS["thumb-like"].ops)
    del ops["copy"]
    with pytest.raises(TargetError):
        TargetDesc(
            name="bad",
            registers=("R0",),
            args=("R0",),
            result="R0",
            stack_slots=0,
            ops=ops,
        )


def test_stack_slot_naming():
    t = PRESETS["thumb-like"]
    assert t.reg_name(0) == "R0"
    assert t.reg_name(8) == "S0"
    assert t.is_stack_slot(8) and not t.is_stack_slot(7)


def test_resolve_preset_and_file(tmp_path):
    assert resolve_target("mips-like") is PRESETS["mips-like"]
    path = tmp_path / "custom.tgt"
    path.write_text(render_target(PRESETS["thumb-like"]))
    assert resolve_target(str(path)) == PRESETS["thumb-like"]
    with pytest.raises(TargetError):
        resolve_target("no-such-preset")
