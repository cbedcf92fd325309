import random

import pytest

from keyscan.sigdb import find_call_sites, load_signature_db
from keyscan.slicer import (
    CROSS_METHOD, MULTIPLE_DEFS, NON_CONSTANT_DEF, REGISTER_UNDEFINED, UNSUPPORTED_OP, BasicBlockIndex,
    decode_purposes, purpose_label, resolve_sites, slice_register,
)
from keyscan.smali_ir import AppIR, parse_app_dir, parse_smali_file
from tests.smali_text import builder_setter, new_builder, smali_class, smali_method

DB = load_signature_db()
STRING_ARRAY = "[Ljava/lang/String;"


def _sites(body, params="", flags="public", locals_=6):
    cls = parse_smali_file(smali_class("com.t.K", [smali_method("f", body, params=params, flags=flags, locals_=locals_)]))
    app = AppIR(app_id="t", classes={cls.name: cls}, file_count=1)
    return resolve_sites(app, find_call_sites(app, DB), DB)


def _strongbox_arg(body, **kwargs):
    sites = [s for s in _sites(body, **kwargs) if s.callee == "kgps.setIsStrongBoxBacked"]
    assert len(sites) == 1
    return sites[0].arg(0)


def _method(body, params="", locals_=6):
    cls = parse_smali_file(smali_class("com.t.R", [smali_method("f", body, params=params, flags="public static", locals_=locals_)]))
    return cls.methods[0]


def test_single_const_boolean():
    body = [*new_builder("k", 3), "const/4 v3, 0x0", *builder_setter("setIsStrongBoxBacked", "Z", arg="v3"), "return-void"]
    value = _strongbox_arg(body)
    assert value.kind == "Bool"
    assert value.value is False


def test_init_alias_and_purposes():
    sites = _sites([*new_builder("mykey", 3), "return-void"])
    assert sites[0].callee == "kgps.init"
    assert sites[0].arg(0).value == "mykey"
    assert (sites[0].arg(1).kind, sites[0].arg(1).value) == ("Int", 3)


def test_move_chain():
    body = [
        *new_builder("k", 3),
        "const/4 v1, 0x1",
        "move v2, v1",
        "move v3, v2",
        "move v4, v3",
        *builder_setter("setIsStrongBoxBacked", "Z", arg="v4"),
        "return-void",
    ]
    value = _strongbox_arg(body)
    assert (value.kind, value.value) == ("Bool", True)
    assert len(value.provenance) == 4


def test_disagreeing_branches_stay_unresolved():
    body = [
        *new_builder("k", 3),
        "if-eqz p1, :cond_0",
        "const/4 v3, 0x0",
        "goto :goto_0",
        ":cond_0",
        "const/4 v3, 0x1",
        ":goto_0",
        *builder_setter("setIsStrongBoxBacked", "Z", arg="v3"),
        "return-void",
    ]
    assert _strongbox_arg(body, params="I").reason == MULTIPLE_DEFS


def test_agreeing_branches_resolve():
    body = [
        *new_builder("k", 3),
        "if-eqz p1, :cond_0",
        "const/4 v3, 0x1",
        "goto :goto_0",
        ":cond_0",
        "const/4 v3, 0x1",
        ":goto_0",
        *builder_setter("setIsStrongBoxBacked", "Z", arg="v3"),
        "return-void",
    ]
    value = _strongbox_arg(body, params="I")
    assert value.value is True


@pytest.mark.parametrize("setup, reason", [
    (["const/4 v3, 0x2"], UNSUPPORTED_OP),
    (["move v3, p1"], CROSS_METHOD),
    (["invoke-static {}, Lcom/t/Flags;->strongbox()Z", "move-result v3"], CROSS_METHOD),
    (["sget-boolean v3, Lcom/t/Flags;->SB:Z"], NON_CONSTANT_DEF),
    (["iget-boolean v3, p0, Lcom/t/K;->sb:Z"], NON_CONSTANT_DEF),
    (["add-int/lit8 v3, v1, 0x1"], UNSUPPORTED_OP),
    ([], REGISTER_UNDEFINED),
])
def test_unresolved_reasons(setup, reason):
    body = [*new_builder("k", 3), *setup, *builder_setter("setIsStrongBoxBacked", "Z", arg="v3"), "return-void"]
    assert _strongbox_arg(body, params="Z").reason == reason


def test_string_array_idioms():
    body = [
        *new_builder("k", 3),
        'const-string v1, "CBC"',
        'const-string v2, "GCM"',
        "filled-new-array {v1, v2}, [Ljava/lang/String;",
        "move-result-object v1",
        *builder_setter("setBlockModes", "[Ljava/lang/String;"),
        "const/4 v1, 0x2",
        "new-array v1, v1, [Ljava/lang/String;",
        "const/4 v2, 0x1",
        'const-string v3, "SHA-512"',
        "aput-object v3, v1, v2",
        "const/4 v2, 0x0",
        'const-string v3, "SHA-256"',
        "aput-object v3, v1, v2",
        *builder_setter("setDigests", "[Ljava/lang/String;"),
        "return-void",
    ]
    by_callee = {s.callee: s for s in _sites(body)}
    assert by_callee["kgps.setBlockModes"].arg(0).value == ("CBC", "GCM")
    assert by_callee["kgps.setDigests"].arg(0).value == ("SHA-256", "SHA-512")


def test_partially_filled_array_is_unresolved():
    body = [
        *new_builder("k", 3),
        "const/4 v1, 0x2",
        "new-array v1, v1, [Ljava/lang/String;",
        "const/4 v2, 0x0",
        'const-string v3, "SHA-256"',
        "aput-object v3, v1, v2",
        *builder_setter("setDigests", "[Ljava/lang/String;"),
        "return-void",
    ]
    assert _sites(body)[1].arg(0).reason == UNSUPPORTED_OP


def _digests(body, params="I"):
    sites = [s for s in _sites([*new_builder("k", 3), *body, *builder_setter("setDigests", STRING_ARRAY), "return-void"],
                               params=params) if s.callee == "kgps.setDigests"]
    return sites[0].arg(0)


def test_store_on_one_branch_is_unresolved():
    body = [
        "const/4 v1, 0x1",
        f"new-array v1, v1, {STRING_ARRAY}",
        "if-eqz p1, :skip",
        "const/4 v2, 0x0",
        'const-string v3, "SHA-256"',
        "aput-object v3, v1, v2",
        ":skip",
    ]
    assert _digests(body).reason == UNSUPPORTED_OP


def test_store_before_branch_resolves():
    body = [
        "const/4 v1, 0x1",
        f"new-array v1, v1, {STRING_ARRAY}",
        "const/4 v2, 0x0",
        'const-string v3, "SHA-256"',
        "aput-object v3, v1, v2",
        "if-eqz p1, :skip",
        'const-string v3, "ignored"',
        ":skip",
    ]
    assert _digests(body).value == ("SHA-256",)


def test_store_through_copied_register_is_seen():
    body = [
        "const/4 v1, 0x1",
        f"new-array v1, v1, {STRING_ARRAY}",
        "const/4 v2, 0x0",
        'const-string v3, "SHA-256"',
        "aput-object v3, v1, v2",
        "move-object v5, v1",
        'const-string v3, "MD5"',
        "aput-object v3, v5, v2",
    ]
    assert _digests(body).reason == UNSUPPORTED_OP


def test_store_through_maybe_copied_register_is_unresolved():
    body = [
        "const/4 v1, 0x1",
        f"new-array v1, v1, {STRING_ARRAY}",
        "const/4 v2, 0x0",
        'const-string v3, "SHA-256"',
        "aput-object v3, v1, v2",
        f"new-array v5, v2, {STRING_ARRAY}",
        "if-eqz p1, :keep",
        "move-object v5, v1",
        ":keep",
        'const-string v3, "MD5"',
        "const/4 v2, 0x0",
        "aput-object v3, v5, v2",
    ]
    assert _digests(body).reason == UNSUPPORTED_OP


def test_parameter_read_through_frame_register():
    # locals 6 + this + one boolean: p0 is v6, p1 is v7.
    body = [*new_builder("k", 3), "move v3, v7", *builder_setter("setIsStrongBoxBacked", "Z", arg="v3"), "return-void"]
    assert _strongbox_arg(body, params="Z").reason == CROSS_METHOD


def test_parameter_overwritten_through_frame_register():
    body = [*new_builder("k", 3), "const/4 v7, 0x1", *builder_setter("setIsStrongBoxBacked", "Z", arg="p1"), "return-void"]
    value = _strongbox_arg(body, params="Z")
    assert (value.kind, value.value) == ("Bool", True)


def test_param_aliases():
    method = _method(["return-void"], params="JI", locals_=3)
    assert method.param_aliases == {"v3": "p0", "v4": "p1", "v5": "p2"}


def test_setter_receivers_share_origin():
    body = [
        *new_builder("a", 3),
        "const/16 v1, 0x100",
        *builder_setter("setKeySize", "I"),
        "new-instance v4, Landroid/security/keystore/KeyGenParameterSpec$Builder;",
        'const-string v1, "b"',
        "const/4 v2, 0x4",
        "invoke-direct {v4, v1, v2}, Landroid/security/keystore/KeyGenParameterSpec$Builder;-><init>(Ljava/lang/String;I)V",
        "const/4 v1, 0x1",
        *builder_setter("setIsStrongBoxBacked", "Z", builder="v4"),
        "return-void",
    ]
    init_a, key_size, init_b, strongbox = _sites(body)
    assert init_a.receiver_origin == key_size.receiver_origin == 0
    assert init_b.receiver_origin == strongbox.receiver_origin == 7


def test_fixture_resolution(basic_app):
    app = parse_app_dir(basic_app)
    sites = resolve_sites(app, find_call_sites(app, DB), DB)
    values = {s.callee: [(a.index, a.value.kind, a.value.value) for a in s.resolved_args] for s in sites}
    assert values == {
        "kgps.init": [(0, "Str", "mykey"), (1, "Int", 3)],
        "kgps.setBlockModes": [(0, "StrArray", ("GCM",))],
        "kgps.setEncryptionPaddings": [(0, "StrArray", ("NoPadding",))],
        "kgps.setKeySize": [(0, "Int", 256)],
        "kgps.setIsStrongBoxBacked": [(0, "Bool", True)],
        "jca.KeyGenerator.getInstanceWithProvider": [(0, "Str", "AES"), (1, "Str", "AndroidKeyStore")],
    }
    assert [s.receiver_origin for s in sites] == [0, 0, 0, 0, 0, None]
    assert sites[0].arg(1).provenance == (26,)


def _interpret(lines):
    """Reference interpreter for straight-line const/move code."""
    regs = {}
    for line in lines:
        op, rest = line.split(" ", 1)
        dst, src = [part.strip() for part in rest.split(",", 1)]
        if op == "const/4":
            regs[dst] = ("Int", int(src, 16) if src.lstrip("-").startswith("0x") else int(src))
        elif op == "const-string":
            regs[dst] = ("Str", src.strip('"'))
        else:
            regs[dst] = regs.get(src)
    return regs


def _random_line(rng, registers):
    dst = rng.choice(registers)
    roll = rng.random()
    if roll < 0.35:
        return f"const/4 {dst}, {rng.randint(-8, 7)}"
    if roll < 0.6:
        return f'const-string {dst}, "s{rng.randint(0, 9)}"'
    return f"{rng.choice(['move', 'move-object'])} {dst}, {rng.choice(registers)}"


def test_straight_line_matches_interpreter():
    rng = random.Random(20240611)
    registers = [f"v{i}" for i in range(5)]
    for _ in range(1000):
        lines = [_random_line(rng, registers) for _ in range(rng.randint(1, 12))]
        method = _method([*lines, "return-void"], locals_=5)
        index = BasicBlockIndex(method)
        expected = _interpret(lines)
        at = len(method.instructions) - 1
        for reg in registers:
            want = expected.get(reg)
            domain = "string" if want and want[0] == "Str" else "int"
            got = slice_register(index, at, reg, domain)
            if want is None:
                assert got.reason == REGISTER_UNDEFINED, (lines, reg)
            else:
                assert (got.kind, got.value) == want, (lines, reg)


def test_branching_never_resolves_disagreement():
    rng = random.Random(7)
    for _ in range(300):
        before = rng.randint(0, 3)
        then_value = rng.choice([None, rng.randint(0, 3)])
        else_value = rng.choice([None, rng.randint(0, 3)])
        body = [f"const/4 v0, {before}", "if-eqz p0, :cond_0"]
        body += [f"const/4 v0, {then_value}"] if then_value is not None else []
        body += ["goto :goto_0", ":cond_0"]
        body += [f"const/4 v0, {else_value}"] if else_value is not None else []
        body += [":goto_0", "return-void"]
        method = _method(body, params="I", locals_=1)
        index = BasicBlockIndex(method)
        got = slice_register(index, len(method.instructions) - 1, "v0", "int")

        paths = {before if then_value is None else then_value, before if else_value is None else else_value}
        if len(paths) == 1:
            assert got.value == paths.pop(), body
        else:
            assert got.reason == MULTIPLE_DEFS, body


def test_decode_purposes(caplog):
    assert decode_purposes(3) == {"ENCRYPT", "DECRYPT"}
    assert decode_purposes(12) == {"SIGN", "VERIFY"}
    assert decode_purposes(16 | 1) == {"ENCRYPT", "UNKNOWN(16)"}
    assert decode_purposes(0) == frozenset()
    assert "no key purposes" in caplog.text
    with pytest.raises(ValueError):
        decode_purposes(-1)


def test_purpose_label():
    assert purpose_label({"DECRYPT", "ENCRYPT"}) == "ENCRYPT+DECRYPT"
    assert purpose_label({"VERIFY", "UNKNOWN(16)", "SIGN"}) == "SIGN+VERIFY+UNKNOWN(16)"
    assert purpose_label(set()) == "NONE"
