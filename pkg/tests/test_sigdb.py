import json

import pytest

from keyscan.errors import BadDescriptor, ConfigError, DuplicateApiId
from keyscan.sigdb import find_call_sites, keyword_prefilter, load_signature_db
from keyscan.smali_ir import MethodSignature, parse_app_dir
from tests.smali_text import builder_setter, new_builder, smali_class, smali_method, write_app

STRONGBOX = "kgps.setIsStrongBoxBacked"


@pytest.fixture(scope="module")
def db():
    return load_signature_db()


def _entry(api_id, **overrides):
    record = {
        "api_id": api_id,
        "class": "android.security.keystore.KeyGenParameterSpec$Builder",
        "name": "setKeySize",
        "params": ["I"],
        "return": "Landroid/security/keystore/KeyGenParameterSpec$Builder;",
        "arg_of_interest": 0,
        "value_domain": "int",
        "category": "keystore-param",
    }
    record.update(overrides)
    return record


def _write_db(tmp_path, records):
    path = tmp_path / "db.json"
    path.write_text(json.dumps(records), encoding="utf-8")
    return path


def test_default_db(db):
    init = db.get("kgps.init")
    assert init.signature == MethodSignature(
        "android.security.keystore.KeyGenParameterSpec$Builder", "<init>", ("Ljava/lang/String;", "I"), "V"
    )
    assert init.signature.java_form() == "void <init>(java.lang.String,int)"
    assert db.get(STRONGBOX).value_domain == "boolean"
    assert db.get(STRONGBOX).category == "strongbox"
    assert all(entry.is_keystore for entry in db.keystore_subset())
    assert not db.get("jca.Cipher.getInstance").is_keystore


def test_duplicate_api_id(tmp_path):
    path = _write_db(tmp_path, [_entry("dup"), _entry("dup", name="setDigests", params=["[Ljava/lang/String;"])])
    with pytest.raises(DuplicateApiId):
        load_signature_db(path)


def test_duplicate_signature(tmp_path):
    with pytest.raises(DuplicateApiId):
        load_signature_db(_write_db(tmp_path, [_entry("a"), _entry("b")]))


def test_arg_of_interest_out_of_range(tmp_path):
    with pytest.raises(BadDescriptor):
        load_signature_db(_write_db(tmp_path, [_entry("a", arg_of_interest=1)]))


def test_schema_violation(tmp_path):
    with pytest.raises(ConfigError):
        load_signature_db(_write_db(tmp_path, [_entry("a", value_domain="float")]))


def test_prefilter_matches_keystore_path(tmp_path):
    app = tmp_path / "app"
    (app / "smali").mkdir(parents=True)
    (app / "smali" / "A.smali").write_text(
        "line one\n    new-instance v0, Landroid/security/keystore/KeyGenParameterSpec$Builder;\n", encoding="utf-8"
    )
    result = keyword_prefilter(app)
    assert result.matched
    assert [(h.needle, h.file, h.line) for h in result.hits] == [("android/security/keystore", "smali/A.smali", 2)]


def test_prefilter_is_over_approximate(tmp_path):
    app = tmp_path / "app"
    app.mkdir()
    (app / "Strings.smali").write_text('    const-string v0, "AndroidKeyStore"\n', encoding="utf-8")
    assert keyword_prefilter(app).matched


def test_prefilter_no_needles(tmp_path):
    app = tmp_path / "app"
    app.mkdir()
    (app / "A.smali").write_text("androidkeystore\n", encoding="utf-8")
    result = keyword_prefilter(app)
    assert not result.matched
    assert result.hits == []


def test_prefilter_reports_each_needle_and_line(basic_app):
    result = keyword_prefilter(basic_app)
    needles = {hit.needle for hit in result.hits}
    assert needles == {"android/security/keystore", "AndroidKeyStore"}
    assert {hit.file for hit in result.hits} == {"smali/com/example/basic/crypto/KeyManager.smali"}
    assert result.hits == sorted(result.hits)


def test_single_strongbox_call(tmp_path, db):
    body = [*new_builder("k", 3), "const/4 v1, 0x1", *builder_setter("setIsStrongBoxBacked", "Z"), "return-void"]
    app_dir = write_app(tmp_path, "sb.app", {"com.sb.Keys": smali_class("com.sb.Keys", [smali_method("make", body)])})
    sites = [s for s in find_call_sites(parse_app_dir(app_dir), db) if s.category == "strongbox"]
    assert len(sites) == 1
    assert sites[0].callee == STRONGBOX
    assert sites[0].caller_package == "com.sb"


def test_software_cipher_is_java_provider(tmp_path, db):
    body = [
        'const-string v0, "AES"',
        "invoke-static {v0}, Ljavax/crypto/Cipher;->getInstance(Ljava/lang/String;)Ljavax/crypto/Cipher;",
        "move-result-object v0",
        "return-void",
    ]
    app_dir = write_app(tmp_path, "sw.app", {"com.sw.C": smali_class("com.sw.C", [smali_method("enc", body)])})
    sites = find_call_sites(parse_app_dir(app_dir), db)
    assert [(s.callee, s.category) for s in sites] == [("jca.Cipher.getInstance", "java-provider")]
    assert sites[0].receiver_register is None


def test_fixture_call_sites(basic_app, db):
    sites = find_call_sites(parse_app_dir(basic_app), db)
    assert [s.callee for s in sites] == [
        "kgps.init",
        "kgps.setBlockModes",
        "kgps.setEncryptionPaddings",
        "kgps.setKeySize",
        STRONGBOX,
        "jca.KeyGenerator.getInstanceWithProvider",
    ]
    assert [s.instruction_index for s in sites] == [3, 7, 14, 17, 20, 24]
    assert [s.source_line for s in sites] == [28, 37, 52, 59, 66, 75]
    assert {s.caller.method_name for s in sites} == {"generateKey"}
    assert sites[0].callsite_id == "Lcom/example/basic/crypto/KeyManager;->generateKey()V@3"
