"""Small builders for smali sources used by generated test apps."""

from pathlib import Path
from typing import Dict, Sequence

BUILDER = "Landroid/security/keystore/KeyGenParameterSpec$Builder;"


def smali_method(name: str, body: Sequence[str], params: str = "", ret: str = "V",
                 locals_: int = 4, flags: str = "public") -> str:
    lines = [f".method {flags} {name}({params}){ret}", f"    .locals {locals_}", ""]
    lines += [f"    {line}" if line else "" for line in body]
    lines.append(".end method")
    return "\n".join(lines)


def smali_class(name: str, methods: Sequence[str], superclass: str = "java.lang.Object",
                interfaces: Sequence[str] = ()) -> str:
    lines = [f".class public L{name.replace('.', '/')};", f".super L{superclass.replace('.', '/')};"]
    lines += [f".implements L{i.replace('.', '/')};" for i in interfaces]
    lines.append("")
    for method in methods:
        lines += [method, ""]
    return "\n".join(lines)


def write_app(root: Path, app_id: str, classes: Dict[str, str], dex_dir: str = "smali") -> Path:
    """Writes ``classes`` (class name -> smali text) as an apktool-style app directory."""
    app_dir = Path(root) / app_id
    for class_name, text in classes.items():
        path = app_dir / dex_dir / (class_name.replace(".", "/") + ".smali")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    return app_dir


def builder_init(builder: str = "v0", alias: str = "v1", purposes: str = "v2") -> str:
    return f"invoke-direct {{{builder}, {alias}, {purposes}}}, {BUILDER}-><init>(Ljava/lang/String;I)V"


def builder_setter(name: str, param: str, builder: str = "v0", arg: str = "v1") -> Sequence[str]:
    """A chained setter call whose result is moved back into the builder register."""
    return [
        f"invoke-virtual {{{builder}, {arg}}}, {BUILDER}->{name}({param}){BUILDER}",
        f"move-result-object {builder}",
    ]


def new_builder(alias: str, purposes: int, builder: str = "v0") -> Sequence[str]:
    return [
        f"new-instance {builder}, {BUILDER}",
        f'const-string v1, "{alias}"',
        f"const/16 v2, {hex(purposes)}",
        builder_init(builder),
    ]


def key_factory(factory: str, algorithm: str, provider: str = "AndroidKeyStore") -> Sequence[str]:
    """``KeyGenerator``/``KeyPairGenerator.getInstance(algorithm, provider)``; clobbers v1 and v2."""
    owner = {"KeyGenerator": "Ljavax/crypto/KeyGenerator;", "KeyPairGenerator": "Ljava/security/KeyPairGenerator;"}[factory]
    return [
        f'const-string v1, "{algorithm}"',
        f'const-string v2, "{provider}"',
        f"invoke-static {{v1, v2}}, {owner}->getInstance(Ljava/lang/String;Ljava/lang/String;){owner}",
        "move-result-object v1",
    ]
