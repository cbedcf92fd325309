"""
Smali text -> typed intermediate representation.

Covers the baksmali subset the slicer and call graph need. Anything else in a
method body becomes an ``Other`` instruction so stream positions survive.
"""

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

from loguru import logger

from .errors import BadDescriptor, EmptyApp, MalformedSmali

# Descriptors

_DESCRIPTOR_RE = re.compile(r"\[*(?:[ZBSCIJFD]|L[^;\s\[]+;)")
_REGISTER_RE = re.compile(r"^([vp])(\d+)$")
_TARGET_RE = re.compile(r"^(\[*L[^;\s]+;|\[+[ZBSCIJFD])->([^\s(]+)\(([^)\s]*)\)(\S+)$")
_CLASS_RE = re.compile(r"^\.class\s+((?:[\w-]+\s+)*)(L[^;\s]+;)$")
_SUPER_RE = re.compile(r"^\.(super|implements)\s+(L[^;\s]+;)$")
_METHOD_RE = re.compile(r"^\.method\s+((?:[\w-]+\s+)*)([^\s(]+)\(([^)\s]*)\)(\S+)$")
_LITERAL_RE = re.compile(r"^(-?)(0x[0-9a-fA-F]+|\d+)[LlTtSs]?$")
_ESCAPE_RE = re.compile(r"\\(u[0-9a-fA-F]{4}|.)")

_JAVA_PRIMITIVES = {
    "Z": "boolean", "B": "byte", "S": "short", "C": "char", "I": "int",
    "J": "long", "F": "float", "D": "double", "V": "void",
}
_SIMPLE_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f", "'": "'", '"': '"', "\\": "\\"}


def split_descriptors(text: str) -> List[str]:
    """Splits a concatenated parameter descriptor string into tokens."""
    tokens: List[str] = []
    pos = 0
    while pos < len(text):
        match = _DESCRIPTOR_RE.match(text, pos)
        if not match:
            raise BadDescriptor(text)
        tokens.append(match.group(0))
        pos = match.end()
    return tokens


def is_descriptor(text: str, allow_void: bool = False) -> bool:
    if allow_void and text == "V":
        return True
    return bool(_DESCRIPTOR_RE.fullmatch(text))


def descriptor_words(descriptor: str) -> int:
    return 2 if descriptor in ("J", "D") else 1


def descriptor_to_class(descriptor: str) -> str:
    """'Lcom/example/Foo;' -> 'com.example.Foo'. Array types keep their descriptor shape."""
    if descriptor.startswith("L") and descriptor.endswith(";"):
        return descriptor[1:-1].replace("/", ".")
    return descriptor.replace("/", ".")


def class_to_descriptor(class_name: str) -> str:
    if class_name.startswith("["):
        return class_name.replace(".", "/")
    return "L" + class_name.replace(".", "/") + ";"


def java_type(descriptor: str) -> str:
    dims = len(descriptor) - len(descriptor.lstrip("["))
    base = descriptor[dims:]
    name = _JAVA_PRIMITIVES.get(base) or descriptor_to_class(base)
    return name + "[]" * dims


def package_of(class_name: str) -> str:
    """Class name minus its last component; '' for the default package."""
    return class_name.rpartition(".")[0]


@dataclass(frozen=True)
class MethodSignature:
    class_name: str
    method_name: str
    param_descriptors: Tuple[str, ...]
    return_descriptor: str

    def __post_init__(self):
        object.__setattr__(self, "param_descriptors", tuple(self.param_descriptors))
        if not self.class_name or "/" in self.class_name:
            raise BadDescriptor(self.class_name, "class name must be non-empty and dotted")
        for descriptor in self.param_descriptors:
            if not is_descriptor(descriptor):
                raise BadDescriptor(descriptor)
        if not is_descriptor(self.return_descriptor, allow_void=True):
            raise BadDescriptor(self.return_descriptor)

    @classmethod
    def parse(cls, text: str) -> "MethodSignature":
        """Parses the smali invoke-target form ``Lpkg/Cls;->name(params)ret``."""
        match = _TARGET_RE.match(text.strip())
        if not match:
            raise BadDescriptor(text, "unparsable method reference")
        owner, name, params, ret = match.groups()
        return cls(descriptor_to_class(owner), name, tuple(split_descriptors(params)), ret)

    @property
    def arity(self) -> int:
        return len(self.param_descriptors)

    @property
    def package(self) -> str:
        return package_of(self.class_name)

    def param_words(self, static: bool) -> int:
        return sum(descriptor_words(d) for d in self.param_descriptors) + (0 if static else 1)

    def render(self) -> str:
        params = "".join(self.param_descriptors)
        return f"{class_to_descriptor(self.class_name)}->{self.method_name}({params}){self.return_descriptor}"

    def java_form(self) -> str:
        params = ",".join(java_type(d) for d in self.param_descriptors)
        return f"{java_type(self.return_descriptor)} {self.method_name}({params})"

    def sort_key(self) -> str:
        return self.render()

    def __str__(self) -> str:
        return self.render()


# Instructions

def _pair(register: str) -> str:
    return f"{register[0]}{int(register[1:]) + 1}"


class Instruction:
    """Base of the IR instruction kinds; concrete kinds are frozen dataclasses."""

    kind = "Instruction"
    source_line: int

    def defs(self) -> Tuple[str, ...]:
        return ()

    def uses(self) -> Tuple[str, ...]:
        return ()


@dataclass(frozen=True)
class Const(Instruction):
    kind = "Const"
    reg: str
    value: int
    source_line: int = 0

    def defs(self):
        return (self.reg,)


@dataclass(frozen=True)
class ConstString(Instruction):
    kind = "ConstString"
    reg: str
    value: str
    source_line: int = 0

    def defs(self):
        return (self.reg,)


@dataclass(frozen=True)
class ConstWide(Instruction):
    kind = "ConstWide"
    reg: str
    value: int
    source_line: int = 0

    def defs(self):
        return (self.reg, _pair(self.reg))


@dataclass(frozen=True)
class Move(Instruction):
    kind = "Move"
    dst: str
    src: str
    source_line: int = 0

    def defs(self):
        return (self.dst,)

    def uses(self):
        return (self.src,)


@dataclass(frozen=True)
class MoveResult(Instruction):
    kind = "MoveResult"
    reg: str
    wide: bool = False
    source_line: int = 0

    def defs(self):
        return (self.reg, _pair(self.reg)) if self.wide else (self.reg,)


@dataclass(frozen=True)
class NewInstance(Instruction):
    kind = "NewInstance"
    reg: str
    class_name: str
    source_line: int = 0

    def defs(self):
        return (self.reg,)


@dataclass(frozen=True)
class NewArray(Instruction):
    kind = "NewArray"
    reg: str
    size_reg: str
    element_type: str
    source_line: int = 0

    def defs(self):
        return (self.reg,)

    def uses(self):
        return (self.size_reg,)


@dataclass(frozen=True)
class Invoke(Instruction):
    kind = "Invoke"
    invoke_kind: str
    target: MethodSignature
    args: Tuple[str, ...]
    range_form: bool = False
    source_line: int = 0

    @property
    def is_static(self) -> bool:
        return self.invoke_kind == "static"

    @property
    def receiver(self) -> Optional[str]:
        return None if self.is_static or not self.args else self.args[0]

    def arg_register(self, index: int) -> str:
        """Register holding parameter ``index`` (0-based, receiver excluded)."""
        offset = 0 if self.is_static else 1
        offset += sum(descriptor_words(d) for d in self.target.param_descriptors[:index])
        return self.args[offset]

    def uses(self):
        return self.args


@dataclass(frozen=True)
class ArrayPut(Instruction):
    kind = "ArrayPut"
    value_reg: str
    array_reg: str
    index_reg: str
    source_line: int = 0

    def uses(self):
        return (self.value_reg, self.array_reg, self.index_reg)


@dataclass(frozen=True)
class FilledNewArray(Instruction):
    kind = "FilledNewArray"
    element_regs: Tuple[str, ...]
    element_type: str
    source_line: int = 0

    def uses(self):
        return self.element_regs


@dataclass(frozen=True)
class StaticGet(Instruction):
    kind = "StaticGet"
    reg: str
    field_ref: str
    wide: bool = False
    source_line: int = 0

    def defs(self):
        return (self.reg, _pair(self.reg)) if self.wide else (self.reg,)


@dataclass(frozen=True)
class Label(Instruction):
    kind = "Label"
    name: str
    source_line: int = 0


@dataclass(frozen=True)
class Branch(Instruction):
    kind = "Branch"
    opcode: str
    targets: Tuple[str, ...]
    conditional: bool
    payload: Optional[str] = None
    source_line: int = 0


@dataclass(frozen=True)
class Other(Instruction):
    kind = "Other"
    opcode_text: str
    written: Tuple[str, ...] = ()
    source_line: int = 0

    @property
    def opcode(self) -> str:
        return self.opcode_text.split(None, 1)[0]

    @property
    def ends_flow(self) -> bool:
        return self.opcode.startswith("return") or self.opcode == "throw"

    def defs(self):
        return self.written


# Methods, classes, apps

@dataclass(frozen=True)
class SmaliMethod:
    signature: MethodSignature
    register_count: int
    instructions: Tuple[Instruction, ...]
    access_flags: frozenset = frozenset()
    header_line: int = 0

    @property
    def is_static(self) -> bool:
        return "static" in self.access_flags

    @property
    def param_registers(self) -> Tuple[str, ...]:
        return tuple(f"p{i}" for i in range(self.signature.param_words(self.is_static)))

    @property
    def param_aliases(self) -> Dict[str, str]:
        """``v<locals+i>`` -> ``p<i>``: parameters occupy the top register words of the frame."""
        words = self.signature.param_words(self.is_static)
        first = self.register_count - words
        return {f"v{first + i}": f"p{i}" for i in range(words)}


@dataclass
class SmaliClass:
    name: str
    superclass: Optional[str]
    interfaces: List[str] = field(default_factory=list)
    methods: List[SmaliMethod] = field(default_factory=list)
    access_flags: frozenset = frozenset()

    @property
    def package(self) -> str:
        return package_of(self.name)


@dataclass
class AppIR:
    app_id: str
    classes: Dict[str, SmaliClass]
    file_count: int
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.app_id:
            raise ValueError("app_id must be non-empty")
        self._method_index: Optional[Dict[MethodSignature, SmaliMethod]] = None

    def iter_methods(self) -> Iterator[SmaliMethod]:
        for name in sorted(self.classes):
            yield from self.classes[name].methods

    def method(self, signature: MethodSignature) -> Optional[SmaliMethod]:
        if self._method_index is None:
            self._method_index = {m.signature: m for m in self.iter_methods()}
        return self._method_index.get(signature)

    @property
    def method_count(self) -> int:
        return sum(len(c.methods) for c in self.classes.values())

    def defined_packages(self) -> List[str]:
        return sorted({c.package for c in self.classes.values()})


# Line-level parsing

_CONST_OPS = {"const/4", "const/16", "const", "const/high16"}
_MOVE_OPS = {"move", "move/from16", "move/16", "move-object", "move-object/from16", "move-object/16"}
_MOVE_RESULT_OPS = {"move-result", "move-result-object", "move-result-wide"}
_INVOKE_KINDS = {"virtual", "direct", "static", "interface", "super"}
_GOTO_OPS = {"goto", "goto/16", "goto/32"}
_SWITCH_OPS = {"packed-switch", "sparse-switch"}
# Opcodes whose first register operand is read, not written.
_NON_WRITING_PREFIXES = (
    "return", "throw", "goto", "if-", "aput", "iput", "sput", "monitor-", "check-cast",
    "fill-array-data", "nop", "invoke-",
)
_BLOCK_ENDS = {
    ".annotation": ".end annotation",
    ".subannotation": ".end subannotation",
    ".array-data": ".end array-data",
    ".packed-switch": ".end packed-switch",
    ".sparse-switch": ".end sparse-switch",
}


def _unescape(text: str) -> str:
    def decode(match):
        token = match.group(1)
        if token.startswith("u") and len(token) == 5:
            return chr(int(token[1:], 16))
        return _SIMPLE_ESCAPES.get(token, token)

    return _ESCAPE_RE.sub(decode, text)


def _literal(text: str, line_no: int) -> int:
    match = _LITERAL_RE.match(text.strip())
    if not match:
        raise MalformedSmali(line_no, f"bad literal {text!r}")
    sign, digits = match.groups()
    value = int(digits, 16) if digits.startswith("0x") else int(digits)
    return -value if sign else value


def _register(text: str, line_no: int) -> str:
    reg = text.strip()
    if not _REGISTER_RE.match(reg):
        raise MalformedSmali(line_no, f"bad register {reg!r}")
    return reg


def _register_list(text: str, line_no: int) -> Tuple[str, ...]:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise MalformedSmali(line_no, f"bad register list {text!r}")
    inner = text[1:-1].strip()
    if not inner:
        return ()
    if ".." in inner:
        first, last = (_register(part, line_no) for part in inner.split(".."))
        if first[0] != last[0] or int(last[1:]) < int(first[1:]):
            raise MalformedSmali(line_no, f"bad register range {text!r}")
        return tuple(f"{first[0]}{i}" for i in range(int(first[1:]), int(last[1:]) + 1))
    return tuple(_register(part, line_no) for part in inner.split(","))


def _operands(rest: str) -> List[str]:
    return [part.strip() for part in rest.split(",")] if rest else []


def _strip_comment(line: str) -> str:
    if '"' in line:
        return line
    return line.split("#", 1)[0].rstrip()


def parse_instruction(line: str, line_no: int) -> Instruction:
    """Parses one opcode line (already stripped) into an Instruction."""
    if line.startswith(":"):
        return Label(name=line[1:], source_line=line_no)

    op, _, rest = line.partition(" ")
    rest = rest.strip()

    if op in ("const-string", "const-string/jumbo"):
        match = re.match(r'^([vp]\d+),\s*"(.*)"$', rest)
        if not match:
            raise MalformedSmali(line_no, f"bad const-string operands {rest!r}")
        return ConstString(reg=match.group(1), value=_unescape(match.group(2)), source_line=line_no)

    rest = _strip_comment(rest)
    operands = _operands(rest)

    if op in _CONST_OPS:
        if len(operands) != 2:
            raise MalformedSmali(line_no, f"{op} expects 2 operands")
        return Const(reg=_register(operands[0], line_no), value=_literal(operands[1], line_no), source_line=line_no)
    if op.startswith("const-wide"):
        if len(operands) != 2:
            raise MalformedSmali(line_no, f"{op} expects 2 operands")
        return ConstWide(reg=_register(operands[0], line_no), value=_literal(operands[1], line_no), source_line=line_no)
    if op in _MOVE_OPS:
        if len(operands) != 2:
            raise MalformedSmali(line_no, f"{op} expects 2 operands")
        return Move(dst=_register(operands[0], line_no), src=_register(operands[1], line_no), source_line=line_no)
    if op in _MOVE_RESULT_OPS:
        return MoveResult(reg=_register(rest, line_no), wide=op.endswith("-wide"), source_line=line_no)
    if op == "new-instance":
        if len(operands) != 2:
            raise MalformedSmali(line_no, "new-instance expects 2 operands")
        return NewInstance(
            reg=_register(operands[0], line_no), class_name=descriptor_to_class(operands[1]), source_line=line_no
        )
    if op == "new-array":
        if len(operands) != 3:
            raise MalformedSmali(line_no, "new-array expects 3 operands")
        return NewArray(
            reg=_register(operands[0], line_no),
            size_reg=_register(operands[1], line_no),
            element_type=operands[2],
            source_line=line_no,
        )
    if op.startswith("invoke-"):
        base, _, suffix = op[len("invoke-"):].partition("/")
        if base in _INVOKE_KINDS and suffix in ("", "range"):
            match = re.match(r"^(\{[^}]*\})\s*,\s*(\S+)$", rest)
            if not match:
                raise MalformedSmali(line_no, f"bad invoke operands {rest!r}")
            try:
                target = MethodSignature.parse(match.group(2))
            except BadDescriptor as err:
                raise MalformedSmali(line_no, f"unparsable invoke target: {err}")
            args = _register_list(match.group(1), line_no)
            expected = target.param_words(static=(base == "static"))
            if len(args) != expected:
                raise MalformedSmali(
                    line_no, f"invoke passes {len(args)} registers, {target.render()} takes {expected}"
                )
            return Invoke(invoke_kind=base, target=target, args=args, range_form=bool(suffix), source_line=line_no)
    if op == "aput-object":
        if len(operands) != 3:
            raise MalformedSmali(line_no, "aput-object expects 3 operands")
        value, array, index = (_register(o, line_no) for o in operands)
        return ArrayPut(value_reg=value, array_reg=array, index_reg=index, source_line=line_no)
    if op in ("filled-new-array", "filled-new-array/range"):
        match = re.match(r"^(\{[^}]*\})\s*,\s*(\S+)$", rest)
        if not match:
            raise MalformedSmali(line_no, f"bad filled-new-array operands {rest!r}")
        return FilledNewArray(
            element_regs=_register_list(match.group(1), line_no), element_type=match.group(2), source_line=line_no
        )
    if op.startswith("sget"):
        if len(operands) != 2:
            raise MalformedSmali(line_no, f"{op} expects 2 operands")
        return StaticGet(
            reg=_register(operands[0], line_no), field_ref=operands[1], wide=op == "sget-wide", source_line=line_no
        )
    if op.startswith("if-"):
        if not operands or not operands[-1].startswith(":"):
            raise MalformedSmali(line_no, f"{op} without target label")
        return Branch(opcode=op, targets=(operands[-1][1:],), conditional=True, source_line=line_no)
    if op in _GOTO_OPS:
        if not rest.startswith(":"):
            raise MalformedSmali(line_no, f"{op} without target label")
        return Branch(opcode=op, targets=(rest[1:],), conditional=False, source_line=line_no)
    if op in _SWITCH_OPS:
        if len(operands) != 2 or not operands[1].startswith(":"):
            raise MalformedSmali(line_no, f"{op} without payload label")
        return Branch(opcode=op, targets=(), conditional=True, payload=operands[1][1:], source_line=line_no)

    return Other(opcode_text=line, written=_written_registers(op, operands), source_line=line_no)


def _written_registers(op: str, operands: List[str]) -> Tuple[str, ...]:
    if not operands or op.startswith(_NON_WRITING_PREFIXES):
        return ()
    first = operands[0]
    if not _REGISTER_RE.match(first):
        return ()
    wide = "wide" in op or op.endswith(("-long", "-double", "-long/2addr", "-double/2addr")) or op in (
        "int-to-long", "int-to-double", "float-to-long", "float-to-double", "long-to-double", "double-to-long",
    )
    return (first, _pair(first)) if wide else (first,)


# File-level parsing

@dataclass
class _MethodBuilder:
    flags: frozenset
    signature: MethodSignature
    header_line: int
    registers: Optional[int] = None
    locals_: Optional[int] = None
    instructions: List[Instruction] = field(default_factory=list)
    payloads: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    def finish(self) -> SmaliMethod:
        static = "static" in self.flags
        param_words = self.signature.param_words(static)
        if self.registers is not None:
            register_count = self.registers
        elif self.locals_ is not None:
            register_count = self.locals_ + param_words
        else:
            register_count = param_words
        declared = self.registers is not None or self.locals_ is not None

        instructions = []
        for instr in self.instructions:
            if isinstance(instr, Branch) and instr.payload is not None:
                if instr.payload not in self.payloads:
                    raise MalformedSmali(instr.source_line, f"switch payload :{instr.payload} not found")
                instr = replace(instr, targets=self.payloads[instr.payload])
            if declared:
                self._check_registers(instr, register_count, param_words)
            instructions.append(instr)
        return SmaliMethod(
            signature=self.signature,
            register_count=register_count,
            instructions=tuple(instructions),
            access_flags=self.flags,
            header_line=self.header_line,
        )

    @staticmethod
    def _check_registers(instr: Instruction, register_count: int, param_words: int):
        for reg in instr.defs() + instr.uses():
            index = int(reg[1:])
            limit = register_count if reg[0] == "v" else param_words
            if index >= limit:
                raise MalformedSmali(instr.source_line, f"register {reg} out of range ({limit})")


def parse_smali_file(text: str) -> SmaliClass:
    """
    Parses one smali class file.

    Args:
        text (str): Contents of a ``.smali`` file as written by baksmali/apktool.

    Returns:
        SmaliClass: Class name, superclass, interfaces and methods with instruction streams.

    Raises:
        MalformedSmali: On a missing ``.class`` directive, unbalanced ``.method``/``.end method``,
            or an unparsable invoke target.
    """
    cls: Optional[SmaliClass] = None
    method: Optional[_MethodBuilder] = None
    block_end: Optional[str] = None
    block_start = 0
    payload_name: Optional[str] = None
    payload_targets: List[str] = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue

        if block_end is not None:
            if line == block_end:
                if payload_name is not None and method is not None:
                    method.payloads[payload_name] = tuple(payload_targets)
                block_end, payload_name = None, None
            elif payload_name is not None:
                label = line.split("->")[-1].strip()
                if label.startswith(":"):
                    payload_targets.append(label[1:])
            continue

        if line.startswith("."):
            directive = line.split(None, 1)[0]
            if directive in _BLOCK_ENDS:
                block_end, block_start = _BLOCK_ENDS[directive], line_no
                if directive in (".packed-switch", ".sparse-switch") and method is not None:
                    last = method.instructions[-1] if method.instructions else None
                    payload_name = last.name if isinstance(last, Label) else None
                    payload_targets = []
                continue
            if directive == ".class":
                match = _CLASS_RE.match(line)
                if not match or cls is not None:
                    raise MalformedSmali(line_no, "bad or repeated .class directive")
                cls = SmaliClass(
                    name=descriptor_to_class(match.group(2)),
                    superclass=None,
                    access_flags=frozenset(match.group(1).split()),
                )
                continue
            if cls is None:
                raise MalformedSmali(line_no, "missing .class directive")
            if directive in (".super", ".implements"):
                match = _SUPER_RE.match(line)
                if not match:
                    raise MalformedSmali(line_no, f"bad {directive} directive")
                if directive == ".super":
                    cls.superclass = descriptor_to_class(match.group(2))
                else:
                    cls.interfaces.append(descriptor_to_class(match.group(2)))
            elif directive == ".method":
                if method is not None:
                    raise MalformedSmali(line_no, ".method inside another method")
                match = _METHOD_RE.match(line)
                if not match:
                    raise MalformedSmali(line_no, "bad .method directive")
                flags, name, params, ret = match.groups()
                try:
                    signature = MethodSignature(cls.name, name, tuple(split_descriptors(params)), ret)
                except BadDescriptor as err:
                    raise MalformedSmali(line_no, str(err))
                method = _MethodBuilder(flags=frozenset(flags.split()), signature=signature, header_line=line_no)
            elif directive == ".end":
                if line == ".end method":
                    if method is None:
                        raise MalformedSmali(line_no, ".end method without .method")
                    cls.methods.append(method.finish())
                    method = None
            elif directive in (".registers", ".locals") and method is not None:
                parts = line.split()
                if len(parts) != 2:
                    raise MalformedSmali(line_no, f"bad {directive} directive")
                count = _literal(parts[1], line_no)
                if directive == ".registers":
                    method.registers = count
                else:
                    method.locals_ = count
            continue

        if method is None:
            raise MalformedSmali(line_no, "instruction outside of a method")
        method.instructions.append(parse_instruction(line, line_no))

    if block_end is not None:
        raise MalformedSmali(block_start, f"missing {block_end}")
    if method is not None:
        raise MalformedSmali(method.header_line, "missing .end method")
    if cls is None:
        raise MalformedSmali(1, "missing .class directive")
    return cls


def _dex_order(directory: Path) -> Tuple[int, str]:
    match = re.fullmatch(r"smali(?:_classes(\d+))?", directory.name)
    if match:
        return (int(match.group(1) or 1), directory.name)
    return (10 ** 6, directory.name)


def smali_files(root: Union[str, Path]) -> List[Path]:
    """All ``.smali`` files under the app's ``smali*`` directories, in dex order."""
    root = Path(root)
    if not root.is_dir():
        return []
    files: List[Path] = []
    dex_dirs = sorted((d for d in root.iterdir() if d.is_dir() and d.name.startswith("smali")), key=_dex_order)
    for directory in dex_dirs:
        files.extend(sorted(directory.rglob("*.smali"), key=lambda p: p.relative_to(directory).as_posix()))
    return files


def parse_app_dir(root: Union[str, Path], app_id: Optional[str] = None, deadline=None) -> AppIR:
    """
    Parses an apktool output directory into one AppIR.

    Per-file parse failures become warnings. Multi-dex directories share one
    namespace; a duplicate class keeps its first occurrence.

    Raises:
        EmptyApp: If no class could be parsed.
    """
    root = Path(root)
    files = smali_files(root)
    classes: Dict[str, SmaliClass] = {}
    warnings: List[str] = []

    for path in files:
        if deadline is not None:
            deadline.check("scan")
        rel = path.relative_to(root).as_posix()
        try:
            text = path.read_text(encoding="utf-8", errors="replace")
            parsed = parse_smali_file(text)
        except OSError as err:
            warnings.append(f"{rel}: unreadable ({err.strerror})")
            continue
        except MalformedSmali as err:
            warnings.append(f"{rel}: {err}")
            continue
        if parsed.name in classes:
            warnings.append(f"{rel}: duplicate class {parsed.name} ignored")
            continue
        classes[parsed.name] = parsed

    for message in warnings:
        logger.warning("parse {}: {}", root.name, message)
    if not classes:
        raise EmptyApp(str(root))
    return AppIR(app_id=app_id or root.name, classes=classes, file_count=len(files), warnings=warnings)
