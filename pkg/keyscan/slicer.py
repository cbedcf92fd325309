"""
Intra-procedural backward slicing with constant propagation.

Values are recovered from reaching definitions over a basic-block partition
of one method. Anything that flows in from outside the method stays
Unresolved with a machine-readable reason.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx
from loguru import logger

from .sigdb import ApiCallSite, ApiSignature, ResolvedArg, SignatureDb
from .smali_ir import (
    AppIR, ArrayPut, Branch, Const, ConstString, ConstWide, FilledNewArray, Instruction, Invoke, Label, Move,
    MoveResult, NewArray, NewInstance, Other, SmaliMethod, StaticGet, class_to_descriptor,
)

# Pseudo-definition for parameter registers at method entry.
ENTRY = -1

MULTIPLE_DEFS = "multiple-defs"
NON_CONSTANT_DEF = "non-constant-def"
CROSS_METHOD = "cross-method"
UNSUPPORTED_OP = "unsupported-op"
REGISTER_UNDEFINED = "register-undefined"
UNRESOLVED_REASONS = (MULTIPLE_DEFS, NON_CONSTANT_DEF, CROSS_METHOD, UNSUPPORTED_OP, REGISTER_UNDEFINED)

SLICEABLE_DOMAINS = ("boolean", "int", "string", "string-array")
_DESCRIPTOR_DOMAINS = {
    "Z": "boolean",
    "I": "int", "J": "int", "S": "int", "B": "int",
    "Ljava/lang/String;": "string",
    "[Ljava/lang/String;": "string-array",
}

PURPOSES = {
    "ENCRYPT": 1,
    "DECRYPT": 2,
    "SIGN": 4,
    "VERIFY": 8,
    "WRAP_KEY": 32,
    "AGREE_KEY": 64,
    "ATTEST_KEY": 128,
}


@dataclass(frozen=True)
class ResolvedValue:
    kind: str
    value: Any = None
    provenance: Tuple[int, ...] = ()

    @classmethod
    def int_(cls, value: int, provenance: Iterable[int] = ()) -> "ResolvedValue":
        return cls("Int", int(value), tuple(provenance))

    @classmethod
    def bool_(cls, value: bool, provenance: Iterable[int] = ()) -> "ResolvedValue":
        return cls("Bool", bool(value), tuple(provenance))

    @classmethod
    def str_(cls, value: str, provenance: Iterable[int] = ()) -> "ResolvedValue":
        return cls("Str", value, tuple(provenance))

    @classmethod
    def str_array(cls, values: Iterable[str], provenance: Iterable[int] = ()) -> "ResolvedValue":
        return cls("StrArray", tuple(values), tuple(provenance))

    @classmethod
    def unresolved(cls, reason: str, provenance: Iterable[int] = ()) -> "ResolvedValue":
        if reason not in UNRESOLVED_REASONS:
            raise ValueError(f"unknown unresolved reason {reason!r}")
        return cls("Unresolved", reason, tuple(provenance))

    @property
    def is_resolved(self) -> bool:
        return self.kind != "Unresolved"

    @property
    def reason(self) -> Optional[str]:
        return None if self.is_resolved else self.value

    def same_constant(self, other: "ResolvedValue") -> bool:
        return self.kind == other.kind and self.value == other.value

    def to_dict(self) -> Dict:
        value = list(self.value) if self.kind == "StrArray" else self.value
        return {"kind": self.kind, "value": value, "provenance": list(self.provenance)}

    @classmethod
    def from_dict(cls, record: Dict) -> "ResolvedValue":
        value = record["value"]
        if record["kind"] == "StrArray":
            value = tuple(value)
        return cls(record["kind"], value, tuple(record.get("provenance", ())))


# Basic blocks and reaching definitions

@dataclass
class BasicBlock:
    index: int
    start: int
    end: int
    successors: List[int] = field(default_factory=list)


class BasicBlockIndex:
    """Block partition of one method plus the reaching-definition fixed point."""

    def __init__(self, method: SmaliMethod):
        self.method = method
        self.instructions: Tuple[Instruction, ...] = method.instructions
        self.blocks: List[BasicBlock] = []
        self.block_of: List[int] = []
        self._build_blocks()
        self.aliases = method.param_aliases
        self.block_in: List[Dict[str, FrozenSet[int]]] = []
        self._solve()
        self._dominators: Optional[Dict[int, int]] = None

    def _build_blocks(self):
        instrs = self.instructions
        if not instrs:
            return
        leaders = {0}
        labels = {}
        for i, instr in enumerate(instrs):
            if isinstance(instr, Label):
                leaders.add(i)
                labels[instr.name] = i
            if isinstance(instr, Branch) or (isinstance(instr, Other) and instr.ends_flow):
                if i + 1 < len(instrs):
                    leaders.add(i + 1)
        starts = sorted(leaders)
        for b, start in enumerate(starts):
            end = starts[b + 1] if b + 1 < len(starts) else len(instrs)
            self.blocks.append(BasicBlock(b, start, end))
            self.block_of.extend([b] * (end - start))

        for block in self.blocks:
            last = instrs[block.end - 1]
            successors = []
            if isinstance(last, Branch):
                for target in last.targets:
                    if target in labels:
                        successors.append(self.block_of[labels[target]])
                fallthrough = last.conditional
            else:
                fallthrough = not (isinstance(last, Other) and last.ends_flow)
            if fallthrough and block.end < len(instrs):
                successors.append(block.index + 1)
            block.successors = sorted(set(successors))

    def _transfer(self, state: Dict[str, FrozenSet[int]], start: int, end: int) -> Dict[str, FrozenSet[int]]:
        state = dict(state)
        for i in range(start, end):
            for reg in self.instructions[i].defs():
                state[self.canonical(reg)] = frozenset((i,))
        return state

    @staticmethod
    def _merge(states: List[Dict[str, FrozenSet[int]]]) -> Dict[str, FrozenSet[int]]:
        merged: Dict[str, Set[int]] = {}
        for state in states:
            for reg, defs in state.items():
                merged.setdefault(reg, set()).update(defs)
        return {reg: frozenset(defs) for reg, defs in merged.items()}

    def _solve(self):
        n = len(self.blocks)
        entry_state = {reg: frozenset((ENTRY,)) for reg in self.method.param_registers}
        preds: List[List[int]] = [[] for _ in range(n)]
        for block in self.blocks:
            for succ in block.successors:
                preds[succ].append(block.index)

        block_in: List[Dict[str, FrozenSet[int]]] = [{} for _ in range(n)]
        block_out: List[Dict[str, FrozenSet[int]]] = [{} for _ in range(n)]
        reached = [False] * n
        if n:
            reached[0] = True
        changed = True
        while changed:
            changed = False
            for block in self.blocks:
                b = block.index
                incoming = [block_out[p] for p in preds[b] if reached[p]]
                if b == 0:
                    incoming.append(entry_state)
                if not incoming:
                    continue
                reached[b] = True
                new_in = self._merge(incoming)
                new_out = self._transfer(new_in, block.start, block.end)
                if new_in != block_in[b] or new_out != block_out[b]:
                    block_in[b], block_out[b] = new_in, new_out
                    changed = True
        self.block_in = block_in

    def reaching(self, at: int, register: str) -> FrozenSet[int]:
        """Definitions of ``register`` that reach the point just before instruction ``at``."""
        block = self.blocks[self.block_of[at]]
        state = self._transfer(self.block_in[block.index], block.start, at)
        return state.get(self.canonical(register), frozenset())

    def canonical(self, register: str) -> str:
        return self.aliases.get(register, register)

    def _block_graph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(b.index for b in self.blocks)
        graph.add_edges_from((b.index, s) for b in self.blocks for s in b.successors)
        return graph

    def dominates(self, at: int, use_at: int) -> bool:
        """True when instruction ``at`` executes on every path from method entry to ``use_at``."""
        a, b = self.block_of[at], self.block_of[use_at]
        if a == b:
            return at < use_at
        if self._dominators is None:
            self._dominators = nx.immediate_dominators(self._block_graph(), 0) if self.blocks else {}
        if b not in self._dominators:
            return False
        while b != self._dominators[b]:
            b = self._dominators[b]
            if b == a:
                return True
        return False

    def may_reach(self, at: int, use_at: int) -> bool:
        """True when some path leads from instruction ``at`` to ``use_at``."""
        a, b = self.block_of[at], self.block_of[use_at]
        if a == b and at < use_at:
            return True
        graph = self._block_graph()
        return any(nx.has_path(graph, s, b) for s in self.blocks[a].successors)


# Resolution

class _Slicer:
    def __init__(self, index: BasicBlockIndex):
        self.index = index
        self.instructions = index.instructions

    def register(self, at: int, reg: str, visited: FrozenSet[int] = frozenset()) -> ResolvedValue:
        defs = self.index.reaching(at, reg)
        if not defs:
            return ResolvedValue.unresolved(REGISTER_UNDEFINED)
        values = [self.definition(d, reg, at, visited) for d in sorted(defs)]
        provenance = tuple(sorted({line for v in values for line in v.provenance}))
        for value in values:
            if not value.is_resolved:
                return value
        first = values[0]
        if all(first.same_constant(v) for v in values[1:]):
            return ResolvedValue(first.kind, first.value, provenance)
        return ResolvedValue.unresolved(MULTIPLE_DEFS, provenance)

    def definition(self, d: int, reg: str, use_at: int, visited: FrozenSet[int]) -> ResolvedValue:
        if d == ENTRY:
            return ResolvedValue.unresolved(CROSS_METHOD)
        if d in visited:
            return ResolvedValue.unresolved(UNSUPPORTED_OP)
        instr = self.instructions[d]
        line = instr.source_line
        if isinstance(instr, (Const, ConstWide)):
            if self.index.canonical(reg) != self.index.canonical(instr.reg):
                return ResolvedValue.unresolved(UNSUPPORTED_OP, (line,))
            return ResolvedValue.int_(instr.value, (line,))
        if isinstance(instr, ConstString):
            return ResolvedValue.str_(instr.value, (line,))
        if isinstance(instr, Move):
            inner = self.register(d, instr.src, visited | {d})
            return ResolvedValue(inner.kind, inner.value, tuple(sorted(set(inner.provenance) | {line})))
        if isinstance(instr, MoveResult):
            return self._move_result(d, visited)
        if isinstance(instr, NewArray):
            return self._array_stores(d, instr, use_at, visited)
        if isinstance(instr, (StaticGet, NewInstance)):
            return ResolvedValue.unresolved(NON_CONSTANT_DEF, (line,))
        if isinstance(instr, Other) and instr.opcode.startswith("iget"):
            return ResolvedValue.unresolved(NON_CONSTANT_DEF, (line,))
        return ResolvedValue.unresolved(UNSUPPORTED_OP, (line,))

    def _move_result(self, d: int, visited: FrozenSet[int]) -> ResolvedValue:
        line = self.instructions[d].source_line
        producer = self.instructions[d - 1] if d > 0 else None
        if isinstance(producer, FilledNewArray):
            elements = []
            provenance = {line}
            for reg in producer.element_regs:
                value = self.register(d - 1, reg, visited | {d})
                if value.kind != "Str":
                    reason = value.reason or UNSUPPORTED_OP
                    return ResolvedValue.unresolved(reason, (line,))
                elements.append(value.value)
                provenance.update(value.provenance)
            return ResolvedValue.str_array(elements, sorted(provenance))
        if isinstance(producer, Invoke):
            return ResolvedValue.unresolved(CROSS_METHOD, (line,))
        return ResolvedValue.unresolved(UNSUPPORTED_OP, (line,))

    def _array_stores(self, d: int, alloc: NewArray, use_at: int, visited: FrozenSet[int]) -> ResolvedValue:
        """
        The ``new-array`` + ``aput-object`` idiom: every index 0..n-1 stored once with a constant string.

        A store counts only when it runs on every path to the use. A store that
        may or may not run first, or that writes through a register which only
        sometimes holds this array, leaves the contents unknown.
        """
        line = alloc.source_line
        stores: Dict[int, str] = {}
        provenance = {line}
        for i, instr in enumerate(self.instructions):
            if not isinstance(instr, ArrayPut):
                continue
            target = self._points_to(i, instr.array_reg, d)
            if target is False:
                continue
            if target is None or not self.index.dominates(i, use_at):
                if self.index.may_reach(i, use_at):
                    return ResolvedValue.unresolved(UNSUPPORTED_OP, (line,))
                continue
            position = self.register(i, instr.index_reg, visited | {d})
            value = self.register(i, instr.value_reg, visited | {d})
            if position.kind != "Int" or value.kind != "Str" or position.value in stores:
                return ResolvedValue.unresolved(UNSUPPORTED_OP, (line,))
            stores[position.value] = value.value
            provenance.update(position.provenance)
            provenance.update(value.provenance)
        size = self.register(d, alloc.size_reg, visited | {d})
        if size.kind != "Int" or sorted(stores) != list(range(size.value)):
            return ResolvedValue.unresolved(UNSUPPORTED_OP, (line,))
        provenance.update(size.provenance)
        return ResolvedValue.str_array([stores[k] for k in range(size.value)], sorted(provenance))

    def _points_to(self, at: int, reg: str, alloc: int, visited: FrozenSet[int] = frozenset()) -> Optional[bool]:
        """Whether ``reg`` holds the array allocated at ``alloc``: True, False, or None when only on some paths."""
        answers = set()
        for d in self.index.reaching(at, reg):
            if d == alloc:
                answers.add(True)
            elif d != ENTRY and d not in visited and isinstance(self.instructions[d], Move):
                answers.add(self._points_to(d, self.instructions[d].src, alloc, visited | {d}))
            else:
                answers.add(False)
        if answers == {True}:
            return True
        if answers <= {False}:
            return False
        return None

    def origin(self, at: int, reg: str, visited: FrozenSet[int] = frozenset()) -> Optional[int]:
        defs = self.index.reaching(at, reg)
        origins = {self._origin_of(d, visited) for d in defs}
        if len(origins) != 1:
            return None
        return origins.pop()

    def _origin_of(self, d: int, visited: FrozenSet[int]) -> Optional[int]:
        if d == ENTRY or d in visited:
            return None
        instr = self.instructions[d]
        if isinstance(instr, NewInstance):
            return d
        if isinstance(instr, Move):
            return self.origin(d, instr.src, visited | {d})
        if isinstance(instr, MoveResult) and d > 0:
            producer = self.instructions[d - 1]
            # Builder setters return their receiver.
            if (
                isinstance(producer, Invoke)
                and producer.receiver is not None
                and producer.target.return_descriptor == class_to_descriptor(producer.target.class_name)
            ):
                return self.origin(d - 1, producer.receiver, visited | {d})
        return None


def coerce(value: ResolvedValue, domain: str) -> ResolvedValue:
    """Maps a raw constant onto the value domain of the parameter it flows into."""
    if not value.is_resolved:
        return value
    if domain == "boolean":
        if value.kind == "Int" and value.value in (0, 1):
            return ResolvedValue.bool_(value.value == 1, value.provenance)
        return ResolvedValue.unresolved(UNSUPPORTED_OP, value.provenance)
    expected = {"int": "Int", "string": "Str", "string-array": "StrArray"}.get(domain)
    if value.kind != expected:
        return ResolvedValue.unresolved(UNSUPPORTED_OP, value.provenance)
    return value


def slice_register(index: BasicBlockIndex, at: int, register: str, domain: str) -> ResolvedValue:
    return coerce(_Slicer(index).register(at, register), domain)


def receiver_origin(index: BasicBlockIndex, at: int, register: Optional[str]) -> Optional[int]:
    """Instruction index of the ``new-instance`` the receiver register was allocated by, if unique."""
    if register is None:
        return None
    return _Slicer(index).origin(at, register)


def args_to_slice(entry: ApiSignature) -> List[Tuple[int, str]]:
    if entry.category in ("keystore-init", "java-provider"):
        return [
            (i, _DESCRIPTOR_DOMAINS[d])
            for i, d in enumerate(entry.signature.param_descriptors)
            if d in _DESCRIPTOR_DOMAINS
        ]
    if entry.value_domain in SLICEABLE_DOMAINS:
        return [(entry.arg_of_interest, entry.value_domain)]
    return []


def resolve_args(
    method: SmaliMethod, site: ApiCallSite, entry: ApiSignature, index: Optional[BasicBlockIndex] = None
) -> ApiCallSite:
    """
    Fills resolved_args and receiver_origin of one call site.

    Args:
        method (SmaliMethod): Method containing the site.
        site (ApiCallSite): Site found by find_call_sites.
        entry (ApiSignature): Database entry of the site's callee.
        index (BasicBlockIndex, optional): Prebuilt index for ``method``.

    Returns:
        ApiCallSite: A copy with resolved arguments.

    Raises:
        ValueError: If the site does not belong to ``method``.
    """
    if site.caller != method.signature:
        raise ValueError(f"call site {site.callsite_id} is not in {method.signature.render()}")
    instr = method.instructions[site.instruction_index]
    if not isinstance(instr, Invoke):
        raise ValueError(f"call site {site.callsite_id} is not an invoke")
    index = index or BasicBlockIndex(method)
    slicer = _Slicer(index)
    at = site.instruction_index
    resolved = [
        ResolvedArg(arg, coerce(slicer.register(at, instr.arg_register(arg)), domain))
        for arg, domain in args_to_slice(entry)
    ]
    origin = slicer.origin(at, instr.receiver) if instr.receiver is not None else None
    return replace(site, resolved_args=resolved, receiver_origin=origin)


def resolve_sites(app: AppIR, sites: List[ApiCallSite], db: SignatureDb, deadline=None) -> List[ApiCallSite]:
    """resolve_args over every site of an app, building one block index per method."""
    indexes: Dict = {}
    resolved = []
    for site in sites:
        if deadline is not None:
            deadline.check("slice")
        method = app.method(site.caller)
        if site.caller not in indexes:
            indexes[site.caller] = BasicBlockIndex(method)
        resolved.append(resolve_args(method, site, db.get(site.callee), indexes[site.caller]))
    return resolved


def decode_purposes(mask: int) -> FrozenSet[str]:
    """
    Decodes a KeyProperties purpose bitmask.

    Unknown set bits come back as ``UNKNOWN(<bit>)``. A zero mask is legal
    but degenerate and logs a warning.
    """
    if mask < 0:
        raise ValueError(f"purpose mask must be >= 0, got {mask}")
    if mask == 0:
        logger.warning("purpose mask 0 declares no key purposes")
        return frozenset()
    names = {name for name, bit in PURPOSES.items() if mask & bit}
    known = sum(PURPOSES.values())
    rest = mask & ~known
    bit = 1
    while rest:
        if rest & bit:
            names.add(f"UNKNOWN({bit})")
            rest &= ~bit
        bit <<= 1
    return frozenset(names)


def purpose_label(purposes: Iterable[str]) -> str:
    """Canonical display form, ordered by bit value: ``ENCRYPT+DECRYPT``."""
    def bit_of(name: str) -> int:
        if name in PURPOSES:
            return PURPOSES[name]
        return int(name[len("UNKNOWN("):-1])

    return "+".join(sorted(purposes, key=bit_of)) or "NONE"
