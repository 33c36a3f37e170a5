"""Memories, callee instances and recursive state signatures."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

from lustrehorn.normalize import CallDef, MemDef, NormalizedNode, NormalizedProgram


@dataclass(frozen=True)
class LocalMem:
    var: str
    ty: str

    @property
    def flat(self) -> str:
        return self.var


@dataclass(frozen=True)
class InstanceMem:
    uid: int
    callee: str
    inner: "StateVar"
    ty: str

    @property
    def flat(self) -> str:
        return f"u{self.uid}_{self.callee}_{self.inner.flat}"


StateVar = Union[LocalMem, InstanceMem]


def owner_and_var(sv: StateVar, owner: str) -> tuple[str, str]:
    """The node that declares the memory behind ``sv`` and its local name."""
    while isinstance(sv, InstanceMem):
        owner, sv = sv.callee, sv.inner
    return owner, sv.var


@dataclass(frozen=True)
class StateSignature:
    owner: str
    entries: tuple[StateVar, ...]

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(e.flat for e in self.entries)

    @cached_property
    def types(self) -> dict[str, str]:
        return {e.flat: e.ty for e in self.entries}

    def __len__(self):
        return len(self.entries)


def local_memories(n: NormalizedNode) -> list[str]:
    return [e.var for e in n.trans_eqs if isinstance(e, MemDef)]


def instances(n: NormalizedNode) -> list[tuple[str, int]]:
    return sorted(((e.callee, e.uid) for e in n.trans_eqs if isinstance(e, CallDef)), key=lambda x: x[1])


class StateAnalysis:
    """Signatures for every node of a program, computed once per node."""

    def __init__(self, p: NormalizedProgram):
        self.program = p
        self._nodes = p.node_map
        self._memo: dict[str, StateSignature] = {}

    def signature(self, name: str) -> StateSignature:
        if name in self._memo:
            return self._memo[name]
        n = self._nodes[name]
        types = n.var_types
        entries: list[StateVar] = [LocalMem(v, types[v]) for v in local_memories(n)]
        for callee, uid in instances(n):
            for inner in self.signature(callee).entries:
                entries.append(InstanceMem(uid, callee, inner, inner.ty))
        sig = StateSignature(name, tuple(entries))
        if len(set(sig.names)) != len(sig.names):
            raise ValueError(f"state names collide in node {name!r}")
        self._memo[name] = sig
        return sig

    def all(self) -> dict[str, StateSignature]:
        return {n.name: self.signature(n.name) for n in self.program.nodes}


def state_signature(name: str, p: NormalizedProgram) -> StateSignature:
    return StateAnalysis(p).signature(name)
