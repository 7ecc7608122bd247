"""Circuit description: nodes, elements, piecewise-linear control waveforms."""

from __future__ import annotations

import dataclasses
from collections.abc import Iterable

import numpy as np

from .errors import ParameterError
from .mtj import MtjDevice

GROUND = "0"


@dataclasses.dataclass(frozen=True)
class Waveform:
    """Piecewise-linear voltage vs. time, held constant outside its breakpoints."""

    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.values) or len(self.times) == 0:
            raise ParameterError("waveform needs matching, non-empty time/value lists")
        if np.any(np.diff(t) < 0):
            raise ParameterError("waveform breakpoints must be non-decreasing in time")

    @classmethod
    def constant(cls, value: float) -> "Waveform":
        return cls((0.0,), (float(value),))

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def shifted(self, dt: float) -> "Waveform":
        return Waveform(tuple(t + dt for t in self.times), self.values)

    @property
    def end(self) -> float:
        return self.times[-1]


class PwlBuilder:
    """Incrementally builds a waveform from level changes with a fixed edge time."""

    def __init__(self, initial: float, edge: float):
        self.edge = edge
        self._t = [0.0]
        self._v = [float(initial)]

    @property
    def level(self) -> float:
        return self._v[-1]

    def set(self, t: float, value: float, edge: float | None = None) -> "PwlBuilder":
        edge = self.edge if edge is None else edge
        if value == self._v[-1]:
            return self
        if t < self._t[-1]:
            raise ParameterError(f"level change at {t} precedes previous breakpoint {self._t[-1]}")
        if t > self._t[-1]:
            self._t.append(t)
            self._v.append(self._v[-1])
        self._t.append(t + edge)
        self._v.append(float(value))
        return self

    def build(self, t_end: float | None = None) -> Waveform:
        t, v = list(self._t), list(self._v)
        if t_end is not None and t_end > t[-1]:
            t.append(t_end)
            v.append(v[-1])
        return Waveform(tuple(t), tuple(v))


@dataclasses.dataclass(frozen=True)
class Resistor:
    name: str
    a: str
    b: str
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError(f"{self.name}: resistance must be > 0")

    @property
    def terminals(self):
        return (self.a, self.b)


@dataclasses.dataclass(frozen=True)
class Capacitor:
    name: str
    a: str
    b: str
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ParameterError(f"{self.name}: capacitance must be > 0")

    @property
    def terminals(self):
        return (self.a, self.b)


@dataclasses.dataclass(frozen=True)
class VoltageSource:
    """Ideal source from ``pos`` to ``neg``; its value comes from the named signal."""

    name: str
    pos: str
    neg: str
    signal: str

    @property
    def terminals(self):
        return (self.pos, self.neg)


@dataclasses.dataclass(frozen=True)
class Mosfet:
    name: str
    polarity: str  # "n" or "p"
    d: str
    g: str
    s: str
    beta: float
    vth: float = 0.25
    lam: float = 0.1

    def __post_init__(self):
        if self.polarity not in ("n", "p"):
            raise ParameterError(f"{self.name}: polarity must be 'n' or 'p'")
        if not self.beta > 0:
            raise ParameterError(f"{self.name}: beta must be > 0")
        if not self.vth > 0:
            raise ParameterError(f"{self.name}: |vth| must be > 0")
        if self.lam < 0:
            raise ParameterError(f"{self.name}: lambda must be >= 0")

    @property
    def terminals(self):
        # Branch current and voltage are measured drain -> source.
        return (self.d, self.s)

    @property
    def all_terminals(self):
        return (self.d, self.g, self.s)


@dataclasses.dataclass(frozen=True)
class MtjElement:
    """Two-terminal MTJ; branch current is measured free -> pinned."""

    name: str
    device: MtjDevice

    @property
    def terminals(self):
        return (self.device.free_terminal, self.device.pinned_terminal)


Element = Resistor | Capacitor | VoltageSource | Mosfet | MtjElement


class Netlist:
    def __init__(self):
        self.nodes: list[str] = [GROUND]
        self._node_index = {GROUND: 0}
        self.elements: list = []
        self._names: set[str] = set()
        self.probes: dict[str, str] = {}

    def node(self, name: str) -> str:
        if name not in self._node_index:
            self._node_index[name] = len(self.nodes)
            self.nodes.append(name)
        return name

    def index(self, name: str) -> int:
        return self._node_index[name]

    def has_node(self, name: str) -> bool:
        return name in self._node_index

    def add(self, element):
        if element.name in self._names:
            raise ParameterError(f"duplicate element name {element.name!r}")
        terms = getattr(element, "all_terminals", element.terminals)
        for t in terms:
            self.node(t)
        self._names.add(element.name)
        self.elements.append(element)
        return element

    def probe(self, label: str, node: str):
        if label in self.probes:
            raise ParameterError(f"duplicate probe label {label!r}")
        if node not in self._node_index:
            raise ParameterError(f"probe {label!r} refers to unknown node {node!r}")
        self.probes[label] = node

    def element(self, name: str):
        for el in self.elements:
            if el.name == name:
                return el
        raise KeyError(name)

    def of_type(self, kind) -> list:
        return [el for el in self.elements if isinstance(el, kind)]

    @property
    def sources(self) -> list[VoltageSource]:
        return self.of_type(VoltageSource)

    @property
    def mtjs(self) -> list[MtjElement]:
        return self.of_type(MtjElement)

    def validate(self):
        """Raise ParameterError unless every node is reachable from ground."""
        parent = list(range(len(self.nodes)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for el in self.elements:
            terms = [self.index(t) for t in getattr(el, "all_terminals", el.terminals)]
            for t in terms[1:]:
                parent[find(t)] = find(terms[0])
        root = find(0)
        floating = [n for i, n in enumerate(self.nodes) if find(i) != root]
        if floating:
            raise ParameterError(f"nodes not connected to ground: {floating}")
        for label, node in self.probes.items():
            if node not in self._node_index:
                raise ParameterError(f"probe {label!r} refers to unknown node {node!r}")

    def signals(self) -> list[str]:
        return sorted({s.signal for s in self.sources})

    def nodes_of(self, names: Iterable[str]) -> list[int]:
        return [self.index(n) for n in names]
