"""Terms, domains and predicate declarations."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class Var:
    name: str
    sort: str

    def __str__(self):
        return self.name


@dataclass(frozen=True, order=True)
class Const:
    name: str
    sort: str

    def __str__(self):
        return self.name


Term = Var | Const


def is_var(t) -> bool:
    return isinstance(t, Var)


@dataclass(eq=False)
class Domain:
    """A finite typed domain.

    Named constants are interned to the lowest indices in order of first
    use; the remaining ``size - len(names)`` objects are anonymous.  Interning
    only ever appends, so indices handed out earlier stay valid.
    """

    name: str
    size: int
    names: list[str] = field(default_factory=list)
    explicit: bool = False

    def __post_init__(self):
        if self.size < 0:
            raise ValueError(f"domain {self.name!r} has negative size")
        if len(self.names) > self.size:
            raise ValueError(f"domain {self.name!r}: more names than objects")
        self._index = {n: i for i, n in enumerate(self.names)}

    def index(self, name: str, create: bool = True) -> int:
        i = self._index.get(name)
        if i is not None:
            return i
        slot = self._anonymous_slot(name)
        if slot is not None:
            # "dom#i" names anonymous object i; pin the slots up to it so
            # later named constants cannot take its index
            while len(self.names) <= slot:
                n = f"{self.name}#{len(self.names)}"
                self._index[n] = len(self.names)
                self.names.append(n)
            return slot
        if not create or self.explicit:
            raise KeyError(f"constant {name!r} is not in domain {self.name!r}")
        if len(self.names) >= self.size:
            raise ValueError(
                f"domain {self.name!r} (size {self.size}) has no room for constant {name!r}"
            )
        self.names.append(name)
        self._index[name] = len(self.names) - 1
        return len(self.names) - 1

    def _anonymous_slot(self, name: str):
        head, sep, tail = name.rpartition("#")
        if sep and head == self.name and tail.isdigit():
            i = int(tail)
            if len(self.names) <= i < self.size:
                return i
        return None

    def __contains__(self, name: str) -> bool:
        return name in self._index or self._anonymous_slot(name) is not None

    def name_of(self, i: int) -> str:
        if i < len(self.names):
            return self.names[i]
        return f"{self.name}#{i}"

    def constants(self) -> list[Const]:
        return [Const(self.name_of(i), self.name) for i in range(self.size)]

    def copy(self) -> "Domain":
        return Domain(self.name, self.size, list(self.names), self.explicit)


@dataclass(frozen=True, order=True)
class Predicate:
    name: str
    sorts: tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.sorts)

    def __str__(self):
        return f"{self.name}({', '.join(self.sorts)})"
