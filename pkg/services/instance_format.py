"""Line-oriented text formats for instances and routing states."""

from __future__ import annotations

import logging
from fractions import Fraction
from pathlib import Path as FilePath
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

from instance import Instance, Path, build_instance, check_path
from utils.errors import InstanceFormatError, InvalidPathError
from utils.rational import format_rational

logger = logging.getLogger(__name__)

INSTANCE_HEADER = "mcast-pos-instance v1"
STATE_HEADER = "mcast-pos-state v1"


def _content_lines(text: str) -> Iterator[Tuple[int, List[str]]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield number, line.split()


def _int(token: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise InstanceFormatError(f"expected an integer, got {token!r}", line) from None


def _rational(token: str, line: int) -> Fraction:
    num, sep, den = token.partition("/")
    try:
        value = Fraction(int(num), int(den)) if sep else Fraction(int(num))
    except (ValueError, ZeroDivisionError):
        raise InstanceFormatError(f"expected num[/den], got {token!r}", line) from None
    return value


def _expect_header(lines: Iterator[Tuple[int, List[str]]], header: str) -> None:
    first = next(lines, None)
    if first is None or " ".join(first[1]) != header:
        raise InstanceFormatError(f"missing header {header!r}", first[0] if first else 1)


def parse_instance(text: str) -> Instance:
    """Parse and validate an instance document."""
    lines = _content_lines(text)
    _expect_header(lines, INSTANCE_HEADER)

    vertex_count: Optional[int] = None
    root: Optional[int] = None
    terminals: Optional[List[int]] = None
    edges: List[Tuple[int, int, int, Fraction]] = []
    labels: Dict[int, str] = {}

    for number, tokens in lines:
        keyword, args = tokens[0], tokens[1:]
        if keyword == "vertices":
            if len(args) != 1:
                raise InstanceFormatError("vertices takes one count", number)
            vertex_count = _int(args[0], number)
        elif keyword == "root":
            if len(args) != 1:
                raise InstanceFormatError("root takes one vertex id", number)
            root = _int(args[0], number)
        elif keyword == "terminals":
            if not args:
                raise InstanceFormatError("terminals needs at least one vertex id", number)
            terminals = [_int(a, number) for a in args]
        elif keyword == "edge":
            if len(args) != 4:
                raise InstanceFormatError("edge takes id, two endpoints and a cost", number)
            edges.append((_int(args[0], number), _int(args[1], number), _int(args[2], number), _rational(args[3], number)))
        elif keyword == "label":
            if len(args) != 2:
                raise InstanceFormatError("label takes a vertex id and a name", number)
            labels[_int(args[0], number)] = args[1]
        else:
            raise InstanceFormatError(f"unknown directive {keyword!r}", number)

    if vertex_count is None or root is None or terminals is None:
        raise InstanceFormatError("vertices, root and terminals are all required")
    return build_instance(vertex_count, edges, terminals, root, labels)


def serialize_instance(instance: Instance) -> str:
    lines = [
        INSTANCE_HEADER,
        f"vertices {instance.vertex_count}",
        f"root {instance.root}",
        "terminals " + " ".join(str(t) for t in sorted(instance.terminals)),
    ]
    for edge in sorted(instance.edges, key=lambda e: e.id):
        lines.append(f"edge {edge.id} {edge.u} {edge.v} {format_rational(edge.cost)}")
    for vertex, name in sorted(instance.labels.items()):
        lines.append(f"label {vertex} {name}")
    return "\n".join(lines) + "\n"


def parse_state(text: str, instance: Instance) -> Dict[int, Path]:
    """Parse a state document into one checked path per player."""
    lines = _content_lines(text)
    _expect_header(lines, STATE_HEADER)
    paths: Dict[int, Path] = {}
    for number, tokens in lines:
        if tokens[0] != "path" or len(tokens) < 2:
            raise InstanceFormatError("expected 'path <terminal> <edge ids...>'", number)
        terminal = _int(tokens[1], number)
        if terminal not in instance.terminals:
            raise InstanceFormatError(f"vertex {terminal} is not a terminal", number)
        if terminal in paths:
            raise InstanceFormatError(f"duplicate path for terminal {terminal}", number)
        path = instance.walk(terminal, [_int(t, number) for t in tokens[2:]])
        check_path(instance, terminal, path)
        paths[terminal] = path
    missing = [t for t in instance.players if t not in paths]
    if missing:
        raise InvalidPathError(f"no path given for terminals {missing}")
    paths.pop(instance.root, None)
    return paths


def serialize_state(paths: Mapping[int, Path]) -> str:
    lines = [STATE_HEADER]
    for terminal in sorted(paths):
        lines.append(" ".join(["path", str(terminal), *(str(e) for e in paths[terminal].edges)]))
    return "\n".join(lines) + "\n"


def load_instance(path: FilePath) -> Instance:
    logger.info("Loading instance %s", path)
    return parse_instance(FilePath(path).read_text(encoding="utf-8"))


def save_instance(instance: Instance, path: FilePath) -> None:
    FilePath(path).write_text(serialize_instance(instance), encoding="utf-8")
    logger.info("Wrote instance %s", path)


__all__ = [
    "INSTANCE_HEADER",
    "STATE_HEADER",
    "load_instance",
    "parse_instance",
    "parse_state",
    "save_instance",
    "serialize_instance",
    "serialize_state",
]
