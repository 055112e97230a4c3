"""Location/refuge tables and the MATSim-style population XML format."""
from __future__ import annotations

import csv
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

import numpy as np

LOCATION_COLUMNS = ("id", "x", "y", "locality", "allocation", "types")
REFUGE_COLUMNS = ("id", "x", "y", "locality", "capacity")

STRING = "java.lang.String"
DOUBLE = "java.lang.Double"
BOOLEAN = "java.lang.Boolean"
INTEGER = "java.lang.Integer"
KNOWN_CLASSES = (STRING, DOUBLE, BOOLEAN, INTEGER)

# attribute names, in emission order
BDI_AGENT_TYPE = "BDIAgentType"
DEPENDANT_LOCATION = "HasDependantsAtLocation"
INIT_THRESHOLD = "InitialResponseThreshold"
ACT_THRESHOLD = "FinalResponseThreshold"
GO_HOME_AFTER_DEPENDANTS = "WillGoHomeAfterVisitingDependants"
GO_HOME_BEFORE_LEAVING = "WillGoHomeBeforeLeaving"
EVAC_PREFERENCE = "EvacLocationPreference"
INVAC_PREFERENCE = "InvacLocationPreference"


class InputFormatError(ValueError):
    """A table or XML file does not have the expected structure."""


# --------------------------------------------------------------------------
# location tables


@dataclass(eq=False)
class LocationTable:
    """Column-oriented location set. Locality ids are strings, tags are frozensets."""

    ids: list
    x: np.ndarray
    y: np.ndarray
    locality: list
    allocation: np.ndarray
    tags: list

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.allocation = np.asarray(self.allocation, dtype=np.int64)
        self.tags = [frozenset(t) for t in self.tags]
        n = len(self.ids)
        if not (len(self.x) == len(self.y) == len(self.locality) == len(self.allocation) == len(self.tags) == n):
            raise InputFormatError("location columns have different lengths")
        if np.any(self.allocation < 0):
            raise InputFormatError("allocations must be non-negative")
        self.locality_names = sorted(set(self.locality))
        lookup = {name: i for i, name in enumerate(self.locality_names)}
        self.locality_index = np.array([lookup[v] for v in self.locality], dtype=np.int64)
        self._tag_cache = {}

    def __len__(self):
        return len(self.ids)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def has_any_tag(self, tags) -> np.ndarray:
        key = frozenset(tags)
        mask = self._tag_cache.get(key)
        if mask is None:
            mask = np.fromiter((not t.isdisjoint(key) for t in self.tags), dtype=bool, count=len(self))
            self._tag_cache[key] = mask
        return mask

    def __eq__(self, other):
        if not isinstance(other, LocationTable):
            return NotImplemented
        return (list(self.ids) == list(other.ids) and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y) and list(self.locality) == list(other.locality)
                and np.array_equal(self.allocation, other.allocation) and self.tags == other.tags)


@dataclass(eq=False)
class RefugeSet:
    ids: list
    x: np.ndarray
    y: np.ndarray
    locality: list
    capacity: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.capacity = np.asarray(self.capacity, dtype=np.int64)
        if np.any(self.capacity < 0):
            raise InputFormatError("refuge capacities must be non-negative")

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, RefugeSet):
            return NotImplemented
        return (list(self.ids) == list(other.ids) and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y) and list(self.locality) == list(other.locality)
                and np.array_equal(self.capacity, other.capacity))


def _read_rows(path, required):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise InputFormatError(f"{path}: missing column(s) {missing}")
        yield from enumerate(reader, start=2)


def _number(value, column, row, path, kind=float):
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise InputFormatError(f"{path}:{row}: non-numeric {column} {value!r}") from None
    if kind is float and not math.isfinite(v):
        raise InputFormatError(f"{path}:{row}: non-finite {column} {value!r}")
    return v


def read_locations(path) -> LocationTable:
    """Read ``id,x,y,locality,allocation,types`` rows; ``types`` is ``|``-separated."""
    ids, xs, ys, locs, allocs, tags = [], [], [], [], [], []
    seen = {}
    for row_no, row in _read_rows(path, LOCATION_COLUMNS):
        lid = row["id"].strip()
        if lid in seen:
            raise InputFormatError(f"{path}:{row_no}: duplicate id {lid!r} (first seen on row {seen[lid]})")
        seen[lid] = row_no
        a = _number(row["allocation"], "allocation", row_no, path, int)
        if a < 0:
            raise InputFormatError(f"{path}:{row_no}: negative allocation {a}")
        locality = row["locality"].strip()
        if not locality:
            raise InputFormatError(f"{path}:{row_no}: empty locality")
        ids.append(lid)
        xs.append(_number(row["x"], "x", row_no, path))
        ys.append(_number(row["y"], "y", row_no, path))
        locs.append(locality)
        allocs.append(a)
        tags.append(frozenset(t.strip() for t in (row["types"] or "").split("|") if t.strip()))
    return LocationTable(ids, xs, ys, locs, allocs, tags)


def write_locations(table: LocationTable, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOCATION_COLUMNS)
        for i in range(len(table)):
            w.writerow([table.ids[i], repr(float(table.x[i])), repr(float(table.y[i])),
                        table.locality[i], int(table.allocation[i]), "|".join(sorted(table.tags[i]))])


def read_refuges(path) -> RefugeSet:
    ids, xs, ys, locs, caps = [], [], [], [], []
    seen = set()
    for row_no, row in _read_rows(path, REFUGE_COLUMNS):
        rid = row["id"].strip()
        if rid in seen:
            raise InputFormatError(f"{path}:{row_no}: duplicate id {rid!r}")
        seen.add(rid)
        ids.append(rid)
        xs.append(_number(row["x"], "x", row_no, path))
        ys.append(_number(row["y"], "y", row_no, path))
        locs.append(row["locality"].strip())
        caps.append(_number(row["capacity"], "capacity", row_no, path, int))
    return RefugeSet(ids, xs, ys, locs, caps)


def write_refuges(refuges: RefugeSet, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REFUGE_COLUMNS)
        for i in range(len(refuges)):
            w.writerow([refuges.ids[i], repr(float(refuges.x[i])), repr(float(refuges.y[i])),
                        refuges.locality[i], int(refuges.capacity[i])])


# --------------------------------------------------------------------------
# population documents


@dataclass(frozen=True)
class Attribute:
    name: str
    cls: str
    value: str


@dataclass(frozen=True)
class Activity:
    type: str
    x: float
    y: float
    end_time: int | None = None     # seconds after midnight


@dataclass(frozen=True)
class Leg:
    mode: str = "car"


@dataclass
class Person:
    id: str
    attributes: list = field(default_factory=list)
    elements: list = field(default_factory=list)     # Activity and Leg, in plan order
    selected: bool = True
    score: str | None = None

    @property
    def activities(self) -> list:
        return [e for e in self.elements if isinstance(e, Activity)]

    def attribute(self, name, default=None):
        for a in self.attributes:
            if a.name == name:
                return a.value
        return default


@dataclass
class PopulationDocument:
    persons: list = field(default_factory=list)


def format_time(seconds: int) -> str:
    seconds = int(seconds)
    h, rem = divmod(seconds, 3600)
    m, s = divmod(rem, 60)
    return f"{h:02d}:{m:02d}:{s:02d}"


def parse_time(text: str) -> int:
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise InputFormatError(f"bad time {text!r}, expected HH:MM:SS")
    try:
        h, m, s = (int(p) for p in parts)
    except ValueError:
        raise InputFormatError(f"bad time {text!r}, expected HH:MM:SS") from None
    return h * 3600 + m * 60 + s


def check_person(person: Person):
    """Raise if the plan does not follow the activity/leg alternation pattern."""
    el = person.elements
    if not el:
        raise InputFormatError(f"person {person.id}: empty plan")
    for i, e in enumerate(el):
        expect = Activity if i % 2 == 0 else Leg
        if not isinstance(e, expect):
            raise InputFormatError(f"person {person.id}: legs must interleave activities (element {i})")
    if not isinstance(el[-1], Activity):
        raise InputFormatError(f"person {person.id}: plan must end with an activity")
    acts = el[::2]
    if acts[-1].end_time is not None:
        raise InputFormatError(f"person {person.id}: final activity must not carry an end_time")
    for a in acts[:-1]:
        if a.end_time is None:
            raise InputFormatError(f"person {person.id}: interior activity {a.type!r} lacks an end_time")


def _fmt_float(v: float) -> str:
    return repr(float(v))


def write_population_xml(doc: PopulationDocument, path, check: bool = True):
    """Serialize ``doc``; element and attribute order is fixed so output is byte-stable."""
    lines = [
        '<?xml version="1.0" encoding="utf-8"?>',
        '<!DOCTYPE population SYSTEM "http://www.matsim.org/files/dtd/population_v6.dtd">',
        "",
    ]
    if not doc.persons:
        lines.append("<population>")
        lines.append("</population>")
    else:
        lines.append("<population>")
    for p in doc.persons:
        if check:
            check_person(p)
        lines.append("")
        lines.append(f"  <person id={quoteattr(str(p.id))}>")
        if p.attributes:
            lines.append("    <attributes>")
            for a in p.attributes:
                lines.append(f"      <attribute name={quoteattr(a.name)} class={quoteattr(a.cls)}>"
                             f"{escape(a.value)}</attribute>")
            lines.append("    </attributes>")
        plan_attrs = f' selected="{"yes" if p.selected else "no"}"'
        if p.score is not None:
            plan_attrs += f" score={quoteattr(p.score)}"
        lines.append(f"    <plan{plan_attrs}>")
        for e in p.elements:
            if isinstance(e, Leg):
                lines.append(f"      <leg mode={quoteattr(e.mode)}/>")
            else:
                end = f' end_time="{format_time(e.end_time)}"' if e.end_time is not None else ""
                lines.append(f"      <activity type={quoteattr(e.type)} x=\"{_fmt_float(e.x)}\" "
                             f"y=\"{_fmt_float(e.y)}\"{end}/>")
        lines.append("    </plan>")
        lines.append("  </person>")
    if doc.persons:
        lines.append("")
        lines.append("</population>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _byte_offset(data: bytes, line: int, col: int) -> int:
    off = 0
    for _ in range(line - 1):
        nl = data.find(b"\n", off)
        if nl < 0:
            return len(data)
        off = nl + 1
    return off + col


def read_population_xml(path) -> PopulationDocument:
    """Parse a population file.  A missing ``selected`` flag is read as selected."""
    data = Path(path).read_bytes()
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise InputFormatError(
            f"{path}: malformed XML at byte offset {_byte_offset(data, line, col)} "
            f"(line {line}, column {col})") from None
    if root.tag != "population":
        raise InputFormatError(f"{path}: root element is <{root.tag}>, expected <population>")
    doc = PopulationDocument()
    for pe in root.findall("person"):
        person = Person(id=pe.get("id", "").strip())
        attrs = pe.find("attributes")
        if attrs is not None:
            for ae in attrs.findall("attribute"):
                cls = ae.get("class", STRING)
                if cls not in KNOWN_CLASSES:
                    raise InputFormatError(f"{path}: person {person.id}: unknown attribute class {cls!r}")
                person.attributes.append(Attribute(ae.get("name"), cls, ae.text or ""))
        plans = pe.findall("plan")
        plan = next((p for p in plans if p.get("selected", "yes") == "yes"), plans[0] if plans else None)
        if plan is None:
            raise InputFormatError(f"{path}: person {person.id} has no plan")
        person.selected = plan.get("selected", "yes") == "yes"
        person.score = plan.get("score")
        for el in plan:
            if el.tag == "activity":
                end = el.get("end_time")
                person.elements.append(Activity(
                    el.get("type"), float(el.get("x")), float(el.get("y")),
                    parse_time(end) if end else None))
            elif el.tag == "leg":
                person.elements.append(Leg(el.get("mode", "car")))
        doc.persons.append(person)
    return doc
