"""App and child registries, eligibility filters, and A/B/C assignment."""
from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from typing import Iterable, Iterator

MIN_AGE = 2
MAX_AGE = 10


class ValidationError(ValueError):
    """A record or file violates its schema or invariants."""


class ExperimentGroup(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"


class Strategy(str, enum.Enum):
    POPULAR = "popular"
    CF = "cf"
    RANDOM = "random"


# arm -> strategy; fixed configuration
ARM_STRATEGY = {
    ExperimentGroup.A: Strategy.POPULAR,
    ExperimentGroup.B: Strategy.CF,
    ExperimentGroup.C: Strategy.RANDOM,
}


@dataclass(frozen=True)
class AppRecord:
    app_id: str
    title: str
    category_tag: str
    min_age: int
    max_age: int
    published_date: date
    min_app_version: int
    blacklisted: bool = False

    def __post_init__(self):
        if not self.app_id:
            raise ValidationError("app_id must be non-empty")
        if not (MIN_AGE <= self.min_age <= self.max_age <= MAX_AGE):
            raise ValidationError(
                f"app {self.app_id!r}: invalid age range {self.min_age}-{self.max_age}"
            )

    def to_json(self) -> dict:
        d = asdict(self)
        d["published_date"] = self.published_date.isoformat()
        return d


@dataclass(frozen=True)
class ChildProfile:
    child_id: str
    age: int
    app_version: int
    gender: str | None = None
    group: ExperimentGroup | None = None

    def __post_init__(self):
        if not self.child_id:
            raise ValidationError("child_id must be non-empty")
        if not (MIN_AGE <= self.age <= MAX_AGE):
            raise ValidationError(f"child {self.child_id!r}: age {self.age} outside [2, 10]")

    def with_group(self, group: ExperimentGroup) -> "ChildProfile":
        if self.group is not None and self.group != group:
            raise ValidationError(f"child {self.child_id!r} already assigned to group {self.group.value}")
        return replace(self, group=ExperimentGroup(group))

    def to_json(self) -> dict:
        return {
            "child_id": self.child_id,
            "age": self.age,
            "gender": self.gender,
            "app_version": self.app_version,
            "group": None if self.group is None else self.group.value,
        }


@dataclass
class Catalog:
    """App registry. Build with :meth:`register`, then :meth:`freeze`."""

    apps: dict[str, AppRecord] = field(default_factory=dict)
    frozen: bool = False

    def register(self, record: AppRecord) -> "Catalog":
        if self.frozen:
            raise ValidationError("catalog is frozen")
        if record.app_id in self.apps:
            raise ValidationError(f"duplicate app_id {record.app_id!r}")
        self.apps[record.app_id] = record
        return self

    def freeze(self) -> "Catalog":
        self.frozen = True
        return self

    def __len__(self):
        return len(self.apps)

    def __contains__(self, app_id):
        return app_id in self.apps

    def __getitem__(self, app_id) -> AppRecord:
        return self.apps[app_id]

    def __iter__(self) -> Iterator[AppRecord]:
        return iter(self.apps.values())

    def app_ids(self) -> list[str]:
        return sorted(self.apps)


def register_app(record: AppRecord, catalog: Catalog) -> Catalog:
    return catalog.register(record)


def is_eligible(child: ChildProfile, app: AppRecord) -> bool:
    return (
        not app.blacklisted
        and app.min_app_version <= child.app_version
        and app.min_age <= child.age <= app.max_age
    )


def eligible_apps(child: ChildProfile, catalog: Catalog) -> frozenset[str]:
    """Apps that pass the blacklist, version and age filters for ``child``.

    The same filter is used by every strategy, the random one included.
    """
    return frozenset(a.app_id for a in catalog if is_eligible(child, a))


def assign_group(child_id: str, seed: int) -> ExperimentGroup:
    """Uniform, deterministic arm for ``(child_id, seed)``."""
    digest = hashlib.blake2b(f"{seed}:{child_id}".encode(), digest_size=8).digest()
    return list(ExperimentGroup)[int.from_bytes(digest, "big") % 3]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big") >> 1


@dataclass
class Registry:
    """Catalog plus the child population."""

    catalog: Catalog
    children: dict[str, ChildProfile] = field(default_factory=dict)

    def add_child(self, child: ChildProfile):
        if child.child_id in self.children:
            raise ValidationError(f"duplicate child_id {child.child_id!r}")
        self.children[child.child_id] = child

    def child(self, child_id: str) -> ChildProfile:
        try:
            return self.children[child_id]
        except KeyError:
            raise ValidationError(f"unknown child id {child_id!r}") from None

    def assign_groups(self, seed: int):
        for cid, child in list(self.children.items()):
            if child.group is None:
                self.children[cid] = child.with_group(assign_group(cid, seed))

    def child_ids(self) -> list[str]:
        return sorted(self.children)


# -- JSON Lines I/O ---------------------------------------------------------

_APP_FIELDS = ("app_id", "title", "category_tag", "min_age", "max_age",
               "published_date", "min_app_version", "blacklisted")
_CHILD_FIELDS = ("child_id", "age", "app_version")


def _require(obj, fields, lineno, kind):
    if not isinstance(obj, dict):
        raise ValidationError(f"line {lineno}: {kind} must be a JSON object")
    missing = [f for f in fields if f not in obj]
    if missing:
        raise ValidationError(f"line {lineno}: {kind} missing field(s) {', '.join(missing)}")


def _as_int(v, name, lineno):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"line {lineno}: field {name} must be an integer")
    return v


def parse_app(obj: dict, lineno: int = 0) -> AppRecord:
    _require(obj, _APP_FIELDS, lineno, "app")
    try:
        published = date.fromisoformat(obj["published_date"])
    except (TypeError, ValueError):
        raise ValidationError(f"line {lineno}: bad published_date {obj['published_date']!r}") from None
    if not isinstance(obj["blacklisted"], bool):
        raise ValidationError(f"line {lineno}: field blacklisted must be a boolean")
    try:
        return AppRecord(
            app_id=str(obj["app_id"]),
            title=str(obj["title"]),
            category_tag=str(obj["category_tag"]),
            min_age=_as_int(obj["min_age"], "min_age", lineno),
            max_age=_as_int(obj["max_age"], "max_age", lineno),
            published_date=published,
            min_app_version=_as_int(obj["min_app_version"], "min_app_version", lineno),
            blacklisted=obj["blacklisted"],
        )
    except ValidationError as exc:
        if str(exc).startswith("line "):
            raise
        raise ValidationError(f"line {lineno}: {exc}") from None


def parse_child(obj: dict, lineno: int = 0) -> ChildProfile:
    _require(obj, _CHILD_FIELDS, lineno, "child")
    group = obj.get("group")
    if group is not None and group not in ("A", "B", "C"):
        raise ValidationError(f"line {lineno}: bad group {group!r}")
    try:
        return ChildProfile(
            child_id=str(obj["child_id"]),
            age=_as_int(obj["age"], "age", lineno),
            app_version=_as_int(obj["app_version"], "app_version", lineno),
            gender=obj.get("gender"),
            group=None if group is None else ExperimentGroup(group),
        )
    except ValidationError as exc:
        if str(exc).startswith("line "):
            raise
        raise ValidationError(f"line {lineno}: {exc}") from None


def _json_lines(lines: Iterable[str]):
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"line {lineno}: invalid JSON ({exc.msg})") from None


def load_catalog(lines: Iterable[str]) -> Catalog:
    catalog = Catalog()
    for lineno, obj in _json_lines(lines):
        record = parse_app(obj, lineno)
        if record.app_id in catalog:
            raise ValidationError(f"line {lineno}: duplicate app_id {record.app_id!r}")
        catalog.register(record)
    return catalog.freeze()


def load_children(lines: Iterable[str]) -> list[ChildProfile]:
    out, seen = [], set()
    for lineno, obj in _json_lines(lines):
        child = parse_child(obj, lineno)
        if child.child_id in seen:
            raise ValidationError(f"line {lineno}: duplicate child_id {child.child_id!r}")
        seen.add(child.child_id)
        out.append(child)
    return out


def dump_jsonl(rows: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
