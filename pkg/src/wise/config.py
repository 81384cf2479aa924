"""Scoring profiles: global resource specs, per-machine-type overrides, thresholds.

Profiles are YAML (or JSON) documents::

    name: my-fleet
    resources:
      - {name: cpu/avg, target: 40, range: 30}
      - {name: net/avg, resource_max: 80}
    thresholds: {tanh_overall: 0.76, exp_overall: 0.36}
    machine_overrides:
      c5.large:
        - {name: cpu/avg, target: 60}

Overrides replace individual fields of the global spec with the same name; an
override with a new name must be a complete spec and is appended.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from wise.errors import ConfigError
from wise.scoring import ClassificationThresholds, ResourceSpec

__all__ = [
    "ClassificationThresholds",
    "ScoringProfile",
    "bundled_profiles",
    "default_profile",
    "dump_profile",
    "find_profile",
    "load_profile",
    "parse_profile",
    "resolve",
]

SPEC_FIELDS = ("name", "target", "range", "weight", "resource_max", "penalty_weight")
THRESHOLD_FIELDS = ("tanh_overall", "tanh_resource", "exp_overall", "exp_resource", "per_variant")
DEFAULT_PROFILE = "table1-default"


@dataclass(frozen=True)
class ScoringProfile:
    name: str
    global_specs: tuple[ResourceSpec, ...]
    machine_overrides: Mapping[str, tuple[Mapping[str, Any], ...]] = field(default_factory=dict)
    thresholds: ClassificationThresholds = field(default_factory=ClassificationThresholds)

    @property
    def spec_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.global_specs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "resources": [s.to_dict() for s in self.global_specs],
            "thresholds": self.thresholds.to_dict(),
            "machine_overrides": {
                mtype: [dict(entry) for entry in entries]
                for mtype, entries in self.machine_overrides.items()
            },
        }


def _spec_from_mapping(entry: Any, path: str) -> ResourceSpec:
    if not isinstance(entry, Mapping):
        raise ConfigError("expected a mapping", path)
    unknown = set(entry) - set(SPEC_FIELDS)
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)}", path)
    if "name" not in entry:
        raise ConfigError("missing required field", f"{path}.name")
    kwargs = {k: entry[k] for k in SPEC_FIELDS if k in entry}
    # explicit nulls for weight/penalty_weight mean "use the default"
    for key in ("weight", "penalty_weight"):
        if key in kwargs and kwargs[key] is None:
            del kwargs[key]
    try:
        return ResourceSpec(**kwargs)
    except ConfigError as exc:
        raise ConfigError(exc.message, f"{path}.{exc.path}") from None


def _parse_thresholds(doc: Any) -> ClassificationThresholds:
    if doc is None:
        return ClassificationThresholds()
    if not isinstance(doc, Mapping):
        raise ConfigError("expected a mapping", "thresholds")
    unknown = set(doc) - set(THRESHOLD_FIELDS)
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)}", "thresholds")
    kwargs = dict(doc)
    per_variant = kwargs.pop("per_variant", None) or {}
    if not isinstance(per_variant, Mapping):
        raise ConfigError("expected a mapping", "thresholds.per_variant")
    return ClassificationThresholds(**kwargs, per_variant=dict(per_variant))


def parse_profile(doc: Any) -> ScoringProfile:
    """Validate a decoded profile document and build a :class:`ScoringProfile`.

    Absent thresholds, weights and penalty weights take their defaults.
    Errors carry the dotted path of the offending field.
    """
    if not isinstance(doc, Mapping):
        raise ConfigError("profile document must be a mapping")
    unknown = set(doc) - {"name", "resources", "thresholds", "machine_overrides"}
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)}", "<root>")
    name = doc.get("name", "unnamed")
    if not isinstance(name, str) or not name:
        raise ConfigError("must be a non-empty string", "name")

    entries = doc.get("resources")
    if not isinstance(entries, list):
        raise ConfigError("expected a list of resource specs", "resources")
    if not entries:
        raise ConfigError("profile has no resources to score", "resources")
    specs: list[ResourceSpec] = []
    seen: set[str] = set()
    for i, entry in enumerate(entries):
        spec = _spec_from_mapping(entry, f"resources[{i}]")
        if spec.name in seen:
            raise ConfigError(f"duplicate resource name {spec.name!r}", f"resources[{i}].name")
        seen.add(spec.name)
        specs.append(spec)
    if not any(s.has_target for s in specs):
        raise ConfigError("profile needs at least one resource with a target", "resources")

    overrides_doc = doc.get("machine_overrides") or {}
    if not isinstance(overrides_doc, Mapping):
        raise ConfigError("expected a mapping of machine type to spec list", "machine_overrides")
    by_name = {s.name: s for s in specs}
    overrides: dict[str, tuple[Mapping[str, Any], ...]] = {}
    for mtype, items in overrides_doc.items():
        base = f"machine_overrides.{mtype}"
        if not isinstance(items, list):
            raise ConfigError("expected a list of partial resource specs", base)
        local_seen: set[str] = set()
        cleaned = []
        for i, entry in enumerate(items):
            path = f"{base}[{i}]"
            if not isinstance(entry, Mapping):
                raise ConfigError("expected a mapping", path)
            unknown = set(entry) - set(SPEC_FIELDS)
            if unknown:
                raise ConfigError(f"unknown field(s) {sorted(unknown)}", path)
            oname = entry.get("name")
            if not isinstance(oname, str) or not oname:
                raise ConfigError("missing required field", f"{path}.name")
            if oname in local_seen:
                raise ConfigError(f"duplicate resource name {oname!r}", f"{path}.name")
            local_seen.add(oname)
            # validate the merged result now so errors point at the document
            if oname in by_name:
                _merge(by_name[oname], entry, path)
            else:
                _spec_from_mapping(entry, path)
            cleaned.append({k: entry[k] for k in SPEC_FIELDS if k in entry})
        overrides[str(mtype)] = tuple(cleaned)

    thresholds = _parse_thresholds(doc.get("thresholds"))
    return ScoringProfile(name=name, global_specs=tuple(specs), machine_overrides=overrides, thresholds=thresholds)


def _merge(base: ResourceSpec, entry: Mapping[str, Any], path: str = "override") -> ResourceSpec:
    changes = {k: v for k, v in entry.items() if k != "name"}
    for key in ("weight", "penalty_weight"):
        if key in changes and changes[key] is None:
            del changes[key]
    try:
        return replace(base, **changes)
    except ConfigError as exc:
        raise ConfigError(exc.message, f"{path}.{exc.path}") from None


def resolve(profile: ScoringProfile, machine_type: str | None) -> tuple[ResourceSpec, ...]:
    """Global specs with the machine type's field overrides applied.

    Unknown machine types (and ``None``) get the global specs unchanged. New
    resources introduced by an override are appended in override order.
    """
    entries = profile.machine_overrides.get(machine_type, ()) if machine_type is not None else ()
    if not entries:
        return tuple(profile.global_specs)
    by_name = {e["name"]: e for e in entries}
    resolved = [
        _merge(spec, by_name[spec.name]) if spec.name in by_name else spec
        for spec in profile.global_specs
    ]
    known = set(profile.spec_names)
    for e in entries:
        if e["name"] not in known:
            resolved.append(_spec_from_mapping(e, f"machine_overrides.{machine_type}"))
    return tuple(resolved)


def load_profile(path: str | os.PathLike) -> ScoringProfile:
    """Read and validate a profile file (YAML or JSON)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read profile: {exc.strerror or exc}", str(path)) from None
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed profile document: {exc}", str(path)) from None
    return parse_profile(doc)


def bundled_profiles() -> list[str]:
    root = importlib_resources.files("wise") / "profiles"
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def _bundled_text(name: str) -> str:
    res = importlib_resources.files("wise") / "profiles" / f"{name}.yaml"
    if not res.is_file():
        raise ConfigError(f"no bundled profile named {name!r}", "profile")
    return res.read_text()


def find_profile(name_or_path: str | os.PathLike) -> tuple[ScoringProfile, str]:
    """Load a profile from a file path or by bundled name.

    Returns the profile and the exact document text (for manifest hashing).
    """
    candidate = Path(name_or_path)
    if candidate.suffix in {".yaml", ".yml", ".json"} or candidate.exists():
        try:
            text = candidate.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read profile: {exc.strerror or exc}", str(candidate)) from None
    else:
        text = _bundled_text(str(name_or_path))
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed profile document: {exc}", str(name_or_path)) from None
    return parse_profile(doc), text


def default_profile() -> ScoringProfile:
    return find_profile(DEFAULT_PROFILE)[0]


def dump_profile(profile: ScoringProfile) -> str:
    """Canonical YAML serialization; ``parse_profile(yaml.safe_load(...))`` round-trips."""
    return yaml.safe_dump(profile.to_dict(), sort_keys=False, default_flow_style=False)
