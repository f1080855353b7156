""" Strict conversion of configuration sections into frozen dataclasses. """
import dataclasses
import difflib
from typing import Any, Iterable, Mapping, Optional
from biobb_rnot.core.errors import ConfigError


def closest_key(key: str, known: Iterable[str]) -> Optional[str]:
    matches = difflib.get_close_matches(key, list(known), n=1)
    return matches[0] if matches else None


def check_keys(section: Mapping, known: Iterable[str], name: str) -> None:
    """ Raise ConfigError naming the first unknown key of ``section``. """
    known = list(known)
    for key in section:
        if key not in known:
            suggestion = closest_key(key, known)
            hint = " Did you mean %r?" % suggestion if suggestion else ""
            raise ConfigError("Unknown key %r in section %r.%s" % (key, name, hint))


def dataclass_from_dict(cls, section: Optional[Mapping], name: str, **overrides: Any):
    """ Build ``cls`` from ``section``; unknown keys and bad values raise ConfigError. """
    section = dict(section or {})
    fields = [f.name for f in dataclasses.fields(cls)]
    check_keys(section, fields, name)
    section.update(overrides)
    try:
        return cls(**section)
    except (TypeError, ValueError) as err:
        raise ConfigError("Invalid section %r: %s" % (name, err)) from err
