"""Loaders for the chemistry reference tables shipped with the package."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

ORGANIC_SUBSET = ("B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I")
AROMATIC_ELEMENTS = ("b", "c", "n", "o", "p", "s")


@lru_cache(maxsize=1)
def _tables() -> dict:
    path = resources.files("molprompt").joinpath("data/chem_tables.json")
    return json.loads(path.read_text(encoding="utf-8"))


def allowed_valences(element: str, charge: int = 0) -> tuple[int, ...]:
    """Allowed total valences for an element, widened by |charge| when charged.

    The widening is a deliberate desk-scale leniency: [N+] gets 4, [O-] keeps
    its bonds within 2 anyway, and exotic hypervalent charged species are not
    second-guessed.
    """
    base = _tables()["valences"][element]
    if charge == 0:
        return tuple(base)
    extra = [v + abs(charge) for v in base]
    return tuple(sorted(set(base) | set(extra)))


def max_valence(element: str, charge: int = 0) -> int:
    return allowed_valences(element, charge)[-1]


def atomic_mass(element: str) -> float:
    return _tables()["masses"][element]


def functional_group_names() -> tuple[str, ...]:
    return tuple(_tables()["functional_groups"])
