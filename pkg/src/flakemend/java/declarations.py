"""Compare and reconcile method declarations (modifiers, return type, annotations, parameters)."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .structure import MethodModel, squash


class Facet(str, Enum):
    MODIFIERS = "MODIFIERS"
    RETURN_TYPE = "RETURN_TYPE"
    ANNOTATIONS = "ANNOTATIONS"
    PARAMETERS = "PARAMETERS"


@dataclass(frozen=True)
class Discrepancy:
    facet: Facet
    original: str
    patched: str
    detail: str

    def __str__(self) -> str:
        return f"{self.facet.value}: {self.detail}"


def _set_change(orig: Counter, new: Counter) -> str:
    removed = sorted((orig - new).elements())
    added = sorted((new - orig).elements())
    parts = []
    if removed:
        parts.append("{" + ", ".join(removed) + "} removed")
    if added:
        parts.append("{" + ", ".join(added) + "} added")
    return "; ".join(parts)


def declaration_diff(original: MethodModel, patched: MethodModel) -> list[Discrepancy]:
    out = []
    om, pm = Counter(original.modifiers), Counter(patched.modifiers)
    if om != pm:
        out.append(Discrepancy(Facet.MODIFIERS, " ".join(original.modifiers), " ".join(patched.modifiers),
                               _set_change(om, pm)))
    if squash(original.return_type) != squash(patched.return_type):
        out.append(Discrepancy(Facet.RETURN_TYPE, original.return_type, patched.return_type,
                               f"{original.return_type or '<none>'} -> {patched.return_type or '<none>'}"))
    oa, pa = Counter(squash(a) for a in original.annotations), Counter(squash(a) for a in patched.annotations)
    if oa != pa:
        out.append(Discrepancy(Facet.ANNOTATIONS, " ".join(original.annotations), " ".join(patched.annotations),
                               _set_change(oa, pa)))
    if original.parameter_types != patched.parameter_types:
        out.append(Discrepancy(Facet.PARAMETERS, ", ".join(original.parameter_types),
                               ", ".join(patched.parameter_types),
                               f"({', '.join(original.parameter_types)}) -> ({', '.join(patched.parameter_types)})"))
    return out


def revert_declaration(original: MethodModel, patched: MethodModel, indent: str = "") -> str:
    """Patched method text with every differing declaration facet taken from ``original``.

    The body, the throws clause and parameter names stay as the patch wrote them
    unless the parameter types differ, in which case the whole parameter list is
    restored.  ``indent`` prefixes annotation lines after the first.
    """
    facets = {d.facet for d in declaration_diff(original, patched)}
    if not facets:
        return patched.text
    annotations = original.annotations if Facet.ANNOTATIONS in facets else patched.annotations
    modifiers = original.modifiers if Facet.MODIFIERS in facets else patched.modifiers
    return_type = original.return_type if Facet.RETURN_TYPE in facets else patched.return_type
    p_text = patched.text
    params = (
        original.text[original.params_span[0]: original.params_span[1]]
        if Facet.PARAMETERS in facets
        else p_text[patched.params_span[0]: patched.params_span[1]]
    )
    head = [a for a in annotations]
    decl = " ".join(
        part for part in (" ".join(modifiers), patched.type_params, return_type, patched.name) if part
    )
    tail = p_text[patched.params_span[1]:]  # ")" + throws + body
    lines = head + [f"{decl}({params}{tail}"]
    return ("\n" + indent).join(lines)
