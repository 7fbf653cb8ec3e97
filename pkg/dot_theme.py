# dot_theme.py
from __future__ import annotations

from typing import Dict


# Central colour palette for Graphviz output.
# Update here to change colours in every DOT file the commands write.
VERTEX_FILL = "#f2f2f2"  # ordinary vertex
CORE_FILL = "#9ecae1"  # vertex of the current finite set A
EXCEPTIONAL_FILL = "#fdae6b"  # degree-3 vertex added by an immersion
CUT_SIDE_FILL = "#fcbba1"  # side of a violating cut

EDGE_COLOR = "#969696"  # edge not yet oriented
ARC_COLOR = "#252525"  # oriented edge
NEW_ARC_COLOR = "#31a354"  # arc added in the latest stage
BOUNDARY_COLOR = "#3182bd"  # boundary edge of a component
CUT_COLOR = "#de2d26"  # edge of a violating cut

# Roles accepted by vertex_attributes / edge_attributes.
VERTEX = "vertex"
CORE = "core"
EXCEPTIONAL = "exceptional"
CUT_SIDE = "cut-side"
EDGE = "edge"
ARC = "arc"
NEW_ARC = "new-arc"
BOUNDARY = "boundary"
CUT = "cut"


def palette() -> Dict[str, str]:
    return {
        VERTEX: VERTEX_FILL,
        CORE: CORE_FILL,
        EXCEPTIONAL: EXCEPTIONAL_FILL,
        CUT_SIDE: CUT_SIDE_FILL,
        EDGE: EDGE_COLOR,
        ARC: ARC_COLOR,
        NEW_ARC: NEW_ARC_COLOR,
        BOUNDARY: BOUNDARY_COLOR,
        CUT: CUT_COLOR,
    }


def vertex_attributes(role: str) -> str:
    return f'fillcolor="{palette().get(role, VERTEX_FILL)}"'


def edge_attributes(role: str) -> str:
    color = palette().get(role, EDGE_COLOR)
    width = "2.0" if role in {NEW_ARC, CUT} else "1.0"
    return f'color="{color}", penwidth={width}'


def legend_dot(roles: list[str]) -> str:
    p = palette()
    rows = "".join(
        f'<tr><td bgcolor="{p[role]}">&nbsp;&nbsp;</td><td align="left">{role}</td></tr>'
        for role in roles
        if role in p
    )
    return f'  legend [shape=plaintext, style="", label=<<table border="0">{rows}</table>>];'
