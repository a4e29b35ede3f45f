"""Small hand-built instances with known behaviour.

Used by the tests, the demos and the ``oracle`` command.
"""
from __future__ import annotations

from .model import (Connection, Edge, GateGroup, GateMember, Instance, Node,
                    Perturbation, Route, SpacingTable, Train)


def _through_routes(inc: tuple[int, ...], inside: tuple[int, ...], out: tuple[int, ...]):
    return tuple(Route(a, u, b) for a in inc for u in inside for b in out)


def overtake_motif() -> Instance:
    """Slow train S ahead of fast train F on a single-track line A-B-C.

    B has two platforms, so F could pass S there. S is delayed at A.
    Scheduling either train first leaves S in F's way on both legs; the
    optimum holds S at B until F has gone through.
    """
    # tracks: edge A-B 0, edge B-C 1, A inside 2, B inside 3 4, C inside 5
    nodes = (
        Node(0, (2,), (Route(None, 2, 0), Route(0, 2, None))),
        Node(1, (3, 4), _through_routes((0,), (3, 4), (1,))
             + _through_routes((1,), (3, 4), (0,))),
        Node(2, (5,), (Route(1, 5, None), Route(None, 5, 1))),
    )
    edges = (Edge(0, 0, 1, (0,)), Edge(1, 1, 2, (1,)))
    slow = Train(0, (0, 1, 2), (0, 100, 200), (0, 100, 200), (0, 0, 0),
                 (0, 0, 0), (1000, 1000, 1000), (100, 100))
    fast = Train(1, (0, 1, 2), (210, 230, 250), (210, 230, 250), (0, 0, 0),
                 (0, 0, 0), (1000, 1000, 1000), (20, 20))
    return Instance(nodes, edges, (slow, fast), SpacingTable(5, 5), (), 5000,
                    Perturbation(0, 200, node=0))


def crossing_motif() -> Instance:
    """Two trains meeting head-on on a line with a passing loop in the middle.

    Opposite directions never share an edge spacing row, so the only
    interaction is the platform at the loop. The decoder reaches the optimum.
    """
    # tracks: edge 0-1 0, edge 1-2 1, inside 0: 2, inside 1: 3 4, inside 2: 5
    nodes = (
        Node(0, (2,), (Route(None, 2, 0), Route(0, 2, None))),
        Node(1, (3, 4), _through_routes((0,), (3, 4), (1,))
             + _through_routes((1,), (3, 4), (0,)),
             (GateGroup((GateMember(0, "I"), GateMember(1, "O"),
                         GateMember(1, "I"), GateMember(0, "O")),
                        {"II": 10, "IO": 10, "OI": 10, "OO": 10}),)),
        Node(2, (5,), (Route(1, 5, None), Route(None, 5, 1))),
    )
    edges = (Edge(0, 0, 1, (0,)), Edge(1, 1, 2, (1,)))
    east = Train(0, (0, 1, 2), (0, 100, 160), (0, 120, 160), (0, 0, 0),
                 (0, 20, 0), (3600, 200, 3600), (100, 40))
    west = Train(1, (2, 1, 0), (60, 140, 280), (60, 180, 280), (1, 3, 1),
                 (0, 20, 0), (3600, 200, 3600), (80, 100))
    return Instance(nodes, edges, (east, west), SpacingTable(30, 30), (), 5000,
                    Perturbation(0, 60, node=0))


def shuttle_motif() -> Instance:
    """One physical train running out and back, as two connected trips."""
    nodes = (
        Node(0, (2,), (Route(None, 2, 0), Route(0, 2, None), Route(None, 2, 1),
                       Route(1, 2, None))),
        Node(1, (3,), (Route(0, 3, None), Route(None, 3, 0), Route(1, 3, None),
                       Route(None, 3, 1))),
    )
    edges = (Edge(0, 0, 1, (0, 1)),)
    out = Train(0, (0, 1), (0, 100), (0, 100), (0, 0), (0, 0), (600, 600), (100,))
    back = Train(1, (1, 0), (100, 400), (300, 400), (1, 1), (0, 0), (600, 600), (100,))
    return Instance(nodes, edges, (out, back), SpacingTable(10, 10),
                    (Connection(0, 1, 1, 200),), 5000, Perturbation(0, 50, node=0))


def lock_motif() -> Instance:
    """A slow train delayed onto the path of a fast one on a single track.

    Whichever is placed first, the slow train departs ahead of the fast one
    but would arrive after it, so the fast train has to be moved behind.
    """
    nodes = (
        Node(0, (1,), (Route(None, 1, 0),)),
        Node(1, (2, 3), (Route(0, 2, None), Route(0, 3, None))),
    )
    edges = (Edge(0, 0, 1, (0,)),)
    slow = Train(0, (0, 1), (0, 200), (0, 200), (0, 0), (0, 0), (600, 600), (200,))
    fast = Train(1, (0, 1), (210, 230), (210, 230), (0, 1), (0, 0), (600, 600), (20,))
    return Instance(nodes, edges, (slow, fast), SpacingTable(5, 5), (), 3000,
                    Perturbation(0, 150, node=0))
