"""Bifoliated-plane oracle API over the veering chart.

Points are never coordinates: a PlanePoint is the intersection of two
named leaves (one per foliation) with a chart certificate.  Rectangles
are bounded by walls; a wall is a single leaf or a side chain (two
nonseparated leaf rays meeting at a cusp).  All predicates reduce to the
chart's order oracle and raise RegionNotExpanded when the materialized
cells do not force an answer.

Conventions: foliation 1 is horizontal with positive direction East,
foliation 2 vertical with positive direction North.  leaf_side reports
the side of the point seen when traveling the leaf's positive direction,
so West of a vertical leaf and North of a horizontal leaf are both
"Left".
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .chart import (
    ChartSnapshot,
    Leaf,
    TRIPLE_AT,
    compute_flattenings,
    generator_orientation_classes,
)
from .cover import Cover, GroupElement, elements_of_length_at_most
from .errors import (
    EmptySaturation,
    NoOrientation,
    RegionNotExpanded,
)
from .veering import parse_triangulation, validate_veering, VeeringCertificate


@dataclass(frozen=True)
class PlanePoint:
    """Intersection of a horizontal and a vertical leaf."""

    h: Leaf
    v: Leaf
    chart: int   # a lifted tetrahedron whose rectangle contains the point

    def __repr__(self):
        return "PlanePoint(%r * %r)" % (self.h, self.v)


@dataclass(frozen=True)
class Ray:
    leaf: Leaf
    toward: str  # 'N','S','E','W'

    def __post_init__(self):
        ok = ("E", "W") if self.leaf.foliation == 1 else ("N", "S")
        if self.toward not in ok:
            raise ValueError("ray direction %r invalid for foliation %d"
                             % (self.toward, self.leaf.foliation))

    @property
    def is_cusp_end(self):
        return self.leaf.cusp_end == self.toward


@dataclass(frozen=True)
class Wall:
    """One or two (nonseparated) leaves bounding a rectangle side."""

    leaves: tuple
    cusp: tuple | None = None

    @classmethod
    def single(cls, leaf):
        return cls(leaves=(leaf,), cusp=None)

    @classmethod
    def chain(cls, lo, hi, cusp):
        return cls(leaves=(lo, hi), cusp=cusp)

    def __repr__(self):
        if self.cusp is None:
            return "Wall(%r)" % (self.leaves[0],)
        return "Wall(%r | cusp %r | %r)" % (self.leaves[0], self.cusp,
                                            self.leaves[1])


@dataclass(frozen=True)
class Rectangle:
    west: Wall
    east: Wall
    south: Wall
    north: Wall
    kind: str = "Plain"        # Plain | Tetrahedron | Face | Edge | Derived
    chart: int | None = None   # node id when kind == Tetrahedron

    def walls(self):
        return {"W": self.west, "E": self.east,
                "S": self.south, "N": self.north}

    def side_cusps(self):
        return [(side, w.cusp) for side, w in self.walls().items()
                if w.cusp is not None]

    def corner_cusps(self):
        """Cusps sitting at corners: adjacent single-leaf walls whose
        leaves share a cusp at the meeting rays."""
        out = []
        for (a, b, corner) in (("W", "S", "SW"), ("W", "N", "NW"),
                               ("E", "S", "SE"), ("E", "N", "NE")):
            wa, wb = self.walls()[a], self.walls()[b]
            va = wa.leaves[0] if len(wa.leaves) == 1 else None
            hb = wb.leaves[0] if len(wb.leaves) == 1 else None
            if va is None or hb is None:
                continue
            if va.cusp == hb.cusp and \
                    va.cusp_end == ("S" if "S" in corner else "N") and \
                    hb.cusp_end == ("W" if "W" in corner else "E"):
                out.append((corner, va.cusp))
        return out

    def all_cusps(self):
        return sorted({c for _, c in self.side_cusps()} |
                      {c for _, c in self.corner_cusps()})


@dataclass(frozen=True)
class PerfectFit:
    l1: Leaf   # horizontal
    l2: Leaf   # vertical
    end_markers: tuple  # (ray direction on l1, ray direction on l2)


@dataclass(frozen=True)
class PerfectFitSide:
    leaf: Leaf
    fits_ray_of: Leaf
    degenerate: bool = False


@dataclass(frozen=True)
class NonseparatedPair:
    l1: Leaf
    l2: Leaf
    common_fit_leaf: Leaf


class VeeringLoomBackend:
    """The loom-space oracle induced on the universal cover of a veering
    triangulation; also the owner of the deck-group machinery."""

    def __init__(self, tri, max_cells=None):
        if isinstance(tri, str):
            tri = parse_triangulation(tri)
        if not tri.edge_classes:
            res = validate_veering(tri)
            if not isinstance(res, VeeringCertificate):
                raise ValueError(
                    "triangulation fails validation: %s"
                    % "; ".join(str(v) for v in res))
        self.tri = tri
        self.flats, viol = compute_flattenings(tri)
        if self.flats is None:
            raise NoOrientation(
                "no orientation-consistent loom chart: "
                + "; ".join(str(v) for v in viol))
        self.cover = Cover(tri, max_cells=max_cells)
        self._snapshot = None
        self._snapshot_nodes = -1
        self.unknown_pairs = []   # leaf pairs whose order was needed but
                                  # not forced by the window yet

    # -- expansion protocol ---------------------------------------------------

    def expand(self, depth):
        stats = self.cover.expand(depth)
        return stats

    def freeze(self):
        self.cover.freeze()
        self._refresh()

    def thaw(self):
        self.cover.thaw()

    def _refresh(self):
        if self._snapshot_nodes != len(self.cover.nodes):
            self._snapshot = ChartSnapshot(self.cover, self.flats,
                                           prev=self._snapshot)
            self._snapshot_nodes = len(self.cover.nodes)

    @property
    def chart(self):
        self._refresh()
        return self._snapshot

    # -- elements ---------------------------------------------------------------

    def identity(self):
        return GroupElement.identity(self.cover)

    def element(self, word):
        g = GroupElement.from_word(self.cover, word)
        return g

    def elements_up_to(self, max_len):
        els = elements_of_length_at_most(self.cover, max_len)
        return els

    def generators(self):
        """All directed crossing generators, as (index, GroupElement)."""
        out = []
        for t in range(self.tri.n_tet):
            for f in range(4):
                idx = 4 * t + f + 1
                if t == 0:
                    out.append((idx, self.element([idx])))
                else:
                    # conjugate the crossing into a loop through the base
                    path_in = self._tree_path(t)
                    word = path_in + [idx] + self._tree_path_back(
                        self.tri.gluings[t][f][0])
                    out.append((idx, self.element(word)))
        return out

    def _tree_path(self, t):
        # shortest dual path from tet 0 to tet t in the base triangulation
        prev = {0: None}
        frontier = [0]
        while frontier and t not in prev:
            nxt = []
            for a in frontier:
                for f in range(4):
                    b = self.tri.gluings[a][f][0]
                    if b not in prev:
                        prev[b] = (a, f)
                        nxt.append(b)
            frontier = nxt
        word = []
        cur = t
        while prev[cur] is not None:
            a, f = prev[cur]
            word.append(4 * a + f + 1)
            cur = a
        return list(reversed(word))

    def _tree_path_back(self, t):
        return [-w for w in reversed(self._tree_path(t))]

    def check_orientation_class(self):
        """Orientation class per directed crossing generator."""
        classes, _flats, viol = generator_orientation_classes(self.tri)
        if classes is None:
            raise NoOrientation("; ".join(str(v) for v in viol))
        return classes

    # -- basic objects ------------------------------------------------------------

    def leaf(self, nid, slotname):
        return self.chart.leaf_at(nid, slotname)

    def tetra_rectangle(self, nid):
        ch = self.chart
        F = self.flats[self.cover.nodes[nid].base]
        cusp = {lab: self.cover.vertex_rep(nid, F[lab]) for lab in TRIPLE_AT}
        def chain(lab):
            a, b, c = TRIPLE_AT[lab]
            return Wall.chain(ch.leaf_at(nid, a), ch.leaf_at(nid, c),
                              cusp[lab])
        return Rectangle(west=chain("W"), east=chain("E"),
                         south=chain("S"), north=chain("N"),
                         kind="Tetrahedron", chart=nid)

    def point(self, hleaf, vleaf):
        charts = self.chart.charts_with_point(hleaf, vleaf)
        if not charts:
            raise RegionNotExpanded(
                "no materialized rectangle witnesses this intersection")
        return PlanePoint(h=hleaf, v=vleaf, chart=charts[0])

    def corner_point(self, R, corner):
        """Corner of a tetrahedron rectangle as a PlanePoint just outside
        it: NW = west-upper ray meets north-west ray, etc."""
        w = {"NW": (R.north.leaves[0], R.west.leaves[1]),
             "NE": (R.north.leaves[1], R.east.leaves[1]),
             "SW": (R.south.leaves[0], R.west.leaves[0]),
             "SE": (R.south.leaves[1], R.east.leaves[0])}[corner]
        h, v = w
        return PlanePoint(h=h, v=v, chart=R.chart)

    # -- deck action -----------------------------------------------------------------

    def act_node(self, g, nid):
        out = g.act_node(nid, create=not self.cover.frozen)
        self._refresh()
        return out

    def act_leaf(self, g, leaf):
        nid, slotname = leaf.slot
        out = self.act_node(g, nid)
        return self.chart.leaf_at(out, slotname)

    def act_cusp(self, g, cusp):
        nid, v = cusp
        out = self.act_node(g, nid)
        return self.cover.vertex_rep(out, v)

    def act_point(self, g, x):
        return PlanePoint(h=self.act_leaf(g, x.h), v=self.act_leaf(g, x.v),
                          chart=self.act_node(g, x.chart))

    def act_wall(self, g, wall):
        leaves = tuple(self.act_leaf(g, l) for l in wall.leaves)
        cusp = self.act_cusp(g, wall.cusp) if wall.cusp is not None else None
        return Wall(leaves=leaves, cusp=cusp)

    def act_rectangle(self, g, R):
        if R.kind == "Tetrahedron" and R.chart is not None:
            return self.tetra_rectangle(self.act_node(g, R.chart))
        return Rectangle(west=self.act_wall(g, R.west),
                         east=self.act_wall(g, R.east),
                         south=self.act_wall(g, R.south),
                         north=self.act_wall(g, R.north),
                         kind=R.kind, chart=None)

    def act(self, g, obj):
        if isinstance(obj, Leaf):
            return self.act_leaf(g, obj)
        if isinstance(obj, PlanePoint):
            return self.act_point(g, obj)
        if isinstance(obj, Rectangle):
            return self.act_rectangle(g, obj)
        if isinstance(obj, Wall):
            return self.act_wall(g, obj)
        if isinstance(obj, tuple):  # cusp or node reference
            return self.act_cusp(g, obj)
        if isinstance(obj, int):
            return self.act_node(g, obj)
        raise TypeError("cannot act on %r" % (obj,))

    # -- order predicates -----------------------------------------------------------

    def leaf_side(self, l, x):
        """'Left', 'Right' or 'On': position of point x relative to leaf
        l, seen along l's positive direction."""
        mine = x.h if l.foliation == 1 else x.v
        if mine == l:
            return "On"
        rel = self.chart.order(mine, l)
        if rel == "NONSEP":
            rel = self._nonsep_side(mine, l)
        if rel is None:
            raise RegionNotExpanded(
                "side of point not determined by expanded cells")
        if l.foliation == 2:
            return "Left" if rel == "W" else "Right"
        return "Left" if rel == "N" else "Right"

    def _nonsep_side(self, v, l):
        """Side of l on which its nonseparated partner v lies: the side
        carrying their common fit leaf, read off any chart that l bounds
        and the fit leaf crosses."""
        from .chart import SLOT_CUSP_LABEL
        ch = self.chart
        cusp, i = ch.ladder_pos[l.slot]
        _, j = ch.ladder_pos[v.slot]
        mid = ch.ladders[cusp][(i + j) // 2]
        for nid, slotname in ch.bounds.get(l.slot, ()):
            if mid in ch.chart_cross[nid]:
                lab = SLOT_CUSP_LABEL[slotname]
                if l.foliation == 2 and lab in ("W", "E"):
                    return "E" if lab == "W" else "W"
                if l.foliation == 1 and lab in ("S", "N"):
                    return "N" if lab == "S" else "S"
        return None

    def oriented_ray(self, x, foliation, sign):
        """The ray of x's leaf in the given foliation on the positive
        (sign=+1) or negative side."""
        leaf = x.h if foliation == 1 else x.v
        pos = "E" if foliation == 1 else "N"
        neg = "W" if foliation == 1 else "S"
        return Ray(leaf=leaf, toward=pos if sign > 0 else neg)

    # -- wall and rectangle predicates ----------------------------------------------

    def leaf_vs_wall(self, leaf, wall):
        """'LT' (west/south of the wall), 'GT', 'ON', 'NONSEP' or None."""
        if leaf in wall.leaves:
            return "ON"
        fol = leaf.foliation
        lo = "W" if fol == 2 else "S"
        hi = "E" if fol == 2 else "N"
        saw_nonsep = False
        for b in wall.leaves:
            rel = self.chart.order(leaf, b)
            if rel == lo:
                return "LT"
            if rel == hi:
                return "GT"
            if rel == "NONSEP":
                saw_nonsep = True
        if saw_nonsep:
            return "NONSEP"
        for b in wall.leaves:
            self.unknown_pairs.append((leaf, b))
        return None

    def resolve_pending(self, rounds=2, radius=2):
        """Materialize cells around the cusp regions of leaves whose
        relative order was requested but not yet forced, then rebuild.

        Separating walls live at the leaves' own cusps, so the targeted
        expansion goes around their bound charts (and those of their
        nonseparated partners)."""
        if self.cover.frozen:
            self.unknown_pairs = []
            return False
        progressed = False
        for _ in range(rounds):
            pending, self.unknown_pairs = self.unknown_pairs, []
            if not pending:
                break
            targets = set()
            for a, b in pending:
                for leaf in (a, b):
                    leaf = self.chart.leaves.get(leaf.slot, leaf)
                    for nid, _s in self.chart.bounds.get(leaf.slot, ()):
                        targets.add(nid)
                    pos = self.chart.ladder_pos.get(leaf.slot)
                    if pos:
                        for p in self.chart.nonseparated_partners(leaf):
                            for nid, _s in self.chart.bounds.get(p.slot, ()):
                                targets.add(nid)
            if not targets:
                break
            frontier = set(targets)
            for _r in range(radius):
                new = set()
                for nid in frontier:
                    for f in range(4):
                        new.add(self.cover.neighbor(nid, f))
                frontier = new
            self._refresh()
            progressed = True
            # recheck: querying the pairs again may repopulate the list
            for a, b in pending:
                self.chart.order(a, b)
        return progressed

    def wall_cmp(self, A, B):
        """'EQ', 'SHARED' (same cusp, overlapping), 'LT' (A on the
        west/south side of B), 'GT', or None."""
        sa, sb = set(A.leaves), set(B.leaves)
        if sa == sb:
            return "EQ"
        if sa & sb:
            return "SHARED"
        votes = set()
        for a in A.leaves:
            r = self.leaf_vs_wall(a, B)
            if r in ("LT", "GT"):
                votes.add(r)
            elif r == "NONSEP":
                votes.add("SHARED")
        if votes == {"LT"}:
            return "LT"
        if votes == {"GT"}:
            return "GT"
        if "SHARED" in votes and not ({"LT", "GT"} & votes):
            return "SHARED"
        if len(votes) > 1:
            raise AssertionError("inconsistent wall comparison %r %r" % (A, B))
        return None

    def interval_relation(self, R, Q, axis):
        """Relation of the axis-intervals of two rectangles.

        axis 'x' compares west/east walls (the F2 saturations), axis 'y'
        south/north (the F1 saturations).  Returns one of 'disjoint',
        'equal', 'inside' (R strictly inside Q), 'contains',
        'overlap_lo', 'overlap_hi', 'shared', or None.
        """
        if axis == "x":
            rl, rh, ql, qh = R.west, R.east, Q.west, Q.east
        else:
            rl, rh, ql, qh = R.south, R.north, Q.south, Q.north
        ll = self.wall_cmp(rl, ql)
        hh = self.wall_cmp(rh, qh)
        lh = self.wall_cmp(rl, qh)
        hl = self.wall_cmp(rh, ql)
        if hl in ("LT", "EQ", "SHARED"):
            return "disjoint"
        if lh in ("GT", "EQ", "SHARED"):
            return "disjoint"
        if None in (ll, hh):
            return None
        if ll == "EQ" and hh == "EQ":
            return "equal"
        if ll in ("EQ", "SHARED") or hh in ("EQ", "SHARED"):
            return "shared"
        if ll == "GT" and hh == "LT":
            return "inside"
        if ll == "LT" and hh == "GT":
            return "contains"
        if ll == "LT" and hh == "LT":
            return "overlap_lo"
        if ll == "GT" and hh == "GT":
            return "overlap_hi"
        raise AssertionError("unreachable interval relation")

    def point_in_rectangle(self, x, R):
        """Strict interior membership; None when undetermined."""
        out = True
        for leaf, wlo, whi in ((x.v, R.west, R.east),
                               (x.h, R.south, R.north)):
            a = self.leaf_vs_wall(leaf, wlo)
            b = self.leaf_vs_wall(leaf, whi)
            if a in ("ON", "NONSEP") or b in ("ON", "NONSEP"):
                return False
            if a == "LT" or b == "GT":
                return False
            if a is None or b is None:
                out = None
        return out

    def rectangles_with_point(self, x):
        return self.chart.charts_with_point(x.h, x.v)

    # -- saturation boundary ----------------------------------------------------------

    def saturation_boundary(self, r, r2):
        """Boundary description of the mutual transverse saturation of
        two same-foliation rays, on the far side along their directions.

        For horizontal rays pointing East: the vertical leaves crossing
        both leaves are bounded eastward either by a vertical leaf making
        a perfect fit with the East end of one input leaf and crossing
        the other (PerfectFitSide), or by a nonseparated pair of vertical
        leaves ending at a cusp strictly between the inputs, whose common
        fit leaf points West into the saturated region (NonseparatedPair).
        """
        if r.leaf.foliation != r2.leaf.foliation:
            raise ValueError("rays must lie in one foliation")
        if r.leaf == r2.leaf:
            return PerfectFitSide(leaf=r.leaf, fits_ray_of=r.leaf,
                                  degenerate=True)
        if r.toward != r2.toward:
            raise ValueError("rays must point the same way")
        ch = self.chart
        if not (ch.crossings[r.leaf.slot] & ch.crossings[r2.leaf.slot]):
            raise EmptySaturation("no common transversal leaf in the window")
        # case (a): an input ray is itself a cusp end; its perfect-fit
        # partner crossing the other leaf bounds the saturation there.
        for ray, other in ((r, r2), (r2, r)):
            if ray.is_cusp_end:
                cusp, i = ch.ladder_pos[ray.leaf.slot]
                path = ch.ladders[cusp]
                for j in (i - 1, i + 1):
                    if 0 <= j < len(path):
                        v = ch.leaves[path[j]]
                        if ch.crossings[v.slot] & \
                                ch.crossings[other.leaf.slot]:
                            return PerfectFitSide(leaf=v,
                                                  fits_ray_of=ray.leaf)
                raise RegionNotExpanded(
                    "perfect-fit partner at the ray end is outside the "
                    "window")
        # case (b): both relevant rays are fit-free; the boundary is a
        # nonseparated pair at a cusp strictly between the leaves.
        rel = ch.order(r.leaf, r2.leaf)
        if rel is None:
            raise RegionNotExpanded("input leaves not yet comparable")
        lo_dir = ("S", "N") if r.leaf.foliation == 1 else ("W", "E")
        lo, hi = (r, r2) if rel == lo_dir[0] else (r2, r)
        toward_hi, toward_lo = ("N", "S") if r.leaf.foliation == 1 \
            else ("E", "W")
        candidates = []
        for cusp, path in ch.ladders.items():
            for k in range(1, len(path) - 1):
                mid = ch.leaves[path[k]]
                if mid.foliation != r.leaf.foliation:
                    continue
                if mid.cusp_end != r.toward:
                    continue
                if self._between(mid, lo.leaf, hi.leaf) is not True:
                    continue
                a = ch.leaves[path[k - 1]]
                b = ch.leaves[path[k + 1]]
                if a.cusp_end == toward_hi and b.cusp_end == toward_lo:
                    a, b = a, b
                elif b.cusp_end == toward_hi and a.cusp_end == toward_lo:
                    a, b = b, a
                else:
                    continue
                # a ends at the cusp from the lo side and must cross lo;
                # b symmetrically crosses hi.
                if not (ch.crossings[a.slot] & ch.crossings[lo.leaf.slot]):
                    continue
                if not (ch.crossings[b.slot] & ch.crossings[hi.leaf.slot]):
                    continue
                candidates.append((a, mid, b))
        if not candidates:
            raise RegionNotExpanded(
                "saturation boundary outside the expanded window")
        best = self._first_blocker(candidates, r.toward)
        a, mid, b = best
        return NonseparatedPair(l1=a, l2=b, common_fit_leaf=mid)

    def _first_blocker(self, candidates, toward):
        """The blocking notch nearest the saturated region: minimal in
        the ray direction among the candidates' boundary leaves."""
        if len(candidates) == 1:
            return candidates[0]
        order = self.chart.order
        lo_of = {"E": "W", "W": "E", "N": "S", "S": "N"}[toward]
        best = candidates[0]
        for cand in candidates[1:]:
            rel = order(cand[0], best[0])
            if rel is None:
                raise RegionNotExpanded(
                    "blocking notches not yet comparable")
            if rel == lo_of:
                best = cand
        return best

    def _between(self, leaf, lo, hi):
        x = self.chart.order(leaf, lo)
        y = self.chart.order(leaf, hi)
        if x is None or y is None:
            return None
        if "EQ" in (x, y):
            return False
        strict = {"W", "E", "S", "N"}
        if x not in strict or y not in strict:
            return None
        return x != y


def _opposite(d):
    return {"N": "S", "S": "N", "E": "W", "W": "E"}[d]
