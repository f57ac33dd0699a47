"""The loom chart of a veering universal cover.

Every lifted tetrahedron T carries an open rectangle R(T) in the induced
bifoliated plane, with one cusp (lifted ideal vertex) on each side.  The
chart fixes, per base tetrahedron, a flattening: which vertex sits at the
West/East (bottom edge pair) and South/North (top edge pair) positions of
the rectangle.  Twelve named leaf slots describe the boundary rays and
the crossing leaves at the four cusps:

* side chains:  vW-, vW+ (west), vE-, vE+ (east) are vertical rays;
  hSw, hSe (south), hNw, hNe (north) are horizontal rays;
* crossing leaves: hW, hE (horizontal, ending at the W/E cusps), vS, vN
  (vertical, ending at the S/N cusps).

A face gluing identifies slots of the two rectangles; the gluing falls
into one of four cases determined by which upper face is crossed and the
color of the lower tetrahedron's top edge.  All leaf bookkeeping (leaf
equality, cusp ladders, which leaves cross which rectangles, and the
west/east and south/north order oracles) is derived from these local
rules by closure.

Order semantics: a relation between two leaves is reported only when it
is forced by materialized cells, i.e. derivable from "a side chain of a
rectangle separates it from everything crossing that rectangle" plus
ladder adjacency and transitivity.  Everything else raises
RegionNotExpanded at the query layer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NoOrientation, RegionNotExpanded
from .veering import EDGE_VERTICES, Violation, edge_between, pi_pair

LABELS = ("W", "E", "S", "N")

# slots listed in ladder order at each cusp position
TRIPLE_AT = {
    "W": ("vW-", "hW", "vW+"),
    "E": ("vE-", "hE", "vE+"),
    "S": ("hSw", "vS", "hSe"),
    "N": ("hNw", "vN", "hNe"),
}
SLOT_CUSP_LABEL = {s: lab for lab, slots in TRIPLE_AT.items() for s in slots}
CROSSING_SLOTS = ("hW", "hE", "vS", "vN")
ALL_SLOTS = tuple(s for lab in LABELS for s in TRIPLE_AT[lab])

# direction of the ray that terminates at the slot's cusp
CUSP_END = {
    "vS": "S", "vN": "N", "hW": "W", "hE": "E",
    "vW-": "N", "vW+": "S", "vE-": "N", "vE+": "S",
    "hSw": "E", "hSe": "W", "hNw": "E", "hNe": "W",
}

# Gluing cases, keyed by (upper-face label in the lower tet, color of the
# lower tet's top edge).  "swap" is the label transposition carrying lower
# labels to upper labels; "corner" identifies (lower slot, upper slot) at
# the shared corner cusp; at the two fixed labels all three slots match by
# name.  Windows state which markers of one chart cross the other chart:
# lower verticals must lie strictly on the given side of the lower anchor
# slot; upper horizontals strictly on the given side of the upper anchor.
CASES = {
    ("W", "red"): dict(
        swap=("W", "S"), corner=(("vS", "vW+"), ("hSe", "hW")),
        fixed=("E", "N"), lower_v=("E", "vS"), upper_h=("N", "hW")),
    ("E", "red"): dict(
        swap=("E", "N"), corner=(("vN", "vE-"), ("hNw", "hE")),
        fixed=("W", "S"), lower_v=("W", "vN"), upper_h=("S", "hE")),
    ("W", "blue"): dict(
        swap=("W", "N"), corner=(("vN", "vW-"), ("hNe", "hW")),
        fixed=("E", "S"), lower_v=("E", "vN"), upper_h=("S", "hW")),
    ("E", "blue"): dict(
        swap=("E", "S"), corner=(("vS", "vE+"), ("hSw", "hE")),
        fixed=("W", "N"), lower_v=("W", "vS"), upper_h=("N", "hE")),
}


def _apply_swap(swap, label):
    a, b = swap
    if label == a:
        return b
    if label == b:
        return a
    return label


# ---------------------------------------------------------------------------
# Flattenings


def compute_flattenings(tri):
    """Assign the W/E/S/N chart labels to each base tetrahedron.

    Returns (flats, violations): flats[t] maps label -> vertex index.
    Gluings must relate flattenings exactly by the case table; a gluing
    that only matches after rotating one chart by half a turn means that
    deck transformations reverse the leafwise orientations, which the
    chart refuses (reported as a violation).
    """
    if not tri.colors:
        return None, [Violation("VeeringViolation",
                                "edge coloring unavailable")]
    flats = [None] * tri.n_tet
    violations = []

    def seed(t):
        pa = EDGE_VERTICES[pi_pair(tri.angles[t])[0]]
        pb = EDGE_VERTICES[pi_pair(tri.angles[t])[1]]
        for bot, top in ((pa, pb), (pb, pa)):
            w, e = sorted(bot)
            for s, n in (sorted(top), sorted(top)[::-1]):
                F = {"W": w, "E": e, "S": s, "N": n}
                if _flattening_valid(tri, t, F):
                    return F
        return None

    def _predicted_upper(t, f_label, F, perm):
        color = tri.edge_color(t, F["S"], F["N"])
        case = CASES[(f_label, color)]
        G = {}
        for lab in LABELS:
            G[_apply_swap(case["swap"], lab)] = perm[F[lab]]
        return G, case

    F0 = seed(0)
    if F0 is None:
        return None, [Violation("ChartViolation",
                                "no valid flattening for tet 0")]
    flats[0] = F0
    stack = [0]
    seen = {0}
    while stack:
        t = stack.pop()
        F = flats[t]
        label_of = {v: lab for lab, v in F.items()}
        for f in range(4):
            t2, perm = tri.gluings[t][f]
            f_label = label_of[f]
            if f_label in ("W", "E"):
                G, _case = _predicted_upper(t, f_label, F, perm)
            else:
                # f is a lower face of t; t2 sits below.  Work out t2's
                # flattening from the inverse of the case that t2 -> t
                # would use.  The case is keyed by data of the LOWER tet
                # t2, which we don't know yet, so invert: t's bottom
                # edge color and which of t's lower faces f is.
                G = _predicted_lower(tri, t, f_label, F, perm)
                if G is None:
                    violations.append(Violation(
                        "ChartViolation",
                        "gluing at tet %d face %d admits no chart case"
                        % (t, f)))
                    continue
            if not _flattening_valid(tri, t2, G):
                violations.append(Violation(
                    "ChartViolation",
                    "induced flattening of tet %d via tet %d face %d is "
                    "not color-consistent" % (t2, t, f)))
                continue
            if t2 not in seen:
                flats[t2] = G
                seen.add(t2)
                stack.append(t2)
            elif flats[t2] != G:
                if flats[t2] == _rotate(G):
                    violations.append(Violation(
                        "OrientationViolation",
                        "a deck transformation reverses the leafwise "
                        "orientations (gluing tet %d face %d)" % (t, f)))
                else:
                    violations.append(Violation(
                        "ChartViolation",
                        "inconsistent flattening at tet %d via tet %d "
                        "face %d" % (t2, t, f)))
    if violations:
        return None, violations
    return flats, []


def _rotate(F):
    return {"W": F["E"], "E": F["W"], "S": F["N"], "N": F["S"]}


def _flattening_valid(tri, t, F):
    """{W,E} and {S,N} must be the two pi-edge pairs (in either role) and
    the four equatorial positions must carry the colors blue, red, blue,
    red at (W,S), (S,E), (E,N), (N,W)."""
    pa = set(EDGE_VERTICES[pi_pair(tri.angles[t])[0]])
    pb = set(EDGE_VERTICES[pi_pair(tri.angles[t])[1]])
    we, sn = {F["W"], F["E"]}, {F["S"], F["N"]}
    if not ((we == pa and sn == pb) or (we == pb and sn == pa)):
        return False
    want = {("W", "S"): "blue", ("S", "E"): "red",
            ("E", "N"): "blue", ("N", "W"): "red"}
    for (a, b), color in want.items():
        if tri.edge_color(t, F[a], F[b]) != color:
            return False
    return True


def _predicted_lower(tri, t_upper, f_label, F_up, perm):
    """Flattening of the tet below t_upper across its lower face.

    f_label is 'S' or 'N' (the face of t_upper opposite that vertex);
    the case is determined by (which lower face, bottom edge color of
    t_upper): see the case table read from the upper side.
    """
    cb = tri.edge_color(t_upper, F_up["W"], F_up["E"])
    key = {("S", "red"): ("W", "red"), ("N", "red"): ("E", "red"),
           ("N", "blue"): ("W", "blue"), ("S", "blue"): ("E", "blue")}[
               (f_label, cb)]
    case = CASES[key]
    G = {}
    for lab in LABELS:
        # lower label lab sits at upper label swap(lab)
        G[lab] = perm[F_up[_apply_swap(case["swap"], lab)]]
    return G


def generator_orientation_classes(tri):
    """Per directed crossing generator: 'Aut+' or 'reverses'.

    With a consistent chart (compute_flattenings succeeded) every deck
    transformation preserves both leafwise orientations, so all
    generators report 'Aut+'.  When the only obstruction to consistency
    is rotation parity, the parity of each generator's loop decides its
    class.  Reflections cannot occur on orientable input.
    """
    flats, violations = compute_flattenings(tri)
    if flats is not None:
        return {4 * t + f + 1: "Aut+" for t in range(tri.n_tet)
                for f in range(4)}, flats, []
    only_rotation = all(v.kind == "OrientationViolation" for v in violations)
    if not only_rotation:
        return None, None, violations
    # redo the propagation tracking rotation parity per tet
    parity = {0: 0}
    flats2 = [None] * tri.n_tet
    # recompute ignoring rotation conflicts
    # (reuse the propagation but allow either form)
    tri2 = tri
    flats2[0] = _seed_any(tri2, 0)
    stack = [0]
    edge_parity = {}
    while stack:
        t = stack.pop()
        F = flats2[t]
        label_of = {v: lab for lab, v in F.items()}
        for f in range(4):
            t2, perm = tri2.gluings[t][f]
            f_label = label_of[f]
            if f_label in ("W", "E"):
                color = tri2.edge_color(t, F["S"], F["N"])
                case = CASES[(f_label, color)]
                G = {_apply_swap(case["swap"], lab): perm[F[lab]]
                     for lab in LABELS}
            else:
                G = _predicted_lower(tri2, t, f_label, F, perm)
            if flats2[t2] is None:
                flats2[t2] = G
                parity[t2] = parity[t]
                stack.append(t2)
                edge_parity[(t, f)] = 0
            else:
                if flats2[t2] == G:
                    edge_parity[(t, f)] = 0
                elif flats2[t2] == _rotate(G):
                    edge_parity[(t, f)] = 1
                else:
                    return None, None, violations
    classes = {}
    for t in range(tri.n_tet):
        for f in range(4):
            t2, _ = tri.gluings[t][f]
            p = edge_parity.get((t, f))
            if p is None:
                p = edge_parity.get(_partner(tri, t, f))
            loop = parity[t] ^ (p or 0) ^ parity[t2]
            classes[4 * t + f + 1] = "Aut+" if loop == 0 else "reverses"
    return classes, None, violations


def _partner(tri, t, f):
    t2, perm = tri.gluings[t][f]
    return (t2, perm[f])


def _seed_any(tri, t):
    pa = EDGE_VERTICES[pi_pair(tri.angles[t])[0]]
    pb = EDGE_VERTICES[pi_pair(tri.angles[t])[1]]
    for bot, top in ((pa, pb), (pb, pa)):
        w, e = sorted(bot)
        for s, n in (sorted(top), sorted(top)[::-1]):
            F = {"W": w, "E": e, "S": s, "N": n}
            if _flattening_valid(tri, t, F):
                return F
    raise AssertionError("no flattening; validate first")


# ---------------------------------------------------------------------------
# The chart snapshot


@dataclass(frozen=True)
class Leaf:
    """A leaf handle: the canonical (node id, slot) of its class."""

    slot: tuple
    foliation: int       # 1 = horizontal (F1), 2 = vertical (F2)
    cusp: tuple          # lifted-vertex representative
    cusp_end: str        # direction of the ray ending at the cusp

    def __repr__(self):
        return "Leaf(F%d %s@%d ->%s)" % (
            self.foliation, self.slot[1], self.slot[0], self.cusp_end)


class ChartSnapshot:
    """Leaf classes, cusp ladders, crossing sets and order oracles for
    the currently materialized part of the cover.  Read-only."""

    def __init__(self, cover, flats, prev=None):
        self.cover = cover
        self.tri = cover.tri
        self.flats = flats
        self._slot_parent = {}
        self._building = False
        self._identify_all()
        self._ladder_closure()
        self._build_leaves(prev)
        self._build_ladders()
        self._flood_crossings(prev)

    # -- slot union-find ----

    def _sfind(self, s):
        p = self._slot_parent.setdefault(s, s)
        path = []
        while p != self._slot_parent.get(p, p):
            path.append(p)
            p = self._slot_parent[p]
        for q in path:
            self._slot_parent[q] = p
        if self._slot_parent.get(s, s) != p:
            self._slot_parent[s] = p
        return p

    def _sunion(self, a, b):
        ra, rb = self._sfind(a), self._sfind(b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            self._slot_parent[rb] = ra

    def _identify_all(self):
        cov = self.cover
        for node in cov.nodes:
            for s in ALL_SLOTS:
                self._sfind((node.nid, s))
        seen = set()
        for node in cov.nodes:
            for f in range(4):
                nb = node.nbr[f]
                if nb is None or (node.nid, f) in seen:
                    continue
                _, perm = self.tri.gluings[node.base][f]
                seen.add((node.nid, f))
                seen.add((nb, perm[f]))
                self._identify_arc(node.nid, f, nb)

    def _glue_case(self, nid, f):
        """Orient the gluing across face f of node nid.

        Returns (lower_nid, upper_nid, case).  The face is upper in the
        lower tet; its label there is W or E.
        """
        cov = self.cover
        node = cov.nodes[nid]
        nb = node.nbr[f]
        F = self.flats[node.base]
        label_of = {v: lab for lab, v in F.items()}
        f_label = label_of[f]
        if f_label in ("W", "E"):
            color = self.tri.edge_color(node.base, F["S"], F["N"])
            return nid, nb, CASES[(f_label, color)]
        # f lower in nid: the neighbor is the lower tet of this gluing
        nb_node = cov.nodes[nb]
        _, perm = self.tri.gluings[node.base][f]
        f2 = perm[f]
        F2 = self.flats[nb_node.base]
        label2 = {v: lab for lab, v in F2.items()}[f2]
        color2 = self.tri.edge_color(nb_node.base, F2["S"], F2["N"])
        return nb, nid, CASES[(label2, color2)]

    def _identify_arc(self, nid, f, nb):
        lower, upper, case = self._glue_case(nid, f)
        for lo_slot, up_slot in case["corner"]:
            self._sunion((lower, lo_slot), (upper, up_slot))
        for lab in case["fixed"]:
            for s in TRIPLE_AT[lab]:
                self._sunion((lower, s), (upper, s))

    def _ladder_closure(self):
        """Two cusp windows sharing their center and one flank share the
        other flank: a ladder slot has a unique neighbor on each side.
        Close the slot classes under this rule."""
        while True:
            keymap = {}
            merged = False
            for node in self.cover.nodes:
                F = self.flats[node.base]
                for lab in LABELS:
                    a, b, c = (self._sfind((node.nid, s))
                               for s in TRIPLE_AT[lab])
                    if a == c:
                        raise AssertionError("degenerate cusp window")
                    for key, val in (((a, b), c), ((c, b), a)):
                        prev = keymap.get(key)
                        if prev is None:
                            keymap[key] = val
                        elif prev != val:
                            self._sunion(prev, val)
                            merged = True
                if merged:
                    break
            if not merged:
                return

    # -- leaves ----

    def _build_leaves(self, prev=None):
        cov = self.cover
        classes = {}
        for node in cov.nodes:
            for s in ALL_SLOTS:
                classes.setdefault(self._sfind((node.nid, s)), []).append(
                    (node.nid, s))
        self.leaves = {}
        self.crossings = {}      # leaf slot-rep -> set of nids
        self.bounds = {}         # leaf slot-rep -> set of (nid, slotname)
        self.chart_cross = {n.nid: set() for n in cov.nodes}
        # crossings already derived on a previous snapshot stay true
        carried = {}
        if prev is not None:
            for old_rep, xs in prev.crossings.items():
                carried.setdefault(self._sfind(old_rep), set()).update(xs)
        for rep, slots in sorted(classes.items()):
            fol = 1 if rep[1][0] == "h" else 2
            cusps = set()
            ends = set()
            for nid, s in slots:
                if (s[0] == "h") != (fol == 1):
                    raise AssertionError("foliation mismatch in leaf class")
                lab = SLOT_CUSP_LABEL[s]
                cusps.add(cov.vertex_rep(nid, self.flats[
                    cov.nodes[nid].base][lab]))
                ends.add(CUSP_END[s])
            if len(cusps) != 1 or len(ends) != 1:
                raise AssertionError(
                    "leaf class with inconsistent cusp data: %r" % slots)
            leaf = Leaf(slot=rep, foliation=fol, cusp=cusps.pop(),
                        cusp_end=ends.pop())
            self.leaves[rep] = leaf
            xs = {nid for nid, s in slots if s in CROSSING_SLOTS}
            xs |= carried.get(rep, set())
            bs = {(nid, s) for nid, s in slots if s not in CROSSING_SLOTS}
            self.crossings[rep] = xs
            self.bounds[rep] = bs
            for nid in xs:
                self.chart_cross[nid].add(rep)

    def _add_crossing(self, rep, nid):
        self.crossings[rep].add(nid)
        self.chart_cross[nid].add(rep)
        self._index_crossing(rep, nid)

    def leaf_at(self, nid, slotname):
        return self.leaves[self._sfind((nid, slotname))]

    # -- ladders ----

    def _build_ladders(self):
        adj = {}
        for node in self.cover.nodes:
            F = self.flats[node.base]
            for lab in LABELS:
                cusp = self.cover.vertex_rep(node.nid, F[lab])
                a, b, c = (self._sfind((node.nid, s)) for s in TRIPLE_AT[lab])
                table = adj.setdefault(cusp, {})
                table.setdefault(a, set()).add(b)
                table.setdefault(b, set()).update((a, c))
                table.setdefault(c, set()).add(b)
        self.ladders = {}
        for cusp, table in adj.items():
            for reps in table.values():
                if len(reps) > 2:
                    raise AssertionError("branching ladder at cusp %r" % (cusp,))
            ends = sorted(r for r, nbrs in table.items() if len(nbrs) == 1)
            if not ends:
                raise AssertionError("cyclic ladder at cusp %r" % (cusp,))
            start = ends[0]
            path = [start]
            prev, cur = None, start
            while True:
                nxt = [x for x in table[cur] if x != prev]
                if not nxt:
                    break
                prev, cur = cur, nxt[0]
                path.append(cur)
            if len(path) != len(table):
                raise AssertionError("disconnected ladder at cusp %r" % (cusp,))
            for i in range(len(path) - 1):
                if self.leaves[path[i]].foliation == \
                        self.leaves[path[i + 1]].foliation:
                    raise AssertionError("ladder does not alternate")
            self.ladders[cusp] = path
        self._orient_ladders()
        self.ladder_pos = {}
        for cusp, path in self.ladders.items():
            for i, rep in enumerate(path):
                self.ladder_pos[rep] = (cusp, i)

    def _orient_ladders(self):
        """Index every ladder counterclockwise around its ideal point.

        A cusp window at chart label W or N lists its slots in ccw order,
        at E or S in cw order; all windows of one cusp must agree.
        """
        votes = {}
        for node in self.cover.nodes:
            F = self.flats[node.base]
            for lab in LABELS:
                cusp = self.cover.vertex_rep(node.nid, F[lab])
                a, _, c = (self._sfind((node.nid, s)) for s in TRIPLE_AT[lab])
                want_ascending = lab in ("W", "N")
                votes.setdefault(cusp, []).append((a, c, want_ascending))
        for cusp, path in self.ladders.items():
            index = {rep: i for i, rep in enumerate(path)}
            decided = None
            for a, c, want in votes.get(cusp, ()):
                ascending = index[a] < index[c]
                ok = ascending == want
                if decided is None:
                    decided = ok
                elif decided != ok:
                    raise AssertionError(
                        "inconsistent ladder winding at cusp %r" % (cusp,))
            if decided is False:
                self.ladders[cusp] = path[::-1]

    def ladder_of(self, cusp):
        return [self.leaves[r] for r in self.ladders.get(cusp, [])]

    def nonseparated_partners(self, leaf):
        cusp, i = self.ladder_pos[leaf.slot]
        path = self.ladders[cusp]
        out = []
        for j in (i - 2, i + 2):
            if 0 <= j < len(path):
                out.append(self.leaves[path[j]])
        return out

    # -- crossings flood ----

    def _arcs(self):
        seen = set()
        for node in self.cover.nodes:
            for f in range(4):
                nb = node.nbr[f]
                if nb is None:
                    continue
                _, perm = self.tri.gluings[node.base][f]
                key = frozenset(((node.nid, f), (nb, perm[f])))
                if key in seen:
                    continue
                seen.add(key)
                yield node.nid, f, nb

    def _build_order_index(self):
        """Strict-order adjacency: _fwd[u] = leaves forced strictly on the
        high side (east/north) of u, _bwd the low side.  Seeded from the
        side-chain facts and maintained as crossings are added."""
        self._partners = {}
        for rep in self.leaves:
            self._partners[rep] = frozenset(self._with_partners(rep))
        self._chain_cache = {}
        for node in self.cover.nodes:
            for side in ("W", "E", "S", "N"):
                self._chain_cache[(node.nid, side)] = \
                    tuple(self._sfind((node.nid, s))
                          for s in self._SIDE_SLOTS[side])
        self._fwd = {rep: set() for rep in self.leaves}
        self._bwd = {rep: set() for rep in self.leaves}
        for node in self.cover.nodes:
            nid = node.nid
            for lo_side, hi_side in (("W", "E"), ("S", "N")):
                lo = self._chain_cache[(nid, lo_side)]
                hi = self._chain_cache[(nid, hi_side)]
                for b in lo:
                    self._fwd[b].update(hi)
                for b in hi:
                    self._bwd[b].update(lo)
        # winding facts: same-ladder leaves one full turn apart are
        # strictly ordered (see _ladder_order)
        for cusp, path in self.ladders.items():
            for i in range(len(path) - 4):
                u, w = path[i], path[i + 4]
                rel = self._ladder_order(u, w, i, i + 4)
                if rel in ("W", "S"):
                    self._fwd[u].add(w)
                    self._bwd[w].add(u)
                else:
                    self._fwd[w].add(u)
                    self._bwd[u].add(w)
        for rep, xs in self.crossings.items():
            for nid in xs:
                self._index_crossing(rep, nid)

    def _index_crossing(self, rep, nid):
        fol = self.leaves[rep].foliation
        lo_side, hi_side = ("W", "E") if fol == 2 else ("S", "N")
        lo = self._chain_cache[(nid, lo_side)]
        hi = self._chain_cache[(nid, hi_side)]
        self._fwd[rep].update(hi)
        self._bwd[rep].update(lo)
        for b in lo:
            self._fwd[b].add(rep)
        for b in hi:
            self._bwd[b].add(rep)

    def _flood_crossings(self, prev=None):
        self._building = True
        self._order_cache = {}
        self._build_order_index()
        if prev is not None:
            # decided order facts persist; remap class representatives
            for (u, w), rel in prev._order_cache.items():
                if rel is None:
                    continue
                nu, nw = self._sfind(u), self._sfind(w)
                if nu != nw:
                    self._order_cache[(nu, nw)] = rel
        arcs = []
        for nid, f, nb in self._arcs():
            lower, upper, case = self._glue_case(nid, f)
            arcs.append((lower, upper, case))
        # horizontals go up unconditionally, verticals go down
        # unconditionally; the reverse directions need an order check
        changed = True
        while changed:
            changed = False
            self._unresolved = set()
            self._round_unknowns = set()
            for lower, upper, case in arcs:
                for rep in list(self.chart_cross[lower]):
                    xs = self.crossings[rep]
                    if upper in xs:
                        continue
                    if self.leaves[rep].foliation == 1:
                        self._add_crossing(rep, upper)
                        changed = True
                    else:
                        side, anchor_slot = case["lower_v"]
                        anchor = self._sfind((lower, anchor_slot))
                        if anchor == rep:
                            continue
                        rel = self._order(rep, anchor)
                        if rel is None:
                            self._unresolved.add((rep, lower, upper))
                        elif rel == side:
                            self._add_crossing(rep, upper)
                            changed = True
                for rep in list(self.chart_cross[upper]):
                    xs = self.crossings[rep]
                    if lower in xs:
                        continue
                    if self.leaves[rep].foliation == 2:
                        self._add_crossing(rep, lower)
                        changed = True
                    else:
                        side, anchor_slot = case["upper_h"]
                        anchor = self._sfind((upper, anchor_slot))
                        if anchor == rep:
                            continue
                        rel = self._order(rep, anchor)
                        if rel is None:
                            self._unresolved.add((rep, upper, lower))
                        elif rel == side:
                            self._add_crossing(rep, lower)
                            changed = True
        self._building = False

    # -- order oracle ----

    # side chain slot names per chart side
    _SIDE_SLOTS = {
        "W": ("vW-", "vW+"), "E": ("vE-", "vE+"),
        "S": ("hSw", "hSe"), "N": ("hNw", "hNe"),
    }

    def _chain_leaves(self, nid, side):
        return tuple(self._sfind((nid, s)) for s in self._SIDE_SLOTS[side])

    def _order(self, u, w):
        """Forced order of two same-foliation leaf classes.

        Returns 'W'/'E' for verticals ('u is strictly west/east of w'),
        'S'/'N' for horizontals, 'EQ', 'NONSEP', or None when the
        materialized cells do not force an answer.
        """
        if u == w:
            return "EQ"
        fol = self.leaves[u].foliation
        if fol != self.leaves[w].foliation:
            raise ValueError("order of leaves in different foliations")
        key = (u, w)
        if key in self._order_cache:
            return self._order_cache[key]
        lo, hi = ("W", "E") if fol == 2 else ("S", "N")
        pu, pw = self.ladder_pos.get(u), self.ladder_pos.get(w)
        if pu and pw and pu[0] == pw[0]:
            res = self._ladder_order(u, w, pu[1], pw[1])
            self._order_cache[key] = res
            self._order_cache[(w, u)] = {"W": "E", "E": "W", "S": "N",
                                         "N": "S"}.get(res, res)
            return res
        if self._building and key in self._round_unknowns:
            return None
        if self._reaches(u, w, fol, forward=True):
            res = lo
        elif self._reaches(u, w, fol, forward=False):
            res = hi
        else:
            res = None
        # while the crossing flood is still running, an unknown answer may
        # become known later; remember it only for the current round
        if res is None and self._building:
            self._round_unknowns.add(key)
            self._round_unknowns.add((w, u))
            return None
        self._order_cache[key] = res
        if res in (lo, hi):
            self._order_cache[(w, u)] = hi if res == lo else lo
        else:
            self._order_cache[(w, u)] = res
        return res

    def _ladder_order(self, u, w, i, j):
        """Order of two same-foliation leaves on one ladder, indexed ccw.

        Distance 2 mod 4 apart: no transversal crosses both and neither
        separates the other (distance exactly 2 is the nonseparated
        pair).  Distance 0 mod 4: the winding forces a strict order that
        depends on the approach type.
        """
        d = j - i
        assert d % 2 == 0 and d != 0
        if d % 4 != 0:
            return "NONSEP"
        leaf = self.leaves[u]
        lower_is = {("N", 2): "W", ("S", 2): "E",
                    ("W", 1): "S", ("E", 1): "N"}[
                        (leaf.cusp_end, leaf.foliation)]
        if d > 0:
            return lower_is
        return {"W": "E", "E": "W", "S": "N", "N": "S"}[lower_is]

    def _with_partners(self, rep):
        out = {rep}
        pos = self.ladder_pos.get(rep)
        if pos:
            cusp, i = pos
            path = self.ladders[cusp]
            for j in (i - 2, i + 2):
                if 0 <= j < len(path) and \
                        self.leaves[path[j]].foliation == \
                        self.leaves[rep].foliation:
                    out.add(path[j])
        return out

    _BFS_CAP = 6000

    def _reaches(self, u, w, fol, forward):
        """Is there a chain of forced strict relations u < ... < w
        (forward) or u > ... > w?  'less' means west for verticals and
        south for horizontals."""
        table = self._fwd if forward else self._bwd
        targets = self._partners[w]
        frontier = list(self._partners[u])
        seen = set(frontier)
        while frontier:
            nxt = []
            for cur in frontier:
                for leaf2 in table[cur]:
                    if leaf2 in targets:
                        return True
                    if leaf2 not in seen:
                        seen.add(leaf2)
                        nxt.append(leaf2)
                        for rep2 in self._partners[leaf2]:
                            if rep2 in targets:
                                return True
                            if rep2 not in seen:
                                seen.add(rep2)
                                nxt.append(rep2)
            if len(seen) > self._BFS_CAP:
                return False
            frontier = nxt
        return False

    # -- public order helpers ----

    def order_or_raise(self, u, w):
        rel = self._order(u.slot if isinstance(u, Leaf) else u,
                          w.slot if isinstance(w, Leaf) else w)
        if rel is None:
            raise RegionNotExpanded(
                "relative position not determined by expanded cells")
        return rel

    def order(self, u, w):
        return self._order(u.slot if isinstance(u, Leaf) else u,
                           w.slot if isinstance(w, Leaf) else w)

    def leaf_crossings(self, leaf):
        return self.crossings[leaf.slot]

    def charts_with_point(self, hleaf, vleaf):
        return sorted(self.crossings[hleaf.slot] & self.crossings[vleaf.slot])
