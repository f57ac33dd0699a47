"""Lazy universal cover of a validated triangulation.

Lifted tetrahedra are nodes of the dual graph of the cover, created by
breadth-first expansion or by walking words.  Going around a lifted edge
must close up after (base edge degree) tetrahedra; the engine enforces
this eagerly ("folding"), so a neighbor request first tries to close a
fan before creating a fresh node.  Deck transformations act freely and
simply transitively on the lifts of the base tetrahedron, so a group
element is stored as the node its word reaches from the base lift.

Words are sequences of directed face crossings.  The crossing generator
for face f of tet t is written as the integer 4*t + f + 1, negated for
the reverse crossing; a word is a sequence of such integers.  The
canonically folded form of a word is the shortest face-path from the
base lift to the node it reaches.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import RegionNotExpanded, ResourceLimit
from .veering import EDGE_VERTICES, edge_between


@dataclass
class Node:
    """A lifted tetrahedron.  path is the creation walk from the base
    lift (a valid face-path, not necessarily shortest); depth is the true
    dual-graph distance, refreshed by Cover._recompute_depths."""

    nid: int
    base: int
    depth: int
    path: tuple
    nbr: list = field(default_factory=lambda: [None] * 4)


class Cover:
    def __init__(self, tri, max_cells=None):
        if not tri.edge_classes:
            raise ValueError("triangulation must be validated first")
        self.tri = tri
        self.max_cells = max_cells
        self.nodes = [Node(nid=0, base=0, depth=0, path=())]
        self.frozen = False
        self.edge_degree = [len(m) for m in tri.edge_classes]
        self._edge_uf = {}    # lifted edges: union-find over (nid, edge)
        self._vertex_uf = {}  # lifted ideal vertices: over (nid, vertex)
        self._bfs_parent = None

    # -- union-find helpers --------------------------------------------------

    def _find(self, table, x):
        path = []
        p = table.setdefault(x, x)
        while p != table.get(p, p):
            path.append(p)
            p = table[p]
        for q in path:
            table[q] = p
        if table.get(x, x) != p:
            table[x] = p
        return p

    def edge_rep(self, nid, e):
        return self._find(self._edge_uf, (nid, e))

    def vertex_rep(self, nid, v):
        return self._find(self._vertex_uf, (nid, v))

    def _union(self, table, a, b):
        ra, rb = self._find(table, a), self._find(table, b)
        if ra != rb:
            if rb < ra:
                ra, rb = rb, ra
            table[rb] = ra

    # -- structure growth ----------------------------------------------------

    def _link(self, nid, f, nid2, f2):
        node, node2 = self.nodes[nid], self.nodes[nid2]
        assert node.nbr[f] is None and node2.nbr[f2] is None
        _, perm = self.tri.gluings[node.base][f]
        assert perm[f] == f2
        node.nbr[f] = nid2
        node2.nbr[f2] = nid
        for v in range(4):
            if v != f:
                self._union(self._vertex_uf, (nid, v), (nid2, perm[v]))
        for a in range(4):
            for b in range(a + 1, 4):
                if a != f and b != f:
                    self._union(self._edge_uf,
                                (nid, edge_between(a, b)),
                                (nid2, edge_between(perm[a], perm[b])))
        self._bfs_parent = None

    def _try_fan_closure(self, nid, f):
        """Close the fan around an edge of face f if only this gluing is
        missing from it.  Returns the far node id, or None."""
        node = self.nodes[nid]
        base = node.base
        for e_local in range(6):
            a, b = EDGE_VERTICES[e_local]
            if a == f or b == f:
                continue
            deg = self.edge_degree[self.tri.edge_class[(base, e_local)]]
            cur, cur_e, block = nid, e_local, f
            steps = 0
            while True:
                va, vb = EDGE_VERTICES[cur_e]
                faces = [x for x in range(4) if x not in (va, vb)]
                nxt_f = faces[0] if faces[1] == block else faces[1]
                nbr = self.nodes[cur].nbr[nxt_f]
                if nbr is None:
                    break
                _, perm = self.tri.gluings[self.nodes[cur].base][nxt_f]
                cur_e = edge_between(perm[va], perm[vb])
                block = perm[nxt_f]
                cur = nbr
                steps += 1
                if steps > deg:
                    raise AssertionError("edge fan exceeds base degree")
            if steps == deg - 1:
                va, vb = EDGE_VERTICES[cur_e]
                faces = [x for x in range(4) if x not in (va, vb)]
                far_f = faces[0] if faces[1] == block else faces[1]
                exp_t, exp_perm = self.tri.gluings[base][f]
                if self.nodes[cur].base != exp_t or exp_perm[f] != far_f:
                    raise AssertionError(
                        "fan closure disagrees with base gluing data")
                self._link(nid, f, cur, far_f)
                return cur
        return None

    def neighbor(self, nid, f, create=True):
        """The node across face f, folding edge fans eagerly."""
        node = self.nodes[nid]
        if node.nbr[f] is not None:
            return node.nbr[f]
        if self.frozen or not create:
            raise RegionNotExpanded(
                "face %d of lifted tet %d not materialized" % (f, nid))
        got = self._try_fan_closure(nid, f)
        if got is not None:
            return got
        if self.max_cells is not None and len(self.nodes) >= self.max_cells:
            raise ResourceLimit("cell cap %d reached" % self.max_cells,
                                stats=self.stats())
        t2, perm = self.tri.gluings[node.base][f]
        nid2 = len(self.nodes)
        self.nodes.append(Node(nid=nid2, base=t2, depth=node.depth + 1,
                               path=node.path + (f,)))
        self._link(nid, f, nid2, perm[f])
        # a fresh node may complete fans around its own edges; close them
        # now so later requests cannot duplicate an existing lift
        changed = True
        while changed:
            changed = False
            for ff in range(4):
                if self.nodes[nid2].nbr[ff] is None:
                    if self._try_fan_closure(nid2, ff) is not None:
                        changed = True
        return nid2

    def _recompute_depths(self):
        """True dual distances plus a deterministic BFS tree."""
        parent = {0: (None, None)}
        self.nodes[0].depth = 0
        frontier = [0]
        while frontier:
            nxt = []
            for nid in frontier:
                for f in range(4):
                    nb = self.nodes[nid].nbr[f]
                    if nb is not None and nb not in parent:
                        parent[nb] = (nid, f)
                        self.nodes[nb].depth = self.nodes[nid].depth + 1
                        nxt.append(nb)
            frontier = sorted(nxt)
        if len(parent) != len(self.nodes):
            raise AssertionError("cover graph became disconnected")
        self._bfs_parent = parent

    def expand(self, depth):
        """Materialize the full dual ball of the given radius around the
        base lift.  Idempotent for equal depth."""
        while True:
            self._recompute_depths()
            todo = [n.nid for n in self.nodes
                    if n.depth < depth and any(x is None for x in n.nbr)]
            if not todo:
                break
            for nid in todo:
                for f in range(4):
                    self.neighbor(nid, f)
        self._recompute_depths()
        return self.stats()

    def ensure_path(self, path):
        """Materialize a specific face-path from the base lift."""
        return self.follow(0, path, create=True)

    def stats(self):
        cusps = {self.vertex_rep(n.nid, v)
                 for n in self.nodes for v in range(4)}
        edges = {self.edge_rep(n.nid, e)
                 for n in self.nodes for e in range(6)}
        return ExpansionStats(
            n_lifted_tets=len(self.nodes),
            n_lifted_edges=len(edges),
            n_lifted_cusps=len(cusps),
            max_depth=max(n.depth for n in self.nodes))

    def freeze(self):
        self.frozen = True

    def thaw(self):
        self.frozen = False

    # -- walking -------------------------------------------------------------

    def follow(self, nid, path, create=True):
        for f in path:
            nid = self.neighbor(nid, f, create=create)
        return nid

    def shortest_path(self, nid):
        """Deterministic shortest face-path from the base lift."""
        if self._bfs_parent is None or nid not in self._bfs_parent:
            self._recompute_depths()
        out = []
        cur = nid
        while True:
            par, f = self._bfs_parent[cur]
            if par is None:
                break
            out.append(f)
            cur = par
        return tuple(reversed(out))


@dataclass(frozen=True)
class ExpansionStats:
    n_lifted_tets: int
    n_lifted_edges: int
    n_lifted_cusps: int
    max_depth: int


class GroupElement:
    """A deck transformation, stored as the lift its word reaches."""

    __slots__ = ("cover", "nid")

    def __init__(self, cover, nid):
        node = cover.nodes[nid]
        if node.base != cover.nodes[0].base:
            raise ValueError("node %d does not lie over the base tet" % nid)
        self.cover = cover
        self.nid = nid

    @classmethod
    def identity(cls, cover):
        return cls(cover, 0)

    @classmethod
    def from_word(cls, cover, word, create=True):
        """Build from signed crossing generators +-(4*t + f + 1)."""
        nid = 0
        for w in word:
            if w == 0:
                raise ValueError("0 is not a generator")
            t, f = divmod(abs(w) - 1, 4)
            cur = cover.nodes[nid]
            if w > 0:
                if cur.base != t:
                    raise ValueError(
                        "generator %d crosses a face of tet %d but the walk "
                        "is on tet %d" % (w, t, cur.base))
                nid = cover.neighbor(nid, f, create=create)
            else:
                t2, perm = cover.tri.gluings[t][f]
                if cur.base != t2:
                    raise ValueError(
                        "generator %d lands on tet %d but the walk is on "
                        "tet %d" % (w, t2, cur.base))
                nid = cover.neighbor(nid, perm[f], create=create)
        node = cover.nodes[nid]
        if node.base != 0:
            raise ValueError("word is a path, not a loop: ends on tet %d"
                             % node.base)
        return cls(cover, nid)

    def is_identity(self):
        return self.nid == 0

    def word(self):
        """Canonically folded word: shortest path, as signed generators."""
        out = []
        nid = 0
        for f in self.cover.shortest_path(self.nid):
            t = self.cover.nodes[nid].base
            out.append(4 * t + f + 1)
            nid = self.cover.nodes[nid].nbr[f]
        return tuple(out)

    def length(self):
        if self._depth_stale():
            self.cover._recompute_depths()
        return self.cover.nodes[self.nid].depth

    def _depth_stale(self):
        return self.cover._bfs_parent is None

    def __eq__(self, other):
        return (isinstance(other, GroupElement)
                and other.nid == self.nid and other.cover is self.cover)

    def __hash__(self):
        return hash((id(self.cover), self.nid))

    def __repr__(self):
        return "GroupElement(node=%d)" % self.nid

    def act_node(self, nid, create=True):
        """Image of a lifted tetrahedron under this transformation."""
        path = self.cover.nodes[nid].path
        return self.cover.follow(self.nid, path, create=create)

    def __mul__(self, other):
        assert other.cover is self.cover
        return GroupElement(self.cover, self.act_node(other.nid))

    def inverse(self):
        cover = self.cover
        rev = []
        cur = 0
        for f in cover.nodes[self.nid].path:
            t = cover.nodes[cur].base
            _, perm = cover.tri.gluings[t][f]
            rev.append(perm[f])
            cur = cover.nodes[cur].nbr[f]
        out = 0
        for f in reversed(rev):
            out = cover.neighbor(out, f)
        return GroupElement(cover, out)

    def power(self, k):
        if k == 0:
            return GroupElement.identity(self.cover)
        g = self if k > 0 else self.inverse()
        out = g
        for _ in range(abs(k) - 1):
            out = out * g
        return out


def elements_of_length_at_most(cover, max_len):
    """All deck elements with folded word length <= max_len, i.e. the
    lifts of the base tetrahedron within dual distance max_len."""
    cover.expand(max_len)
    out = []
    for node in cover.nodes:
        if node.base == 0 and node.depth <= max_len:
            out.append(GroupElement(cover, node.nid))
    return out
