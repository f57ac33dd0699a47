"""Taut and veering triangulations: parsing and validation.

Input formats
-------------

Taut isoSig (primary): ``<isoSig>_<angleDigits>``.

The isoSig part is the standard isomorphism signature for a 3-manifold
triangulation.  Alphabet (value 0..63)::

    abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789+-

Layout, for a connected triangulation with n < 63 tetrahedra:

* one char: n;
* facet type sequence: one 2-bit entry per facet that is still unglued
  when reached (facets scanned in order tet 0..n-1, facet 0..3), packed
  three entries per char, low bits first.  Types: 0 = boundary facet,
  1 = glued to the next unseen tetrahedron (via the identity vertex map),
  2 = glued to an already-seen tetrahedron;
* destination sequence: one char (the tetrahedron index) per type-2 entry;
* permutation sequence: one char per type-2 entry, indexing S4 in
  lexicographic order of image tuples.

The angle digits give one char in ``012`` per tetrahedron: digit d means
the opposite edge pair (d, 5-d) carries angle pi (edges numbered
0:01 1:02 2:03 3:12 4:13 5:23 by their vertex pairs), the other four
edges carry 0.

Verbose gluing-table format (secondary, self-contained fixtures)::

    tetrahedra <n>
    # one line per (tet, face), face f of tet t glued to face-image under perm
    glue <t> <f> -> <t'> <p0> <p1> <p2> <p3>
    angle <t> <d>

``glue`` lines give the full vertex permutation p: vertex i of t maps to
p_i of t'.  Every (t, f) must appear exactly once among the lines (each
gluing may be listed from both sides; the two listings must be inverse).
Comments (#) and blank lines are ignored.  Angles use the digit scheme
above.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import LengthMismatch, TriangulationSyntaxError

SIG_ALPHABET = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789+-"
SIG_VALUE = {c: i for i, c in enumerate(SIG_ALPHABET)}

# Edge numbering by vertex pair, and the reverse lookup.
EDGE_VERTICES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
EDGE_INDEX = {p: i for i, p in enumerate(EDGE_VERTICES)}
for (a, b), i in list(EDGE_INDEX.items()):
    EDGE_INDEX[(b, a)] = i

# S4 in lexicographic order of image tuples; isoSig permutation chars
# index into this list.
S4_LEX = sorted(itertools.permutations(range(4)))


def edge_between(a, b):
    return EDGE_INDEX[(a, b)]


def opposite_edge(e):
    return 5 - e


def pi_pair(angle_digit):
    """The two edges carrying angle pi for an angle digit 0, 1, or 2."""
    return (angle_digit, 5 - angle_digit)


@dataclass
class VeeringTriangulation:
    """A taut ideal triangulation with derived veering data.

    gluings[t][f] = (t', perm) where perm is the vertex map of the face
    pairing (a 4-tuple).  angle[t] is the taut digit.  Derived fields are
    filled by validate(); edge_class[(t, e)] is the edge-orbit id and
    colors[class] is "red" or "blue" once the veering coloring exists.
    """

    n_tet: int
    gluings: list
    angles: list
    source: str = ""
    edge_class: dict = field(default_factory=dict)
    edge_classes: list = field(default_factory=list)
    vertex_class: dict = field(default_factory=dict)
    n_vertex_classes: int = 0
    colors: dict = field(default_factory=dict)
    orientable: bool | None = None

    def neighbor(self, tet, face):
        return self.gluings[tet][face]

    def face_pairs(self):
        """Each gluing once, as ((t, f), (t', f'), perm)."""
        seen = set()
        out = []
        for t in range(self.n_tet):
            for f in range(4):
                if (t, f) in seen:
                    continue
                t2, perm = self.gluings[t][f]
                f2 = perm[f]
                seen.add((t, f))
                seen.add((t2, f2))
                out.append(((t, f), (t2, f2), perm))
        return out

    def equatorial_edges(self, t):
        """The four 0-angle edges of tet t, as a 4-cycle of vertex pairs.

        Returns the cycle (b0,t0),(t0,b1),(b1,t1),(t1,b0) where (b0,b1) is
        the pi-pair edge listed first by pi_pair and (t0,t1) the other.
        """
        e_pi = pi_pair(self.angles[t])
        b0, b1 = EDGE_VERTICES[e_pi[0]]
        t0, t1 = EDGE_VERTICES[e_pi[1]]
        return [(b0, t0), (t0, b1), (b1, t1), (t1, b0)]

    def edge_color(self, t, a, b):
        return self.colors[self.edge_class[(t, edge_between(a, b))]]


def _perm_compose(p, q):
    """(p then q) acting on the left: returns q∘p."""
    return tuple(q[p[i]] for i in range(4))


def _perm_inverse(p):
    inv = [0] * 4
    for i, v in enumerate(p):
        inv[v] = i
    return tuple(inv)


def parse_taut_isosig(text):
    """Parse ``<isoSig>_<angleDigits>`` into a VeeringTriangulation."""
    if not isinstance(text, str) or not text.strip():
        raise TriangulationSyntaxError("empty input", position=0)
    text = text.strip()
    if "_" not in text:
        raise TriangulationSyntaxError("missing '_<angleDigits>' suffix",
                                       position=len(text))
    sig, digits = text.split("_", 1)
    n_tet, gluings = _decode_isosig(sig)
    if len(digits) != n_tet:
        raise LengthMismatch(
            "expected %d angle digits, got %d" % (n_tet, len(digits)),
            position=len(sig) + 1)
    angles = []
    for i, d in enumerate(digits):
        if d not in "012":
            raise TriangulationSyntaxError(
                "angle digit must be 0, 1 or 2, got %r" % d,
                position=len(sig) + 1 + i)
        angles.append(int(d))
    return VeeringTriangulation(n_tet=n_tet, gluings=gluings, angles=angles,
                                source=text)


def _decode_isosig(sig):
    for i, c in enumerate(sig):
        if c not in SIG_VALUE:
            raise TriangulationSyntaxError("invalid signature char %r" % c,
                                           position=i)
    vals = [SIG_VALUE[c] for c in sig]
    if not vals:
        raise TriangulationSyntaxError("empty signature", position=0)
    pos = 0
    if vals[0] < 63:
        n = vals[0]
        pos = 1
    else:
        # Large-triangulation header: char count, then little-endian value.
        if len(vals) < 2:
            raise TriangulationSyntaxError("truncated size header", position=0)
        nchars = vals[1]
        pos = 2
        if len(vals) < pos + nchars:
            raise TriangulationSyntaxError("truncated size header", position=pos)
        n = 0
        for k in range(nchars):
            n |= vals[pos + k] << (6 * k)
        pos += nchars
    if n == 0:
        raise TriangulationSyntaxError("zero tetrahedra", position=0)
    dest_width = 1
    while 64 ** dest_width < n:
        dest_width += 1

    # The type sequence covers exactly the facets that are still unglued
    # when the scan reaches them, which depends on the type-2 joins
    # themselves.  The entry count E is therefore found by trying each
    # candidate and keeping the one whose scan is fully consistent.
    last_err = "truncated signature"
    for n_entries in range(1, 4 * n + 1):
        n_type_chars = (n_entries + 2) // 3
        entries = []
        for v in vals[pos:pos + n_type_chars]:
            for shift in (0, 2, 4):
                entries.append((v >> shift) & 3)
        if len(vals) < pos + n_type_chars:
            break
        if any(e != 0 for e in entries[n_entries:]):
            last_err = "nonzero padding in type sequence"
            continue
        result = _scan_gluings(n, entries[:n_entries],
                               vals[pos + n_type_chars:], dest_width)
        if isinstance(result, str):
            last_err = result
            continue
        return n, result
    raise TriangulationSyntaxError(last_err, position=pos)


def _scan_gluings(n, types, tail, dest_width):
    """Run the facet scan for one candidate type sequence.

    Returns the gluing table, or an error string if this candidate is
    inconsistent.
    """
    n_type2 = sum(1 for t in types if t == 2)
    if len(tail) != n_type2 * (dest_width + 1):
        return "dest/perm data does not match type-2 count"
    dests = []
    for k in range(n_type2):
        d = 0
        for j in range(dest_width):
            d |= tail[k * dest_width + j] << (6 * j)
        dests.append(d)
    perm_vals = tail[n_type2 * dest_width:]
    if any(v >= 24 for v in perm_vals):
        return "permutation index out of range"
    perms = [S4_LEX[v] for v in perm_vals]

    glu = [[None] * 4 for _ in range(n)]
    next_new = 1
    k = j = 0
    ident = (0, 1, 2, 3)
    for t in range(n):
        for f in range(4):
            if glu[t][f] is not None:
                continue
            if k >= len(types):
                return "type sequence too short"
            ty = types[k]
            k += 1
            if ty == 0:
                return "boundary facet in a closed signature"
            if ty == 1:
                if next_new >= n:
                    return "type sequence names too many tetrahedra"
                glu[t][f] = (next_new, ident)
                glu[next_new][f] = (t, ident)
                next_new += 1
            elif ty == 2:
                d, p = dests[j], perms[j]
                j += 1
                if d >= next_new:
                    return "destination not yet seen"
                f2 = p[f]
                if glu[d][f2] is not None:
                    return "destination facet already glued"
                glu[t][f] = (d, p)
                glu[d][f2] = (t, _perm_inverse(p))
            else:
                return "bad facet type"
    if k != len(types):
        return "unused type entries"
    if j != n_type2:
        return "unused joins"
    if next_new != n:
        return "disconnected signature"
    return glu


def parse_gluing_table(text):
    """Parse the verbose format documented in the module docstring."""
    n = None
    glu = None
    angles = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "tetrahedra":
            if n is not None:
                raise TriangulationSyntaxError("duplicate tetrahedra line",
                                               line=lineno)
            try:
                n = int(parts[1])
            except (IndexError, ValueError):
                raise TriangulationSyntaxError("bad tetrahedra count",
                                               line=lineno)
            if n <= 0:
                raise TriangulationSyntaxError("tetrahedra count must be > 0",
                                               line=lineno)
            glu = [[None] * 4 for _ in range(n)]
        elif parts[0] == "glue":
            if glu is None:
                raise TriangulationSyntaxError(
                    "glue before tetrahedra line", line=lineno)
            try:
                t, f = int(parts[1]), int(parts[2])
                if parts[3] != "->":
                    raise ValueError
                t2 = int(parts[4])
                perm = tuple(int(x) for x in parts[5:9])
            except (IndexError, ValueError):
                raise TriangulationSyntaxError(
                    "expected: glue <t> <f> -> <t'> <p0> <p1> <p2> <p3>",
                    line=lineno)
            if not (0 <= t < n and 0 <= t2 < n and 0 <= f < 4):
                raise TriangulationSyntaxError("index out of range", line=lineno)
            if sorted(perm) != [0, 1, 2, 3]:
                raise TriangulationSyntaxError("not a permutation", line=lineno)
            entry = (t2, perm)
            if glu[t][f] is not None and glu[t][f] != entry:
                raise TriangulationSyntaxError(
                    "conflicting gluing for tet %d face %d" % (t, f),
                    line=lineno)
            glu[t][f] = entry
            # mirror entry
            f2 = perm[f]
            mirror = (t, _perm_inverse(perm))
            if glu[t2][f2] is not None and glu[t2][f2] != mirror:
                raise TriangulationSyntaxError(
                    "gluing not involutive at tet %d face %d" % (t2, f2),
                    line=lineno)
            glu[t2][f2] = mirror
        elif parts[0] == "angle":
            try:
                t, d = int(parts[1]), int(parts[2])
            except (IndexError, ValueError):
                raise TriangulationSyntaxError("expected: angle <t> <d>",
                                               line=lineno)
            if d not in (0, 1, 2):
                raise TriangulationSyntaxError("angle digit must be 0, 1 or 2",
                                               line=lineno)
            angles[t] = d
        else:
            raise TriangulationSyntaxError("unknown directive %r" % parts[0],
                                           line=lineno)
    if n is None:
        raise TriangulationSyntaxError("missing tetrahedra line", line=1)
    if set(angles) != set(range(n)):
        raise TriangulationSyntaxError(
            "need exactly one angle line per tetrahedron", line=1)
    return VeeringTriangulation(
        n_tet=n, gluings=glu, angles=[angles[t] for t in range(n)],
        source="gluing-table")


def parse_triangulation(text):
    """Dispatch: taut isoSig if it looks like one, else gluing table."""
    stripped = text.strip()
    if "\n" not in stripped and "glue" not in stripped:
        return parse_taut_isosig(stripped)
    return parse_gluing_table(text)


# ---------------------------------------------------------------------------
# Validation


@dataclass
class Violation:
    kind: str
    detail: str

    def __str__(self):
        return "%s: %s" % (self.kind, self.detail)


@dataclass
class VeeringCertificate:
    n_tet: int
    n_edges: int
    n_vertices: int
    orientable: bool
    colors: dict

    def __str__(self):
        return ("veering certificate: %d tetrahedra, %d edges, %d cusps, "
                "orientable=%s" % (self.n_tet, self.n_edges, self.n_vertices,
                                   self.orientable))


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        if p != x:
            p = self.parent[x] = self.find(p)
        return p

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb
        return rb


def _complete_gluings(tri, violations):
    ok = True
    for t in range(tri.n_tet):
        for f in range(4):
            g = tri.gluings[t][f]
            if g is None:
                violations.append(Violation(
                    "IncompleteGluing", "tet %d face %d is unglued" % (t, f)))
                ok = False
                continue
            t2, perm = g
            if perm[f] == f and t2 == t:
                violations.append(Violation(
                    "SelfGluing", "tet %d face %d glued to itself" % (t, f)))
                ok = False
                continue
            back = tri.gluings[t2][perm[f]]
            if back is None or back[0] != t or back[1] != _perm_inverse(perm):
                violations.append(Violation(
                    "NotInvolutive",
                    "gluing at tet %d face %d has no matching inverse" % (t, f)))
                ok = False
    return ok


def _edge_classes(tri):
    """Orbits of (tet, edge) under the face pairings."""
    uf = _UnionFind()
    for (t, f), (t2, f2), perm in tri.face_pairs():
        face_verts = [v for v in range(4) if v != f]
        for a, b in itertools.combinations(face_verts, 2):
            e1 = (t, edge_between(a, b))
            e2 = (t2, edge_between(perm[a], perm[b]))
            uf.union(e1, e2)
    classes = {}
    for t in range(tri.n_tet):
        for e in range(6):
            classes.setdefault(uf.find((t, e)), []).append((t, e))
    ordered = sorted(classes.values())
    tri.edge_classes = ordered
    tri.edge_class = {}
    for i, members in enumerate(ordered):
        for m in members:
            tri.edge_class[m] = i
    return ordered


def _vertex_classes(tri):
    uf = _UnionFind()
    for (t, f), (t2, f2), perm in tri.face_pairs():
        for v in range(4):
            if v != f:
                uf.union((t, v), (t2, perm[v]))
    classes = {}
    for t in range(tri.n_tet):
        for v in range(4):
            classes.setdefault(uf.find((t, v)), []).append((t, v))
    ordered = sorted(classes.values())
    tri.vertex_class = {}
    for i, members in enumerate(ordered):
        for m in members:
            tri.vertex_class[m] = i
    tri.n_vertex_classes = len(ordered)
    return ordered


def _check_angle_sums(tri, violations):
    """Every edge class must see angle sum 2*pi: exactly two pi slots."""
    ok = True
    for i, members in enumerate(tri.edge_classes):
        n_pi = sum(1 for (t, e) in members if e in pi_pair(tri.angles[t]))
        if n_pi != 2:
            ok = False
            violations.append(Violation(
                "TautnessViolation",
                "edge class %d (degree %d) has %d pi-contributions, "
                "expected 2" % (i, len(members), n_pi)))
    return ok


def _check_orientability(tri, violations):
    sign = {0: 1}
    stack = [0]
    seen = {0}
    ok = True
    while stack:
        t = stack.pop()
        for f in range(4):
            t2, perm = tri.gluings[t][f]
            psign = _perm_sign(perm)
            want = -sign[t] * psign
            if t2 not in seen:
                seen.add(t2)
                sign[t2] = want
                stack.append(t2)
            elif sign[t2] != want:
                ok = False
    if len(seen) != tri.n_tet:
        violations.append(Violation("Disconnected",
                                    "triangulation is not connected"))
        ok = False
    if not ok:
        violations.append(Violation("NotOrientable",
                                    "no consistent orientation of tetrahedra"))
    tri.orientable = ok
    return ok


def _perm_sign(p):
    s = 1
    for i in range(4):
        for j in range(i + 1, 4):
            if p[i] > p[j]:
                s = -s
    return s


def _color_edges(tri, violations):
    """Solve the equatorial alternation constraints for the red/blue coloring.

    In every tetrahedron the four 0-angle edges form a 4-cycle; opposite
    edges of the cycle share a color and adjacent ones differ.  Colors are
    canonicalized by making the class of tet 0's first equatorial edge red.
    """
    parity = {}   # edge class -> 0/1 relative to its component root
    uf = _UnionFind()
    offsets = {}  # class -> (root, parity); maintained as naive dict via BFS

    # Build constraint graph: nodes are edge classes; edges carry "same"
    # or "differ".
    constraints = []
    for t in range(tri.n_tet):
        cyc = tri.equatorial_edges(t)
        cls = [tri.edge_class[(t, edge_between(a, b))] for (a, b) in cyc]
        constraints.append((cls[0], cls[2], 0))
        constraints.append((cls[1], cls[3], 0))
        constraints.append((cls[0], cls[1], 1))
    adj = {}
    for a, b, d in constraints:
        adj.setdefault(a, []).append((b, d))
        adj.setdefault(b, []).append((a, d))
    color = {}
    ok = True
    for start in sorted(adj):
        if start in color:
            continue
        color[start] = 0
        queue = [start]
        while queue:
            a = queue.pop()
            for b, d in adj[a]:
                want = color[a] ^ d
                if b not in color:
                    color[b] = want
                    queue.append(b)
                elif color[b] != want:
                    ok = False
    if not ok:
        violations.append(Violation(
            "VeeringViolation",
            "equatorial alternation constraints are unsatisfiable"))
        return False
    anchor = tri.edge_class[(0, edge_between(*tri.equatorial_edges(0)[0]))]
    flip = color.get(anchor, 0)
    tri.colors = {}
    for i in range(len(tri.edge_classes)):
        if i not in color:
            # pi-pair-only edge class: cannot happen in a taut structure
            # with degree >= 3, but guard anyway.
            violations.append(Violation(
                "VeeringViolation",
                "edge class %d is never equatorial" % i))
            return False
        tri.colors[i] = "red" if color[i] ^ flip == 0 else "blue"
    return True


def _check_fan_separation(tri, violations):
    """Around each edge, the two pi tetrahedra must not be face-adjacent.

    Equivalently: the top edge of a tetrahedron stays a 0-angle edge in any
    tetrahedron glued above it.  The induced plane chart needs this; it
    holds in every veering triangulation.
    """
    ok = True
    for (t, f), (t2, f2), perm in tri.face_pairs():
        face_verts = [v for v in range(4) if v != f]
        for a, b in itertools.combinations(face_verts, 2):
            e1 = edge_between(a, b)
            e2 = edge_between(perm[a], perm[b])
            if e1 in pi_pair(tri.angles[t]) and e2 in pi_pair(tri.angles[t2]):
                ok = False
                violations.append(Violation(
                    "FanViolation",
                    "edge (%d,%d) of tet %d carries pi on both sides of "
                    "face %d" % (a, b, t, f)))
    return ok


def validate_veering(tri):
    """Full validation.

    Returns a VeeringCertificate on success, otherwise the list of
    Violations.  Derived data (edge/vertex classes, colors, orientability)
    is stored on the triangulation as a side effect.
    """
    violations = []
    if not _complete_gluings(tri, violations):
        return violations
    _edge_classes(tri)
    _vertex_classes(tri)
    ok = _check_angle_sums(tri, violations)
    ok = _check_orientability(tri, violations) and ok
    if ok:
        ok = _color_edges(tri, violations) and ok
        ok = _check_fan_separation(tri, violations) and ok
    if not ok:
        return violations
    return VeeringCertificate(
        n_tet=tri.n_tet,
        n_edges=len(tri.edge_classes),
        n_vertices=tri.n_vertex_classes,
        orientable=tri.orientable,
        colors=dict(tri.colors))
