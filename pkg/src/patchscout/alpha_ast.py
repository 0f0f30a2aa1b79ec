"""Annotated change graphs.

A commit's before/after ASTs are matched node-to-node, then merged into a
single graph in which every node and edge carries one of three change
annotations: unchanged, added, or deleted.  Matched pairs collapse into one
graph node; everything that exists on only one side keeps its own node and
is annotated accordingly.

Matching is a two-phase greedy procedure: a top-down pass pairs whole
subtrees with equal structural hashes (largest first), then a bottom-up
pass pairs remaining same-kind containers that share at least half of
their matched children (Dice >= 0.5).  Ties always break by ascending
preorder index, so the mapping is deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .ast_core import Ast, subtree_hash
from .errors import EmptyCommitError, InvalidMappingError

UNCHANGED = "U"
ADDED = "A"
DELETED = "D"

# one-hot encoding fixed in the order (unchanged, added, deleted)
ANNOTATION_ONE_HOT = {
    UNCHANGED: (1.0, 0.0, 0.0),
    ADDED: (0.0, 1.0, 0.0),
    DELETED: (0.0, 0.0, 1.0),
}

DEFAULT_DICE_THRESHOLD = 0.5
DEFAULT_MAX_GRAPH_NODES = 50_000


@dataclass(frozen=True)
class NodeMapping:
    """Injective old-id <-> new-id correspondence with equal kinds."""

    pairs: tuple[tuple[int, int], ...]

    def old_to_new(self) -> dict[int, int]:
        return {o: n for o, n in self.pairs}

    def new_to_old(self) -> dict[int, int]:
        return {n: o for o, n in self.pairs}


@dataclass(frozen=True)
class AlphaNode:
    id: int
    kind: str
    label: str | None
    ann: str                 # "U" | "A" | "D"
    old_id: int | None       # None iff ann == "A"
    new_id: int | None       # None iff ann == "D"


@dataclass
class AlphaAst:
    """Merged change graph of one file pair (or a whole commit)."""

    nodes: list[AlphaNode]
    edges: list[tuple[int, int, str]]   # (src, dst, annotation), sorted
    changed_loc: int
    file_path: str = ""

    def node_count(self) -> int:
        return len(self.nodes)

    def annotation_counts(self) -> dict[str, int]:
        counts = {UNCHANGED: 0, ADDED: 0, DELETED: 0}
        for n in self.nodes:
            counts[n.ann] += 1
        return counts

    def adjacency(self) -> list[list[int]]:
        """Children lists over the union edge set (src -> dst)."""
        adj: list[list[int]] = [[] for _ in self.nodes]
        for src, dst, _ in self.edges:
            adj[src].append(dst)
        return adj


# --- matching -------------------------------------------------------------------


def _verify_isomorphic(old: Ast, o: int, new: Ast, n: int) -> bool:
    """Structural check guarding against 64-bit hash collisions."""
    stack = [(o, n)]
    while stack:
        a, b = stack.pop()
        na, nb = old.nodes[a], new.nodes[b]
        ca, cb = old.children[a], new.children[b]
        if na.kind != nb.kind or na.label != nb.label or len(ca) != len(cb):
            return False
        stack.extend(zip(ca, cb))
    return True


def _map_subtrees(old: Ast, o: int, new: Ast, n: int,
                  old2new: dict[int, int], new2old: dict[int, int]) -> None:
    """Pair two isomorphic subtrees node-for-node via parallel preorder."""
    stack = [(o, n)]
    while stack:
        a, b = stack.pop()
        old2new[a] = b
        new2old[b] = a
        stack.extend(zip(old.children[a], new.children[b]))


def match_nodes(old: Ast, new: Ast, dice_threshold: float = DEFAULT_DICE_THRESHOLD,
                bottom_up: bool = True) -> NodeMapping:
    """Compute the deterministic two-phase greedy node mapping.

    Phase 1 (top-down) walks both trees by decreasing subtree height and
    pairs subtrees with equal structural hashes atomically, ties broken by
    ascending (old id, new id).  Phase 2 (bottom-up) pairs leftover nodes of
    equal kind whose matched children overlap with Dice >= ``dice_threshold``;
    the two roots are paired as a final fallback when their kinds agree.
    Set ``bottom_up=False`` to stop after the symmetric hash phase.
    """
    old2new: dict[int, int] = {}
    new2old: dict[int, int] = {}

    # phase 1: height-indexed open lists, tallest first
    open_old: dict[int, list[int]] = {old.height(0): [0]}
    open_new: dict[int, list[int]] = {new.height(0): [0]}

    def open_children(ast: Ast, bucket: dict[int, list[int]], v: int) -> None:
        for c in ast.children[v]:
            bucket.setdefault(ast.height(c), []).append(c)

    while open_old and open_new:
        h_old = max(open_old)
        h_new = max(open_new)
        if h_old > h_new:
            for v in open_old.pop(h_old):
                open_children(old, open_old, v)
            continue
        if h_new > h_old:
            for v in open_new.pop(h_new):
                open_children(new, open_new, v)
            continue
        olds = sorted(open_old.pop(h_old))
        news = sorted(open_new.pop(h_new))
        by_hash_old: dict[int, list[int]] = {}
        for v in olds:
            by_hash_old.setdefault(subtree_hash(old, v), []).append(v)
        by_hash_new: dict[int, list[int]] = {}
        for v in news:
            by_hash_new.setdefault(subtree_hash(new, v), []).append(v)
        for h, old_group in by_hash_old.items():
            new_group = by_hash_new.get(h, [])
            k = 0
            for o in old_group:
                if k < len(new_group) and _verify_isomorphic(old, o, new, new_group[k]):
                    _map_subtrees(old, o, new, new_group[k], old2new, new2old)
                    k += 1
                else:
                    open_children(old, open_old, o)
            for n in new_group[k:]:
                open_children(new, open_new, n)
        for h, new_group in by_hash_new.items():
            if h not in by_hash_old:
                for n in new_group:
                    open_children(new, open_new, n)
    if bottom_up:
        # index unmatched new nodes for the Dice phase
        new_parent = new._parents
        for o in old.postorder():
            if o in old2new:
                continue
            o_kids = old.children[o]
            # candidate new parents of the partners of o's matched children
            candidates: set[int] = set()
            for c in o_kids:
                partner = old2new.get(c)
                if partner is not None:
                    p = new_parent[partner]
                    if p is not None and p not in new2old:
                        candidates.add(p)
            best_n = -1
            best_dice = 0.0
            for n in sorted(candidates):
                if new.nodes[n].kind != old.nodes[o].kind:
                    continue
                n_kid_set = set(new.children[n])
                shared = sum(1 for c in o_kids
                             if old2new.get(c) in n_kid_set)
                denom = len(o_kids) + len(new.children[n])
                dice = 2.0 * shared / denom if denom else 0.0
                if dice >= dice_threshold and dice > best_dice:
                    best_dice = dice
                    best_n = n
            if best_n >= 0:
                old2new[o] = best_n
                new2old[best_n] = o
        # roots anchor the graphs; pair them if still free and compatible
        if 0 not in old2new and 0 not in new2old \
                and old.nodes[0].kind == new.nodes[0].kind:
            old2new[0] = 0
            new2old[0] = 0

    pairs = tuple(sorted(old2new.items()))
    return NodeMapping(pairs)


# --- line diff --------------------------------------------------------------------


def changed_line_count(old_text: str, new_text: str) -> int:
    """Added plus deleted lines under an optimal LCS alignment."""
    a = old_text.splitlines()
    b = new_text.splitlines()
    # trim common prefix/suffix before the quadratic DP
    lo = 0
    while lo < len(a) and lo < len(b) and a[lo] == b[lo]:
        lo += 1
    hi_a, hi_b = len(a), len(b)
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    if not a or not b:
        return len(a) + len(b)
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = curr[j - 1] if curr[j - 1] >= prev[j] else prev[j]
        prev = curr
    lcs = prev[len(b)]
    return (len(a) - lcs) + (len(b) - lcs)


# --- building --------------------------------------------------------------------


def _check_mapping(old: Ast, new: Ast, mapping: NodeMapping) -> None:
    seen_old: set[int] = set()
    seen_new: set[int] = set()
    for o, n in mapping.pairs:
        if not 0 <= o < len(old) or not 0 <= n < len(new):
            raise InvalidMappingError(f"mapping references unknown ids ({o}, {n})")
        if o in seen_old or n in seen_new:
            raise InvalidMappingError(f"mapping is not injective at ({o}, {n})")
        if old.nodes[o].kind != new.nodes[n].kind:
            raise InvalidMappingError(
                f"mapped pair ({o}, {n}) has unequal kinds "
                f"{old.nodes[o].kind!r} vs {new.nodes[n].kind!r}")
        seen_old.add(o)
        seen_new.add(n)


def build_alpha_ast(old: Ast, new: Ast, mapping: NodeMapping,
                    old_text: str | None = None,
                    new_text: str | None = None) -> AlphaAst:
    """Merge two ASTs under a mapping into an annotated change graph.

    Graph ids: old nodes keep 0..len(old)-1 (mapped new nodes share their
    partner's id); unmatched new nodes follow in ascending new-id order.
    ``changed_loc`` comes from the line diff of the two texts when given,
    else 0 (e.g. for externally ingested ASTs with no source).
    """
    _check_mapping(old, new, mapping)
    old2new = mapping.old_to_new()
    new2old = mapping.new_to_old()

    nodes: list[AlphaNode] = []
    new_gid: dict[int, int] = {}
    for o in range(len(old)):
        n = old2new.get(o)
        if n is None:
            nd = old.nodes[o]
            nodes.append(AlphaNode(o, nd.kind, nd.label, DELETED, o, None))
        else:
            nd = new.nodes[n]  # label of a matched pair follows the new side
            nodes.append(AlphaNode(o, nd.kind, nd.label, UNCHANGED, o, n))
            new_gid[n] = o
    next_id = len(old)
    for n in range(len(new)):
        if n not in new2old:
            nd = new.nodes[n]
            nodes.append(AlphaNode(next_id, nd.kind, nd.label, ADDED, None, n))
            new_gid[n] = next_id
            next_id += 1

    old_edges: set[tuple[int, int]] = set()
    for p in range(len(old)):
        for c in old.children[p]:
            old_edges.add((p, c))  # old graph id == old node id
    new_edges: set[tuple[int, int]] = set()
    for p in range(len(new)):
        for c in new.children[p]:
            new_edges.add((new_gid[p], new_gid[c]))
    edges: list[tuple[int, int, str]] = []
    for e in old_edges | new_edges:
        if e in old_edges and e in new_edges:
            ann = UNCHANGED
        elif e in new_edges:
            ann = ADDED
        else:
            ann = DELETED
        edges.append((e[0], e[1], ann))
    edges.sort()

    loc = 0
    if old_text is not None and new_text is not None:
        loc = changed_line_count(old_text, new_text)
    return AlphaAst(nodes, edges, loc, old.file_path or new.file_path)


def merge_commit_graph(per_file: list[AlphaAst]) -> AlphaAst:
    """Join per-file change graphs under one virtual CommitRoot node.

    Graphs merge in lexicographic file-path order; node ids are re-based;
    changed_loc sums.
    """
    if not per_file:
        raise EmptyCommitError("commit has no changed files")
    ordered = sorted(per_file, key=lambda g: g.file_path)
    nodes = [AlphaNode(0, "CommitRoot", None, UNCHANGED, None, None)]
    edges: list[tuple[int, int, str]] = []
    loc = 0
    offset = 1
    for g in ordered:
        for n in g.nodes:
            nodes.append(AlphaNode(n.id + offset, n.kind, n.label, n.ann,
                                   n.old_id, n.new_id))
        for src, dst, ann in g.edges:
            edges.append((src + offset, dst + offset, ann))
        edges.append((0, offset, UNCHANGED))  # CommitRoot -> file root
        loc += g.changed_loc
        offset += len(g.nodes)
    edges.sort()
    return AlphaAst(nodes, edges, loc, "")


def truncate_to_changed_context(graph: AlphaAst,
                                max_nodes: int = DEFAULT_MAX_GRAPH_NODES) -> AlphaAst:
    """Drop change-free subtrees farthest from any change until under the cap.

    A subtree qualifies when every node in it is unchanged and every edge
    touching it (other than its own incoming edge) is unchanged.  Distance
    is BFS over the undirected union edge set from the set of changed
    elements.  If the changed core alone exceeds the cap, the graph is
    returned as small as droppable subtrees allow.
    """
    n = graph.node_count()
    if n <= max_nodes:
        return graph

    adj_out: list[list[int]] = [[] for _ in range(n)]
    adj_und: list[list[int]] = [[] for _ in range(n)]
    affected = [node.ann != UNCHANGED for node in graph.nodes]
    for src, dst, ann in graph.edges:
        adj_out[src].append(dst)
        adj_und[src].append(dst)
        adj_und[dst].append(src)
        if ann != UNCHANGED:
            affected[src] = True
            affected[dst] = True

    # static[v]: v and its whole out-closure are change-free
    static = [False] * n
    state = [0] * n  # 0 unvisited, 1 in progress, 2 done
    for start in range(n):
        if state[start]:
            continue
        stack = [(start, 0)]
        while stack:
            v, phase = stack.pop()
            if phase == 0:
                if state[v] == 2:
                    continue
                state[v] = 1
                stack.append((v, 1))
                for c in adj_out[v]:
                    if state[c] == 0:
                        stack.append((c, 0))
            else:
                state[v] = 2
                static[v] = not affected[v] and all(
                    static[c] and state[c] == 2 for c in adj_out[v])

    # BFS distance from changed elements
    INF = n + 1
    dist = [INF] * n
    frontier = [v for v in range(n) if affected[v]]
    for v in frontier:
        dist[v] = 0
    while frontier:
        nxt = []
        for v in frontier:
            for w in adj_und[v]:
                if dist[w] > dist[v] + 1:
                    dist[w] = dist[v] + 1
                    nxt.append(w)
        frontier = nxt

    in_degree_static = [0] * n
    for src, dst, _ in graph.edges:
        if static[dst]:
            in_degree_static[dst] += 1
    # maximal droppable roots: static nodes whose parent subtree is not static
    parents: list[list[int]] = [[] for _ in range(n)]
    for src, dst, _ in graph.edges:
        parents[dst].append(src)
    roots = [v for v in range(1, n)
             if static[v] and all(not static[p] for p in parents[v])]
    roots.sort(key=lambda v: (-dist[v], v))

    drop: set[int] = set()
    remaining = n
    for r in roots:
        if remaining <= max_nodes:
            break
        stack = [r]
        sub: list[int] = []
        while stack:
            v = stack.pop()
            if v in drop:
                continue
            drop.add(v)
            sub.append(v)
            stack.extend(adj_out[v])
        remaining -= len(sub)

    if not drop:
        return graph
    keep = [v for v in range(n) if v not in drop]
    remap = {v: i for i, v in enumerate(keep)}
    nodes = [AlphaNode(remap[v], graph.nodes[v].kind, graph.nodes[v].label,
                       graph.nodes[v].ann, graph.nodes[v].old_id,
                       graph.nodes[v].new_id) for v in keep]
    edges = sorted((remap[s], remap[d], a) for s, d, a in graph.edges
                   if s not in drop and d not in drop)
    return AlphaAst(nodes, edges, graph.changed_loc, graph.file_path)


def diff_asts(old: Ast, new: Ast, old_text: str | None = None,
              new_text: str | None = None,
              dice_threshold: float = DEFAULT_DICE_THRESHOLD) -> AlphaAst:
    """Convenience: match then build in one call."""
    mapping = match_nodes(old, new, dice_threshold)
    return build_alpha_ast(old, new, mapping, old_text, new_text)


# --- exports ----------------------------------------------------------------------


def export_alpha_json(graph: AlphaAst) -> str:
    doc = {
        "nodes": [{"id": n.id, "kind": n.kind, "label": n.label, "ann": n.ann}
                  for n in graph.nodes],
        "edges": [[src, dst, ann] for src, dst, ann in graph.edges],
        "changed_loc": graph.changed_loc,
    }
    return json.dumps(doc, indent=None, separators=(",", ":"))


_DOT_COLORS = {UNCHANGED: "gray", ADDED: "green", DELETED: "red"}


def export_alpha_dot(graph: AlphaAst) -> str:
    """Graphviz DOT rendering: unchanged=gray, added=green, deleted=red."""

    def esc(s: str) -> str:
        return s.replace("\\", "\\\\").replace('"', '\\"')

    lines = ["digraph change_graph {",
             "  // annotation colors: unchanged=gray added=green deleted=red",
             "  node [shape=box];"]
    for n in graph.nodes:
        label = n.kind if n.label is None else f"{n.kind} {n.label}"
        lines.append(f'  n{n.id} [label="{esc(label)}", color="{_DOT_COLORS[n.ann]}"];')
    for src, dst, ann in graph.edges:
        lines.append(f'  n{src} -> n{dst} [color="{_DOT_COLORS[ann]}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
