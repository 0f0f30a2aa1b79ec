"""Shared fixtures: random tree/edit generators used by the property suites."""

from __future__ import annotations

import random

from patchscout.ast_core import Ast, ast_from_nested

_CONTAINER_KINDS = ("Block", "IfStmt", "WhileStmt", "ForStmt", "CallExpr",
                    "BinaryExpr", "ExprStmt", "ReturnStmt")
_LEAF_KINDS = ("Identifier", "Literal")
_LABELS = ("alpha", "beta", "gamma", "delta", "buf", "idx", "count", "size",
           "0", "1", "2", "42")


def random_tree(rng: random.Random, max_depth: int = 4,
                max_children: int = 4) -> tuple:
    """Random nested (kind, label, children) tree rooted at a TranslationUnit."""

    def gen(depth: int) -> tuple:
        if depth >= max_depth or rng.random() < 0.3:
            return (rng.choice(_LEAF_KINDS), rng.choice(_LABELS), [])
        kind = rng.choice(_CONTAINER_KINDS)
        label = rng.choice(_LABELS) if kind == "BinaryExpr" else None
        kids = [gen(depth + 1) for _ in range(rng.randint(1, max_children))]
        return (kind, label, kids)

    kids = [gen(1) for _ in range(rng.randint(0, max_children))]
    return ("TranslationUnit", None, kids)


def random_ast(rng: random.Random, **kw) -> Ast:
    return ast_from_nested(random_tree(rng, **kw), "mem.c")


def _to_mutable(ast: Ast, v: int = 0) -> list:
    node = ast.nodes[v]
    return [node.kind, node.label, [_to_mutable(ast, c) for c in ast.children[v]]]


def _collect(tree: list, acc: list) -> None:
    acc.append(tree)
    for child in tree[2]:
        _collect(child, acc)


def random_edit(rng: random.Random, ast: Ast) -> Ast:
    """Apply one random edit (rename / insert subtree / delete subtree)."""
    tree = _to_mutable(ast)
    nodes: list = []
    _collect(tree, nodes)
    op = rng.choice(("rename", "insert", "delete"))
    if op == "rename":
        labeled = [t for t in nodes if t[1] is not None]
        if labeled:
            target = rng.choice(labeled)
            target[1] = rng.choice([x for x in _LABELS if x != target[1]])
    elif op == "insert":
        target = rng.choice(nodes)
        pos = rng.randint(0, len(target[2]))
        target[2].insert(pos, _nested_to_mutable(random_tree(rng, max_depth=2)))
    else:
        parents = [t for t in nodes if t[2]]
        if parents:
            target = rng.choice(parents)
            target[2].pop(rng.randrange(len(target[2])))
    return ast_from_nested(_to_nested(tree), ast.file_path)


def _nested_to_mutable(t: tuple) -> list:
    return [t[0], t[1], [_nested_to_mutable(k) for k in t[2]]]


def _to_nested(t: list) -> tuple:
    return (t[0], t[1], [_to_nested(k) for k in t[2]])


def edited_pair(rng: random.Random, n_edits: int = 3) -> tuple[Ast, Ast]:
    """An original tree and a version with 1..n_edits random edits applied."""
    old = random_ast(rng)
    new = old
    for _ in range(rng.randint(1, n_edits)):
        new = random_edit(rng, new)
    return old, new


# --- acceptance reporting -----------------------------------------------------


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one pass/fail line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            if "test_acceptance" in getattr(rep, "nodeid", ""):
                name = rep.nodeid.split("::")[-1]
                lines.append((name, status.upper()))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status:6s} {name}")
