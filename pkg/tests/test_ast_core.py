"""Parser, JSON interchange, and subtree-hash contracts."""

import json
import random

import pytest

from patchscout.ast_core import (
    Ast,
    AstNode,
    ast_from_nested,
    export_ast_json,
    ingest_ast_json,
    parse_source,
    subtree_hash,
)
from patchscout.errors import (
    CycleError,
    SchemaError,
    SourceSyntaxError,
    UnknownNodeError,
)

CORPUS = [
    "int f(){return 0;}",
    "",
    "int main() { for (i = 0; i < BUF_SIZE; i++) process(buf[i]); return 0; }",
    "void g(int a, char b) { if (a < b) { a = a + 1; } else b--; }",
    'char msg() { log("hello _ world", 2); while (x != 0) x = x / 2; return m; }',
    "int h() { int a = 1, b = 2; int buf[10]; buf[a] = -b * (a + 3); return buf[0]; }",
    "long fact(int n) { if (n <= 1) return 1; return n * fact(n - 1); }",
    "int loop() { for (int k = 0; k < 10; k++) { continue; } break_me(); return 0; }",
]


class TestParser:
    def test_single_function_shape(self):
        ast = parse_source("int f(){return 0;}")
        kinds = [n.kind for n in ast.nodes]
        assert kinds == ["TranslationUnit", "FunctionDef", "TypeName",
                         "ParamList", "Block", "ReturnStmt", "Literal"]
        assert ast.nodes[1].label == "f"
        assert ast.nodes[6].label == "0"
        assert ast.children[0] == (1,)
        assert ast.children[5] == (6,)

    def test_empty_input_is_bare_root(self):
        ast = parse_source("")
        assert len(ast) == 1
        assert ast.nodes[0].kind == "TranslationUnit"
        assert ast.children[0] == ()

    def test_for_loop_condition_shape(self):
        ast = parse_source(
            "int main() { for (i = 0; i < BUF_SIZE; i++) process(buf[i]); }")
        fors = [n for n in ast.nodes if n.kind == "ForStmt"]
        assert len(fors) == 1
        init, cond, update, body = ast.children[fors[0].id]
        assert ast.nodes[cond].kind == "BinaryExpr"
        assert ast.nodes[cond].label == "<"
        lhs, rhs = ast.children[cond]
        assert (ast.nodes[lhs].kind, ast.nodes[lhs].label) == ("Identifier", "i")
        assert (ast.nodes[rhs].kind, ast.nodes[rhs].label) == ("Identifier", "BUF_SIZE")
        assert ast.nodes[init].kind == "AssignExpr"
        assert ast.nodes[update].kind == "UnaryExpr"

    def test_precedence(self):
        ast = parse_source("int f() { x = a + b * c; }")
        assign = next(n for n in ast.nodes if n.kind == "AssignExpr")
        _, rhs = ast.children[assign.id]
        assert ast.nodes[rhs].label == "+"
        left, right = ast.children[rhs]
        assert ast.nodes[left].label == "a"
        assert ast.nodes[right].label == "*"

    def test_parentheses_override_precedence(self):
        ast = parse_source("int f() { x = (a + b) * c; }")
        assign = next(n for n in ast.nodes if n.kind == "AssignExpr")
        _, rhs = ast.children[assign.id]
        assert ast.nodes[rhs].label == "*"

    def test_comments_discarded(self):
        plain = parse_source("int f() { return 1; }")
        noisy = parse_source(
            "// leading\nint f() { /* inline\n comment */ return 1; }")
        assert [n.kind for n in plain.nodes] == [n.kind for n in noisy.nodes]
        assert [n.label for n in plain.nodes] == [n.label for n in noisy.nodes]

    def test_determinism(self):
        for src in CORPUS:
            assert parse_source(src) == parse_source(src)

    def test_preorder_id_agreement(self):
        for src in CORPUS:
            ast = parse_source(src)
            order = []
            stack = [0]
            while stack:
                v = stack.pop()
                order.append(v)
                stack.extend(reversed(ast.children[v]))
            assert order == list(range(len(ast)))

    def test_span_containment(self):
        for src in CORPUS:
            ast = parse_source(src)
            for v in range(len(ast)):
                parent_span = ast.nodes[v].span
                for c in ast.children[v]:
                    child_span = ast.nodes[c].span
                    assert parent_span[:2] <= child_span[:2]
                    assert child_span[2:] <= parent_span[2:]

    def test_children_in_source_order(self):
        for src in CORPUS:
            ast = parse_source(src)
            for v in range(len(ast)):
                starts = [ast.nodes[c].span[:2] for c in ast.children[v]]
                assert starts == sorted(starts)

    def test_syntax_error_has_position_and_expected(self):
        with pytest.raises(SourceSyntaxError) as exc:
            parse_source("int f() { return 0 }")
        assert exc.value.line == 1
        assert exc.value.col == 20
        assert exc.value.expected

    @pytest.mark.parametrize("bad", [
        "int",
        "int f( { }",
        "f() {}",
        "int f() { if (x) }",
        "int f() { x = ; }",
        'int f() { s = "unterminated; }',
        "int f() { /* never closed }",
        "int f() { x = 1 @ 2; }",
    ])
    def test_rejects_bad_input(self, bad):
        with pytest.raises(SourceSyntaxError):
            parse_source(bad)


class TestAstJson:
    def test_minimal_document(self):
        ast = ingest_ast_json(
            '{"nodes":[{"id":0,"kind":"TranslationUnit"}],"children":{"0":[]}}')
        assert len(ast) == 1
        assert ast.nodes[0].kind == "TranslationUnit"
        assert ast.nodes[0].label is None

    def test_roundtrip_on_parser_corpus(self):
        for src in CORPUS:
            ast = parse_source(src, "x.c")
            doc = export_ast_json(ast)
            again = ingest_ast_json(doc)
            assert again == ast
            assert export_ast_json(again) == doc

    def test_multi_parent_rejected(self):
        doc = json.dumps({
            "file_path": "x.c",
            "nodes": [{"id": 0, "kind": "A"}, {"id": 1, "kind": "B"},
                      {"id": 2, "kind": "C"}],
            "children": {"0": [1, 2], "2": [1]},
        })
        with pytest.raises((CycleError, SchemaError)):
            ingest_ast_json(doc)

    def test_unknown_kind_accepted_verbatim(self):
        doc = json.dumps({
            "file_path": "x.rs",
            "nodes": [{"id": 0, "kind": "SourceFile"},
                      {"id": 1, "kind": "MacroInvocation", "label": "println"}],
            "children": {"0": [1]},
        })
        ast = ingest_ast_json(doc)
        assert ast.nodes[1].kind == "MacroInvocation"

    @pytest.mark.parametrize("doc,hint", [
        ('{"nodes":[],"children":{}}', "nodes"),
        ('{"nodes":[{"id":0}],"children":{}}', "kind"),
        ('{"nodes":[{"id":"0","kind":"A"}],"children":{}}', "id"),
        ('{"nodes":[{"id":0,"kind":"A"},{"id":0,"kind":"B"}],"children":{}}', "duplicate"),
        ('{"nodes":[{"id":0,"kind":"A"},{"id":5,"kind":"B"}],"children":{}}', "ids"),
        ('{"nodes":[{"id":0,"kind":"A","span":[1,2]}],"children":{}}', "span"),
        ('{"nodes":[{"id":0,"kind":"A"}],"children":{"7":[0]}}', "unknown"),
        ('not json at all', "JSON"),
    ])
    def test_schema_errors_name_the_path(self, doc, hint):
        with pytest.raises(SchemaError):
            ingest_ast_json(doc)

    def test_non_preorder_ids_rejected(self):
        doc = json.dumps({
            "nodes": [{"id": 0, "kind": "A"}, {"id": 1, "kind": "B"},
                      {"id": 2, "kind": "C"}],
            "children": {"0": [2, 1]},
        })
        with pytest.raises(SchemaError):
            ingest_ast_json(doc)


class TestSubtreeHash:
    def test_same_text_same_root_hash(self):
        a = parse_source(CORPUS[2])
        b = parse_source(CORPUS[2])
        assert subtree_hash(a, 0) == subtree_hash(b, 0)

    def test_label_changes_hash(self):
        a = ast_from_nested(("Identifier", "x", []))
        b = ast_from_nested(("Identifier", "y", []))
        assert subtree_hash(a, 0) != subtree_hash(b, 0)

    def test_span_excluded(self):
        a = parse_source("int f() {\n return q; }")
        b = parse_source("int f() { return q; }")
        assert a.nodes[5].span != b.nodes[5].span
        assert subtree_hash(a, 0) == subtree_hash(b, 0)

    def test_unknown_node(self):
        ast = parse_source("int f(){}")
        with pytest.raises(UnknownNodeError):
            subtree_hash(ast, 99)

    def test_hash_congruence_random_trees(self):
        # brute-force isomorphism oracle on random small tree pairs
        from conftest import random_ast

        def isomorphic(x, i, y, j):
            nx, ny = x.nodes[i], y.nodes[j]
            if nx.kind != ny.kind or nx.label != ny.label:
                return False
            cx, cy = x.children[i], y.children[j]
            if len(cx) != len(cy):
                return False
            return all(isomorphic(x, a, y, b) for a, b in zip(cx, cy))

        rng = random.Random(1234)
        for _ in range(200):
            a = random_ast(rng, max_depth=3, max_children=3)
            b = random_ast(rng, max_depth=3, max_children=3)
            ia = rng.randrange(len(a))
            ib = rng.randrange(len(b))
            same_hash = subtree_hash(a, ia) == subtree_hash(b, ib)
            assert same_hash == isomorphic(a, ia, b, ib)


class TestAstValidation:
    def test_root_as_child_rejected(self):
        with pytest.raises(CycleError):
            Ast([AstNode(0, "A", None, None), AstNode(1, "B", None, None)],
                [[1], [0]])

    def test_ids_must_be_dense(self):
        with pytest.raises(SchemaError):
            Ast([AstNode(0, "A", None, None), AstNode(2, "B", None, None)],
                [[1], []])

    def test_unreachable_node_rejected(self):
        with pytest.raises((SchemaError, CycleError)):
            Ast([AstNode(0, "A", None, None), AstNode(1, "B", None, None)],
                [[], []])

    def test_subtree_ids_contiguous(self):
        ast = parse_source(CORPUS[3])
        for v in range(len(ast)):
            ids = set()
            stack = [v]
            while stack:
                u = stack.pop()
                ids.add(u)
                stack.extend(ast.children[u])
            assert ids == set(ast.subtree_ids(v))
