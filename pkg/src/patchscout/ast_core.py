"""C-subset parsing and AST utilities.

The mini-language covers the structural core of C: function definitions,
variable declarations, ``if``/``while``/``for``/``return``/``break``/
``continue``, blocks, assignment, calls, array indexing, unary and binary
expressions with standard C precedence, identifiers, and integer/string
literals.  Line (``//``) and block (``/* */``) comments are discarded.
There is no preprocessor, no typedef resolution, and no pointer syntax;
richer languages enter through :func:`ingest_ast_json`.

ASTs are immutable after construction, node ids are assigned in preorder
(so the subtree of node ``i`` occupies the contiguous id range
``[i, i + subtree_size(i))``), and structurally identical subtrees hash
equal under :func:`subtree_hash`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import (
    CycleError,
    SchemaError,
    SourceSyntaxError,
    UnknownNodeError,
)

# Closed enumeration of kinds the parser can emit.  Ingested documents may
# carry other kind strings; they are accepted verbatim as opaque tags.
NODE_KINDS = frozenset({
    "TranslationUnit", "FunctionDef", "ParamList", "Param", "TypeName",
    "Block", "DeclStmt", "ArraySpec", "IfStmt", "WhileStmt", "ForStmt",
    "ReturnStmt", "BreakStmt", "ContinueStmt", "EmptyStmt", "ExprStmt",
    "AssignExpr", "BinaryExpr", "UnaryExpr", "CallExpr", "IndexExpr",
    "Identifier", "Literal", "StringLiteral", "CommitRoot",
})

Span = tuple[int, int, int, int]  # (start_line, start_col, end_line, end_col), 1-based


@dataclass(frozen=True)
class AstNode:
    id: int
    kind: str
    label: str | None
    span: Span | None


class Ast:
    """An ordered rooted tree of typed, labeled source nodes.

    ``nodes[i].id == i`` for all i; node 0 is the root; ids are in preorder.
    Instances must not be mutated after construction.
    """

    __slots__ = ("nodes", "children", "file_path", "_parents", "_sizes",
                 "_heights", "_hashes", "_postorder")

    def __init__(self, nodes: list[AstNode], children: list[tuple[int, ...]],
                 file_path: str = ""):
        self.nodes = tuple(nodes)
        self.children = tuple(tuple(c) for c in children)
        self.file_path = file_path
        self._parents: tuple[int | None, ...] | None = None
        self._sizes: tuple[int, ...] | None = None
        self._heights: tuple[int, ...] | None = None
        self._hashes: tuple[int, ...] | None = None
        self._postorder: tuple[int, ...] | None = None
        self._validate()

    def _validate(self) -> None:
        n = len(self.nodes)
        if n == 0:
            raise SchemaError("AST must have at least a root node")
        if len(self.children) != n:
            raise SchemaError("children table size does not match node count")
        for i, node in enumerate(self.nodes):
            if node.id != i:
                raise SchemaError(f"node at position {i} has id {node.id}; ids must be dense and sorted")
        parent: list[int | None] = [None] * n
        for p, kids in enumerate(self.children):
            for c in kids:
                if not 0 <= c < n:
                    raise SchemaError(f"node {p} lists unknown child {c}")
                if c == 0:
                    raise CycleError(f"root listed as child of node {p}")
                if parent[c] is not None:
                    raise CycleError(f"node {c} has multiple parents ({parent[c]} and {p})")
                parent[c] = p
        # Preorder/id agreement: a DFS from the root must visit 0,1,2,...,n-1.
        # This also proves reachability (no detached cycles).
        expect = 0
        stack = [0]
        while stack:
            v = stack.pop()
            if v != expect:
                raise SchemaError(f"node ids are not in preorder (visited {v}, expected {expect})")
            expect += 1
            stack.extend(reversed(self.children[v]))
        if expect != n:
            raise CycleError("children relation does not reach every node")
        self._parents = tuple(parent)

    def __len__(self) -> int:
        return len(self.nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ast):
            return NotImplemented
        return (self.nodes == other.nodes and self.children == other.children
                and self.file_path == other.file_path)

    def __hash__(self) -> int:  # identity-ish; Asts are rarely dict keys
        return hash((len(self.nodes), self.file_path))

    def parent(self, i: int) -> int | None:
        return self._parents[i]

    def subtree_size(self, i: int) -> int:
        if self._sizes is None:
            sizes = [1] * len(self.nodes)
            for v in self.postorder():
                for c in self.children[v]:
                    sizes[v] += sizes[c]
            self._sizes = tuple(sizes)
        return self._sizes[i]

    def subtree_ids(self, i: int) -> range:
        """Ids of the subtree rooted at ``i`` (contiguous by preorder numbering)."""
        return range(i, i + self.subtree_size(i))

    def height(self, i: int) -> int:
        if self._heights is None:
            heights = [1] * len(self.nodes)
            for v in self.postorder():
                if self.children[v]:
                    heights[v] = 1 + max(heights[c] for c in self.children[v])
            self._heights = tuple(heights)
        return self._heights[i]

    def postorder(self) -> tuple[int, ...]:
        if self._postorder is None:
            order: list[int] = []
            stack: list[tuple[int, bool]] = [(0, False)]
            while stack:
                v, done = stack.pop()
                if done:
                    order.append(v)
                else:
                    stack.append((v, True))
                    stack.extend((c, False) for c in reversed(self.children[v]))
            self._postorder = tuple(order)
        return self._postorder


# --- construction helpers ----------------------------------------------------

# Nested-tuple tree form used by tests and generators:
#   (kind, label, [child, child, ...])
NestedTree = tuple


def ast_from_nested(tree: NestedTree, file_path: str = "") -> Ast:
    """Build an Ast from nested ``(kind, label, [children])`` tuples (spans None)."""
    nodes: list[AstNode] = []
    children: list[list[int]] = []

    def walk(t: NestedTree) -> int:
        kind, label, kids = t
        me = len(nodes)
        nodes.append(AstNode(me, kind, label, None))
        children.append([])
        for kid in kids:
            children[me].append(walk(kid))
        return me

    walk(tree)
    return Ast(nodes, children, file_path)


class _PNode:
    """Mutable parse-time node; frozen into Ast at the end."""

    __slots__ = ("kind", "label", "span", "children")

    def __init__(self, kind: str, label: str | None, span: Span | None):
        self.kind = kind
        self.label = label
        self.span = span
        self.children: list[_PNode] = []


def _freeze(root: _PNode, file_path: str) -> Ast:
    nodes: list[AstNode] = []
    children: list[list[int]] = []
    stack = [(root, -1)]
    while stack:
        pnode, parent = stack.pop()
        me = len(nodes)
        nodes.append(AstNode(me, pnode.kind, pnode.label, pnode.span))
        children.append([])
        if parent >= 0:
            children[parent].append(me)
        # push in reverse so preorder comes out left-to-right
        for kid in reversed(pnode.children):
            stack.append((kid, me))
    return Ast(nodes, children, file_path)


# --- lexer --------------------------------------------------------------------

_KEYWORDS = frozenset({"if", "else", "while", "for", "return", "break", "continue"})
_TYPE_KEYWORDS = frozenset({"void", "int", "char", "short", "long",
                            "float", "double", "unsigned", "signed"})
_PUNCT3 = ()
_PUNCT2 = ("++", "--", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=")
_PUNCT1 = tuple("+-*/%<>=!;,(){}[]")


@dataclass(frozen=True)
class _Token:
    type: str            # ident | int | string | kw | type_kw | punct | eof
    value: str
    line: int
    col: int
    end_line: int
    end_col: int


def _tokenize(text: str) -> list[_Token]:
    toks: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def err(msg: str) -> SourceSyntaxError:
        return SourceSyntaxError(msg, line, col)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            if j < 0:
                break
            col += j - i
            i = j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j < 0:
                raise err("unterminated block comment")
            chunk = text[i:j + 2]
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                col = len(chunk) - chunk.rfind("\n")
            else:
                col += len(chunk)
            i = j + 2
            continue
        start_line, start_col = line, col
        if ch == '"':
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == '"':
                    break
                if text[j] == "\n":
                    raise err("unterminated string literal")
                j += 1
            if j >= n:
                raise err("unterminated string literal")
            lexeme = text[i + 1:j]
            width = j + 1 - i
            toks.append(_Token("string", lexeme, start_line, start_col,
                               line, col + width - 1))
            col += width
            i = j + 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            lexeme = text[i:j]
            toks.append(_Token("int", lexeme, start_line, start_col,
                               line, col + len(lexeme) - 1))
            col += len(lexeme)
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            lexeme = text[i:j]
            if lexeme in _KEYWORDS:
                ttype = "kw"
            elif lexeme in _TYPE_KEYWORDS:
                ttype = "type_kw"
            else:
                ttype = "ident"
            toks.append(_Token(ttype, lexeme, start_line, start_col,
                               line, col + len(lexeme) - 1))
            col += len(lexeme)
            i = j
            continue
        two = text[i:i + 2]
        if two in _PUNCT2:
            toks.append(_Token("punct", two, start_line, start_col, line, col + 1))
            col += 2
            i += 2
            continue
        if ch in _PUNCT1:
            toks.append(_Token("punct", ch, start_line, start_col, line, col))
            col += 1
            i += 1
            continue
        raise err(f"unexpected character {ch!r}")
    toks.append(_Token("eof", "", line, col, line, col))
    return toks


# --- parser -------------------------------------------------------------------

_BINARY_LEVELS: tuple[frozenset[str], ...] = (
    frozenset({"||"}),
    frozenset({"&&"}),
    frozenset({"==", "!="}),
    frozenset({"<", ">", "<=", ">="}),
    frozenset({"+", "-"}),
    frozenset({"*", "/", "%"}),
)
_ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%="})
_PREFIX_OPS = frozenset({"-", "+", "!", "++", "--"})


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.toks = tokens
        self.pos = 0

    # token plumbing ---------------------------------------------------------

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def advance(self) -> _Token:
        t = self.toks[self.pos]
        if t.type != "eof":
            self.pos += 1
        return t

    def at_punct(self, *values: str) -> bool:
        t = self.peek()
        return t.type == "punct" and t.value in values

    def expect_punct(self, value: str) -> _Token:
        t = self.peek()
        if t.type != "punct" or t.value != value:
            raise self.error(f"unexpected {self.describe(t)}", (repr(value),))
        return self.advance()

    @staticmethod
    def describe(t: _Token) -> str:
        return "end of input" if t.type == "eof" else repr(t.value)

    def error(self, msg: str, expected: tuple[str, ...] = ()) -> SourceSyntaxError:
        t = self.peek()
        return SourceSyntaxError(msg, t.line, t.col, expected)

    @staticmethod
    def span_of(first: _Token, last: _Token) -> Span:
        return (first.line, first.col, last.end_line, last.end_col)

    def last_consumed(self) -> _Token:
        return self.toks[self.pos - 1]

    # grammar ------------------------------------------------------------------

    def translation_unit(self) -> _PNode:
        first = self.peek()
        root = _PNode("TranslationUnit", None, None)
        while self.peek().type != "eof":
            if self.peek().type != "type_kw":
                raise self.error(
                    f"unexpected {self.describe(self.peek())} at top level",
                    ("type keyword",))
            root.children.extend(self.external_declaration())
        if root.children:
            root.span = self.span_of(first, self.last_consumed())
        else:
            root.span = (1, 1, 1, 1)
        return root

    def type_name(self) -> _PNode:
        first = self.peek()
        if first.type != "type_kw":
            raise self.error(f"unexpected {self.describe(first)}", ("type keyword",))
        words = [self.advance().value]
        while self.peek().type == "type_kw":
            words.append(self.advance().value)
        return _PNode("TypeName", " ".join(words), self.span_of(first, self.last_consumed()))

    def external_declaration(self) -> list[_PNode]:
        first = self.peek()
        ty = self.type_name()
        name = self.peek()
        if name.type != "ident":
            raise self.error(f"unexpected {self.describe(name)}", ("identifier",))
        self.advance()
        if self.at_punct("("):
            return [self.function_def(first, ty, name)]
        return self.decl_statement(first, ty, name)

    def function_def(self, first: _Token, ty: _PNode, name: _Token) -> _PNode:
        fn = _PNode("FunctionDef", name.value, None)
        fn.children.append(ty)
        fn.children.append(self.param_list())
        fn.children.append(self.block())
        fn.span = self.span_of(first, self.last_consumed())
        return fn

    def param_list(self) -> _PNode:
        lparen = self.expect_punct("(")
        params = _PNode("ParamList", None, None)
        if self.peek().type == "type_kw" and self.peek().value == "void" \
                and self.toks[self.pos + 1].type == "punct" \
                and self.toks[self.pos + 1].value == ")":
            self.advance()  # bare (void)
        elif not self.at_punct(")"):
            while True:
                params.children.append(self.param())
                if self.at_punct(","):
                    self.advance()
                    continue
                break
        self.expect_punct(")")
        params.span = self.span_of(lparen, self.last_consumed())
        return params

    def param(self) -> _PNode:
        first = self.peek()
        ty = self.type_name()
        name = self.peek()
        if name.type != "ident":
            raise self.error(f"unexpected {self.describe(name)}", ("identifier",))
        self.advance()
        p = _PNode("Param", name.value, None)
        p.children.append(ty)
        if self.at_punct("["):
            lb = self.advance()
            spec = _PNode("ArraySpec", None, None)
            if not self.at_punct("]"):
                spec.children.append(self.expression())
            self.expect_punct("]")
            spec.span = self.span_of(lb, self.last_consumed())
            p.children.append(spec)
        p.span = self.span_of(first, self.last_consumed())
        return p

    def decl_statement(self, first: _Token, ty: _PNode, name: _Token,
                       for_header: bool = False) -> list[_PNode]:
        """One source declaration; comma lists expand to several DeclStmt nodes."""
        decls: list[_PNode] = []
        while True:
            d = _PNode("DeclStmt", name.value, None)
            d.children.append(_PNode(ty.kind, ty.label, ty.span))
            if self.at_punct("["):
                lb = self.advance()
                spec = _PNode("ArraySpec", None, None)
                if not self.at_punct("]"):
                    spec.children.append(self.expression())
                self.expect_punct("]")
                spec.span = self.span_of(lb, self.last_consumed())
                d.children.append(spec)
            if self.at_punct("="):
                self.advance()
                d.children.append(self.expression())
            d.span = self.span_of(first, self.last_consumed())
            decls.append(d)
            if self.at_punct(",") and not for_header:
                self.advance()
                name = self.peek()
                if name.type != "ident":
                    raise self.error(f"unexpected {self.describe(name)}", ("identifier",))
                self.advance()
                continue
            break
        if not for_header:
            self.expect_punct(";")
            end = self.last_consumed()
            for d in decls:
                d.span = (d.span[0], d.span[1], end.end_line, end.end_col)
        return decls

    def block(self) -> _PNode:
        lbrace = self.expect_punct("{")
        b = _PNode("Block", None, None)
        while not self.at_punct("}"):
            if self.peek().type == "eof":
                raise self.error("unterminated block", ("'}'",))
            b.children.extend(self.statement())
        self.expect_punct("}")
        b.span = self.span_of(lbrace, self.last_consumed())
        return b

    def statement(self) -> list[_PNode]:
        t = self.peek()
        if t.type == "punct" and t.value == "{":
            return [self.block()]
        if t.type == "type_kw":
            first = self.peek()
            ty = self.type_name()
            name = self.peek()
            if name.type != "ident":
                raise self.error(f"unexpected {self.describe(name)}", ("identifier",))
            self.advance()
            return self.decl_statement(first, ty, name)
        if t.type == "kw":
            return [self.keyword_statement()]
        if t.type == "punct" and t.value == ";":
            tok = self.advance()
            return [_PNode("EmptyStmt", None, self.span_of(tok, tok))]
        first = self.peek()
        expr = self.expression()
        self.expect_punct(";")
        stmt = _PNode("ExprStmt", None, self.span_of(first, self.last_consumed()))
        stmt.children.append(expr)
        return [stmt]

    def keyword_statement(self) -> _PNode:
        t = self.advance()
        if t.value == "if":
            self.expect_punct("(")
            cond = self.expression()
            self.expect_punct(")")
            then = self.statement_single()
            node = _PNode("IfStmt", None, None)
            node.children.append(cond)
            node.children.append(then)
            if self.peek().type == "kw" and self.peek().value == "else":
                self.advance()
                node.children.append(self.statement_single())
            node.span = self.span_of(t, self.last_consumed())
            return node
        if t.value == "while":
            self.expect_punct("(")
            cond = self.expression()
            self.expect_punct(")")
            body = self.statement_single()
            node = _PNode("WhileStmt", None, None)
            node.children.extend([cond, body])
            node.span = self.span_of(t, self.last_consumed())
            return node
        if t.value == "for":
            return self.for_statement(t)
        if t.value == "return":
            node = _PNode("ReturnStmt", None, None)
            if not self.at_punct(";"):
                node.children.append(self.expression())
            self.expect_punct(";")
            node.span = self.span_of(t, self.last_consumed())
            return node
        if t.value in ("break", "continue"):
            self.expect_punct(";")
            kind = "BreakStmt" if t.value == "break" else "ContinueStmt"
            return _PNode(kind, None, self.span_of(t, self.last_consumed()))
        raise self.error(f"unexpected keyword {t.value!r}",
                         ("if", "while", "for", "return", "break", "continue"))

    def statement_single(self) -> _PNode:
        stmts = self.statement()
        if len(stmts) != 1:
            # a comma declaration as a loop/if body; wrap to keep one child slot
            wrapper = _PNode("Block", None, stmts[0].span)
            wrapper.children = stmts
            return wrapper
        return stmts[0]

    def for_statement(self, t: _Token) -> _PNode:
        self.expect_punct("(")
        if self.peek().type == "type_kw":
            first = self.peek()
            ty = self.type_name()
            name = self.peek()
            if name.type != "ident":
                raise self.error(f"unexpected {self.describe(name)}", ("identifier",))
            self.advance()
            init = self.decl_statement(first, ty, name, for_header=True)[0]
        else:
            init = self.expression()
        self.expect_punct(";")
        cond = self.expression()
        self.expect_punct(";")
        update = self.expression()
        self.expect_punct(")")
        body = self.statement_single()
        node = _PNode("ForStmt", None, None)
        node.children.extend([init, cond, update, body])
        node.span = self.span_of(t, self.last_consumed())
        return node

    # expressions ---------------------------------------------------------------

    def expression(self) -> _PNode:
        first = self.peek()
        left = self.binary(0)
        if self.at_punct(*_ASSIGN_OPS):
            op = self.advance()
            right = self.expression()  # right-associative
            node = _PNode("AssignExpr", op.value, None)
            node.children.extend([left, right])
            node.span = self.span_of(first, self.last_consumed())
            return node
        return left

    def binary(self, level: int) -> _PNode:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        first = self.peek()
        left = self.binary(level + 1)
        while self.at_punct(*_BINARY_LEVELS[level]):
            op = self.advance()
            right = self.binary(level + 1)
            node = _PNode("BinaryExpr", op.value, None)
            node.children.extend([left, right])
            node.span = self.span_of(first, self.last_consumed())
            left = node
        return left

    def unary(self) -> _PNode:
        if self.at_punct(*_PREFIX_OPS):
            op = self.advance()
            operand = self.unary()
            node = _PNode("UnaryExpr", op.value, None)
            node.children.append(operand)
            node.span = self.span_of(op, self.last_consumed())
            return node
        return self.postfix()

    def postfix(self) -> _PNode:
        first = self.peek()
        node = self.primary()
        while True:
            if self.at_punct("("):
                self.advance()
                call = _PNode("CallExpr", None, None)
                call.children.append(node)
                if not self.at_punct(")"):
                    while True:
                        call.children.append(self.expression())
                        if self.at_punct(","):
                            self.advance()
                            continue
                        break
                self.expect_punct(")")
                call.span = self.span_of(first, self.last_consumed())
                node = call
            elif self.at_punct("["):
                self.advance()
                idx = _PNode("IndexExpr", None, None)
                idx.children.append(node)
                idx.children.append(self.expression())
                self.expect_punct("]")
                idx.span = self.span_of(first, self.last_consumed())
                node = idx
            elif self.at_punct("++", "--"):
                op = self.advance()
                post = _PNode("UnaryExpr", op.value, self.span_of(first, op))
                post.children.append(node)
                node = post
            else:
                return node

    def primary(self) -> _PNode:
        t = self.peek()
        if t.type == "ident":
            self.advance()
            return _PNode("Identifier", t.value, self.span_of(t, t))
        if t.type == "int":
            self.advance()
            return _PNode("Literal", t.value, self.span_of(t, t))
        if t.type == "string":
            self.advance()
            return _PNode("StringLiteral", t.value, self.span_of(t, t))
        if t.type == "punct" and t.value == "(":
            self.advance()
            inner = self.expression()
            self.expect_punct(")")
            return inner
        raise self.error(f"unexpected {self.describe(t)} in expression",
                         ("identifier", "literal", "'('"))


def parse_source(text: str, path: str = "<memory>") -> Ast:
    """Parse C-subset source into an Ast.

    Deterministic: identical input yields an identical tree including ids.
    Raises SourceSyntaxError with line/col and the expected-token set on the
    first violation.
    """
    parser = _Parser(_tokenize(text))
    root = parser.translation_unit()
    return _freeze(root, path)


# --- JSON interchange ----------------------------------------------------------


def export_ast_json(ast: Ast) -> str:
    """Serialize to the AST-JSON interchange format.

    Nodes are emitted sorted by id and children keys in ascending numeric
    order, so byte-identical output is guaranteed for equal ASTs.
    """
    doc = {
        "file_path": ast.file_path,
        "nodes": [
            {"id": n.id, "kind": n.kind, "label": n.label,
             "span": list(n.span) if n.span is not None else None}
            for n in ast.nodes
        ],
        "children": {str(i): list(ast.children[i]) for i in range(len(ast))},
    }
    return json.dumps(doc, indent=None, separators=(",", ":"))


def ingest_ast_json(doc: str) -> Ast:
    """Parse an AST-JSON document produced by this package or any external parser.

    Unknown node kinds are accepted verbatim.  Raises SchemaError naming the
    offending path, or CycleError if the children relation is not a tree.
    """
    try:
        data = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("document root must be an object", "$")
    file_path = data.get("file_path", "")
    if not isinstance(file_path, str):
        raise SchemaError("must be a string", "file_path")
    raw_nodes = data.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        raise SchemaError("must be a non-empty array", "nodes")
    nodes: list[AstNode] = []
    seen_ids: set[int] = set()
    for pos, item in enumerate(raw_nodes):
        where = f"nodes[{pos}]"
        if not isinstance(item, dict):
            raise SchemaError("must be an object", where)
        nid = item.get("id")
        if not isinstance(nid, int) or isinstance(nid, bool):
            raise SchemaError("id must be an integer", where)
        if nid in seen_ids:
            raise SchemaError(f"duplicate id {nid}", where)
        seen_ids.add(nid)
        kind = item.get("kind")
        if not isinstance(kind, str) or not kind:
            raise SchemaError("kind must be a non-empty string", where)
        label = item.get("label")
        if label is not None and not isinstance(label, str):
            raise SchemaError("label must be a string or null", where)
        span_raw = item.get("span")
        span: Span | None = None
        if span_raw is not None:
            if (not isinstance(span_raw, list) or len(span_raw) != 4
                    or not all(isinstance(x, int) and not isinstance(x, bool) for x in span_raw)):
                raise SchemaError("span must be null or an array of 4 integers", where)
            span = (span_raw[0], span_raw[1], span_raw[2], span_raw[3])
        nodes.append(AstNode(nid, kind, label, span))
    n = len(nodes)
    if seen_ids != set(range(n)):
        raise SchemaError(f"node ids must be exactly 0..{n - 1}", "nodes")
    nodes.sort(key=lambda x: x.id)
    raw_children = data.get("children", {})
    if not isinstance(raw_children, dict):
        raise SchemaError("must be an object", "children")
    children: list[list[int]] = [[] for _ in range(n)]
    for key, kids in raw_children.items():
        where = f"children[{key!r}]"
        try:
            pid = int(key)
        except ValueError:
            raise SchemaError("key must be a decimal node id", where) from None
        if not 0 <= pid < n:
            raise SchemaError(f"unknown node id {pid}", where)
        if not isinstance(kids, list) or not all(
                isinstance(c, int) and not isinstance(c, bool) for c in kids):
            raise SchemaError("must be an array of node ids", where)
        for c in kids:
            if not 0 <= c < n:
                raise SchemaError(f"unknown child id {c}", where)
        children[pid] = list(kids)
    return Ast(nodes, children, file_path)


# --- subtree hashing -------------------------------------------------------------

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv1a(data: bytes, h: int = _FNV_OFFSET) -> int:
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def subtree_hash(ast: Ast, node: int) -> int:
    """64-bit FNV-1a structural hash of (kind, label, ordered child hashes).

    Spans and ids are excluded, so structurally identical subtrees hash
    equal regardless of position.
    """
    if not 0 <= node < len(ast):
        raise UnknownNodeError(f"node {node} not in AST of size {len(ast)}")
    if ast._hashes is None:
        hashes = [0] * len(ast)
        for v in ast.postorder():
            nd = ast.nodes[v]
            payload = bytearray(nd.kind.encode("utf-8"))
            payload.append(0)
            if nd.label is not None:
                payload.extend(nd.label.encode("utf-8"))
            payload.append(0)
            for c in ast.children[v]:
                payload.extend(hashes[c].to_bytes(8, "little"))
            hashes[v] = _fnv1a(bytes(payload))
        ast._hashes = tuple(hashes)
    return ast._hashes[node]
