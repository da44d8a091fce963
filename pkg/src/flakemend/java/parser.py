"""Subset parser producing :class:`ClassModel` from a Java compilation unit.

Only declarations are modeled (package, imports, fields, methods, constructors);
method bodies, generics and lambdas are kept as opaque token runs.
"""

from __future__ import annotations

from .lexer import JavaSyntaxError, LineIndex, Token, tokenize
from .structure import ClassModel, FieldDecl, ImportDecl, MethodModel, OpaqueMember, Parameter

MODIFIERS = frozenset(
    {"public", "protected", "private", "static", "final", "abstract", "native", "synchronized", "transient",
     "volatile", "strictfp", "default", "sealed", "non-sealed"}
)
TYPE_KEYWORDS = frozenset({"class", "interface", "enum", "record"})
_OPEN = {"(": ")", "[": "]", "{": "}"}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.index = LineIndex(text)
        self.toks = tokenize(text)
        self.n = len(self.toks)

    # -- token helpers ---------------------------------------------------
    def fail(self, message: str, i: int | None = None):
        if i is None or i >= self.n:
            line = self.toks[-1].line if self.toks else 1
        else:
            line = self.toks[i].line
        raise JavaSyntaxError(message, line)

    def tok(self, i: int) -> Token:
        if i >= self.n:
            self.fail("unexpected end of file")
        return self.toks[i]

    def skip_balanced(self, i: int) -> int:
        """``i`` points at an opening bracket; returns the index after its match."""
        stack = [_OPEN[self.tok(i).text]]
        i += 1
        while stack:
            t = self.tok(i)
            if t.kind == "op":
                if t.text in _OPEN:
                    stack.append(_OPEN[t.text])
                elif t.text in (")", "]", "}"):
                    if t.text != stack[-1]:
                        self.fail(f"unbalanced {t.text!r}", i)
                    stack.pop()
            i += 1
        return i

    def skip_angles(self, i: int) -> int:
        """``i`` at ``<``; returns index after the matching ``>``."""
        depth = 0
        while True:
            t = self.tok(i)
            if t.is_op("<"):
                depth += 1
            elif t.is_op(">"):
                depth -= 1
                if depth == 0:
                    return i + 1
            elif t.is_op("(", "["):
                i = self.skip_balanced(i)
                continue
            elif t.is_op(";", "{", "}"):
                self.fail("unterminated type arguments", i)
            i += 1

    def skip_annotation(self, i: int) -> int:
        """``i`` at ``@``; returns index after the annotation."""
        i += 1
        if self.tok(i).kind != "ident":
            self.fail("malformed annotation", i)
        i += 1
        while i + 1 < self.n and self.toks[i].is_op(".") and self.toks[i + 1].kind == "ident":
            i += 2
        if i < self.n and self.toks[i].is_op("("):
            i = self.skip_balanced(i)
        return i

    def skip_type(self, i: int) -> int:
        """Skip a type reference: annotations, qualified name, type args, dims, varargs."""
        while self.tok(i).is_op("@"):
            i = self.skip_annotation(i)
        if self.tok(i).is_op("?"):
            i += 1
        elif self.tok(i).kind != "ident":
            self.fail(f"expected a type, found {self.tok(i).text!r}", i)
        else:
            i += 1
        while True:
            t = self.tok(i)
            if t.is_op("<"):
                i = self.skip_angles(i)
            elif t.is_op(".") and self.tok(i + 1).kind == "ident":
                i += 2
            elif t.is_op(".") and self.tok(i + 1).is_op("@"):
                i += 1
                while self.tok(i).is_op("@"):
                    i = self.skip_annotation(i)
            elif t.is_op("[") and self.tok(i + 1).is_op("]"):
                i += 2
            elif t.is_op("..."):
                i += 1
            elif t.is_op("@"):
                i = self.skip_annotation(i)
            else:
                return i

    def slice(self, a: int, b: int) -> str:
        """Source text from token ``a`` through token ``b - 1``."""
        if b <= a:
            return ""
        return self.text[self.toks[a].start : self.toks[b - 1].end]

    # -- compilation unit -------------------------------------------------
    def parse(self) -> ClassModel:
        if not self.toks:
            raise JavaSyntaxError("empty compilation unit", 1)
        i = 0
        package = ""
        imports: list[ImportDecl] = []
        # package annotations are legal in package-info only, but tolerate them
        j = i
        while j < self.n and self.toks[j].is_op("@"):
            j = self.skip_annotation(j)
        if j < self.n and self.toks[j].is_word("package"):
            k = j + 1
            while not self.tok(k).is_op(";"):
                k += 1
            package = "".join(t.text for t in self.toks[j + 1 : k])
            i = k + 1
        while i < self.n and self.toks[i].is_word("import"):
            k = i + 1
            while not self.tok(k).is_op(";"):
                if self.tok(k).is_op("{", "}", "("):
                    self.fail("malformed import", k)
                k += 1
            is_static = self.toks[i + 1].is_word("static")
            name = "".join(t.text for t in self.toks[i + (2 if is_static else 1) : k])
            if not name:
                self.fail("empty import", i)
            imports.append(
                ImportDecl(name, is_static, raw=self.slice(i, k + 1), start=self.toks[i].start, end=self.toks[k].end)
            )
            i = k + 1
        while i < self.n and self.toks[i].is_op(";"):
            i += 1
        if i >= self.n:
            self.fail("no type declaration found")

        primary = None
        extra: list[OpaqueMember] = []
        while i < self.n:
            if self.toks[i].is_op(";"):
                i += 1
                continue
            decl_start = i
            i = self._skip_modifiers(i)[0]
            kind_tok = self.tok(i)
            if kind_tok.is_op("@") and self.tok(i + 1).is_word("interface"):
                kind, i = "@interface", i + 2
            elif kind_tok.kind == "ident" and kind_tok.text in TYPE_KEYWORDS:
                kind, i = kind_tok.text, i + 1
            else:
                self.fail(f"expected a type declaration, found {kind_tok.text!r}", i)
            name_tok = self.tok(i)
            if name_tok.kind != "ident":
                self.fail("type declaration without a name", i)
            j = i + 1
            while not self.tok(j).is_op("{"):
                if self.tok(j).is_op("(", "<"):
                    j = self.skip_balanced(j) if self.tok(j).is_op("(") else self.skip_angles(j)
                    continue
                if self.tok(j).is_op(";", "}"):
                    self.fail("type declaration without a body", j)
                j += 1
            end = self.skip_balanced(j)
            if primary is None:
                primary = (kind, name_tok.text, j, end)
            else:
                extra.append(self._opaque(kind, name_tok.text, decl_start, end))
            i = end
        kind, name, body_open, body_close_after = primary
        fields, methods, ctors, opaque = self._class_body(kind, name, body_open, body_close_after - 1)
        return ClassModel(
            package=package,
            name=name,
            kind=kind,
            imports=tuple(imports),
            fields=tuple(fields),
            methods=tuple(methods),
            constructors=tuple(ctors),
            opaque=tuple(opaque + extra),
            source_text=self.text,
            tokens=tuple(self.toks),
            line_index=self.index,
            body_start=self.toks[body_open].start,
            body_end=self.toks[body_close_after - 1].start,
        )

    def _opaque(self, kind: str, name: str, a: int, b: int) -> OpaqueMember:
        start, end = self.toks[a].start, self.toks[b - 1].end
        return OpaqueMember(kind, name, start, end, self.index.line_of(start), self.index.line_of(end - 1))

    def _skip_modifiers(self, i: int) -> tuple[int, list[tuple[int, int]], list[str]]:
        """Returns (next index, annotation token ranges, modifiers)."""
        annotations, modifiers = [], []
        while i < self.n:
            t = self.toks[i]
            if t.is_op("@") and not (i + 1 < self.n and self.toks[i + 1].is_word("interface")):
                end = self.skip_annotation(i)
                annotations.append((i, end))
                i = end
            elif t.kind == "ident" and t.text in MODIFIERS:
                # ``default`` doubles as a switch label; only a modifier before a type/name
                modifiers.append(t.text)
                i += 1
            elif (t.is_word("non") and i + 2 < self.n and self.toks[i + 1].is_op("-")
                  and self.toks[i + 2].is_word("sealed")):
                modifiers.append("non-sealed")
                i += 3
            else:
                break
        return i, annotations, modifiers

    # -- class body ------------------------------------------------------------
    def _class_body(self, kind: str, class_name: str, open_i: int, close_i: int):
        fields: list[FieldDecl] = []
        methods: list[MethodModel] = []
        ctors: list[MethodModel] = []
        opaque: list[OpaqueMember] = []
        i = open_i + 1
        if kind == "enum":
            i = self._skip_enum_constants(i, close_i)
        elif kind == "record":
            pass
        while i < close_i:
            t = self.toks[i]
            if t.is_op(";"):
                i += 1
                continue
            if t.is_op("{"):
                end = self.skip_balanced(i)
                opaque.append(self._opaque("initializer", "", i, end))
                i = end
                continue
            if t.is_word("static") and self.tok(i + 1).is_op("{"):
                end = self.skip_balanced(i + 1)
                opaque.append(self._opaque("static-initializer", "", i, end))
                i = end
                continue
            start = i
            i, ann_ranges, mods = self._skip_modifiers(i)
            t = self.tok(i)
            if (t.kind == "ident" and t.text in TYPE_KEYWORDS and self.tok(i + 1).kind == "ident"
                    and not self.tok(i + 1).is_op("(")) or (t.is_op("@") and self.tok(i + 1).is_word("interface")):
                nested_kind = t.text if t.kind == "ident" else "@interface"
                j = i + (1 if t.kind == "ident" else 2)
                nested_name = self.tok(j).text
                while not self.tok(j).is_op("{"):
                    if self.tok(j).is_op("(", "<"):
                        j = self.skip_balanced(j) if self.tok(j).is_op("(") else self.skip_angles(j)
                        continue
                    if self.tok(j).is_op(";", "}"):
                        self.fail("nested type without a body", j)
                    j += 1
                end = self.skip_balanced(j)
                opaque.append(self._opaque(nested_kind, nested_name, start, end))
                i = end
                continue
            type_params = ""
            if t.is_op("<"):
                end = self.skip_angles(i)
                type_params = self.slice(i, end)
                i = end
            annotations = tuple(self.slice(a, b) for a, b in ann_ranges)
            if self.tok(i).kind == "ident" and self.tok(i + 1).is_op("("):
                # constructor (or a method that lost its return type)
                m, i = self._method(start, i, i, i, annotations, mods, type_params,
                                    is_ctor=self.tok(i).text == class_name)
                (ctors if m.is_constructor else methods).append(m)
                continue
            if kind == "record" and self.tok(i).kind == "ident" and self.tok(i + 1).is_op("{"):
                # compact canonical constructor
                end = self.skip_balanced(i + 1)
                opaque.append(self._opaque("compact-constructor", self.tok(i).text, start, end))
                i = end
                continue
            type_start = i
            i = self.skip_type(i)
            type_end = i
            name_tok = self.tok(i)
            if name_tok.kind != "ident":
                self.fail(f"expected a member name, found {name_tok.text!r}", i)
            if self.tok(i + 1).is_op("("):
                m, i = self._method(start, type_start, type_end, i, annotations, mods, type_params, is_ctor=False)
                methods.append(m)
            else:
                new_fields, i = self._fields(start, type_start, type_end, i, annotations, mods, close_i)
                fields.extend(new_fields)
        return fields, methods, ctors, opaque

    def _skip_enum_constants(self, i: int, close_i: int) -> int:
        while i < close_i:
            t = self.toks[i]
            if t.is_op(";"):
                return i + 1
            if t.is_op("(", "{", "["):
                i = self.skip_balanced(i)
                continue
            i += 1
        return i

    def _method(self, start, type_start, type_end, name_i, annotations, mods, type_params, is_ctor):
        name = self.toks[name_i].text
        open_p = name_i + 1
        close_after = self.skip_balanced(open_p)
        params = self._parameters(open_p + 1, close_after - 1)
        i = close_after
        while self.tok(i).is_op("[") and self.tok(i + 1).is_op("]"):
            i += 2
        throws = ""
        if self.tok(i).is_word("throws"):
            j = i + 1
            while not self.tok(j).is_op("{", ";"):
                if self.tok(j).is_op("<"):
                    j = self.skip_angles(j)
                    continue
                if self.tok(j).is_op("}", "(", "="):
                    self.fail("malformed throws clause", j)
                j += 1
            throws = self.slice(i + 1, j)
            i = j
        if self.tok(i).is_word("default"):
            while not self.tok(i).is_op(";"):
                i = self.skip_balanced(i) if self.tok(i).is_op("(", "{", "[") else i + 1
        body_text = None
        body_offset = None
        if self.tok(i).is_op("{"):
            end = self.skip_balanced(i)
            body_text = self.slice(i, end)
            body_tok = i
            i = end
        elif self.tok(i).is_op(";"):
            body_tok = None
            i += 1
        else:
            self.fail(f"expected method body, found {self.tok(i).text!r}", i)
        s = self.toks[start].start
        e = self.toks[i - 1].end
        if body_tok is not None:
            body_offset = self.toks[body_tok].start - s
        ret_span = (self.toks[type_start].start - s, self.toks[type_end - 1].end - s) if type_end > type_start else (
            self.toks[name_i].start - s, self.toks[name_i].start - s)
        params_span = (self.toks[open_p].end - s, self.toks[close_after - 1].start - s)
        m = MethodModel(
            name=name,
            annotations=annotations,
            modifiers=tuple(mods),
            type_params=type_params,
            return_type="" if type_end <= type_start else self.slice(type_start, type_end),
            parameters=tuple(params),
            throws=throws,
            body_text=body_text,
            start=s,
            end=e,
            start_line=self.index.line_of(s),
            end_line=self.index.line_of(e - 1),
            text=self.text[s:e],
            is_constructor=is_ctor,
            return_type_span=ret_span,
            params_span=params_span,
            body_offset=body_offset,
        )
        return m, i

    def _parameters(self, a: int, b: int) -> list[Parameter]:
        params, start, depth = [], a, 0
        i = a
        chunks = []
        while i < b:
            t = self.toks[i]
            if t.is_op("<"):
                depth += 1
            elif t.is_op(">"):
                depth -= 1
            elif t.is_op("(", "[", "{"):
                i = self.skip_balanced(i)
                continue
            elif t.is_op(",") and depth == 0:
                chunks.append((start, i))
                start = i + 1
            i += 1
        if b > a:
            chunks.append((start, b))
        for s, e in chunks:
            j = s
            while j < e and (self.toks[j].is_op("@") or self.toks[j].is_word("final")):
                j = self.skip_annotation(j) if self.toks[j].is_op("@") else j + 1
            k = e
            dims = ""
            while k - 2 >= j and self.toks[k - 1].is_op("]") and self.toks[k - 2].is_op("["):
                dims += "[]"
                k -= 2
            if k - 1 <= j or self.toks[k - 1].kind != "ident":
                self.fail("malformed parameter", s)
            params.append(Parameter(self.slice(j, k - 1) + dims, self.toks[k - 1].text, self.slice(s, e)))
        return params

    def _fields(self, start, type_start, type_end, name_i, annotations, mods, close_i):
        type_text = self.slice(type_start, type_end)
        names = [self.toks[name_i].text]
        i = name_i + 1
        prev_comma = False
        while True:
            t = self.tok(i)
            if i >= close_i:
                self.fail("field declaration missing ';'", name_i)
            if t.is_op(";"):
                break
            if t.is_op("(", "[", "{"):
                i = self.skip_balanced(i)
                prev_comma = False
                continue
            if t.is_op("<"):
                # could be a generic call in an initializer or a comparison; scan flat
                pass
            if prev_comma and t.kind == "ident" and self.tok(i + 1).is_op("=", ",", ";", "["):
                names.append(t.text)
            prev_comma = t.is_op(",")
            i += 1
        s, e = self.toks[start].start, self.toks[i].end
        text = self.text[s:e]
        decls = [
            FieldDecl(n, type_text, tuple(mods), annotations, s, e, self.index.line_of(s), self.index.line_of(e - 1),
                      text)
            for n in names
        ]
        return decls, i + 1


def parse_test_class(source_text: str) -> ClassModel:
    """Parse a compilation unit; raises :class:`JavaSyntaxError` on failure."""
    return _Parser(source_text).parse()


def parse_member(source_text: str) -> ClassModel:
    """Parse one or more member declarations by wrapping them in a dummy class.

    Offsets in the result refer to the wrapped text; use ``.text`` slices.
    """
    return parse_test_class("class __Member__ {\n" + source_text + "\n}\n")
