"""
Python ソース解析サービス

ソースファイルから全ての def / async def を抽出し、シグネチャ・本体・先頭 docstring と
バイト単位の範囲を FunctionRecord として返す。
構文解析は ast、ヘッダ末尾のコロン位置は tokenize で求める。
失敗はファイル単位（ParseFailure）で、途中まで解析できても関数は1件も返さない。
"""
import ast
import codecs
import io
import logging
import re
import textwrap
import tokenize
from typing import Optional

from documint.exceptions import ParseFailure
from documint.models.source import DocstringBlock, FunctionRecord, Param, QuoteStyle, SourceSpan

logger = logging.getLogger(__name__)

UTF8_BOM = b"\xef\xbb\xbf"
CODING_RE = re.compile(rb"^[ \t\f]*#.*?coding[:=][ \t]*([-\w.]+)")

_OPENERS = {"(", "[", "{"}
_CLOSERS = {")", "]", "}"}

FunctionNode = ast.FunctionDef | ast.AsyncFunctionDef


class _SourceText:
    """ファイルのバイト列と行頭オフセット表"""

    def __init__(self, data: bytes, file_id: str):
        self.file_id = file_id
        self.data = data
        self.bom = len(UTF8_BOM) if data.startswith(UTF8_BOM) else 0
        try:
            self.text = data[self.bom:].decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseFailure(f"invalid UTF-8 at byte {e.start}") from None

        # bytes.splitlines は \n, \r, \r\n のみで分割する（tokenizer と同じ行数え）
        self.line_starts = [self.bom]
        offset = self.bom
        for line in data[self.bom:].splitlines(keepends=True):
            offset += len(line)
            self.line_starts.append(offset)

    @property
    def line_count(self) -> int:
        return len(self.line_starts) - 1

    def line_bytes(self, lineno: int) -> bytes:
        """行末の改行を除いた行の内容"""
        raw = self.data[self.line_starts[lineno - 1]:self.line_starts[lineno]]
        return raw.rstrip(b"\r\n")

    def offset(self, lineno: int, byte_col: int) -> int:
        return self.line_starts[lineno - 1] + byte_col

    def char_to_byte_col(self, lineno: int, char_col: int) -> int:
        line = self.line_bytes(lineno).decode("utf-8")
        return len(line[:char_col].encode("utf-8"))

    def slice(self, start: int, end: int) -> str:
        return self.data[start:end].decode("utf-8")

    def segment(self, node: ast.AST) -> str:
        start = self.offset(node.lineno, node.col_offset)
        end = self.offset(node.end_lineno, node.end_col_offset)
        return self.slice(start, end)


def _check_encoding_cookie(data: bytes) -> None:
    for line in data.splitlines()[:2]:
        match = CODING_RE.match(line)
        if not match:
            continue
        name = match.group(1).decode("ascii", "replace").lower().replace("_", "-")
        if name in ("utf-8", "utf8") or name.startswith("utf-8-"):
            return
        try:
            normalized = codecs.lookup(name).name
        except LookupError:
            raise ParseFailure(f"unknown source encoding '{name}'") from None
        if normalized not in ("utf-8", "utf-8-sig"):
            raise ParseFailure(f"unsupported source encoding '{name}'")
        return


def _header_colons(source: _SourceText) -> list[tuple[int, int]]:
    """
    def キーワードの出現順に、ヘッダを閉じるコロンの終端位置 (行, 文字列オフセット) を返す

    ヘッダのコロンは def と同じ括弧深さに現れる最初の ':' である。
    """
    colons: list[tuple[int, int]] = []
    pending: list[tuple[int, int]] = []  # (colons 内の添字, def 時点の括弧深さ)
    depth = 0
    readline = io.StringIO(source.text, newline=None).readline
    try:
        for tok in tokenize.generate_tokens(readline):
            if tok.type == tokenize.NAME and tok.string == "def":
                pending.append((len(colons), depth))
                colons.append((0, 0))
            elif tok.type == tokenize.OP:
                if tok.string in _OPENERS:
                    depth += 1
                elif tok.string in _CLOSERS:
                    depth -= 1
                elif tok.string == ":" and pending and pending[-1][1] == depth:
                    index, _ = pending.pop()
                    colons[index] = tok.end
    except (tokenize.TokenError, SyntaxError) as e:
        raise ParseFailure(f"tokenize error: {e}") from None
    if pending:
        raise ParseFailure("function header without closing colon")
    return colons


def _quote_style(raw_literal: str) -> QuoteStyle:
    literal = raw_literal.lstrip("rRuU")
    if literal.startswith('"""'):
        return QuoteStyle.TRIPLE_DOUBLE
    if literal.startswith("'''"):
        return QuoteStyle.TRIPLE_SINGLE
    if literal.startswith('"'):
        return QuoteStyle.SINGLE_DOUBLE
    return QuoteStyle.SINGLE_SINGLE


def clean_docstring(value: str) -> str:
    """
    docstring の値を整形する

    タブを展開し、2行目以降の共通インデントを除去する（1行目はそのまま）。
    先頭・末尾の空行は取り除く。
    """
    lines = value.expandtabs().split("\n")
    first, rest = lines[0], lines[1:]
    if rest:
        rest = textwrap.dedent("\n".join(rest)).split("\n")
    cleaned = [first] + rest
    while cleaned and not cleaned[0].strip():
        cleaned.pop(0)
    while cleaned and not cleaned[-1].strip():
        cleaned.pop()
    return "\n".join(cleaned)


def _is_string_statement(stmt: ast.stmt) -> bool:
    return (
        isinstance(stmt, ast.Expr)
        and isinstance(stmt.value, ast.Constant)
        and isinstance(stmt.value.value, str)
    )


def _literal_styles(raw_literal: str) -> set[QuoteStyle]:
    """暗黙に連結されたリテラルそれぞれのクォート形式"""
    readline = io.StringIO("(" + raw_literal + ")").readline
    return {_quote_style(tok.string) for tok in tokenize.generate_tokens(readline) if tok.type == tokenize.STRING}


def _docstring_block(body: list[ast.stmt], source: _SourceText) -> Optional[DocstringBlock]:
    if not body or not _is_string_statement(body[0]):
        return None
    literal = body[0].value
    start = source.offset(literal.lineno, literal.col_offset)
    end = source.offset(literal.end_lineno, literal.end_col_offset)
    raw = source.slice(start, end)
    styles = _literal_styles(raw)
    if len(styles) != 1:
        logger.debug(f"{source.file_id}:{literal.lineno}: literals with mixed quote styles are not a docstring")
        return None
    content = clean_docstring(literal.value)
    return DocstringBlock(
        raw_literal=raw,
        content=content,
        quote_style=styles.pop(),
        line_count=len(content.split("\n")) if content else 0,
        span=SourceSpan(
            file_id=source.file_id,
            start_line=literal.lineno,
            end_line=literal.end_lineno,
            start_byte=start,
            end_byte=end,
        ),
    )


def _indent_width(line: str) -> int:
    expanded = line.expandtabs()
    return len(expanded) - len(expanded.lstrip())


def _extend_over_comments(source: _SourceText, end: int, end_line: int, def_line: int) -> tuple[int, int]:
    """
    本体末尾に続くコメントを関数の範囲に含める

    最終文と同じ行の末尾コメント、および def より深くインデントされたコメント行
    （空行を挟んでもよい）が対象。末尾の空行は含めない。
    """
    line_end = source.line_starts[end_line - 1] + len(source.line_bytes(end_line))
    rest = source.data[end:line_end].decode("utf-8")
    if rest.strip().startswith("#"):
        end = line_end

    def_indent = _indent_width(source.line_bytes(def_line).decode("utf-8"))
    lineno = end_line + 1
    while lineno <= source.line_count:
        line = source.line_bytes(lineno).decode("utf-8")
        stripped = line.strip()
        if not stripped:
            lineno += 1
            continue
        if not stripped.startswith("#") or _indent_width(line) <= def_indent:
            break
        end = source.line_starts[lineno - 1] + len(source.line_bytes(lineno))
        end_line = lineno
        lineno += 1
    return end, end_line


def _params(args: ast.arguments, source: _SourceText) -> list[Param]:
    def text(node: Optional[ast.AST]) -> Optional[str]:
        return source.segment(node) if node is not None else None

    params: list[Param] = []
    positional = args.posonlyargs + args.args
    first_default = len(positional) - len(args.defaults)
    for index, arg in enumerate(positional):
        default = args.defaults[index - first_default] if index >= first_default else None
        params.append(Param(name=arg.arg, annotation=text(arg.annotation), default=text(default)))
    if args.vararg is not None:
        params.append(Param(name=f"*{args.vararg.arg}", annotation=text(args.vararg.annotation)))
    for arg, default in zip(args.kwonlyargs, args.kw_defaults):
        params.append(Param(name=arg.arg, annotation=text(arg.annotation), default=text(default)))
    if args.kwarg is not None:
        params.append(Param(name=f"**{args.kwarg.arg}", annotation=text(args.kwarg.annotation)))
    return params


class _FunctionCollector(ast.NodeVisitor):
    """クラス・関数のスコープを辿りながら関数ノードを集める"""

    def __init__(self):
        self.scopes: list[tuple[str, bool]] = []  # (名前, クラスか)
        self.found: list[tuple[FunctionNode, str, bool]] = []

    def visit_ClassDef(self, node: ast.ClassDef) -> None:
        self.scopes.append((node.name, True))
        self.generic_visit(node)
        self.scopes.pop()

    def visit_FunctionDef(self, node: ast.FunctionDef) -> None:
        self._collect(node)

    def visit_AsyncFunctionDef(self, node: ast.AsyncFunctionDef) -> None:
        self._collect(node)

    def _collect(self, node: FunctionNode) -> None:
        qualified_name = ".".join([name for name, _ in self.scopes] + [node.name])
        is_method = bool(self.scopes) and self.scopes[-1][1]
        self.found.append((node, qualified_name, is_method))
        self.scopes.append((node.name, False))
        self.generic_visit(node)
        self.scopes.pop()


def _build_record(
    node: FunctionNode,
    qualified_name: str,
    is_method: bool,
    colon: tuple[int, int],
    source: _SourceText,
) -> FunctionRecord:
    start = source.offset(node.lineno, node.col_offset)
    colon_line, colon_char = colon
    colon_end = source.offset(colon_line, source.char_to_byte_col(colon_line, colon_char))
    last = node.body[-1]
    end = source.offset(last.end_lineno, last.end_col_offset)
    end, end_line = _extend_over_comments(source, end, last.end_lineno, node.lineno)

    return FunctionRecord(
        qualified_name=qualified_name,
        signature_text=source.slice(start, colon_end),
        params=_params(node.args, source),
        is_async=isinstance(node, ast.AsyncFunctionDef),
        is_method=is_method,
        decorators=[source.segment(d) for d in node.decorator_list],
        body_source=source.slice(colon_end, end),
        docstring=_docstring_block(node.body, source),
        span=SourceSpan(
            file_id=source.file_id,
            start_line=node.lineno,
            end_line=end_line,
            start_byte=start,
            end_byte=end,
        ),
    )


def _parse(source: bytes | str, file_id: str) -> tuple[ast.Module, list[FunctionRecord]]:
    data = source.encode("utf-8") if isinstance(source, str) else source
    _check_encoding_cookie(data)
    text = _SourceText(data, file_id)

    try:
        tree = ast.parse(text.text, filename=file_id)
    except SyntaxError as e:
        raise ParseFailure(f"syntax error: {e.msg}", e.lineno) from None
    except (ValueError, RecursionError, MemoryError) as e:
        raise ParseFailure(f"cannot parse: {e}") from None

    collector = _FunctionCollector()
    collector.visit(tree)
    found = sorted(collector.found, key=lambda item: (item[0].lineno, item[0].col_offset))
    colons = _header_colons(text)
    if len(colons) != len(found):
        raise ParseFailure(f"found {len(colons)} def keywords but {len(found)} function nodes")

    records = [
        _build_record(node, qualified_name, is_method, colon, text)
        for (node, qualified_name, is_method), colon in zip(found, colons)
    ]
    return tree, records


def scan_module(source: bytes | str, file_id: str) -> list[FunctionRecord]:
    """
    ソースファイル1つから全ての関数を抽出する

    Args:
        source: ファイルの内容（bytes の場合は UTF-8 として解釈）
        file_id: 範囲情報に記録する識別子（通常は相対パス）

    Returns:
        ソース順に並んだ FunctionRecord のリスト（ネスト関数・メソッドを含む）

    Raises:
        ParseFailure: デコード・字句解析・構文解析のいずれかに失敗した場合
    """
    _, records = _parse(source, file_id)
    logger.debug(f"Scanned {file_id}: {len(records)} functions")
    return records


def parse_function(source: str, file_id: str = "<function>") -> FunctionRecord:
    """トップレベルに関数定義がちょうど1つだけあるソースを解析する"""
    tree, records = _parse(source, file_id)
    if len(tree.body) != 1 or not isinstance(tree.body[0], (ast.FunctionDef, ast.AsyncFunctionDef)):
        raise ParseFailure("expected exactly one top-level function definition")
    return records[0]


def function_source(record: FunctionRecord) -> str:
    """関数の範囲そのもののテキスト（デコレータは含まない）"""
    return record.source_text


def extract_docstring(suite_source: str, file_id: str = "<suite>") -> Optional[DocstringBlock]:
    """
    関数本体（ヘッダのコロン以降）から docstring を取り出す

    本体の最初の文が文字列リテラルだけの式文である場合に限り DocstringBlock を返す。
    範囲は suite_source 先頭からのオフセットで表す。
    """
    header = b"def _():"
    try:
        tree, records = _parse(header + suite_source.encode("utf-8"), file_id)
    except ParseFailure as e:
        logger.debug(f"Suite could not be parsed, no docstring: {e}")
        return None
    if len(tree.body) != 1 or not records:
        return None
    block = records[0].docstring
    if block is None:
        return None
    span = block.span
    return block.model_copy(update={
        "span": span.model_copy(update={
            "start_byte": span.start_byte - len(header),
            "end_byte": span.end_byte - len(header),
        }),
    })


def strip_docstring(record: FunctionRecord) -> str:
    """
    docstring の文を取り除いた関数ソースを返す

    docstring が無ければ元のソースをそのまま返す。
    取り除くと本体が空になる場合、または次の文も文字列リテラルで新たな docstring に
    なってしまう場合は、リテラルを同じ位置の pass に置き換える。
    """
    source_text = function_source(record)
    if record.docstring is None:
        return source_text

    data = source_text.encode("utf-8")
    local = _SourceText(data, record.span.file_id)
    try:
        tree = ast.parse(local.text)
    except SyntaxError as e:
        raise ParseFailure(f"function source does not re-parse: {e.msg}", e.lineno) from None
    body = tree.body[0].body
    first = body[0]
    doc_start = local.offset(first.lineno, first.col_offset)
    doc_end = local.offset(first.end_lineno, first.end_col_offset)

    if len(body) == 1 or _is_string_statement(body[1]):
        return (data[:doc_start] + b"pass" + data[doc_end:]).decode("utf-8")

    following = body[1]
    if following.lineno == first.end_lineno:
        # 同じ行に ; で続く文がある
        next_start = local.offset(following.lineno, following.col_offset)
        return (data[:doc_start] + data[next_start:]).decode("utf-8")

    line_start = local.line_starts[first.lineno - 1]
    next_line_start = local.line_starts[first.end_lineno]
    return (data[:line_start] + data[next_line_start:]).decode("utf-8")
