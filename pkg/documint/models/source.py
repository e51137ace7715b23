from pydantic import BaseModel, ConfigDict, model_validator
from typing import Optional
from enum import Enum


class QuoteStyle(str, Enum):
    """docstring リテラルのクォート形式"""
    TRIPLE_DOUBLE = "triple-double"
    TRIPLE_SINGLE = "triple-single"
    SINGLE_DOUBLE = "single-double"
    SINGLE_SINGLE = "single-single"

    @property
    def delimiter(self) -> str:
        return {
            QuoteStyle.TRIPLE_DOUBLE: '"""',
            QuoteStyle.TRIPLE_SINGLE: "'''",
            QuoteStyle.SINGLE_DOUBLE: '"',
            QuoteStyle.SINGLE_SINGLE: "'",
        }[self]


class SourceSpan(BaseModel):
    """ファイル内の範囲（行は1始まり、バイトはファイル先頭からのオフセット）"""
    model_config = ConfigDict(frozen=True)

    file_id: str
    start_line: int
    end_line: int
    start_byte: int
    end_byte: int

    @model_validator(mode="after")
    def _check_order(self) -> "SourceSpan":
        if self.start_line > self.end_line:
            raise ValueError("start_line must not exceed end_line")
        if self.start_byte >= self.end_byte:
            raise ValueError("start_byte must be smaller than end_byte")
        return self

    def contains(self, other: "SourceSpan") -> bool:
        return self.start_byte <= other.start_byte and other.end_byte <= self.end_byte


class Param(BaseModel):
    """関数パラメータ（可変長引数は名前に * / ** を含める）"""
    model_config = ConfigDict(frozen=True)

    name: str
    annotation: Optional[str] = None
    default: Optional[str] = None


class DocstringBlock(BaseModel):
    """関数本体の先頭にある docstring"""
    model_config = ConfigDict(frozen=True)

    raw_literal: str
    content: str
    quote_style: QuoteStyle
    line_count: int
    span: SourceSpan

    @model_validator(mode="after")
    def _check_quotes(self) -> "DocstringBlock":
        delimiter = self.quote_style.delimiter
        if not (self.raw_literal.lstrip("rRuU").startswith(delimiter) and self.raw_literal.endswith(delimiter)):
            raise ValueError(f"raw_literal must begin and end with {delimiter}")
        return self


class FunctionRecord(BaseModel):
    """構文解析で得た関数1件分の情報"""
    model_config = ConfigDict(frozen=True)

    qualified_name: str
    signature_text: str
    params: list[Param]
    is_async: bool
    is_method: bool
    decorators: list[str]
    body_source: str
    docstring: Optional[DocstringBlock] = None
    span: SourceSpan

    @model_validator(mode="after")
    def _check_body(self) -> "FunctionRecord":
        if not self.body_source.strip():
            raise ValueError("body_source must not be empty")
        if self.docstring is not None and not self.span.contains(self.docstring.span):
            raise ValueError("docstring span must lie inside the function span")
        return self

    @property
    def name(self) -> str:
        return self.qualified_name.rsplit(".", 1)[-1]

    @property
    def is_nested(self) -> bool:
        """クラス以外（関数）の中で定義されているか"""
        return "." in self.qualified_name and not self.is_method

    @property
    def source_text(self) -> str:
        return self.signature_text + self.body_source
