"""HTML parsing and UI-level text segmentation.

Pages are parsed with html5lib (WHATWG tree construction, so malformed
markup is recovered the way browsers do) into a small immutable tree of
:class:`DomNode` objects. :func:`segment_element` walks that tree and splits
it into text units: a block element whose children are all text or inline
elements becomes one unit, anything else is split further.
"""

from __future__ import annotations

import codecs
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional

import html5lib

__all__ = [
    "DecodeError",
    "DomNode",
    "DomTree",
    "ElementClass",
    "NodeKind",
    "SegmentedText",
    "TagPolicy",
    "classify_tag",
    "decode_html",
    "parse_document",
    "segment_document",
    "segment_element",
    "text_content",
]


class NodeKind(str, Enum):
    ELEMENT = "element"
    TEXT = "text"


class ElementClass(str, Enum):
    IGNORED = "ignored"
    BLOCK = "block"
    INLINE = "inline"
    OTHER = "other"


@dataclass(frozen=True)
class DomNode:
    kind: NodeKind
    tag_name: Optional[str] = None
    text_data: Optional[str] = None
    children: tuple[DomNode, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is NodeKind.TEXT:
            if self.children:
                raise ValueError("text nodes cannot have children")
            if self.text_data is None:
                raise ValueError("text nodes need text_data")
        else:
            if not self.tag_name:
                raise ValueError("element nodes need a tag name")
            if self.tag_name != self.tag_name.lower():
                raise ValueError(f"tag name must be lowercase: {self.tag_name!r}")

    @classmethod
    def element(cls, tag_name: str, *children: DomNode) -> DomNode:
        return cls(NodeKind.ELEMENT, tag_name=tag_name, children=tuple(children))

    @classmethod
    def text(cls, data: str) -> DomNode:
        return cls(NodeKind.TEXT, text_data=data)

    @property
    def is_text(self) -> bool:
        return self.kind is NodeKind.TEXT


@dataclass(frozen=True)
class DomTree:
    """A parsed document. ``root`` is the ``html`` element."""

    root: DomNode

    @property
    def body(self) -> DomNode:
        for child in self.root.children:
            if not child.is_text and child.tag_name == "body":
                return child
        raise ValueError("document has no body element")


# Block-level and inline element lists from MDN. Tags in the ignore list
# (hr, br, script, noscript) are left out so the three sets stay disjoint.
DEFAULT_IGNORE_ELEMENTS = frozenset({"script", "style", "noscript", "br", "hr"})
DEFAULT_BLOCK_ELEMENTS = frozenset({
    "address", "article", "aside", "blockquote", "details", "dialog", "dd",
    "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form",
    "h1", "h2", "h3", "h4", "h5", "h6", "header", "hgroup", "li", "main",
    "nav", "ol", "p", "pre", "section", "table", "ul",
})
DEFAULT_INLINE_ELEMENTS = frozenset({
    "a", "abbr", "acronym", "audio", "b", "bdi", "bdo", "big", "button",
    "canvas", "cite", "code", "data", "datalist", "del", "dfn", "em", "embed",
    "i", "iframe", "img", "input", "ins", "kbd", "label", "map", "mark",
    "meter", "object", "output", "picture", "progress", "q", "ruby", "s",
    "samp", "select", "slot", "small", "span", "strong", "sub", "sup", "svg",
    "template", "textarea", "time", "tt", "u", "var", "video", "wbr",
})


@dataclass(frozen=True)
class TagPolicy:
    ignore_elements: frozenset[str] = DEFAULT_IGNORE_ELEMENTS
    block_elements: frozenset[str] = DEFAULT_BLOCK_ELEMENTS
    inline_elements: frozenset[str] = DEFAULT_INLINE_ELEMENTS

    def __post_init__(self) -> None:
        for name in ("ignore_elements", "block_elements", "inline_elements"):
            object.__setattr__(self, name, frozenset(t.lower() for t in getattr(self, name)))
        overlap = (
            (self.ignore_elements & self.block_elements)
            | (self.ignore_elements & self.inline_elements)
            | (self.block_elements & self.inline_elements)
        )
        if overlap:
            raise ValueError(f"tag policy sets overlap: {sorted(overlap)}")

    def with_overrides(
        self,
        ignore: Optional[set[str]] = None,
        block: Optional[set[str]] = None,
        inline: Optional[set[str]] = None,
    ) -> TagPolicy:
        """Return a policy with the given sets replaced.

        A tag moved into one set is removed from the other two so the result
        stays disjoint.
        """
        sets = {
            "ignore_elements": set(self.ignore_elements),
            "block_elements": set(self.block_elements),
            "inline_elements": set(self.inline_elements),
        }
        for name, new in (("ignore_elements", ignore), ("block_elements", block), ("inline_elements", inline)):
            if new is None:
                continue
            new = {t.lower() for t in new}
            sets[name] = new
            for other in sets:
                if other != name:
                    sets[other] -= new
        return TagPolicy(**{k: frozenset(v) for k, v in sets.items()})


@dataclass(frozen=True)
class SegmentedText:
    text: str
    source_url: str
    node_path: list[int] = field(default_factory=list)

    def to_record(self) -> dict:
        return {"text": self.text, "source_url": self.source_url, "node_path": list(self.node_path)}


class DecodeError(ValueError):
    """Raised when page bytes cannot be decoded with the chosen encoding."""

    def __init__(self, encoding: str, offset: int, reason: str):
        self.encoding = encoding
        self.offset = offset
        super().__init__(f"cannot decode as {encoding} at byte offset {offset}: {reason}")


# Labels that browsers map to windows-1252.
_ENCODING_ALIASES = {
    "iso-8859-1": "cp1252",
    "iso8859-1": "cp1252",
    "latin1": "cp1252",
    "latin-1": "cp1252",
    "us-ascii": "cp1252",
    "ascii": "cp1252",
}
_BOMS = (
    (codecs.BOM_UTF8, "utf-8"),
    (codecs.BOM_UTF16_LE, "utf-16-le"),
    (codecs.BOM_UTF16_BE, "utf-16-be"),
)
_META_CHARSET = re.compile(rb"<meta[^>]*?charset\s*=\s*[\"']?\s*([A-Za-z0-9_.:-]+)", re.IGNORECASE)


def _lookup(label: Optional[str]) -> Optional[str]:
    if not label:
        return None
    label = label.strip().lower()
    label = _ENCODING_ALIASES.get(label, label)
    try:
        return codecs.lookup(label).name
    except LookupError:
        return None


def sniff_encoding(data: bytes, hint: Optional[str] = None) -> tuple[str, int]:
    """Pick an encoding: BOM, then caller hint, then ``<meta charset>``, then UTF-8.

    Returns the codec name and the number of leading BOM bytes to skip.
    """
    for bom, name in _BOMS:
        if data.startswith(bom):
            return name, len(bom)
    if hint is not None:
        name = _lookup(hint)
        if name is None:
            raise LookupError(f"unknown encoding: {hint!r}")
        return name, 0
    match = _META_CHARSET.search(data[:1024])
    if match:
        name = _lookup(match.group(1).decode("ascii"))
        # A page cannot really be UTF-16 if an ASCII meta tag was readable.
        if name is not None and not name.startswith("utf-16"):
            return name, 0
    return "utf-8", 0


def decode_html(data: bytes, encoding: Optional[str] = None) -> str:
    name, skip = sniff_encoding(data, encoding)
    try:
        return data[skip:].decode(name)
    except UnicodeDecodeError as exc:
        raise DecodeError(name, exc.start + skip, exc.reason) from exc


def _local_name(tag: str) -> str:
    if tag.startswith("{"):
        tag = tag.rsplit("}", 1)[1]
    return tag.lower()


def _convert(el: ET.Element) -> DomNode:
    children: list[DomNode] = []

    def add_text(data: Optional[str]) -> None:
        if not data:
            return
        if children and children[-1].is_text:
            # Dropped comments can leave two text runs side by side.
            children[-1] = DomNode.text(children[-1].text_data + data)
        else:
            children.append(DomNode.text(data))

    add_text(el.text)
    for child in el:
        if isinstance(child.tag, str):
            children.append(_convert(child))
        # Comments and processing instructions are dropped but their tail
        # text still belongs to this element.
        add_text(child.tail)
    return DomNode.element(_local_name(el.tag), *children)


def parse_document(html: bytes | str, encoding: Optional[str] = None) -> DomTree:
    """Parse a page into a :class:`DomTree` with an ``html`` root and a ``body``.

    ``html`` may be raw bytes (decoded via :func:`decode_html`) or an already
    decoded string. Comments and the doctype are dropped and a body is always
    present, even for empty input or frameset documents.
    """
    text = decode_html(html, encoding) if isinstance(html, (bytes, bytearray)) else html
    document = html5lib.parse(text, treebuilder="etree", namespaceHTMLElements=False)
    root = _convert(document)
    if not any(not c.is_text and c.tag_name == "body" for c in root.children):
        root = DomNode.element(root.tag_name, *root.children, DomNode.element("body"))
    return DomTree(root)


def classify_tag(tag_name: str, policy: TagPolicy = TagPolicy()) -> ElementClass:
    if tag_name in policy.ignore_elements:
        return ElementClass.IGNORED
    if tag_name in policy.block_elements:
        return ElementClass.BLOCK
    if tag_name in policy.inline_elements:
        return ElementClass.INLINE
    return ElementClass.OTHER


def _collapse(text: str) -> Optional[str]:
    collapsed = " ".join(text.split())
    return collapsed or None


def _raw_text(node: DomNode, policy: TagPolicy, out: list[str]) -> None:
    if node.is_text:
        out.append(node.text_data)
        return
    if node.tag_name in policy.ignore_elements:
        return
    for child in node.children:
        _raw_text(child, policy, out)


def text_content(node: DomNode, policy: TagPolicy = TagPolicy()) -> Optional[str]:
    """Whitespace-collapsed text under ``node``, skipping ignored subtrees.

    Returns ``None`` when nothing but whitespace is left.
    """
    parts: list[str] = []
    _raw_text(node, policy, parts)
    return _collapse("".join(parts))


def _iter_segments(
    node: Optional[DomNode], policy: TagPolicy, path: tuple[int, ...]
) -> Iterator[tuple[str, tuple[int, ...]]]:
    if node is None:
        return
    children = node.children
    element_children = [c for c in children if not c.is_text]
    if not any(c.tag_name in policy.ignore_elements for c in element_children):
        if all(c.tag_name in policy.inline_elements for c in element_children):
            text = text_content(node, policy)
            if text is not None:
                yield text, path
                return

    for i, child in enumerate(children):
        child_path = path + (i,)
        if child.is_text:
            text = _collapse(child.text_data)
            if text is not None:
                yield text, child_path
            continue
        cls = classify_tag(child.tag_name, policy)
        if cls is ElementClass.IGNORED:
            continue
        if cls is ElementClass.INLINE:
            text = text_content(child, policy)
            if text is not None:
                yield text, child_path
        else:
            # Unknown tags recurse like block elements so their text is kept.
            yield from _iter_segments(child, policy, child_path)


def segment_element(node: Optional[DomNode], policy: TagPolicy = TagPolicy()) -> list[str]:
    return [text for text, _ in _iter_segments(node, policy, ())]


def segment_document(tree: DomTree, policy: TagPolicy = TagPolicy(), source_url: str = "") -> list[SegmentedText]:
    return [
        SegmentedText(text=text, source_url=source_url, node_path=list(path))
        for text, path in _iter_segments(tree.body, policy, ())
    ]
