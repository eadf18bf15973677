from __future__ import annotations

import csv
import random
from pathlib import Path

import pytest

P_TEXT = "This is in p (Block-level) tag. "
SPAN_TEXT = "This is in span (Inline-level) tag. "

# (html, expected units with trailing spaces as originally printed)
SEGMENTATION_EXAMPLES = [
    (
        """<body>
    <p>This is in p (Block-level) tag. </p>
</body>""",
        [P_TEXT],
    ),
    (
        """<body>
    <div>
        <p>This is in p (Block-level) tag. </p>
        <p>This is in p (Block-level) tag. </p>
    </div>
</body>""",
        [P_TEXT, P_TEXT],
    ),
    (
        """<body>
    <div>
        <p>This is in p (Block-level) tag.
            <span>This is in span (Inline-level) tag. </span>
        </p>
    </div>
</body>""",
        [P_TEXT + SPAN_TEXT],
    ),
    (
        """<body>
    <p>This is in p (Block-level) tag. </p>
    <script>console.log("script will be ignored")</script>
</body>""",
        [P_TEXT],
    ),
]


@pytest.fixture
def segmentation_examples():
    return SEGMENTATION_EXAMPLES


# -- synthetic shop corpus ------------------------------------------------------

DARK_TEMPLATES = [
    "Hurry! Only {n} left in stock",
    "{n} people are viewing this right now",
    "{n} people have viewed this item",
    "Only {n} items left, order soon!",
    "Your order is reserved for {n}:{m} minutes!",
    "{n} Claimed! Hurry, only a few left!",
    "No thanks, I don't like saving money",
    "Sale ends in {n} hours {m} minutes",
    "In Stock only {n} left",
    "{n} sold in last {m} hours",
    "Someone in {city} just bought this",
    "Limited time offer: {n}% off ends soon",
]
CITIES = ["Boston", "Denver", "Austin", "Leeds", "Perth", "Osaka"]
NEUTRAL_WORDS = (
    "shipping policy returns contact about careers privacy terms gift cards "
    "clothing shoes accessories jewelry home garden kitchen bedding lamps "
    "newsletter signup account sign in register wishlist cart checkout size "
    "guide color material cotton leather wool handmade organic product "
    "description reviews customer service faq store locator blog press "
    "international delivery track order payment methods secure warranty"
).split()


def _dark_text(rng: random.Random) -> str:
    return rng.choice(DARK_TEMPLATES).format(n=rng.randint(2, 999), m=rng.randint(10, 59), city=rng.choice(CITIES))


def _neutral_text(rng: random.Random) -> str:
    words = rng.sample(NEUTRAL_WORDS, rng.randint(2, 6))
    text = " ".join(words).capitalize()
    return text + rng.choice(["", ".", "!", " (privacy policy)."])


def make_corpus(root: Path, n_pages: int = 30, seed: int = 0) -> tuple[Path, Path]:
    """Write ``n_pages`` shop pages and a dark-pattern record file under ``root``.

    Every page shows a few neutral blocks and one or two dark-pattern texts;
    the records file lists the dark texts (with a couple of duplicates and an
    empty row) in the upstream column layout.
    """
    rng = random.Random(seed)
    pages = root / "pages"
    pages.mkdir(parents=True)
    rows = []
    for i in range(n_pages):
        url = f"https://shop{i}.example.com/product"
        darks = [_dark_text(rng) for _ in range(rng.randint(1, 2))]
        blocks = []
        for _ in range(rng.randint(6, 12)):
            blocks.append(f"<div class='blk'><p>{_neutral_text(rng)}</p></div>")
        for d in darks:
            # The page shows a different count than the recorded one.
            shown = d.replace(str(rng.randint(0, 9)), str(rng.randint(0, 9)))
            blocks.insert(rng.randrange(len(blocks)), f"<div class='urgency'><span>{shown}</span></div>")
            rows.append({"Pattern String": d, "Comment": "", "Pattern Category": "Scarcity",
                         "Pattern Type": "Low-stock Message", "Where in website?": "Product Page",
                         "Deceptive?": "No", "Website Page": url})
        html = (
            "<!DOCTYPE html><html><head><title>Shop</title><style>p{color:red}</style></head><body>"
            "<nav><ul><li><a href='/'>Home</a></li><li><a href='/sale'>Sale</a></li></ul></nav>"
            + "".join(blocks)
            + "<script>var x = 1;</script><footer><p>International Shipping Policy</p></footer>"
            "</body></html>"
        )
        (pages / f"page{i:03d}.html").write_text(html, encoding="utf-8")
    rows.append(dict(rows[0]))
    rows.append({**rows[1], "Pattern String": ""})
    positives = root / "dark-patterns.csv"
    with open(positives, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return pages, positives


@pytest.fixture
def corpus(tmp_path):
    return make_corpus(tmp_path / "corpus")


def make_text_dataset(n_per_class: int = 150, seed: int = 0) -> list[tuple[str, int]]:
    rng = random.Random(seed)
    rows = [(_dark_text(rng), 1) for _ in range(n_per_class)]
    rows += [(_neutral_text(rng), 0) for _ in range(n_per_class)]
    return rows


# -- acceptance report ------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
