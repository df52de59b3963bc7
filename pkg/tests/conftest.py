import pytest

from genraven.core import ObjectSpec, Panel, Row, rule_inventory
from genraven.gen import generate_row
from genraven.rng import unit_stream


def mk_panel(entries):
    """Panel from (slot, shape, size, color) tuples."""
    return Panel.from_placed({slot: ObjectSpec(s, z, c) for slot, s, z, c in entries})


def mk_row(p1, p2, p3):
    return Row((p1, p2, p3))


@pytest.fixture(scope="session")
def row_corpus():
    """10,000 generated rows: 250 per rule, with their targets."""
    corpus = []
    for rule in rule_inventory():
        for i in range(250):
            row = generate_row(rule, unit_stream(7701, "corpus", rule.index, i))
            corpus.append((rule, row))
    return corpus
