import sys

import numpy as np
import pytest

from pup.dataset import Dataset


def make_dataset(
    n_users,
    item_category,
    item_level,
    train=(),
    validation=(),
    test=(),
    levels=None,
    n_categories=None,
):
    item_category = list(item_category)
    item_level = list(item_level)
    return Dataset(
        user_ids=[f"u{k}" for k in range(n_users)],
        item_ids=[f"i{k}" for k in range(len(item_category))],
        category_ids=[f"c{k}" for k in range(n_categories or (max(item_category) + 1))],
        price_level_count=levels or max(2, max(item_level) + 1),
        item_price_level=item_level,
        item_category=item_category,
        train=list(train),
        validation=list(validation),
        test=list(test),
    )


def random_dataset(rng, max_users=4, max_items=5, max_categories=2, max_levels=3):
    """Micro dataset whose graph has at most 4 + 5 + 2 + 3 = 14 nodes."""
    m = int(rng.integers(1, max_users + 1))
    n = int(rng.integers(2, max_items + 1))
    c = int(rng.integers(1, max_categories + 1))
    lv = int(rng.integers(2, max_levels + 1))
    pairs = {(int(rng.integers(m)), int(rng.integers(n))) for _ in range(int(rng.integers(1, 2 * m * n)))}
    return make_dataset(
        m,
        rng.integers(c, size=n),
        rng.integers(lv, size=n),
        train=sorted(pairs),
        levels=lv,
        n_categories=c,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
