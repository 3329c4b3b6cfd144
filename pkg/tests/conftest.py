from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wnfixture import FixtureInfo, build_dict_dir

from taxokit import wordnet


@pytest.fixture(scope="session")
def wn_fixture(tmp_path_factory) -> FixtureInfo:
    return build_dict_dir(tmp_path_factory.mktemp("wn") / "dict")


@pytest.fixture(scope="session")
def wn_dict_dir(wn_fixture) -> Path:
    """Directory with WordNet-3.0 format data files.

    Set TAXOKIT_WORDNET_DICT to point the suite at a real WordNet ``dict``
    directory; by default the bundled miniature corpus is used.
    """
    override = os.environ.get("TAXOKIT_WORDNET_DICT")
    if override:
        return Path(override)
    return wn_fixture.dict_dir


@pytest.fixture(scope="session")
def wn_graph(wn_fixture) -> wordnet.TaxonomyGraph:
    return wordnet.parse_wordnet(wn_fixture.dict_dir)
