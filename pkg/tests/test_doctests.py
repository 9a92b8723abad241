import doctest

import pytest

import cococat
from cococat import term_structure


@pytest.mark.parametrize("module", [cococat, term_structure])
def test_docstring_examples(module):
    result = doctest.testmod(module, optionflags=doctest.ELLIPSIS)
    assert result.attempted > 0 and result.failed == 0
