import pytest

from kgcurate.ontology import parse_obo
from kgcurate.synthetic import synthetic_knowledge_graph

TOY_OBO = """\
format-version: 1.2

[Term]
id: TOY:0001
name: molecular entity
namespace: chemical_entity

[Term]
id: TOY:0002
name: carboxylic acid
namespace: chemical_entity
is_a: TOY:0001

[Term]
id: TOY:0003
name: acetic acid
namespace: chemical_entity
is_a: TOY:0002
relationship: has_role TOY:0006
relationship: is_conjugate_acid_of TOY:0007

[Term]
id: TOY:0004
name: benzoic acid
namespace: chemical_entity
is_a: TOY:0002

[Term]
id: TOY:0005
name: (2S)-2-aminopropanoic acid
namespace: chemical_entity
is_a: TOY:0002
relationship: has_part TOY:0001

[Term]
id: TOY:0006
name: food acidity regulator
namespace: role

[Term]
id: TOY:0007
name: acetate
namespace: chemical_entity
is_a: TOY:0001
relationship: is_conjugate_base_of TOY:0003

[Term]
id: TOY:0008
name: retired entity
is_obsolete: true
is_a: TOY:0001
"""


@pytest.fixture
def toy_obo_text():
    return TOY_OBO


@pytest.fixture
def toy_kg():
    return parse_obo(TOY_OBO)


@pytest.fixture(scope="session")
def syn_kg():
    return synthetic_knowledge_graph(200, seed=42)


@pytest.fixture(scope="session")
def syn_kg_large():
    return synthetic_knowledge_graph(900, seed=7)
