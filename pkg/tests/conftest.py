import json
from pathlib import Path

import pytest

from storydeck.model import (
    Column,
    DataFact,
    Dataset,
    FactScores,
    KnowledgeDoc,
    MetaRelation,
    SubScores,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def cars() -> Dataset:
    """Small validated car-sales table used across modules."""
    return Dataset(
        name="cars",
        columns=(
            Column("model", "categorical"),
            Column("category", "categorical"),
            Column("sales", "numeric"),
            Column("year", "temporal"),
        ),
        rows=(
            ("Camry", "Sedan", 400, 2007),
            ("Corolla", "Sedan", 300, 2007),
            ("Accord", "Sedan", 290, 2007),
            ("CR-V", "SUV", 210, 2010),
            ("CR-V", "SUV", 260, 2011),
            ("Escape", "SUV", 100, 2007),
            ("Escape", "SUV", 120, 2008),
            ("Escape", "SUV", 150, 2009),
        ),
    )


def make_fact(
    fact_id="f1",
    subspace=(),
    dimension="model",
    measures=(("sales", "sum"),),
    fact_type="extreme",
    parameters=None,
    focus=(),
    importance=0.5,
    interest=0.0,
    description="",
    chart_id="c1",
) -> DataFact:
    if parameters is None:
        parameters = {"polarity": "max", "value": 1}
    return DataFact(
        id=fact_id,
        subspace=frozenset(subspace),
        dimension=dimension,
        measures=tuple(measures),
        fact_type=fact_type,
        parameters=parameters,
        focus=frozenset(focus),
        scores=FactScores(importance=importance, interest_alignment=interest),
        description=description,
        chart_id=chart_id,
    )


def make_relation(
    relation_id="m0",
    fact_a="f1",
    fact_b="f2",
    type_description="linked by shared background",
    status="suggested",
    score=None,
    sub_scores=(3, 3, 3, 3, 3),
    entities=("camry",),
) -> MetaRelation:
    sub = SubScores(*sub_scores)
    if score is None:
        score = sub.confidence * sum(sub.weighted()) / 100.0
    return MetaRelation(
        id=relation_id,
        fact_a=fact_a,
        fact_b=fact_b,
        type_description=type_description,
        summary="linked",
        score=score,
        status=status,
        sub_scores=sub,
        entities=tuple(entities),
    )


def ev_fixture_paths() -> dict:
    return {
        "data": FIXTURES / "ev_cars.csv",
        "knowledge": FIXTURES / "ev_knowledge.txt",
        "chart_prius": FIXTURES / "ev_chart_prius.json",
        "chart_plugins": FIXTURES / "ev_chart_plugins.json",
        "mock": FIXTURES / "ev_mock_script.json",
    }


@pytest.fixture
def ev_paths():
    return ev_fixture_paths()


@pytest.fixture
def ev_knowledge_doc(ev_paths) -> KnowledgeDoc:
    return KnowledgeDoc(
        doc_id="k1",
        title="electric cars",
        body=ev_paths["knowledge"].read_text(encoding="utf-8"),
    )


def load_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))
