"""Shared fixtures: the bundled synthetic corpus and objects derived from it."""

from pathlib import Path

import pytest

from hybridkm import (
    TurnKind,
    TurnPrediction,
    build_index,
    extend_label,
    load_corpus,
    load_database,
    load_document_base,
    load_ontology,
)

DATA = Path(__file__).parent / "data" / "synthetic"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def ontology():
    return load_ontology(DATA / "ontology.json")


@pytest.fixture(scope="session")
def corpus(ontology):
    return load_corpus(DATA / "corpus.json", ontology=ontology)


@pytest.fixture(scope="session")
def base():
    return load_document_base(DATA / "docs.json")


@pytest.fixture(scope="session")
def db(ontology):
    return load_database(DATA / "db.json", ontology=ontology)


@pytest.fixture(scope="session")
def index(base):
    return build_index(base)


@pytest.fixture(scope="session")
def gold_predictions(corpus, base, index):
    """Oracle predictions: gold extended states, gold document ranked first,
    gold responses copied verbatim."""
    predictions = []
    for dialog in corpus:
        for turn in dialog.turns:
            if turn.kind is TurnKind.INSERTED:
                doc = base.documents[turn.doc_id]
                state = extend_label(turn.state, (doc, index.topic(turn.doc_id)))
                ranked = (turn.doc_id,)
            else:
                state = turn.state
                ranked = ()
            predictions.append(
                TurnPrediction(
                    dialog_id=dialog.id,
                    turn_index=turn.index,
                    state=state,
                    ranked_docs=ranked,
                    response=turn.response,
                )
            )
    return predictions
