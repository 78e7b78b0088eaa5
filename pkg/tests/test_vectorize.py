import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hand_tfidf_three_docs
from setagger.textpipe import TokenDoc
from setagger.vectorize import (
    FilterPolicy,
    TfIdfModel,
    VectorizeError,
    build_matrix,
    fit,
    read_matrix,
    term_frequency,
    transform,
    write_matrix,
)

KEEP_ALL = FilterPolicy(1, 1.0)


def docs(*token_lists):
    return [TokenDoc(i, tuple(t), ("x",)) for i, t in enumerate(token_lists, 1)]


def test_hand_oracle_three_docs():
    corpus = docs(["a", "b"], ["a"], ["b", "b", "c"])
    model = fit(corpus, KEEP_ALL)
    terms, expected = hand_tfidf_three_docs()
    assert model.vocabulary.terms == tuple(terms)
    got = build_matrix(corpus, model).toarray()
    assert np.max(np.abs(got - expected)) <= 1e-12


def test_idf_examples():
    model = fit(docs(["sort", "x"], ["x"], ["x"], ["x"]), KEEP_ALL)
    idf = dict(zip(model.vocabulary.terms, model.idf))
    assert idf["sort"] == pytest.approx(math.log(4), abs=1e-12)
    assert idf["x"] == 0.0


def test_min_doc_freq_filters():
    model = fit(docs(["a", "b"], ["a"]), FilterPolicy(2, 1.0))
    assert model.vocabulary.terms == ("a",)


def test_max_doc_ratio_filters():
    model = fit(docs(["a", "b"], ["a", "b"], ["a"]), FilterPolicy(1, 0.95))
    assert model.vocabulary.terms == ("b",)


def test_empty_vocabulary_is_error():
    with pytest.raises(VectorizeError):
        fit(docs(["a"], ["b"]), FilterPolicy(2, 1.0))
    with pytest.raises(VectorizeError):
        fit([], KEEP_ALL)


def test_policy_validation():
    with pytest.raises(VectorizeError):
        FilterPolicy(0, 0.5)
    with pytest.raises(VectorizeError):
        FilterPolicy(1, 0.0)


def test_term_frequency():
    d = ["a", "a", "a", "b"]
    assert term_frequency("a", d) == 1.0
    assert term_frequency("b", d) == pytest.approx(0.5 + 0.5 / 3, abs=1e-15)
    assert term_frequency("z", d) == 0.0
    with pytest.raises(VectorizeError):
        term_frequency("a", [])


def test_transform_drops_zero_idf():
    model = fit(docs(["a", "b"], ["a"]), KEEP_ALL)
    row = transform(TokenDoc(9, ("a", "a", "b"), ()), model)
    assert row.nnz == 1
    b = model.vocabulary.term_to_index["b"]
    assert row[0, b] == pytest.approx(0.75 * math.log(2), abs=1e-15)


def test_transform_out_of_vocabulary_and_single_term():
    model = fit(docs(["a", "b"], ["a"], ["c"]), KEEP_ALL)
    assert transform(TokenDoc(1, ("zzz",), ()), model).nnz == 0
    row = transform(TokenDoc(1, ("c", "c"), ()), model)
    c = model.vocabulary.term_to_index["c"]
    assert row.nnz == 1 and row[0, c] == model.idf[c]


def test_build_matrix_edge_cases():
    model = fit(docs(["a", "b"], ["b"]), KEEP_ALL)
    assert build_matrix([], model).shape == (0, 2)
    one = TokenDoc(1, ("a", "b", "b"), ())
    assert (build_matrix([one], model) != transform(one, model)).nnz == 0


def test_model_text_round_trip():
    model = fit(docs(["a", "b"], ["a"], ["b", "b", "c"]), KEEP_ALL)
    again = TfIdfModel.from_text(model.to_text())
    assert again.vocabulary == model.vocabulary
    assert np.array_equal(again.idf, model.idf)
    assert again.to_text() == model.to_text()


def test_matrix_text_round_trip():
    corpus = docs(["a", "b"], ["a"], ["b", "b", "c"])
    m = build_matrix(corpus, fit(corpus, KEEP_ALL))
    buf = io.StringIO()
    write_matrix(m, buf)
    assert buf.getvalue().splitlines()[0] == "3 3 5"
    buf.seek(0)
    assert (read_matrix(buf) != m).nnz == 0


token_docs = st.lists(
    st.lists(st.sampled_from(["a", "b", "c", "d", "e", "f"]), min_size=1, max_size=8),
    min_size=1, max_size=12,
)


@settings(max_examples=120, deadline=None)
@given(token_docs)
def test_tfidf_properties(lists):
    corpus = docs(*lists)
    model = fit(corpus, KEEP_ALL)
    # first-occurrence column order
    seen = list(dict.fromkeys(t for d in lists for t in d))
    assert list(model.vocabulary.terms) == seen
    # idf non-increasing in doc frequency
    pairs = sorted(zip(model.vocabulary.doc_freq, model.idf))
    assert all(a[1] >= b[1] for a, b in zip(pairs, pairs[1:]))
    m = build_matrix(corpus, model)
    assert np.all(np.isfinite(m.data)) and np.all(m.data > 0)
    for d in lists:
        counts = {t: d.count(t) for t in d}
        top = max(counts.values())
        for t, f in counts.items():
            tf = term_frequency(t, d)
            assert 0.5 + 0.5 / top <= tf <= 1.0
            if f == top:
                assert tf == 1.0
    assert fit(corpus, KEEP_ALL).to_text() == model.to_text()
