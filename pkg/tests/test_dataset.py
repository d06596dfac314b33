import numpy as np
import pytest

from medequalizer.dataset import (
    ColumnSpec,
    CohortSpec,
    DataValidationError,
    Dataset,
    Schema,
    SchemaError,
    demo_cohort_spec,
    demo_marginals,
    demo_schema,
    generate_demo_cohort,
    load_csv,
    load_schema,
    save_csv,
    save_schema,
    subset_by_pattern,
)
from medequalizer.pattern import Pattern


def test_load_three_rows(tmp_path, small_schema):
    p = tmp_path / "d.csv"
    p.write_text("gender,race,outcome\nMale,White,Alive\nFemale,Asian,Died\nMale,Black,Died\n")
    d = load_csv(p, small_schema)
    assert len(d) == 3
    assert d.rows[1] == ("Female", "Asian", "Died")


def test_unknown_category_names_row_and_column(tmp_path, small_schema):
    p = tmp_path / "d.csv"
    p.write_text("gender,race,outcome\nMale,White,Alive\nFemale,Martian,Died\n")
    with pytest.raises(DataValidationError, match=r"row 2, column 'race'.*Martian"):
        load_csv(p, small_schema)


def test_empty_body(tmp_path, small_schema):
    p = tmp_path / "d.csv"
    p.write_text("gender,race,outcome\n")
    assert len(load_csv(p, small_schema)) == 0


@pytest.mark.parametrize("body, match", [
    ("race,gender,outcome\n", "header"),
    ("gender,race,outcome\nMale,White\n", "expected 3 fields"),
    ("", "missing header"),
])
def test_load_errors(tmp_path, small_schema, body, match):
    p = tmp_path / "d.csv"
    p.write_text(body)
    with pytest.raises(DataValidationError, match=match):
        load_csv(p, small_schema)


def test_missing_file(tmp_path, small_schema):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv", small_schema)


def test_round_trip(tmp_path, small_dataset):
    p = tmp_path / "out.csv"
    save_csv(small_dataset, p)
    assert load_csv(p, small_dataset.schema) == small_dataset


def test_commas_are_quoted(tmp_path):
    schema = Schema((ColumnSpec("site", ("a,b", 'say "hi"', "plain"), protected=True),))
    d = Dataset(schema, (("a,b",), ('say "hi"',), ("plain",)))
    p = tmp_path / "q.csv"
    save_csv(d, p)
    assert '"a,b"' in p.read_text()
    assert load_csv(p, schema) == d


def test_zero_rows_header_only(tmp_path, small_schema):
    p = tmp_path / "e.csv"
    save_csv(Dataset(small_schema), p)
    assert p.read_text() == "gender,race,outcome\n"


def test_schema_json_round_trip(tmp_path):
    p = tmp_path / "s.json"
    save_schema(demo_schema(), p)
    assert load_schema(p) == demo_schema()


def test_schema_invariants():
    with pytest.raises(SchemaError):
        ColumnSpec("x", ())
    with pytest.raises(SchemaError):
        ColumnSpec("x", ("a", "a"))
    with pytest.raises(SchemaError):
        Schema((ColumnSpec("x", ("a",)), ColumnSpec("x", ("b",))))
    with pytest.raises(SchemaError):
        Schema(())


def test_subset_wildcard_is_identity(small_dataset):
    assert subset_by_pattern(small_dataset, Pattern()) == small_dataset


def test_subset_counts():
    schema = demo_schema()
    rows = [
        ("Female", "White", "81+", "Died", "Medicare", "urgent", "CHF"),
        ("Female", "White", "81+", "Alive", "Private", "elective", "other"),
        ("Male", "White", "81+", "Died", "Medicare", "urgent", "CHF"),
        ("Female", "Asian", "81+", "Died", "Medicare", "urgent", "CHF"),
        ("Female", "White", "66-80", "Died", "Medicare", "urgent", "CHF"),
    ]
    d = Dataset(schema, rows)
    sub = subset_by_pattern(d, Pattern({"gender": "Female", "race": "White", "age": "81+"}))
    assert sub.rows == tuple(rows[:2])
    assert len(subset_by_pattern(d, Pattern({"race": "Black"}))) == 0


def test_subset_unknown_column(small_dataset):
    with pytest.raises(SchemaError):
        subset_by_pattern(small_dataset, Pattern({"planet": "Mars"}))


def test_subset_is_submultiset(demo_cohort):
    sub = subset_by_pattern(demo_cohort, Pattern({"race": "Asian"}))
    assert set(sub.rows) <= set(demo_cohort.rows)
    assert len(sub) == sum(r[1] == "Asian" for r in demo_cohort.rows)


def test_demo_cohort_table1_marginals(demo_cohort):
    white = np.mean([r[1] == "White" for r in demo_cohort.rows])
    died = np.mean([r[3] == "Died" for r in demo_cohort.rows])
    assert abs(white - 0.7123) <= 0.015
    assert abs(died - 0.4057) <= 0.015


@pytest.mark.parametrize("seed", [1, 7, 2024])
def test_demo_cohort_converges(seed):
    spec = demo_cohort_spec(n=10000, seed=seed)
    d = generate_demo_cohort(spec)
    for j, col in enumerate(d.schema.columns):
        freq = np.bincount(d.codes[:, j], minlength=col.cardinality) / len(d)
        assert np.max(np.abs(freq - spec.probabilities(col.name))) <= 0.015


def test_demo_cohort_deterministic():
    a = generate_demo_cohort(demo_cohort_spec(n=500, seed=3))
    b = generate_demo_cohort(demo_cohort_spec(n=500, seed=3))
    assert a == b
    assert a != generate_demo_cohort(demo_cohort_spec(n=500, seed=4))


def test_demo_marginals_normalised():
    for name, p in demo_marginals().items():
        assert abs(sum(p) - 1.0) < 1e-12, name


def test_cohort_spec_mismatch():
    with pytest.raises(SchemaError):
        CohortSpec(n=10, marginals={"gender": [1.0]})
    with pytest.raises(SchemaError):
        CohortSpec(n=10, marginals={"gender": [0.7, 0.4]})
    with pytest.raises(SchemaError):
        CohortSpec(n=0, marginals={})
