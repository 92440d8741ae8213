import pytest
from hypothesis import given, settings, strategies as st

from auditlp.core import AgeGroup, Gender, intern_triples
from auditlp.ingest import (
    FilterRules,
    ParseError,
    TripleFormat,
    build_geo_dataset,
    dataset_stats,
    extract_attributes,
    extract_humans,
    parse_birth_year,
    parse_triple_file,
    read_attribute_overrides,
    write_tsv3,
)

RULES = FilterRules(geography_targets=("Q30",))


class TestParseTripleFile:
    def test_tsv3_single_line(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("Q1\tP31\tQ5\n")
        assert list(parse_triple_file(path, TripleFormat.TSV3)) == [("Q1", "P31", "Q5")]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("")
        assert list(parse_triple_file(path, TripleFormat.TSV3)) == []

    def test_comments_skipped(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("# header\nQ1\tP31\tQ5\n")
        assert list(parse_triple_file(path, TripleFormat.TSV3)) == [("Q1", "P31", "Q5")]

    def test_wrong_column_count_names_line(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("Q1\tP31\tQ5\nQ1\tP31\n")
        with pytest.raises(ParseError, match=":2"):
            list(parse_triple_file(path, TripleFormat.TSV3))

    def test_kgtk_uses_named_columns(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text(
            "id\tnode1\tlabel\tnode2\nE1\tQ1\tP31\tQ5\n"
        )
        # hand-parsed: columns 2-4 of the data row
        assert list(parse_triple_file(path, TripleFormat.KGTK)) == [("Q1", "P31", "Q5")]

    def test_kgtk_extra_columns(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text(
            "id\tnode1\tlabel\tnode2\trank\nE1\tQ1\tP31\tQ5\tnormal\n"
        )
        assert list(parse_triple_file(path, TripleFormat.KGTK)) == [("Q1", "P31", "Q5")]

    def test_kgtk_missing_header_column(self, tmp_path):
        path = tmp_path / "t.tsv"
        path.write_text("id\tnode1\tnode2\nE1\tQ1\tQ5\n")
        with pytest.raises(ParseError, match="header"):
            list(parse_triple_file(path, TripleFormat.KGTK))

    def test_tsv3_round_trip(self, tmp_path):
        rows = [("Q1", "P31", "Q5"), ("Q1", "P27", "Q30"), ("Q2", "P1", "Q1")]
        path = tmp_path / "t.tsv"
        write_tsv3(path, rows)
        assert list(parse_triple_file(path, TripleFormat.TSV3)) == rows


class TestExtractHumans:
    def test_both_conditions_met(self):
        g = intern_triples([("Q1", "P31", "Q5"), ("Q1", "P27", "Q30")])
        assert extract_humans(g, RULES) == {g.entities.index_of("Q1")}

    def test_missing_citizenship(self):
        g = intern_triples([("Q1", "P31", "Q5")])
        assert extract_humans(g, RULES) == set()

    def test_multiple_targets(self):
        g = intern_triples(
            [
                ("Q1", "P31", "Q5"),
                ("Q1", "P27", "Q30"),
                ("Q2", "P31", "Q5"),
                ("Q2", "P27", "Q16"),
            ]
        )
        rules = FilterRules(geography_targets=("Q30", "Q16"))
        expected = {g.entities.index_of("Q1"), g.entities.index_of("Q2")}
        assert extract_humans(g, rules) == expected

    @settings(max_examples=60)
    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["Q1", "Q2", "Q3", "Q4", "Q5", "Q30"]),
                st.sampled_from(["P31", "P27", "P9"]),
                st.sampled_from(["Q1", "Q2", "Q3", "Q4", "Q5", "Q30"]),
            ),
            min_size=1,
            max_size=25,
        )
    )
    def test_matches_brute_force(self, rows):
        g = intern_triples(rows)
        got = extract_humans(g, RULES)
        triples = set(g.iter_raw_triples())
        expected = {
            g.entities.index_of(e)
            for e in g.entities
            if (e, "P31", "Q5") in triples and (e, "P27", "Q30") in triples
        }
        assert got == expected


class TestParseBirthYear:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("1990", 1990),
            ("1990-05-01", 1990),
            ("1990-05-01T00:00:00Z", 1990),
            ("+1990-05-01T00:00:00Z", 1990),
            ("-0500", 500),
            ("abc", None),
            ("199", None),
        ],
    )
    def test_leading_year(self, raw, expected):
        assert parse_birth_year(raw) == expected


def _human_graph(extra=()):
    rows = [
        ("Q1", "P31", "Q5"),
        ("Q1", "P27", "Q30"),
        *extra,
    ]
    return intern_triples(rows)


class TestExtractAttributes:
    def test_male_young(self):
        g = _human_graph([("Q1", "P21", "Q6581097"), ("Q1", "P569", "1990-05-01")])
        humans = extract_humans(g, RULES)
        meta = extract_attributes(g, humans, RULES, 2024)[g.entities.index_of("Q1")]
        assert meta.gender == Gender.MALE
        assert meta.birth_year == 1990
        assert meta.age_years == 34
        assert meta.age_group == AgeGroup.YOUNG

    def test_missing_gender_is_unknown(self):
        g = _human_graph()
        humans = extract_humans(g, RULES)
        meta = extract_attributes(g, humans, RULES, 2024)[g.entities.index_of("Q1")]
        assert meta.gender == Gender.UNKNOWN

    def test_child_excluded(self):
        g = _human_graph([("Q1", "P569", "2010")])
        humans = extract_humans(g, RULES)
        meta = extract_attributes(g, humans, RULES, 2024)[g.entities.index_of("Q1")]
        assert meta.age_years == 14
        assert meta.age_group == AgeGroup.EXCLUDED

    def test_conflicting_gender_statements(self, caplog):
        g = _human_graph([("Q1", "P21", "Q6581097"), ("Q1", "P21", "Q6581072")])
        humans = extract_humans(g, RULES)
        with caplog.at_level("WARNING"):
            meta = extract_attributes(g, humans, RULES, 2024)[g.entities.index_of("Q1")]
        assert meta.gender == Gender.UNKNOWN
        assert "conflicting gender" in caplog.text

    def test_first_birth_year_wins(self, caplog):
        g = _human_graph([("Q1", "P569", "1980"), ("Q1", "P569", "1990")])
        humans = extract_humans(g, RULES)
        with caplog.at_level("WARNING"):
            meta = extract_attributes(g, humans, RULES, 2024)[g.entities.index_of("Q1")]
        assert meta.birth_year == 1980
        assert "multiple birth years" in caplog.text

    def test_future_birth_excluded_not_fatal(self, caplog):
        g = _human_graph([("Q1", "P569", "2199")])
        humans = extract_humans(g, RULES)
        with caplog.at_level("WARNING"):
            meta = extract_attributes(g, humans, RULES, 2024)[g.entities.index_of("Q1")]
        assert meta.age_group == AgeGroup.EXCLUDED

    def test_overrides_supersede_graph(self):
        g = _human_graph([("Q1", "P21", "Q6581097"), ("Q1", "P569", "1990")])
        humans = extract_humans(g, RULES)
        meta = extract_attributes(
            g, humans, RULES, 2024, overrides={"Q1": (Gender.FEMALE, 1950)}
        )[g.entities.index_of("Q1")]
        assert meta.gender == Gender.FEMALE
        assert meta.birth_year == 1950
        assert meta.age_group == AgeGroup.OLD


class TestReadAttributeOverrides:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "o.csv"
        path.write_text("entity,gender,birth_year\nQ1,female,1950\nQ2,,\n")
        overrides = read_attribute_overrides(path)
        assert overrides["Q1"] == (Gender.FEMALE, 1950)
        assert overrides["Q2"] == (None, None)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "o.csv"
        path.write_text("entity,sex\nQ1,female\n")
        with pytest.raises(ParseError):
            read_attribute_overrides(path)


class TestBuildGeoDataset:
    def test_keeps_only_human_headed_triples(self):
        g = intern_triples(
            [
                ("Q1", "P31", "Q5"),
                ("Q1", "P27", "Q30"),
                ("Q1", "P106", "Q100"),
                ("Q9", "P1", "Q2"),
                ("Q9", "P2", "Q3"),
                ("Q9", "P3", "Q4"),
                ("Q9", "P4", "Q5"),
                ("Q9", "P5", "Q6"),
            ]
        )
        ds = build_geo_dataset(g, RULES, "usa", 2024)
        assert len(ds.graph) == 3
        assert all(t.head in ds.humans for t in ds.graph.triples)

    def test_minimal_human(self):
        g = intern_triples([("Q1", "P31", "Q5"), ("Q1", "P27", "Q30")])
        ds = build_geo_dataset(g, RULES, "usa", 2024)
        assert len(ds.graph) == 2

    def test_shared_occupation_interned_once(self):
        g = intern_triples(
            [
                ("Q1", "P31", "Q5"),
                ("Q1", "P27", "Q30"),
                ("Q1", "P106", "Q100"),
                ("Q2", "P31", "Q5"),
                ("Q2", "P27", "Q30"),
                ("Q2", "P106", "Q100"),
            ]
        )
        ds = build_geo_dataset(g, RULES, "usa", 2024)
        occ_triples = [
            t for t in ds.graph.triples if t.relation == ds.occupation_relation
        ]
        assert len(occ_triples) == 2
        assert len({t.tail for t in occ_triples}) == 1

    def test_empty_geography_is_error(self):
        g = intern_triples([("Q1", "P31", "Q5")])
        with pytest.raises(ValueError, match="empty geography"):
            build_geo_dataset(g, RULES, "usa", 2024)

    def test_subset_of_input_graph(self):
        g = intern_triples(
            [
                ("Q1", "P31", "Q5"),
                ("Q1", "P27", "Q30"),
                ("Q1", "P106", "Q100"),
                ("Q7", "P9", "Q8"),
            ]
        )
        ds = build_geo_dataset(g, RULES, "usa", 2024)
        assert set(ds.graph.iter_raw_triples()) <= set(g.iter_raw_triples())

    def test_stats_counts(self):
        g = intern_triples(
            [
                ("Q1", "P31", "Q5"),
                ("Q1", "P27", "Q30"),
                ("Q1", "P21", "Q6581097"),
                ("Q1", "P569", "1990"),
                ("Q1", "P106", "Q100"),
            ]
        )
        ds = build_geo_dataset(g, RULES, "usa", 2024)
        stats = dataset_stats(ds)
        assert stats["humans"] == 1
        assert stats["gender_counts"]["male"] == 1
        assert stats["age_counts"]["young"] == 1
        assert stats["occupations"] == 1
        assert stats["reference_year"] == 2024


def test_rules_require_targets():
    with pytest.raises(ValueError):
        FilterRules(geography_targets=())
