import pytest

from flowmine.extract import (
    ExtractionError,
    Mention,
    ParamDef,
    default_param_defs,
    extract_params,
    normalize_mention,
    param_defs_from_json,
    param_defs_to_json,
)

NOW = 1_700_000_000.0


class TestParamDef:
    def test_unknown_type_rejected(self):
        with pytest.raises(ExtractionError):
            ParamDef(name="x", type="float", patterns=[("p", r"\d+", 0)])

    def test_patterns_required(self):
        with pytest.raises(ExtractionError):
            ParamDef(name="x", type="string", patterns=[])


class TestExtract:
    def test_labelled_user_id(self):
        defs = default_param_defs()
        out = extract_params("please lock the bike my user id is 12345", defs)
        assert [(m.param, m.surface) for m in out] == [("user_id", "12345")]

    def test_bare_digits_fallback(self):
        defs = default_param_defs()
        out = extract_params("the number on the bike is 987654", defs)
        assert out and out[0].param == "user_id" and out[0].surface == "987654"

    def test_relative_time(self):
        defs = default_param_defs()
        out = extract_params("i parked it 30 minutes ago account 555123", defs)
        got = {m.param: m.surface for m in out}
        assert got == {"user_id": "555123", "time": "30 minutes ago"}

    def test_no_match_empty(self):
        assert extract_params("hello there", default_param_defs()) == []

    def test_first_pattern_wins(self):
        d = ParamDef(
            name="x", type="string",
            patterns=[("a", r"cat (\w+)", 1), ("b", r"dog (\w+)", 1)],
        )
        out = extract_params("dog bone cat toy", [d])
        assert out[0].surface == "toy"

    def test_leftmost_match(self):
        d = ParamDef(name="x", type="integer", patterns=[("n", r"(\d+)", 1)])
        out = extract_params("first 11 then 22", [d])
        assert out[0].surface == "11"

    def test_non_overlapping_spans(self):
        defs = [
            ParamDef(name="a", type="integer", patterns=[("n", r"(\d+)", 1)]),
            ParamDef(name="b", type="integer", patterns=[("n", r"(\d+)", 1)]),
        ]
        out = extract_params("only 1234 once 5678", defs)
        spans = [m.span for m in out]
        assert spans == sorted(spans)
        for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
            assert e1 <= s2

    def test_output_sorted_by_position(self):
        defs = default_param_defs()
        out = extract_params("5 minutes ago i gave user id 777888", defs)
        assert [m.param for m in out] == ["time", "user_id"]


class TestNormalize:
    def test_integer(self):
        d = ParamDef(name="x", type="integer", patterns=[("n", r"(\d+)", 1)])
        v = normalize_mention(Mention("x", "42", (0, 2)), d, NOW)
        assert v.value == 42

    def test_integer_garbage_rejected(self):
        d = ParamDef(name="x", type="integer", patterns=[("n", r"(\w+)", 1)])
        with pytest.raises(ExtractionError):
            normalize_mention(Mention("x", "forty", (0, 5)), d, NOW)

    def test_string_trimmed(self):
        d = ParamDef(name="x", type="string", patterns=[("n", r"(.+)", 1)])
        v = normalize_mention(Mention("x", "  hello  ", (0, 9)), d, NOW)
        assert v.value == "hello"

    def test_minutes_ago(self):
        d = ParamDef(name="t", type="timestamp", patterns=[("r", r"(.+)", 1)])
        v = normalize_mention(Mention("t", "30 minutes ago", (0, 14)), d, NOW)
        assert v.value == int(NOW) - 30 * 60

    def test_hours_ago(self):
        d = ParamDef(name="t", type="timestamp", patterns=[("r", r"(.+)", 1)])
        v = normalize_mention(Mention("t", "2 hours ago", (0, 11)), d, NOW)
        assert v.value == int(NOW) - 2 * 3600

    def test_epoch_passthrough(self):
        d = ParamDef(name="t", type="timestamp", patterns=[("r", r"(.+)", 1)])
        v = normalize_mention(Mention("t", "1699999999", (0, 10)), d, NOW)
        assert v.value == 1699999999

    def test_unparseable_timestamp(self):
        d = ParamDef(name="t", type="timestamp", patterns=[("r", r"(.+)", 1)])
        with pytest.raises(ExtractionError):
            normalize_mention(Mention("t", "yesterday", (0, 9)), d, NOW)


class TestPersistence:
    def test_round_trip(self):
        defs = default_param_defs()
        again = param_defs_from_json(param_defs_to_json(defs))
        assert param_defs_to_json(again) == param_defs_to_json(defs)
        out = extract_params("user id 12345", again)
        assert out and out[0].surface == "12345"
