import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storyloom.errors import InvalidTemplate, NoJsonFound, SchemaMismatch
from storyloom.prompts import (
    OutputSchema,
    PromptTemplate,
    default_templates,
    extract_structured,
    render,
    text_reply,
)

SETTING_SCHEMA = OutputSchema.of(location="string", time_period="string", setting_description="string")


def make_template(**overrides):
    fields = dict(
        id="t", instruction="Do the thing using this context:", one_shot_example='{"k": "..."}'
    )
    fields.update(overrides)
    return PromptTemplate(**fields)


def schema_for(obj):
    kinds = {}
    for key, value in obj.items():
        if isinstance(value, str):
            kinds[key] = "string"
        elif isinstance(value, bool):
            raise AssertionError("schema kinds cannot express booleans")
        elif isinstance(value, (int, float)):
            kinds[key] = "number"
        elif isinstance(value, list):
            kinds[key] = "array"
        elif isinstance(value, dict):
            kinds[key] = "object"
    return OutputSchema.of(**kinds)


# --- render ---


def test_setting_prompt_matches_expected_shape(criteria):
    template = default_templates().get("init_setting")
    rendered = render(template, criteria.to_prompt_dict(), "")
    assert rendered.text.startswith("Generate the location, time period, and setting description")
    one_shot = rendered.segment_text("one_shot")
    assert one_shot is not None and rendered.text.endswith(one_shot)
    for key in ("location", "time_period", "setting_description"):
        assert key in one_shot


def test_empty_criteria_and_context_render_three_segments():
    rendered = render(make_template(), {}, "")
    kinds = [kind for kind, _ in rendered.segments]
    assert kinds == ["instruction", "criteria", "one_shot"]
    assert rendered.segment_text("criteria") == "{}"


def test_context_segment_carries_context_verbatim():
    rendered = render(make_template(), {"a": 1}, "prior summary X")
    kinds = [kind for kind, _ in rendered.segments]
    assert kinds == ["instruction", "criteria", "context", "one_shot"]
    assert "prior summary X" in rendered.segment_text("context")


def test_render_is_deterministic():
    a = render(make_template(), {"z": 1, "a": [2, 3]}, "ctx")
    b = render(make_template(), {"a": [2, 3], "z": 1}, "ctx")
    assert a.text == b.text
    assert a.segments == b.segments


def test_render_rejects_bad_templates():
    with pytest.raises(InvalidTemplate):
        render(make_template(instruction="   "), {}, "")
    with pytest.raises(InvalidTemplate):
        render(make_template(one_shot_example="not json"), {}, "")
    with pytest.raises(InvalidTemplate):
        render(make_template(one_shot_example="[1, 2]"), {}, "")


@settings(max_examples=200)
@given(
    criteria=st.dictionaries(st.text(min_size=1, max_size=8), st.integers(), max_size=4),
    context=st.text(max_size=40),
)
def test_segment_order_invariant(criteria, context):
    rendered = render(make_template(), criteria, context)
    kinds = [kind for kind, _ in rendered.segments]
    expected = ["instruction", "criteria"] + (["context"] if context else []) + ["one_shot"]
    assert kinds == expected
    # Spans are non-overlapping, in order, and match their regions.
    previous_end = -1
    for kind, (start, end) in rendered.segments:
        assert start > previous_end
        assert end > start
        previous_end = end
    assert rendered.segment_text("instruction") == "Do the thing using this context:"


# --- extract_structured ---


def test_extracts_plain_object():
    raw = '{"location":"NYC","time_period":"1920s","setting_description":"mist"}'
    assert extract_structured(raw, SETTING_SCHEMA) == json.loads(raw)


def test_extracts_from_fenced_block_with_prose():
    raw = 'Sure! ```json\n{"location":"NYC","time_period":"1920s","setting_description":"x"}\n``` Enjoy.'
    assert extract_structured(raw, SETTING_SCHEMA)["location"] == "NYC"


def test_no_json_found():
    with pytest.raises(NoJsonFound):
        extract_structured("no json here", SETTING_SCHEMA)


def test_schema_mismatch_lists_problems():
    with pytest.raises(SchemaMismatch) as excinfo:
        extract_structured('{"location": 5, "time_period": "x"}', SETTING_SCHEMA)
    assert "setting_description" in excinfo.value.missing
    assert "location" in excinfo.value.mistyped


def test_nested_object_found_when_wrapper_fails_schema():
    raw = '{"wrapper": {"location":"NYC","time_period":"1920s","setting_description":"x"}}'
    assert extract_structured(raw, SETTING_SCHEMA)["time_period"] == "1920s"


def test_first_matching_object_wins():
    raw = (
        '{"location":"first","time_period":"t","setting_description":"d"} and later '
        '{"location":"second","time_period":"t","setting_description":"d"}'
    )
    assert extract_structured(raw, SETTING_SCHEMA)["location"] == "first"


def test_braces_inside_strings_do_not_confuse_the_scan():
    raw = '{"location":"a {fake} brace \\" quote","time_period":"t","setting_description":"d"}'
    assert extract_structured(raw, SETTING_SCHEMA)["location"] == 'a {fake} brace " quote'


json_values = st.recursive(
    st.one_of(
        st.text(max_size=10),
        st.integers(min_value=-(10**6), max_value=10**6),
        st.floats(allow_nan=False, allow_infinity=False, width=32),
    ),
    lambda children: st.one_of(
        st.lists(children, max_size=3),
        st.dictionaries(st.text(max_size=6), children, max_size=3),
    ),
    max_leaves=8,
)

# Keys must have schema-expressible kinds, so top-level values exclude bools/None.
json_objects = st.dictionaries(st.text(min_size=1, max_size=8), json_values, max_size=5)


@settings(max_examples=200)
@given(obj=json_objects)
def test_round_trip_extraction(obj):
    extracted = extract_structured(json.dumps(obj), schema_for(obj))
    assert extracted == obj


@settings(max_examples=100)
@given(obj=json_objects, prefix=st.text(max_size=20), suffix=st.text(max_size=20))
def test_round_trip_survives_surrounding_prose(obj, prefix, suffix):
    raw = prefix + json.dumps(obj) + suffix
    try:
        extracted = extract_structured(raw, schema_for(obj))
    except SchemaMismatch:
        # Random prose may open an earlier balanced object; the schema keys
        # decide, so a mismatch can only happen when obj has no required keys.
        assert not obj
        return
    if obj:
        assert all(extracted[k] == v for k, v in obj.items())


def test_extract_never_returns_object_missing_required_key():
    schema = OutputSchema.of(a="string", b="number")
    raw = '{"a": "yes"} {"a": "also", "b": 3}'
    result = extract_structured(raw, schema)
    assert result == {"a": "also", "b": 3}


# --- text_reply ---


def test_text_reply_prefers_json_key():
    assert text_reply('{"response": "inner"}', "response") == "inner"


def test_text_reply_falls_back_to_raw():
    assert text_reply("plain prose", "response") == "plain prose"


def test_output_schema_rejects_duplicates_and_unknown_kinds():
    with pytest.raises(ValueError):
        OutputSchema(required_keys=(("a", "string"), ("a", "number")))
    with pytest.raises(ValueError):
        OutputSchema(required_keys=(("a", "boolean"),))
