import json
import random

from app.calculators.parser import (
    ResponseParser,
    analyze_think,
    parse_answer_payload,
    parse_response,
    render_answer,
)
from app.domain import Combination, EffectLabel

FOUR_SECTIONS = "[1] Scenario\n- a\n[2] Drugs\n- b\n[3] Reasoning\n- c\n[4] Summary\n- d"
DRUGCOMB_CHOICES = [EffectLabel.POS, EffectLabel.NEG, EffectLabel.COMB, EffectLabel.OTHER]
FUZZ_TOKENS = ["<think>", "</think>", "<answer>", "</answer>", "[1]", "- ", "{", "}", "[", "]",
               '"drugs"', '"label"', "@ner#", "#ner@", "@re#", "#re@", "```json", "```", "\n"]


def random_combinations(rng: random.Random) -> frozenset:
    names = [f"drug{i}" for i in range(8)] + ["5-fu", "α-interferon"]
    combinations = set()
    for _ in range(rng.randint(0, 4)):
        drugs = frozenset(rng.sample(names, rng.randint(2, 5)))
        combinations.add(Combination(drugs, rng.choice(DRUGCOMB_CHOICES)))
    return frozenset(combinations)


class TestParseResponse:
    def test_well_formed_response(self):
        text = (
            f"<think>{FOUR_SECTIONS}</think>"
            '<answer>[{"drugs":["cisplatin","etoposide"],"label":"POS"}]</answer>'
        )
        parsed = parse_response(text)
        assert parsed.has_think and parsed.has_answer
        assert parsed.answer_json_valid
        assert parsed.think_report.sections_present == (True, True, True, True)
        assert parsed.combinations == frozenset(
            {Combination({"cisplatin", "etoposide"}, EffectLabel.POS)}
        )

    def test_empty_answer_is_no_comb(self):
        parsed = parse_response("<answer>[]</answer>")
        assert not parsed.has_think
        assert parsed.has_answer
        assert parsed.combinations == frozenset()

    def test_no_tags(self):
        parsed = parse_response("no tags at all")
        assert not parsed.has_think
        assert not parsed.has_answer
        assert parsed.combinations is None
        assert parsed.parse_notes

    def test_invalid_json_leaves_combinations_absent(self):
        parsed = parse_response("<think>x</think><answer>[{oops</answer>")
        assert parsed.has_answer
        assert not parsed.answer_json_valid
        assert parsed.combinations is None

    def test_only_first_answer_block_is_used(self):
        text = (
            '<answer>[{"drugs":["a","b"],"label":"POS"}]</answer>'
            '<answer>[{"drugs":["c","d"],"label":"POS"}]</answer>'
        )
        parsed = parse_response(text)
        assert parsed.combinations == frozenset({Combination({"a", "b"}, EffectLabel.POS)})
        assert any("extra <answer>" in note for note in parsed.parse_notes)

    def test_fenced_answer_is_unwrapped(self):
        text = '<answer>```json\n[{"drugs":["a","b"],"label":"NEG"}]\n```</answer>'
        parsed = parse_response(text)
        assert parsed.answer_json_valid
        assert parsed.combinations == frozenset({Combination({"a", "b"}, EffectLabel.NEG)})

    def test_non_string_input_does_not_raise(self):
        parsed = parse_response(None)
        assert not parsed.has_answer


class TestParseAnswerPayload:
    def test_tolerant_keys_and_label_case(self):
        payload = parse_answer_payload('[{"drugs":["A","B"],"label":"pos"}]')
        assert payload.json_valid
        assert payload.combinations == frozenset({Combination({"a", "b"}, EffectLabel.POS)})

    def test_alternative_keys(self):
        payload = parse_answer_payload('[{"Combination":["A","B","C"],"relation":"COMB"}]')
        assert payload.combinations == frozenset({Combination({"a", "b", "c"}, EffectLabel.COMB)})

    def test_single_drug_is_dropped(self):
        payload = parse_answer_payload('[{"drugs":["A"],"label":"POS"}]')
        assert payload.json_valid
        assert payload.combinations == frozenset()
        assert "dropped: arity<2" in payload.notes

    def test_unknown_label_is_dropped(self):
        payload = parse_answer_payload(
            '[{"drugs":["a","b"],"label":"SYNERGY"},{"drugs":["c","d"],"label":"POS"}]'
        )
        assert payload.combinations == frozenset({Combination({"c", "d"}, EffectLabel.POS)})

    def test_no_comb_object_reads_as_empty(self):
        payload = parse_answer_payload('[{"drugs":[],"label":"NO_COMB"}]')
        assert payload.json_valid
        assert payload.combinations == frozenset()

    def test_bare_object(self):
        payload = parse_answer_payload('{"drugs":["a","b"],"label":"POS"}')
        assert payload.json_valid
        assert len(payload.combinations) == 1

    def test_duplicates_collapse(self):
        payload = parse_answer_payload(
            '[{"drugs":["a","b"],"label":"POS"},{"drugs":["B","A"],"label":"POS"}]'
        )
        assert len(payload.combinations) == 1

    def test_extended_format(self):
        text = '@ner# ["A","B","C"] #ner@ @re# [{"drugs":["A","B"],"label":"POS"}] #re@'
        payload = parse_answer_payload(text, mode="extended")
        assert payload.json_valid
        assert payload.ner_entities == frozenset({"a", "b", "c"})
        assert payload.combinations == frozenset({Combination({"a", "b"}, EffectLabel.POS)})

    def test_extended_format_needs_both_regions(self):
        payload = parse_answer_payload('@re# [] #re@', mode="extended")
        assert not payload.json_valid


class TestAnalyzeThink:
    def test_four_sections_with_bullets(self):
        report = analyze_think(FOUR_SECTIONS)
        assert report.sections_present == (True, True, True, True)
        assert report.sections_in_order
        assert report.bullets_per_section == (1, 1, 1, 1)

    def test_empty_text(self):
        report = analyze_think("")
        assert report.sections_present == (False, False, False, False)
        assert report.bullets_per_section == (0, 0, 0, 0)
        assert report.word_count == 0

    def test_sparse_sections_in_order(self):
        report = analyze_think("[1] a\n- x\n[3] c\n- y")
        assert report.sections_present == (True, False, True, False)
        assert report.sections_in_order

    def test_out_of_order(self):
        report = analyze_think("[2] b\n- x\n[1] a\n- y")
        assert not report.sections_in_order


class TestRoundTrip:
    def test_serialize_then_parse_is_identity(self):
        rng = random.Random(7)
        parser = ResponseParser()
        for _ in range(1000):
            combinations = random_combinations(rng)
            parsed = parser.parse(f"<think>x</think><answer>{render_answer(combinations)}</answer>")
            assert parsed.combinations == combinations

    def test_extended_round_trip(self):
        rng = random.Random(11)
        parser = ResponseParser(answer_format="extended")
        for _ in range(200):
            combinations = random_combinations(rng)
            entities = frozenset(d for c in combinations for d in c.drugs)
            body = render_answer(combinations, entities, "extended")
            parsed = parser.parse(f"<answer>{body}</answer>")
            assert parsed.combinations == combinations
            assert parsed.ner_entities == entities


def answer_tokens(combinations) -> list[str]:
    tokens = ["["]
    for i, combination in enumerate(sorted(combinations, key=lambda c: sorted(c.drugs))):
        if i:
            tokens.append(",")
        tokens += ["{", '"drugs"', ":", "["]
        for j, drug in enumerate(sorted(combination.drugs)):
            if j:
                tokens.append(",")
            tokens.append(json.dumps(drug, ensure_ascii=False))
        tokens += ["]", ",", '"label"', ":", json.dumps(combination.label.value), "}"]
    tokens.append("]")
    return tokens


class TestWhitespace:
    def test_extra_whitespace_leaves_combinations_unchanged(self):
        rng = random.Random(23)
        blanks = ["", " ", "  ", "\n", "\t", "\r\n", " \n\t "]
        for _ in range(500):
            combinations = random_combinations(rng)
            tokens = answer_tokens(combinations)
            answer = "".join(token + rng.choice(blanks) for token in tokens)
            pieces = ["<think>", FOUR_SECTIONS, "</think>", "<answer>", answer, "</answer>"]
            text = "".join(rng.choice(blanks) + piece for piece in pieces) + rng.choice(blanks)
            parsed = parse_response(text)
            assert parsed.answer_json_valid
            assert parsed.combinations == combinations


class TestFuzz:
    def test_random_bytes_never_raise(self):
        rng = random.Random(2024)
        for _ in range(10000):
            raw = bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 64)))
            parsed = parse_response(raw.decode("utf-8", errors="replace"))
            assert isinstance(parsed.parse_notes, list)

    def test_random_tag_soup_never_raises(self):
        rng = random.Random(99)
        for _ in range(2000):
            text = "".join(rng.choice(FUZZ_TOKENS) for _ in range(rng.randint(0, 30)))
            parse_response(text)
            parse_response(text, mode="extended")
