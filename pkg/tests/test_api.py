import random

import pytest
from fastapi.testclient import TestClient

from app import __version__
from app.calculators.rewards import group_advantages
from app.config import Settings
from app.main import create_app

THINK = "[1] Scenario\n- a\n[2] Drugs\n- b\n[3] Reasoning\n- c\n[4] Summary\n- d"
GOLD = [
    {"drugs": ["Cisplatin", "Etoposide"], "label": "POS"},
    {"drugs": ["paclitaxel", "carboplatin", "bevacizumab"], "label": "NEG"},
]
ANSWERS = [
    '[{"drugs":["cisplatin","etoposide"],"label":"POS"}]',
    '[{"drugs":["cisplatin","etoposide"],"label":"POS"},'
    '{"drugs":["paclitaxel","carboplatin","bevacizumab"],"label":"COMB"}]',
    '[{"drugs":["paclitaxel","carboplatin"],"label":"OTHER"}]',
    "[]",
    "[{broken",
]


@pytest.fixture
def client():
    return TestClient(create_app(Settings()))


def random_response(rng: random.Random) -> str:
    think = rng.choice([THINK, "[1] a\n- x\n[3] c", "", "[2] b\n[1] a"])
    answer = rng.choice(ANSWERS)
    shape = rng.randrange(4)
    if shape == 0:
        return f"<think>{think}</think><answer>{answer}</answer>"
    if shape == 1:
        return f"<answer>{answer}</answer>"
    if shape == 2:
        return f"<think>{think}</think>{answer}"
    return rng.choice(["", "plain words", "<answer>", "</think><think>"])


class TestHealthAndConfig:
    def test_health(self, client):
        response = client.get("/v1/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok", "version": __version__}

    def test_config_hides_prompts(self, client):
        data = client.get("/v1/config").json()
        assert data["weights"]["alpha_metric"] == 0.7
        assert "analyst_prompt_template" not in data["synthesis"]
        assert data["synthesis"]["max_iterations"] == 3


class TestScore:
    def test_perfect_response(self, client):
        text = (
            f"<think>{THINK}</think><answer>"
            '[{"drugs":["cisplatin","etoposide"],"label":"POS"},'
            '{"drugs":["paclitaxel","carboplatin","bevacizumab"],"label":"NEG"}]</answer>'
        )
        response = client.post("/v1/score", json={"response_text": text, "gold": GOLD})
        assert response.status_code == 200
        body = response.json()
        assert body["reward"]["r_total"] == pytest.approx(1.0, abs=1e-9)
        assert body["parsed"]["think_report"]["sections_present"] == [True] * 4
        assert len(body["parsed"]["combinations"]) == 2

    def test_malformed_text_is_not_an_error(self, client):
        response = client.post("/v1/score", json={"response_text": "<answer>[{", "gold": GOLD})
        assert response.status_code == 200
        reward = response.json()["reward"]
        assert reward["r_format"] == 0.0
        assert reward["r_metric"] == 0.0
        assert reward["r_total"] == pytest.approx(-0.1, abs=1e-9)

    def test_empty_gold_and_empty_answer(self, client):
        text = f"<think>{THINK}</think><answer>[]</answer>"
        reward = client.post("/v1/score", json={"response_text": text, "gold": []}).json()["reward"]
        assert reward["r_total"] == pytest.approx(1.0, abs=1e-9)

    def test_weight_overrides(self, client):
        payload = {
            "response_text": "nothing",
            "gold": GOLD,
            "weights": {"alpha_format": 0.0, "alpha_cover": 1.0, "alpha_metric": 0.0},
        }
        reward = client.post("/v1/score", json=payload).json()["reward"]
        assert reward["r_total"] == pytest.approx(-1.0)

    def test_invalid_weights(self, client):
        payload = {"response_text": "", "gold": GOLD, "weights": {"alpha_format": 0.9}}
        response = client.post("/v1/score", json=payload)
        assert response.status_code == 400
        assert response.json()["detail"]["error"] == "SchemaViolation"

    def test_invalid_gold_label(self, client):
        payload = {"response_text": "", "gold": [{"drugs": ["a", "b"], "label": "SYNERGY"}]}
        response = client.post("/v1/score", json=payload)
        assert response.status_code == 400
        assert response.json()["detail"]["error"] == "InvalidLabel"

    def test_single_drug_gold(self, client):
        payload = {"response_text": "", "gold": [{"drugs": ["a"], "label": "POS"}]}
        assert client.post("/v1/score", json=payload).json()["detail"]["error"] == "ArityViolation"

    def test_ddi_gold_must_be_pairs(self, client):
        payload = {
            "response_text": "",
            "mode": "ddi13",
            "gold": [{"drugs": ["a", "b", "c"], "label": "EFFECT"}],
        }
        response = client.post("/v1/score", json=payload)
        assert response.status_code == 400
        assert response.json()["detail"]["error"] == "ArityViolation"

    def test_ddi_answer_with_three_drugs_is_scored(self, client):
        text = (
            f"<think>{THINK}</think><answer>"
            '[{"drugs":["a","b","c"],"label":"MECHANISM"}]</answer>'
        )
        payload = {
            "response_text": text,
            "mode": "ddi13",
            "gold": [{"drugs": ["a", "b"], "label": "MECHANISM"}],
        }
        response = client.post("/v1/score", json=payload)
        assert response.status_code == 200
        assert response.json()["reward"]["r_metric"] == 0.0

    def test_schema_violation(self, client):
        response = client.post("/v1/score", json={"gold": "not a list"})
        assert response.status_code == 400
        assert response.json()["detail"]["error"] == "SchemaViolation"

    def test_extended_with_ner_reward(self, client):
        text = (
            f"<think>{THINK}</think><answer>@ner# [\"cisplatin\", \"etoposide\"] #ner@ "
            '@re# [{"drugs":["cisplatin","etoposide"],"label":"POS"}] #re@</answer>'
        )
        payload = {
            "response_text": text,
            "gold": GOLD[:1],
            "extended": True,
            "weights": {"alpha_ner": 0.5},
            "gold_entities": ["Cisplatin", "Etoposide"],
        }
        reward = client.post("/v1/score", json=payload).json()["reward"]
        assert reward["r_ner"] == 1.0
        assert reward["r_total"] == pytest.approx(1.0)


class TestGroupScore:
    def test_empty_group_is_rejected(self, client):
        response = client.post("/v1/score/group", json={"responses": [], "gold": GOLD})
        assert response.status_code == 400

    def test_agrees_with_single_scoring(self, client):
        rng = random.Random(17)
        for _ in range(100):
            responses = [random_response(rng) for _ in range(rng.randint(1, 6))]
            group = client.post("/v1/score/group", json={"responses": responses, "gold": GOLD})
            assert group.status_code == 200
            results = group.json()["results"]

            singles = [
                client.post("/v1/score", json={"response_text": text, "gold": GOLD}).json()
                for text in responses
            ]
            totals = [s["reward"]["r_total"] for s in singles]
            assert [r["reward"] for r in results] == [s["reward"] for s in singles]
            assert [r["advantage"] for r in results] == pytest.approx(
                group_advantages(totals), abs=1e-12
            )
            assert group.json()["mean_reward"] == pytest.approx(sum(totals) / len(totals))


def canonical(id_, gold, entities=None, mode="drugcomb"):
    return {"id": id_, "sentence": "s", "gold": gold, "entities": entities, "mode": mode}


class TestEvaluate:
    def test_perfect_predictions(self, client):
        gold = [canonical("1", GOLD, ["cisplatin", "etoposide"]), canonical("2", [])]
        payload = {"predictions": gold, "gold": gold}
        body = client.post("/v1/evaluate", json=payload).json()
        assert body["instances"] == 2
        assert set(body["metrics"]) == {"pos_exact", "pos_partial", "any_exact", "any_partial"}
        assert all(entry["scores"]["f1"] == 1.0 for entry in body["metrics"].values())
        assert body["metrics"]["any_exact"]["config"]["scope"] == "any"
        assert body["ner"]["f1"] == 1.0
        assert body["subsets"]["no_comb"]["scores"]["recall"] == 1.0
        assert all(body["subsets"][f"higher_order_{name}"] is None for name in body["metrics"])

    def test_partial_and_higher_order(self, client):
        big = [{"drugs": ["a", "b", "c", "d"], "label": "POS"}]
        gold = [canonical("1", big)]
        predictions = [canonical("1", [{"drugs": ["a", "b", "c"], "label": "POS"}])]
        body = client.post("/v1/evaluate", json={"predictions": predictions, "gold": gold}).json()
        assert body["metrics"]["any_exact"]["scores"]["f1"] == 0.0
        assert body["metrics"]["any_partial"]["scores"]["f1"] == pytest.approx(0.75)
        subsets = body["subsets"]
        assert subsets["higher_order_pos_exact"]["scores"]["f1"] == 0.0
        assert subsets["higher_order_any_exact"]["scores"]["f1"] == 0.0
        assert subsets["higher_order_pos_partial"]["scores"]["f1"] == pytest.approx(0.75)
        assert subsets["higher_order_any_partial"]["scores"]["f1"] == pytest.approx(0.75)
        assert subsets["higher_order_any_partial"]["config"]["min_gold_drugs"] == 4

    def test_higher_order_threshold_is_configurable(self):
        client = TestClient(create_app(Settings(higher_order_min_drugs=3)))
        triple = [{"drugs": ["a", "b", "c"], "label": "NEG"}]
        gold = [canonical("1", triple), canonical("2", [{"drugs": ["d", "e"], "label": "POS"}])]
        body = client.post("/v1/evaluate", json={"predictions": gold, "gold": gold}).json()
        subsets = body["subsets"]
        assert subsets["higher_order_any_exact"]["scores"]["f1"] == 1.0
        assert subsets["higher_order_any_exact"]["scores"]["gold_count"] == 1
        # the only higher-order gold is not POS
        assert subsets["higher_order_pos_exact"]["scores"]["gold_count"] == 0

    def test_id_mismatch(self, client):
        payload = {"predictions": [canonical("1", []), canonical("3", [])], "gold": [canonical("1", []), canonical("2", [])]}
        response = client.post("/v1/evaluate", json=payload)
        assert response.status_code == 400
        detail = response.json()["detail"]
        assert detail["error"] == "IdMismatch"
        assert "'2'" in detail["message"] and "'3'" in detail["message"]

    def test_ddi_mode(self, client):
        pair = [{"drugs": ["a", "b"], "label": "MECHANISM"}, {"drugs": ["c", "d"], "label": "EFFECT"}]
        gold = [canonical("1", pair, mode="ddi13")]
        predictions = [canonical("1", pair[:1], mode="ddi13")]
        body = client.post(
            "/v1/evaluate", json={"predictions": predictions, "gold": gold, "mode": "ddi13"}
        ).json()
        assert body["mode"] == "ddi13"
        scores = body["metrics"]["typed_micro"]["scores"]
        assert scores["precision"] == 1.0
        assert scores["recall"] == 0.5
