import pytest
from httpx import ASGITransport, AsyncClient

from src.main import app


async def _post(path, payload):
    async with AsyncClient(transport=ASGITransport(app=app), base_url="http://test") as ac:
        return await ac.post(path, json=payload)


@pytest.mark.anyio
async def test_scenario_from_preset():
    response = await _post("/world/scenario", {"preset": "circle6", "seed": 3})
    assert response.status_code == 200
    scenario = response.json()["scenario"]
    assert scenario["name"] == "circle6"
    assert len(scenario["robots"]) == 6


@pytest.mark.anyio
async def test_unknown_preset_is_a_client_error():
    response = await _post("/world/scenario", {"preset": "maze"})
    assert response.status_code == 400
    detail = response.json()["detail"]
    assert detail["error"] == "Malformed scenario"
    assert detail["technical_details"] == "MalformedScenarioError"


@pytest.mark.anyio
async def test_overcrowded_arena_conflict():
    response = await _post("/world/scenario", {"kind": "circle_swap", "n_robots": 100, "circle_radius": 1.0})
    assert response.status_code == 409


@pytest.mark.anyio
async def test_observe_every_robot():
    scenario = (await _post("/world/scenario", {"preset": "circle4"})).json()["scenario"]
    response = await _post("/world/observe", {"scenario": scenario})
    assert response.status_code == 200
    observations = response.json()["observations"]
    assert [o["robot"] for o in observations] == [0, 1, 2, 3]
    assert observations[0]["local"]["goal_distance"] == pytest.approx(4.0)
    assert len(observations[0]["neighbors"]) == 3


@pytest.mark.anyio
async def test_resolve_free_space():
    response = await _post("/apf/resolve", {"position": [0, 0], "goal": [3, 4]})
    assert response.status_code == 200
    forces = response.json()["forces"]
    assert forces["regime"] == "free"
    assert forces["resolved"] == pytest.approx([0.6, 0.8])


@pytest.mark.anyio
async def test_resolve_inside_obstacle_rejected():
    response = await _post(
        "/apf/resolve",
        {"position": [0, 0], "goal": [5, 0], "obstacle": {"center": [0.1, 0], "radius": 0.5}},
    )
    assert response.status_code == 400
    assert response.json()["detail"]["error"] == "Degenerate geometry"


@pytest.mark.anyio
async def test_resolve_validates_gains():
    response = await _post("/apf/resolve", {"position": [0, 0], "goal": [1, 0], "gains": {"eta": -1, "lam": 2}})
    assert response.status_code == 422


@pytest.mark.anyio
async def test_episode_metrics_and_trace():
    response = await _post(
        "/eval/episode",
        {"preset": "circle4", "world": {"max_steps": 20}, "include_trace": True},
    )
    assert response.status_code == 200
    body = response.json()
    assert body["planner"] == "vanilla_apf"
    assert body["metrics"]["steps"] == 20
    assert body["metrics"]["partial"] is True
    assert len(body["trace"]) == 4 * 20


@pytest.mark.anyio
async def test_episode_learned_planner_without_checkpoint():
    response = await _post("/eval/episode", {"planner": "rpf_attention"})
    assert response.status_code == 404


@pytest.mark.anyio
async def test_compare_rows_and_summary():
    response = await _post(
        "/eval/compare",
        {"preset": "circle4", "seeds": 2, "world": {"max_steps": 15}},
    )
    assert response.status_code == 200
    body = response.json()
    assert [row["seed"] for row in body["rows"]] == [0, 1]
    assert body["summary"][0]["planner"] == "vanilla_apf"
    assert body["summary"][0]["episodes"] == 2
