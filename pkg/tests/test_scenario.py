from fractions import Fraction

import numpy as np
import pytest

import pmdpcert as pc
from pmdpcert.checker import SolverConfig
from pmdpcert.scenario import (
    Context,
    InvalidScenario,
    Mode,
    OutOfRange,
    decode,
    encode,
    scenario_from_dict,
    scenario_to_dict,
    state_count,
)

F = Fraction


def test_open_2x2_count():
    s = pc.GridScenario(2, 2, uav_start=(0, 0), robot_start=(1, 1), goal=(1, 0))
    m = pc.build_open(s)
    assert m.state_count == 32
    assert all(len(d) >= 1 for d in m.enabled)
    assert not (m.labels["crash"] & m.labels["goal"])


def test_open_5x5_validates(open5_model):
    assert open5_model.state_count == 1250
    assert pc.validate(open5_model).ok


def test_open_3x3_count(open3_model):
    assert open3_model.state_count == 162


def test_build_open_rejects_invalid():
    bad = pc.GridScenario(3, 3, uav_start=(0, 0), robot_start=(0, 0), goal=(5, 5))
    with pytest.raises(InvalidScenario):
        pc.build_open(bad)


def test_decode_encode_bijection(open3, open3_model):
    for x in range(open3_model.state_count):
        assert encode(open3, decode(x, open3)) == x
    with pytest.raises(OutOfRange):
        decode(open3_model.state_count, open3)


def test_initial_decodes_to_start(open3, open3_model):
    cs = decode(open3_model.initial, open3)
    assert cs == pc.CompositeState((0, 0), Mode.FLYING, (2, 2))


def test_crash_states_decode_correctly(open3, open3_model):
    for sid in open3_model.labels["crash"]:
        cs = decode(sid, open3)
        assert cs.mode is Mode.GROUNDED and cs.uav_pos == cs.robot_pos


def test_label_predicates_exhaustive(open3, open3_model):
    crash = open3_model.labels["crash"]
    goal = open3_model.labels["goal"]
    for sid in range(open3_model.state_count):
        cs = decode(sid, open3)
        is_crash = cs.mode is Mode.GROUNDED and cs.uav_pos == cs.robot_pos
        is_goal = cs.uav_pos == open3.goal and not is_crash
        assert (sid in crash) == is_crash
        assert (sid in goal) == is_goal


def test_flying_fanout_structure(open3, open3_model):
    # Per action: one composite target per (uav branch, robot move); the uav
    # contributes the Flying/Grounded pair, the robot its full fan-out.
    for sid in range(open3_model.state_count):
        cs = decode(sid, open3)
        if cs.mode is not Mode.FLYING:
            continue
        uav_moves = 1 + sum(
            1 for dx, dy in ((0, 1), (0, -1), (1, 0), (-1, 0))
            if open3.in_bounds((cs.uav_pos[0] + dx, cs.uav_pos[1] + dy)))
        robot_fan = 1 + sum(
            1 for dx, dy in ((0, 1), (0, -1), (1, 0), (-1, 0))
            if open3.in_bounds((cs.robot_pos[0] + dx, cs.robot_pos[1] + dy)))
        dists = open3_model.enabled[sid]
        assert len(dists) == uav_moves
        for dist in dists:
            assert len(dist.support) == 2 * robot_fan
            targets = [t for t, _ in dist.support]
            assert len(set(targets)) == len(targets)


def test_open_p1_zero_never_grounds(open3, open3_model, prop):
    c = pc.instantiate(open3_model, {"p1": 0, "p2": F(1, 2)})
    grounded = np.array([decode(s, open3).mode is Mode.GROUNDED
                         for s in range(c.state_count)])
    for s in range(c.state_count):
        if grounded[s]:
            continue
        for k in c.actions_of(s):
            cols, _ = c.row(k)
            assert not grounded[cols].any(), "flying state grounds at p1=0"
    assert pc.max_until(c, prop).value_at_initial == 1.0


def test_rooftop_crash_label_empty(rooftop5_model):
    assert not rooftop5_model.labels["crash"]


def test_rooftop_crash_unreachable_all_valuations(rooftop5_model):
    for p1v, p2v in [(0, F(1, 2)), (1, F(1, 20)), (F(1, 2), 1)]:
        c = pc.instantiate(rooftop5_model, {"p1": p1v, "p2": p2v})
        seen = {c.initial}
        frontier = [c.initial]
        while frontier:
            s = frontier.pop()
            for k in c.actions_of(s):
                cols, _ = c.row(k)
                for t in cols:
                    if t not in seen:
                        seen.add(int(t))
                        frontier.append(int(t))
        assert not (seen & set(np.flatnonzero(c.label_mask("crash"))))


def test_rooftop_deliver_guard(rooftop3, rooftop3_model):
    # Deliver appears exactly at goal-adjacent rooftops with the robot at
    # Manhattan distance >= 2, as an extra deterministic action.
    for sid in range(rooftop3_model.state_count):
        cs = decode(sid, rooftop3)
        if cs.mode is not Mode.FLYING:
            continue
        n_moves = 1 + sum(1 for e in rooftop3.rooftop_edges if cs.uav_pos in e)
        dists = rooftop3_model.enabled[sid]
        adjacent = abs(cs.uav_pos[0] - rooftop3.goal[0]) + abs(cs.uav_pos[1] - rooftop3.goal[1]) == 1
        robot_far = abs(cs.robot_pos[0] - rooftop3.goal[0]) + abs(cs.robot_pos[1] - rooftop3.goal[1]) >= 2
        if adjacent and robot_far:
            assert len(dists) == n_moves + 1
            last = dists[-1].support
            assert len(last) == 1
            target = decode(last[0][0], rooftop3)
            assert target.mode is Mode.DELIVERED
        else:
            assert len(dists) == n_moves


def test_rooftop_robustness_small(rooftop3_model, prop):
    for p1v, p2v in [(0, F(1, 100)), (1, F(1, 100)), (F(99, 100), 1), (F(1, 3), F(1, 7))]:
        c = pc.instantiate(rooftop3_model, {"p1": p1v, "p2": p2v})
        assert pc.max_until(c, prop).value_at_initial == 1.0


def test_rooftop_validates(rooftop3_model, rooftop5_model):
    assert pc.validate(rooftop3_model).ok
    assert pc.validate(rooftop5_model).ok


def test_open_monotone_in_p1(open3_model, prop):
    # Reference trend: satisfaction non-increasing in p1 at fixed p2.
    cfg = SolverConfig(epsilon=1e-8)
    for p2v in (F(3, 10), F(7, 10)):
        values = []
        for i in range(10):
            c = pc.instantiate(open3_model, {"p1": F(i, 9), "p2": p2v})
            values.append(pc.max_until(c, prop, cfg).value_at_initial)
        for a, b in zip(values, values[1:]):
            assert b <= a + 1e-3


def test_scenario_json_round_trip(open5, rooftop5):
    for s in (open5, rooftop5):
        assert scenario_from_dict(scenario_to_dict(s)) == s


def test_scenario_problems_structure():
    s = pc.GridScenario(3, 3, uav_start=(0, 0), robot_start=(1, 1), goal=(9, 9))
    assert ("goal", "(9, 9) out of bounds") in s.problems()


def test_rooftop_disconnected_graph_rejected():
    s = pc.GridScenario(
        3, 3, uav_start=(0, 0), robot_start=(1, 1), goal=(1, 0),
        context=Context.ROOFTOP,
        rooftops=frozenset({(0, 0), (2, 2)}),
        rooftop_edges=frozenset())
    assert any(field == "rooftop_edges" for field, _ in s.problems())


def test_state_count_helper(open3, rooftop3):
    assert state_count(open3) == 162
    assert state_count(rooftop3) == 3 * 2 * 7
