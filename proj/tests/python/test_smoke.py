"""End-to-end checks of the python module against tiny instances."""

import itertools
import json
import math

import pytest

import invit


def tiny_model():
    cfg = invit.ModelConfig()
    cfg.n_views = 2
    cfg.k_list = [6, 3]
    cfg.d_model = 16
    cfg.d_ff = 32
    cfg.n_heads = 2
    cfg.encoder_layers_per_view = 1
    cfg.decoder_layers = 2
    cfg.validate()
    return cfg


def test_version():
    assert invit.__version__ == "0.1.0"


def test_generate_stays_in_the_unit_square():
    inst = invit.generate("tsp", "uniform", 15, seed=1)
    assert inst.n() == 15
    assert all(0.0 <= x <= 1.0 and 0.0 <= y <= 1.0 for x, y in inst.coords)
    inst.validate()

    cvrp = invit.generate("cvrp", "implosion", 6, seed=2, capacity=30)
    assert cvrp.kind == "cvrp"
    assert cvrp.n() == 7
    assert cvrp.demands[cvrp.depot] == 0
    cvrp.validate()


def test_held_karp_matches_permutation_brute_force():
    inst = invit.generate("tsp", "clustered", 7, seed=3)
    ref = invit.held_karp(inst)
    best = min(
        invit.tour_cost(inst, [0] + list(p))
        for p in itertools.permutations(range(1, 7))
    )
    assert ref.cost == pytest.approx(best, abs=1e-9)
    assert ref.quality == "exact"
    assert invit.tour_cost(inst, ref.tour) == pytest.approx(ref.cost, abs=1e-12)


def test_oracle_bounds_surface_as_value_errors():
    big = invit.generate("tsp", "uniform", 25, seed=4)
    with pytest.raises(ValueError):
        invit.held_karp(big)
    with pytest.raises(RuntimeError):
        invit.gap(1.0, 0.0)


def test_solve_never_loses_to_single_greedy():
    inst = invit.generate("tsp", "uniform", 12, seed=5)
    policy = invit.init_policy(tiny_model(), seed=1)
    greedy = invit.rollout(inst, policy, mode="greedy")
    best = invit.solve(inst, policy, omega=4, pomo_size=4, seed=0)
    assert best["cost"] <= greedy["cost"] + 1e-9
    invit.audit_tour(inst, best["indices"])
    assert sorted(best["indices"]) == list(range(12))


def test_instance_json_round_trip():
    inst = invit.generate("cvrp", "explosion", 5, seed=6)
    back = invit.Instance.from_json(inst.to_json())
    assert back.kind == inst.kind
    assert back.coords == inst.coords
    assert back.demands == inst.demands
    assert back.capacity == inst.capacity


def test_cvrp_exact_beats_nearest_neighbor():
    inst = invit.generate("cvrp", "uniform", 5, seed=7, capacity=20)
    exact = invit.cvrp_exact_tiny(inst)
    nn = invit.nearest_neighbor(inst)
    assert exact.cost <= nn.cost + 1e-9
    invit.audit_tour(inst, exact.tour)


def test_micro_training_produces_a_loadable_checkpoint(tmp_path):
    cfg = json.loads(invit.smoke_train_config())
    cfg["model"].update(
        {"d_model": 16, "d_ff": 32, "n_heads": 2, "k_list": [6, 3], "n_views": 2}
    )
    cfg.update(
        {
            "n_nodes": 8,
            "epochs": 1,
            "steps_per_epoch": 2,
            "batch_size": 2,
            "omega": 1,
            "eval_instances": 2,
            "seed": 11,
            "out_dir": str(tmp_path),
        }
    )
    res = invit.train(json.dumps(cfg))
    assert res["epochs_run"] == 1
    assert res["global_steps"] == 2
    assert math.isfinite(res["final_eval_mean"])

    policy = invit.load_policy(res["checkpoint_path"])
    assert policy.config.d_model == 16
    assert policy.param_count() > 0

    rows = open(res["metrics_path"]).read().strip().splitlines()
    assert rows[0] == "step,loss,mean_advantage,baseline_cost,grad_norm"
    assert len(rows) == 3


def test_optimal_tours_stay_within_eight_neighbors_on_tiny_instances():
    insts = [invit.generate("tsp", "uniform", 8, seed=s) for s in (21, 22)]
    tours = [invit.held_karp(i).tour for i in insts]
    hist = invit.knn_rank_histogram(insts, tours)
    assert hist["total"] == sum(i.n() - 1 for i in insts)
    assert hist["cumulative_at_8"] == 1.0


def test_overlap_is_total_when_nothing_is_added():
    inst = invit.generate("tsp", "uniform", 8, seed=8)
    assert invit.boundary_augmentation_overlap(inst, 0, seed=1) == 100.0
