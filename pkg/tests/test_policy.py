"""Autoregressive generation: padding, token steps, pruning, sampling."""

import numpy as np
import pytest

from spinanneal import ising, policy
from spinanneal.errors import InputError, StateError
from spinanneal.graphs import Graph, NodeOrdering
from spinanneal.ising import IsingModel, delta_energy_trace, encode, energy, violation_energy
from spinanneal.nets import NetConfig, PolicyValueNet
from spinanneal.policy import (GenerationState, generate, pad_instance, rescore,
                               token_step)


def random_graph(rng, n, p=0.4):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return Graph(n, edges)


def zero_policy_head(net: PolicyValueNet) -> None:
    last = len(net.config.head_widths)
    net.params[f"policy.w{last}"].data[:] = 0.0
    net.params[f"policy.b{last}"].data[:] = 0.0


class TestPadInstance:
    def test_no_padding_when_divisible(self):
        inst = encode("mis", Graph(10, [(0, 1)]), 1.0, 1.1)
        assert pad_instance(inst, 5).n == 10

    def test_k_one_never_pads(self):
        inst = encode("mis", Graph(7, [(0, 1)]), 1.0, 1.1)
        assert pad_instance(inst, 1).n == 7

    def test_padding_preserves_energy(self):
        rng = np.random.default_rng(0)
        g = random_graph(rng, 7)
        inst = encode("mvc", g, 1.0, 1.1)
        padded = pad_instance(inst, 5)
        assert padded.n == 10 and padded.base_n == 7
        for _ in range(50):
            s = rng.choice([-1, 1], size=7)
            ext = np.concatenate([s, rng.choice([-1, 1], size=3)])
            assert energy(padded.instance.model, ext) == pytest.approx(
                energy(inst.model, s), abs=1e-12)

    def test_invalid_k(self):
        inst = encode("mis", Graph(3, []), 1.0, 1.1)
        with pytest.raises(InputError):
            pad_instance(inst, 0)


class TestApplyToken:
    def test_isolated_token_node_leaves_neighbors_alone(self):
        model = IsingModel(3, {(1, 2): 1.0}, np.zeros(3), 0.0)
        state = GenerationState(model, 1, NodeOrdering.from_order([0, 1, 2]))
        before = state.live_fields.copy()
        state.apply_token(1)  # node 0 has no couplings
        np.testing.assert_array_equal(state.live_fields[1:], before[1:])

    def test_coupling_folds_into_live_field(self):
        model = IsingModel(2, {(0, 1): 1.0}, np.zeros(2), 0.0)
        state = GenerationState(model, 1, NodeOrdering.from_order([0, 1]))
        state.apply_token(1)  # sigma_0 = +1
        assert state.live_fields[1] == pytest.approx(1.0)
        assert not state.alive[0] and state.alive[1]

    def test_config_bit_encoding_lsb_first(self):
        model = IsingModel(2, {}, np.array([1.0, 10.0]), 0.0)
        state = GenerationState(model, 2, NodeOrdering.from_order([0, 1]))
        delta = state.apply_token(0b01)  # node 0 -> +1, node 1 -> -1
        assert np.array_equal(state.spins, [1, -1])
        assert delta == pytest.approx(1.0 - 10.0)

    def test_within_token_coupling_counted_once(self):
        model = IsingModel(2, {(0, 1): 2.0}, np.zeros(2), 0.0)
        state = GenerationState(model, 2, NodeOrdering.from_order([0, 1]))
        delta = state.apply_token(0b11)
        assert delta == pytest.approx(2.0)
        assert delta == pytest.approx(energy(model, [1, 1]))

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_pruned_deltas_match_full_model_decomposition(self, k):
        rng = np.random.default_rng(k)
        for _ in range(40):
            g = random_graph(rng, int(rng.integers(2, 10)))
            inst = encode(("mis", "mvc", "maxcut")[int(rng.integers(3))], g, 1.0, 1.1)
            padded = pad_instance(inst, k)
            model = padded.instance.model
            order = NodeOrdering.from_order(rng.permutation(model.n))
            state = GenerationState(model, k, order)
            actions = [int(rng.integers(1 << k)) for _ in range(model.n // k)]
            for a in actions:
                state.apply_token(a)
            # token deltas equal the grouped per-spin decomposition
            per_spin = delta_energy_trace(model, order, state.spins)
            grouped = per_spin.reshape(-1, k).sum(axis=1)
            np.testing.assert_allclose(state.delta_history, grouped, atol=1e-9)
            assert np.sum(state.delta_history) == pytest.approx(
                energy(model, state.spins) - model.offset, abs=1e-9)

    def test_exhausted_state_raises(self):
        model = IsingModel(1, {}, np.zeros(1), 0.0)
        state = GenerationState(model, 1, NodeOrdering.from_order([0]))
        state.apply_token(0)
        with pytest.raises(StateError):
            token_step(state, PolicyValueNet.create(NetConfig.desk(k=1), seed=0))


class TestTokenStep:
    def test_zero_policy_head_gives_uniform(self):
        inst = encode("mis", Graph(4, [(0, 1), (1, 2), (2, 3)]), 1.0, 1.1)
        net = PolicyValueNet.create(NetConfig.desk(k=2), seed=1)
        zero_policy_head(net)
        state = GenerationState(inst.model, 2, NodeOrdering.from_order([0, 1, 2, 3]))
        dist, _ = token_step(state, net)
        np.testing.assert_allclose(dist.probs, 0.25, atol=1e-12)

    def test_k1_is_bernoulli(self):
        inst = encode("maxcut", Graph(3, [(0, 1), (1, 2)]))
        net = PolicyValueNet.create(NetConfig.desk(k=1), seed=2)
        state = GenerationState(inst.model, 1, NodeOrdering.from_order([0, 1, 2]))
        dist, value = token_step(state, net)
        assert dist.probs.shape == (2,)
        assert dist.probs.sum() == pytest.approx(1.0, abs=1e-9)
        assert isinstance(value, float)

    def test_distribution_invariant_to_outside_relabeling(self):
        # permute the ids of nodes outside the current token and rebuild an
        # isomorphic state: the token distribution must not move
        rng = np.random.default_rng(3)
        g = random_graph(rng, 7, p=0.5)
        inst = encode("mis", g, 1.0, 1.1)
        net = PolicyValueNet.create(NetConfig.desk(k=2), seed=3)
        padded = pad_instance(inst, 2)
        order = np.arange(padded.n)
        state = GenerationState(padded.instance.model, 2, NodeOrdering.from_order(order))
        dist, value = token_step(state, net)

        perm = np.concatenate([[0, 1], 2 + rng.permutation(padded.n - 2)])
        inv = np.argsort(perm)
        model = padded.instance.model
        couplings = {(min(int(inv[i]), int(inv[j])), max(int(inv[i]), int(inv[j]))): float(v)
                     for i, j, v in zip(model.coup_i, model.coup_j, model.coup_v)}
        relabeled = IsingModel(model.n, couplings, model.fields[perm], model.offset)
        order_p = inv[order]
        state_p = GenerationState(relabeled, 2, NodeOrdering.from_order(order_p))
        dist_p, value_p = token_step(state_p, net)
        np.testing.assert_allclose(dist_p.log_probs, dist.log_probs, atol=1e-9)
        assert value_p == pytest.approx(value, abs=1e-9)


class TestGenerate:
    def setup_method(self):
        rng = np.random.default_rng(4)
        self.graph = random_graph(rng, 9, p=0.35)
        self.inst = encode("mis", self.graph, 1.0, 1.1)
        self.net = PolicyValueNet.create(NetConfig.desk(k=2), seed=4)

    def test_greedy_deterministic(self):
        a = generate(self.inst, self.net, 2, "greedy", seed=7, n_orderings=3)
        b = generate(self.inst, self.net, 2, "greedy", seed=7, n_orderings=3)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.spins, rb.spins)
            np.testing.assert_array_equal(ra.step_log_probs, rb.step_log_probs)

    def test_step_count_is_padded_length_over_k(self):
        results = generate(self.inst, self.net, 2, "greedy", seed=1, n_orderings=1)
        assert results[0].n_steps == int(np.ceil(9 / 2))

    def test_all_outputs_feasible(self):
        results = generate(self.inst, self.net, 2, "sample", seed=8,
                           n_orderings=2, n_samples=6)
        assert len(results) == 6
        for r in results:
            assert violation_energy(self.inst, r.spins) == 0

    def test_logprob_bookkeeping_matches_rescoring(self):
        results = generate(self.inst, self.net, 2, "sample", seed=9,
                           n_orderings=1, n_samples=3)
        for r in results:
            again = rescore(self.inst, self.net, 2, r.ordering, r.actions(2))
            np.testing.assert_allclose(r.step_log_probs, again, atol=1e-9)

    def test_sampling_requires_divisibility(self):
        with pytest.raises(InputError):
            generate(self.inst, self.net, 2, "sample", seed=1, n_orderings=3, n_samples=7)

    def test_unknown_mode(self):
        with pytest.raises(InputError):
            generate(self.inst, self.net, 2, "argmax", seed=1)

    def test_fresh_uniform_net_samples_uniformly(self):
        # all 8 outcomes of a 3-spin cut problem within 3-sigma multinomial
        # bands when the policy head is zeroed
        inst = encode("maxcut", Graph(3, [(0, 1), (1, 2), (0, 2)]))
        net = PolicyValueNet.create(NetConfig.desk(k=1), seed=5)
        zero_policy_head(net)
        n_draws = 20_000
        results = generate(inst, net, 1, "sample", seed=10,
                           n_orderings=1, n_samples=n_draws)
        counts = np.zeros(8)
        for r in results:
            idx = int(np.sum(((r.raw_spins + 1) // 2) << np.arange(3)))
            counts[idx] += 1
        expected = n_draws / 8
        sigma = np.sqrt(n_draws * (1 / 8) * (7 / 8))
        assert np.all(np.abs(counts - expected) <= 3 * sigma)


