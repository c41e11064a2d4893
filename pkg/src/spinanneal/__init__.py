"""Ising-model combinatorial optimization toolkit.

Library layout:

* ``graphs`` / ``instances``: graph types, breadth-first orderings, and
  synthetic instance generators (clique-group, random regular,
  preferential attachment) plus edge-list file I/O.
* ``ising``: spin encodings of independent set, vertex cover, clique, and
  cut problems; energy, incremental energy, feasibility repair, and
  energy-scale standardization.
* ``exact``: exhaustive and branch-and-bound oracles, Boltzmann tables,
  exact free energies.
* ``autodiff`` / ``nets``: a small reverse-mode tensor engine and the
  message-passing policy/value and product-distribution networks.
* ``policy``: autoregressive generation with token grouping and dynamic
  graph pruning.
* ``ppo`` / ``anneal``: clipped-ratio policy training under a
  cosine-modulated temperature schedule.
* ``baselines``: REINFORCE and closed-form product-model training,
  conditional-expectation decoding, degree-based greedy, random greedy.
* ``metrics``: approximation ratios, relative errors, benchmark reports.
* ``theory``: empirical verification of the temperature-estimation
  divergence bound.
* ``cli``: command-line pipeline entry points.
"""

from .graphs import Graph, NodeOrdering, bfs_order, complement, random_bfs_order
from .ising import (IsingModel, ProblemInstance, encode, energy, energy_batch,
                    delta_energy, repair, standardize, scale_model)
from .exact import OracleResult, BoltzmannTable, brute_force_min, solve_instance, \
    boltzmann_enumerate, free_energy_exact
from .anneal import AnnealSchedule, temperature
from .nets import NetConfig, ProductNetConfig, PolicyValueNet, ProductNet, ParamStore
from .policy import GenerationState, TokenDistribution, pad_instance, token_step, generate
from .ppo import PPOConfig, reward, gae, ppo_losses, train
from .baselines import (mfa_forward, reinforce_step, egn_loss, conditional_expectation,
                        db_greedy, rga, BaselineTrainConfig, train_product)
from .metrics import ar_star, ar_hat, eps_rel, maxcut_value, MethodSpec, run_benchmark
from .theory import BoltzmannFamily, fit_beta, check_bound

__version__ = "0.1.0"
