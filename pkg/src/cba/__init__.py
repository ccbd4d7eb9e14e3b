"""Adversarial contextual bandits with an abstention action.

Core learner (confidence-rated exponential weights with entropic
projection), a near-linear metric-ball implementation backed by suffix
trees, graph basis builders, EXP3/EXP4 baselines, synthetic environments
and a reproducible experiment harness.
"""

from .core import (ABSTAIN, ExpertAdvice, RewardVector, StochasticAction,
                   is_abstain, sample_action, unnormalized_relative_entropy)
from .engine import (CbaConfig, CbaLearner, NumericsError, project,
                     reward_estimate)
from .tree import BallOrder, SuffixProductForest, SuffixProductTree
from .bases import (Basis, Graph, GraphError, MetricMatrix, ball_orders,
                    community_basis, effective_resistance_metric,
                    greedy_peeling_chain, interval_basis, louvain_communities,
                    metric_ball_basis, mincut_metric, shortest_path_metric)
from .contextual import (ComparatorPolicy, ContextualConfig, DirectAgent,
                         FastBallAgent, comparator_reward, tune)
from .baselines import Exp4, PerContextExp3
from .environments import (LabeledGraph, RewardModel, draw_context,
                           draw_reward, draw_reward_vector, gen_gaussian_knn,
                           gen_sbm, load_edge_list, planted_ball_policy)
from .harness import (ExperimentConfig, RunRecord, aggregate, parse_config,
                      run, run_single)
from .svgplot import render_svg

__version__ = "0.1.0"
