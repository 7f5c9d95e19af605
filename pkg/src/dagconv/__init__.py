"""Convolutional networks on directed acyclic graphs built from causal graph shift operators."""
from .dag import Closure, Dag, Permutation, canonical_small_dag, new_dag, permute_dag, read_edge_list, transitive_closure, write_edge_list
from .errors import *  # noqa: F401,F403
from .experiment import ExperimentConfig, ResultsBundle, parameter_count, parse_config, run_experiment, run_sweep
from .filters import CausalFilter, build_filter, convolve, frequency_response, ls_fit
from .gso import ALL, CausalGso, CausalGsoSet, causal_gso, gso_set, permute_gso
from .nn import DCN, GCN, MLP, PDCN, FBGCNN
from .synth import TaskDataset, er_dag, gen_diffusion_dataset, gen_imputation_split, gen_source_id_dataset, sf_dag
from .train import TrainConfig, evaluate, nmse, train_model

__version__ = "0.1.0"
