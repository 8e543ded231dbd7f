"""Text-based knowledge graph completion with set-level data expansion and balanced multi-task training."""

from .balancer import TaskWeights, difficulty, init_weights, update_weights
from .evaluator import RankingReport, aggregate, evaluate
from .expansion import ExpandedExample, build_known_text, expand_dataset
from .kg import KnowledgeGraph, Triple, compute_stats, focusing_ratios, load_data_dir, load_graph
from .summarize import summarize
from .trainer import TrainConfig, train

__version__ = "0.1.0"
