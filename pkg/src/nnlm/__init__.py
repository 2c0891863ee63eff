"""Neural language-model laboratory: FNN/RNN/LSTM cores with exact manual
backpropagation, factored softmax output layers, caching, and perplexity
experiments driven from a small CLI."""

from . import (artifact, caching, cli, config, corpus, evaluation, models,
               numerics, output_layer, training)

__all__ = [
    "artifact", "caching", "cli", "config", "corpus", "evaluation",
    "models", "numerics", "output_layer", "training",
]

__version__ = "0.1.0"
