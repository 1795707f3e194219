"""Per-action contribution scores for five-versus-five match timelines.

Modules:
    match_data     parsing and validation of match documents
    featurizer     30-dimensional action vectors and baseline metrics
    neural_core    GRU, SLP and MLP layers with hand-written gradients, Adam
    scoring_model  the ten-submodel ensemble, losses, training and checkpoints
    evaluation     discernment, ranking, misestimate and PCA studies
    synth          synthetic matches with known per-action values
"""

__version__ = "0.1.0"
