"""Left-curtain martingale coupling for atomic initial laws, with American put bounds."""

from .measures import AtomicMeasure, PutFunction, convex_order_leq, discretize, put_value, quantile
from .curtain import ConvexOrderError, CouplingTriple, EmbeddingError, build_left_curtain, certify
from .coupling import JointLaw, joint_law, sample, transport_cost
from .american_put import HedgePortfolio, PriceReport, PutPair, find_ustar, model_price, price
from .limits import bound_J, bound_j, convergence_probe, envelope_check, wasserstein1

__all__ = [
    "AtomicMeasure", "PutFunction", "convex_order_leq", "discretize", "put_value", "quantile",
    "ConvexOrderError", "CouplingTriple", "EmbeddingError", "build_left_curtain", "certify",
    "JointLaw", "joint_law", "sample", "transport_cost",
    "HedgePortfolio", "PriceReport", "PutPair", "find_ustar", "model_price", "price",
    "bound_J", "bound_j", "convergence_probe", "envelope_check", "wasserstein1",
]
