"""Loop (partially time-ordered) and Liouville-pathway expansions of chi^(n).

Symbolic term generation, factorized Lorentzian evaluation, exact
cumulant-function integrals, frequency-map scans and a CLI.
"""
__version__ = "0.1.0"

from .model import (BathSpec, FieldSignature, ModelError, SystemSpec, coherence_dephasing,
                    derive_fast_rates, load_model, two_level_model, vee_model)
from .lineshape import LineshapeKernel, cumulant_exponent, four_point_F
from .termgen import (ExpansionTerm, gen_loop_terms, gen_timeordered_terms,
                      expand_permutations, parse_term, render_term)
from .lorentzian import (LorentzianGreens, chi3_loop, chi3_offresonant_symmetric,
                         chi3_timeordered, resonance_closed_form)
from .cumulant import QuadratureConfig, chi3_integral, response_S3, s3_from_chi3

__all__ = [
    "BathSpec", "FieldSignature", "ModelError", "SystemSpec", "coherence_dephasing",
    "derive_fast_rates", "load_model", "two_level_model", "vee_model",
    "LineshapeKernel", "cumulant_exponent", "four_point_F",
    "ExpansionTerm", "gen_loop_terms", "gen_timeordered_terms", "expand_permutations",
    "parse_term", "render_term",
    "LorentzianGreens", "chi3_loop", "chi3_offresonant_symmetric", "chi3_timeordered",
    "resonance_closed_form",
    "QuadratureConfig", "chi3_integral", "response_S3", "s3_from_chi3",
]
