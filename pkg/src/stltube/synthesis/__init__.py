from .certificate import Certificate, CertificateIntegrityError, check_certificate, composite_lipschitz, lipschitz_mu
from .pipeline import (
    FeasibilityResult,
    SynthesisError,
    SynthesisProblem,
    SynthesisResult,
    seed_tube_coeffs,
    synthesize,
)
from .program import ConstraintProgram, Margins, SynthesisConfig, aligned_step, evaluate_constraints
from .samples import SampleCapError, SampleSet, build_sample_set
from .seed import extract_waypoints, seed_path


def feasible_for_eta(phi, basis, samples, config, eta, start=None):
    """Tube with sampled margin <= eta, or ``None`` if the search budget ran out."""
    res = SynthesisProblem(phi, basis, config, samples).feasible_for_eta(eta, start=start)
    return res.tube if res.feasible else None
