"""Lipschitz transfer certificate for a sampled tube solution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..tube import TubeLipschitz


class CertificateIntegrityError(ValueError):
    pass


def lipschitz_mu(tube_lip, rho_lip, n):
    """Lipschitz bound of ``lambda -> -rho(mixture signal)``: ``L_rho * (gbar_L + gbar_U) * sqrt(n)``."""
    if rho_lip < 0 or n < 1:
        raise ValueError("need rho_lip >= 0 and n >= 1")
    return rho_lip * (tube_lip.gamma_bar_lower + tube_lip.gamma_bar_upper) * math.sqrt(n)


def composite_lipschitz(tube_lip, L_mu, rho_lip):
    s = tube_lip.L_lower + tube_lip.L_upper
    return max(s, tube_lip.L_dlower, tube_lip.L_dupper, math.sqrt(L_mu**2 + rho_lip**2 * s**2))


@dataclass(frozen=True)
class Certificate:
    eta_star: float
    composite_L: float
    epsilon: float
    slack: float
    valid: bool
    lipschitz: TubeLipschitz | None = None
    L_mu: float | None = None
    L_rho: float | None = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @classmethod
    def build(cls, eta_star, composite_L, epsilon, lipschitz=None, L_mu=None, L_rho=None, diagnostics=None):
        slack = eta_star + composite_L * epsilon
        return cls(
            float(eta_star), float(composite_L), float(epsilon), float(slack), bool(slack <= 0),
            lipschitz, L_mu, L_rho, dict(diagnostics or {}),
        )

    def to_dict(self):
        return {
            "eta_star": self.eta_star,
            "composite_L": self.composite_L,
            "epsilon": self.epsilon,
            "slack": self.slack,
            "valid": self.valid,
            "lipschitz": None if self.lipschitz is None else self.lipschitz.to_dict(),
            "L_mu": self.L_mu,
            "L_rho": self.L_rho,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        lip = d.get("lipschitz")
        return cls(
            float(d["eta_star"]), float(d["composite_L"]), float(d["epsilon"]), float(d["slack"]), bool(d["valid"]),
            None if lip is None else TubeLipschitz(**lip), d.get("L_mu"), d.get("L_rho"), dict(d.get("diagnostics") or {}),
        )


def check_certificate(cert):
    """Recompute the slack (and composite constant, when its inputs are stored).

    Returns the validity flag; raises :class:`CertificateIntegrityError` if any
    stored quantity disagrees with its recomputation.
    """
    if cert.lipschitz is not None and cert.L_mu is not None and cert.L_rho is not None:
        L = composite_lipschitz(cert.lipschitz, cert.L_mu, cert.L_rho)
        if L != cert.composite_L:
            raise CertificateIntegrityError(f"stored composite L {cert.composite_L!r} != recomputed {L!r}")
    slack = cert.eta_star + cert.composite_L * cert.epsilon
    if slack != cert.slack:
        raise CertificateIntegrityError(f"stored slack {cert.slack!r} != recomputed {slack!r}")
    if cert.valid != (slack <= 0):
        raise CertificateIntegrityError("stored validity flag contradicts the slack")
    return cert.valid
