import numpy as np
import pytest

from villus_homog.families import FunctionSpec as F
from villus_homog.families import build
from villus_homog.geometry import cosine_profile, flat_profile
from villus_homog.macro import InflowSignals
from villus_homog.models import absorption_from_specs, stream_velocity


def make_absorption(eta_p=F("radial", {"value": 0.5, "amp": 1.0, "r0": 1.0}),
                    eta_a=F("constant", {"value": 0.3}),
                    g_a=F("michaelis_menten", {"vmax": 1.0, "km": 1.0}),
                    rho_surf=F("constant", {"value": 0.5}),
                    zeta=F("constant", {"value": 0.5}),
                    phi=F("linear", {"slope": 1.0}),
                    alpha=0.8, omega=1.0, chi=1.0, eta_lower_bound=0.1):
    return absorption_from_specs(eta_p=eta_p, eta_a=eta_a, g_a=g_a, rho_surf=rho_surf, zeta=zeta, phi=phi,
                                 alpha=alpha, omega=omega, chi=chi, eta_lower_bound=eta_lower_bound)


def inert_absorption(**kw):
    """Reactions off: tiny passive uptake (the lower bound must stay positive), no exchange."""
    args = dict(eta_p=F("constant", {"value": 1e-12}), eta_a=F("constant", {"value": 0.0}), g_a=F("zero"),
                rho_surf=F("constant", {"value": 0.0}), zeta=F("constant", {"value": 0.0}), phi=F("zero"),
                alpha=1.0, eta_lower_bound=1e-12)
    args.update(kw)
    return make_absorption(**args)


@pytest.fixture
def villous():
    prof = cosine_profile(1.0, 0.1)
    return prof, stream_velocity(prof, 1.0, "plug"), make_absorption()


@pytest.fixture
def cylinder():
    return flat_profile(1.0)


@pytest.fixture
def ramp_inflow():
    return InflowSignals(lambda t: 0.0, build("inflow", F("ramp", {"amp": 1.0, "rise": 0.5})))
