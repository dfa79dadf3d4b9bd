"""Distribution fitting: normal mixtures by EM, generalized Pareto tails
by peaks-over-threshold, GARCH(1,1) by quasi-maximum likelihood, and the
ARCH-LM diagnostic."""

from .garch import (
    ArchLmResult,
    GarchFit,
    arch_lm_test,
    fit_garch11,
    garch11_loglike,
    garch11_variance_path,
)
from .gpd import GpdFit, fit_gpd_pot, gpd_loglike
from .mixture import (
    MixtureFit,
    fit_mixture_em,
    mixture_cdf,
    mixture_logpdf,
    mixture_pdf,
)

__all__ = [
    "ArchLmResult",
    "GarchFit",
    "GpdFit",
    "MixtureFit",
    "arch_lm_test",
    "fit_garch11",
    "fit_gpd_pot",
    "fit_mixture_em",
    "garch11_loglike",
    "garch11_variance_path",
    "gpd_loglike",
    "mixture_cdf",
    "mixture_logpdf",
    "mixture_pdf",
]
