"""Shared fixtures: the bundled series and both fitted models are
expensive enough to build once per session."""

from types import SimpleNamespace

import numpy as np
import pytest

from valuation_lab.market_data import (build_derived, load_bundled_csv,
                                       parse_market_csv)
from valuation_lab.valuation import fit_bubble, fit_tr_cape


@pytest.fixture(scope="session")
def raw():
    return parse_market_csv(load_bundled_csv())


@pytest.fixture(scope="session")
def derived(raw):
    return build_derived(raw, 10)


@pytest.fixture(scope="session")
def pipeline(raw, derived):
    k = derived.base_index
    ln_g = np.log(derived.tr_cape[k:])
    ln_f = np.log(derived.cape[k:])
    ln_h = np.log(derived.modified_ratio[k:])
    ebar10 = derived.Ebar10[k:]
    g_tr = np.log(ebar10[1:] / ebar10[:-1])
    e10 = derived.E10[k:]
    g_e10 = np.log(e10[1:] / e10[:-1])
    inflation = np.log(raw.cpi[1:] / raw.cpi[:-1])
    g_nom = g_tr + inflation[k:]
    return SimpleNamespace(
        raw=raw, der=derived, k=k, ln_g=ln_g, ln_f=ln_f, ln_h=ln_h,
        g_tr=g_tr, g_e10=g_e10, g_nom=g_nom,
        fit=fit_tr_cape(ln_g, growth=g_tr),
        bub=fit_bubble(ln_h),
    )
