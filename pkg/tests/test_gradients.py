"""Finite-difference checks for every architecture / output-layer pairing."""

import pytest

from helpers import GRADIENT_CONFIGS, check_model_gradients


def _ident(cfg):
    arch, kind, toggles = cfg
    parts = [arch, kind] + [k for k, v in sorted(toggles.items()) if v]
    parts += [f"no-{k}" for k, v in sorted(toggles.items()) if not v]
    return "-".join(parts)


@pytest.mark.parametrize("cfg", GRADIENT_CONFIGS, ids=_ident)
def test_sentence_gradients_match_finite_differences(cfg):
    arch, kind, toggles = cfg
    check_model_gradients(arch, kind, **toggles)


@pytest.mark.parametrize("arch", ["fnn", "rnn", "lstm"])
def test_energy_scoring_gradients(arch):
    check_model_gradients(arch, "full", energy=True)
