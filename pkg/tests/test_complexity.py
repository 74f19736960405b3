import random
from fractions import Fraction

import pytest

from stridedpose.complexity import (
    _flops_ste_exact,
    ComplexityReport,
    analytic_layer_macs,
    beta_closed_form,
    compression_ratio,
    count_params,
    flops_ste,
    flops_vte,
    measure_macs,
    ste_layer_flops,
    vte_layer_flops,
)
from stridedpose.model import ModelConfig
from stridedpose.numerics import ConfigError


def test_flops_vte_values():
    assert flops_vte(3, 27, 256) == 43_587_072
    assert flops_vte(1, 1, 1) == 10
    assert flops_vte(6, 27, 256) == 2 * flops_vte(3, 27, 256)


def test_flops_ste_values():
    assert flops_ste(3, 27, 256, 3, 3) == 20_866_560
    terms = [ste_layer_flops(t, 256, 3, 3) for t in (27, 9, 3)]
    assert terms == [14_529_024, 4_760_064, 1_577_472]
    assert flops_ste(1, 27, 256, 3, 3) == ste_layer_flops(27, 256, 3, 3)
    # very large stride: the kernel term vanishes
    big = ste_layer_flops(27, 256, 10**12, 3)
    assert abs(big - (6 * 27 * 256**2 + 2 * 27**2 * 256)) < 1


def test_invalid_inputs():
    with pytest.raises(ConfigError):
        flops_vte(0, 27, 256)
    with pytest.raises(ConfigError):
        flops_ste(3, 27, 256, 0, 3)


def test_reference_ratio():
    alpha, beta = compression_ratio(3, 27, 256, 3, 3)
    assert Fraction(beta).limit_denominator(10**6) == Fraction(122_265, 255_393)
    assert alpha == pytest.approx(1.3525, abs=5e-4)
    assert compression_ratio(3, 27, 10**6, 3, 3)[0] == pytest.approx(1.35, abs=5e-3)


def test_beta_closed_form_matches_raw_sum():
    rng = random.Random(0)
    for _ in range(100):
        T, D = rng.randint(1, 2000), rng.randint(1, 4096)
        assert abs(beta_closed_form(T, D) - compression_ratio(3, T, D, 3, 3)[1]) <= 1e-12


def test_alpha_consistent_with_sums():
    for N in (1, 2, 3, 4):
        for T in (9, 27, 81):
            for D in (16, 256):
                for S, K in ((1, 1), (3, 3), (9, 5)):
                    fv, fs = flops_vte(N, T, D), _flops_ste_exact(N, T, D, S, K)
                    alpha, _ = compression_ratio(N, T, D, S, K)
                    assert abs(float(2 * fv / (fv + fs)) - alpha) <= 1e-12
                    # the rounded integer count only moves alpha by the rounding
                    assert abs(2 * fv / (fv + flops_ste(N, T, D, S, K)) - alpha) <= 1e-4


def test_beta_grows_with_width_toward_its_limit():
    # 468/972 > 91/243, so beta rises with D and alpha falls toward 2 / (1 + 468/972)
    limit = 468 / 972
    for T in (27, 81, 243):
        betas = [compression_ratio(3, T, D, 3, 3)[1] for D in (16, 64, 256, 1024, 4096)]
        assert all(a < b < limit for a, b in zip(betas, betas[1:]))


def test_layer_formulas():
    assert vte_layer_flops(27, 256) == 14_529_024
    assert ste_layer_flops(27, 256, 3, 3) == vte_layer_flops(27, 256)


def test_param_counts_near_reference():
    total, breakdown = count_params(ModelConfig())
    assert abs(total - 4.01e6) / 4.01e6 < 0.05
    assert sum(breakdown.values()) == total
    vte_only, _ = count_params(ModelConfig(n_ste=0, s_m=()))
    assert abs(vte_only - 1.61e6) / 1.61e6 < 0.05


def test_measured_macs_exact_on_divisible_stages():
    cfg = ModelConfig()
    measured = measure_macs(cfg)
    analytic = analytic_layer_macs(cfg)
    for key in ("vte.0", "vte.1", "vte.2", "ste.0", "ste.1", "ste.2"):
        assert measured[key] == analytic[key]
    assert measured["vte.0"] == 14_529_024


def test_measured_macs_on_padded_stages():
    cfg = ModelConfig(frames=25, d_model=64, d_ff=128, heads=4, n_ste=2, s_m=(3, 9))
    measured = measure_macs(cfg)
    analytic = analytic_layer_macs(cfg)
    for key in ("ste.0", "ste.1"):
        assert abs(measured[key] - float(analytic[key])) / float(analytic[key]) < 0.05


def test_measured_macs_351_schedule():
    cfg = ModelConfig.for_frames(351, d_model=32, d_ff=64, heads=4)
    measured = measure_macs(cfg)
    analytic = analytic_layer_macs(cfg)
    for n in range(3):
        key = f"ste.{n}"
        assert abs(measured[key] - float(analytic[key])) / float(analytic[key]) < 0.05


def test_report_text_and_csv():
    rep = ComplexityReport.build(config=ModelConfig())
    text = rep.to_text()
    assert "1 MAC = 1 FLOP" in text
    assert "43,587,072" in text and "20,866,560" in text
    assert rep.alpha == pytest.approx(2 / (1 + rep.beta))
    csv_text = rep.to_csv()
    assert "flops_vte,43587072" in csv_text
    assert "measured.ste.2," in csv_text
