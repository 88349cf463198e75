"""Model statistics: parameters and multiply-adds
==================================================

Parameter and compute counts for the shipped configurations, plus the
width sweep that selected them (the feature width is a free choice; the
shipped values were picked to match the published parameter budgets).
"""

import itertools

from earfa.errors import ConfigError
from earfa.model import ModelConfig, count_multiadds, count_params, slka_receptive_field

print("shipped configurations (multi-adds at 1280x720 output):")
print(f"{'config':12s} {'params':>10s} {'multi-adds':>12s} {'slka rf':>8s}")
for variant in ("full", "light"):
    for scale in (2, 3, 4):
        cfg = getattr(ModelConfig, variant)(scale)
        print(f"{f'{variant} x{scale}':12s} {count_params(cfg):>10,} "
              f"{count_multiadds(cfg) / 1e9:>11.2f}G "
              f"{slka_receptive_field(cfg):>7d}px")

print()
print("width sweep for the full variant at x4 (budget: ~1045K params):")
print(f"{'width':>6s} {'ffn ratio':>10s} {'params':>10s}")
for width, ratio in itertools.product((48, 64, 96), (2.0, 8 / 3, 4.0)):
    cfg = ModelConfig(variant="sweep", scale=4, n_dabs=12, width=width,
                      k_dw=5, k_ddw=7, k_sgfn=5, sgfn_ratio=ratio)
    try:
        params = count_params(cfg)
    except ConfigError:
        continue  # odd hidden width
    marker = "  <- shipped" if (width, ratio) == (96, 2.0) else ""
    print(f"{width:>6d} {ratio:>10.3f} {params:>10,}{marker}")

print()
print("width sweep for the light variant at x4 (budget: ~209K params):")
for width, ratio in itertools.product((48, 64, 96), (2.0, 8 / 3, 4.0)):
    cfg = ModelConfig(variant="sweep", scale=4, n_dabs=8, width=width,
                      k_dw=3, k_ddw=5, k_sgfn=3, sgfn_ratio=ratio)
    try:
        params = count_params(cfg)
    except ConfigError:
        continue
    marker = "  <- shipped" if (width, ratio) == (48, 8 / 3) else ""
    print(f"{width:>6d} {ratio:>10.3f} {params:>10,}{marker}")
