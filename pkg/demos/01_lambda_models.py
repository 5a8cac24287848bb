"""
Quantizer-to-lambda relationships and the per-clip scale factor
===============================================================

Encoders derive their RD trade-off weight lambda from the quantizer
through a fixed fit. This script walks both shipped fits and shows the
one knob the whole project tunes: lambda = k * lambda0.
"""

import rdtune as rt

################################################################################
# HEVC: a pure exponential in qp, doubling every 3 steps.

print("HEVC lambda0 over its qp range [0, 51]:")
for qp in (0, 12, 22, 27, 32, 42, 51):
    print(f"  qp={qp:2d}  lambda0={rt.lambda_default(rt.CodecId.HEVC, qp):10.3f}")

print("\nDoubling check: lambda(qp+3) / lambda(qp) for a few qp:")
print("  ", [rt.lambda_default(rt.CodecId.HEVC, qp + 3) / rt.lambda_default(rt.CodecId.HEVC, qp)
              for qp in (10, 20, 30)])

################################################################################
# AV1: the DC quantizer step enters squared, plus a frame-type constant.
# The packaged q_dc table is a documented synthetic fixture; swap in the
# table matching your encoder build with rt.load_qdc_table(path).

params = rt.Av1LambdaParams(qdc_table=rt.default_qdc_table())
print("\nAV1 lambda0 (inter vs key frame constant):")
for qp in (0, 16, 32, 48, 63):
    inter = rt.lambda_default(rt.CodecId.AV1, qp, params, frame_type="inter")
    key = rt.lambda_default(rt.CodecId.AV1, qp, params, frame_type="key")
    print(f"  qp={qp:2d}  inter={inter:12.2f}  key={key:12.2f}")

################################################################################
# The tuning knob: lambda = k * lambda0. k=1 is the codec default; the
# optimizer in demo 04 searches k per clip. Real patched encoders receive
# k as a flag and apply their own internal lambda0.

lambda0 = rt.lambda_default(rt.CodecId.HEVC, 27)
print("\nScaling lambda0 =", lambda0)
for k in (0.5, 1.0, 2.0, 3.79):
    print(f"  k={k:5.2f}  lambda={rt.scale_lambda(lambda0, k):8.4f}")

################################################################################
# Out-of-range quantizers are rejected, not clamped.

try:
    rt.lambda_default(rt.CodecId.HEVC, 52)
except rt.QpRangeError as exc:
    print("\nRange check:", exc)
