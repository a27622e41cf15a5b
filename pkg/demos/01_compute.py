"""How big is a model, and what does a token of training cost?

Depth and width grow together, so the layer count pins down everything else.
"""

from dit_scaling import ComputeConfig, ModelShape, compute_per_token, itemized_flops, layers_for_params

cfg = ComputeConfig(n_ctx=1280, n_text=0)

print(f"{'layers':>6} {'width':>6} {'params':>15} {'FLOPs/token':>16}")
for n_layer in (2, 4, 8, 14, 16, 24):
    shape = ModelShape(n_layer)
    print(f"{n_layer:6d} {shape.d:6d} {shape.n_params:15,d} {compute_per_token(shape, cfg):16.4e}")

# The closed form agrees with the per-operation breakdown once text conditioning is dropped.
shape = ModelShape(14)
print("\nforward FLOPs per token, 14 layers:")
for name, params, flops in itemized_flops(shape, cfg):
    print(f"  {name:26s} {params:13,d} {flops:14.4e}")

# A target size snaps onto the layer grid.
for target in (1e8, 6.4e8, 1e9):
    print(f"{target:.2e} params -> nearest {layers_for_params(target)} layers, "
          f"at least {layers_for_params(target, rounding='up')} layers")
