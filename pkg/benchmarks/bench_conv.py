"""Compare the compiled convolution core against the numpy fallback.

Usage: python benchmarks/bench_conv.py [--batch 16] [--repeat 3]

Shapes cover every layer of the default architecture and of the reduced
desk-scale variant, at the 122x122 training window size.
"""

import argparse
import time

import numpy as np

from wetlandseg.model import build_netspec, default_netspec, halo_of, scaled_hidden_channels
from wetlandseg.nn import ConvKernel, available_backends, conv2d_backward, conv2d_valid


def layer_shapes(spec, batch, window):
    size = window
    for i, layer in enumerate(spec.layers):
        yield (f"L{i + 1} {layer.in_channels:3d}->{layer.out_channels:3d} "
               f"k{layer.kernel_size}"), (batch, layer.in_channels, size, size), (
            layer.out_channels, layer.in_channels, layer.kernel_size, layer.kernel_size)
        size -= layer.kernel_size - 1


def time_call(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(spec_name, spec, batch, repeat):
    rng = np.random.default_rng(0)
    window = 2 * halo_of(spec) + 80
    print(f"\n{spec_name}: batch {batch}, window {window}x{window}")
    header = f"{'layer':24s} {'flops':>10s}"
    for b in available_backends():
        header += f" {b + ' fwd':>14s} {b + ' bwd':>14s}"
    print(header)
    totals = {b: [0.0, 0.0] for b in available_backends()}
    for name, xshape, wshape in layer_shapes(spec, batch, window):
        x = rng.normal(size=xshape).astype(np.float32)
        kernel = ConvKernel(rng.normal(size=wshape).astype(np.float32),
                            np.zeros(wshape[0], np.float32))
        h_out = xshape[2] - wshape[2] + 1
        flops = 2 * xshape[0] * wshape[0] * wshape[1] * wshape[2] * wshape[3] * h_out * h_out
        row = f"{name:24s} {flops / 1e9:9.2f}G"
        grad_out = np.ones((xshape[0], wshape[0], h_out, h_out), np.float32)
        for b in available_backends():
            fwd = time_call(lambda: conv2d_valid(x, kernel, backend=b), repeat)
            bwd = time_call(lambda: conv2d_backward(x, kernel, grad_out, backend=b), repeat)
            totals[b][0] += fwd
            totals[b][1] += bwd
            row += f" {1e3 * fwd:8.1f}ms ({flops / fwd / 1e9:3.0f}) {1e3 * bwd:8.1f}ms"
        print(row)
    for b, (fwd, bwd) in totals.items():
        print(f"  total {b:9s} forward {1e3 * fwd:8.1f} ms   backward {1e3 * bwd:8.1f} ms")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=16)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    print("available backends:", ", ".join(available_backends()))
    reduced = build_netspec(hidden_channels=scaled_hidden_channels(8))
    run("reduced net (channel_scale 8)", reduced, args.batch, args.repeat)
    run("default net", default_netspec(), max(args.batch // 4, 1), args.repeat)


if __name__ == "__main__":
    main()
