"""Index and explicit bound of a spiky sphere against the round one, as the budget eps grows."""

import argparse
import math

from extrinsic_spectra.capacitor import corollary_bound
from extrinsic_spectra.geom import make_shape, spike_region
from extrinsic_spectra.grassmann import IndexSampler, crofton_constant


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shape", default="spiky_sphere(4,3,0.4,0.08)")
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--k", type=int, default=10)
    args = ap.parse_args()
    spiky, smooth = make_shape(args.shape), make_shape("sphere(4)")
    IG = crofton_constant(2, 1, 100_000, seed=args.seed).value
    s = IndexSampler(spiky, args.samples, seed=args.seed)
    base_i = IndexSampler(smooth, args.samples, seed=args.seed).mean_index().value
    base = corollary_bound(smooth, args.k, L_source="crofton-mean-index", index_value=base_i, crofton=IG)
    print(f"spike area fraction {spike_region(spiky).volume_fraction:.4f}, sup index {s.sup_index().value:.0f}")
    print("eps    eps_index  removed  bound/smooth")
    for eps in (0.0, 0.01, 0.02, 0.03, 0.05, 0.1):
        e = s.eps_index(eps)
        b = corollary_bound(spiky, args.k, e.chosen_region, math.inf, "crofton-mean-index",
                            index_value=e.value, crofton=IG)
        print(f"{eps:4.2f}  {e.value:9.3f}  {e.chosen_region.volume_fraction:7.4f}  "
              f"{b.rhs_value / base.rhs_value:12.3f}")


if __name__ == "__main__":
    main()
