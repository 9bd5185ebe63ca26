//! Shared inputs for the benchmarks.

use dst_lasserre::fixtures;
use dst_lasserre::moments::{from_distribution, MomentVector};
use dst_lasserre::{LayeredInstance, Scalar};

pub fn figure_one() -> LayeredInstance {
    LayeredInstance::detect(fixtures::figure_one()).expect("figure one is layered")
}

/// Edge moments of the two-route graph under an even split, enough for
/// sampling at ℓ = 2.
pub fn two_routes_oracle() -> (LayeredInstance, MomentVector<f64>) {
    let li = LayeredInstance::detect(fixtures::two_routes()).expect("layered");
    let half = dst_lasserre::Rational::from_i64(1) / dst_lasserre::Rational::from_i64(2);
    let y = from_distribution(
        li.graph().num_edges(),
        1,
        &[
            (half.clone(), vec![true, false, true, false]),
            (half, vec![false, true, false, true]),
        ],
    )
    .expect("valid distribution")
    .to_f64();
    (li, y)
}
