//! Random parameter sets and tracking instances for the check suites.

use std::f64::consts::PI;

use invfeas_core::optimizer::TrackingObjective;
use invfeas_core::{DqVector, InverterParams, OutputPair};
use rand::Rng;

/// R ∈ [0.01, 10] Ω, L ∈ [0.1, 50] mH, 60 Hz, e_mag ∈ [50, 400] V,
/// i_max ∈ [1, 50] A, all uniform.
pub fn random_params(rng: &mut impl Rng) -> InverterParams {
    InverterParams::new(
        rng.gen_range(0.01..=10.0),
        rng.gen_range(0.1..=50.0) * 1e-3,
        2.0 * PI * 60.0,
        rng.gen_range(50.0..=400.0),
        rng.gen_range(1.0..=50.0),
    )
    .expect("sampled ranges are valid")
}

/// Uniform point of the disk `‖I‖ ≤ radius`.
pub fn random_current(rng: &mut impl Rng, radius: f64) -> DqVector {
    DqVector::from_polar(radius * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Instance {
    pub params: InverterParams,
    pub pair: OutputPair,
    pub objective: TrackingObjective,
    /// Whether the target was drawn from a current inside the limit. Targets
    /// drawn from outside may still be reachable.
    pub feasible: bool,
}

/// Target = outputs of a current drawn uniformly from the disk of radius
/// `1.5·i_max` (so about two thirds of the targets are reachable), output
/// weight `γ = 10^u`, `u ∈ [-2, 2]`. The reference inverter is used for
/// the first instance, random parameter sets after that.
pub fn random_instances(rng: &mut impl Rng, count: usize) -> Vec<Instance> {
    (0..count)
        .map(|k| {
            let params = if k == 0 { InverterParams::reference() } else { random_params(rng) };
            let pair = OutputPair::ALL[rng.gen_range(0..3)];
            let anchor = random_current(rng, params.i_max * 1.5f64.sqrt());
            let s = pair.evaluate(&params, anchor);
            let gamma = 10f64.powf(rng.gen_range(-2.0..=2.0));
            Instance {
                params,
                pair,
                objective: TrackingObjective::new(s[0], s[1], gamma).expect("finite target"),
                feasible: anchor.norm() <= params.i_max,
            }
        })
        .collect()
}
