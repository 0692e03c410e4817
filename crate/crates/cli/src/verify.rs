//! Cross-module check suites behind `invfeas verify`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use invfeas_core::optimizer::{
    brute_force, solve_frank_wolfe, solve_sdp, FrankWolfeOptions, SdpOptions,
};
use invfeas_core::region::{Direction, FeasibleRegion};
use invfeas_core::simulator::{run_scenario, Gains, Scenario, SimConfig};
use invfeas_core::{InverterParams, OutputPair};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::instances::{random_current, random_instances, random_params};
use crate::oracle::{grid_support, oc_deviation, refined_grid_support};

pub const GRID_N: usize = 2001;
pub const BRUTE_FORCE_N: usize = 1001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Inflate every closed-form support value by 1%.
    Support,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub seed: u64,
    pub fault: Option<Fault>,
    pub params: InverterParams,
    pub gains: Gains,
}

type Suite = fn(&VerifyOptions, &mut ChaCha8Rng) -> SuiteResult;

const SUITES: [(&str, Suite); 5] = [
    ("support", support_suite),
    ("witness", witness_suite),
    ("solvers", solver_suite),
    ("oc-expm", oc_expm_suite),
    ("rank1", rank1_suite),
];

/// Runs every suite (in parallel) and returns the results in a fixed order.
pub fn run(opts: &VerifyOptions) -> Vec<SuiteResult> {
    SUITES
        .par_iter()
        .enumerate()
        .map(|(k, (_, suite))| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64);
            suite(opts, &mut rng)
        })
        .collect()
}

pub fn report(seed: u64, results: &[SuiteResult]) -> String {
    let mut out = String::new();
    writeln!(out, "invfeas verify seed={seed}").unwrap();
    for r in results {
        writeln!(out, "{:<8} {}  {}", r.name, verdict(r.pass), r.detail).unwrap();
    }
    writeln!(out, "{:<8} {}", "overall", verdict(results.iter().all(|r| r.pass))).unwrap();
    out
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn param_sets(opts: &VerifyOptions, rng: &mut ChaCha8Rng, random: usize) -> Vec<InverterParams> {
    let mut v = vec![opts.params];
    v.extend((0..random).map(|_| random_params(rng)));
    v
}

fn support_suite(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> SuiteResult {
    const DIRECTIONS: usize = 72;
    let mut worst = (0.0f64, 0.0f64);
    let mut worst_refined = 0.0f64;
    let mut checks = 0;
    let mut dominated = true;
    for p in param_sets(opts, rng, 3) {
        for pair in OutputPair::ALL {
            let region = FeasibleRegion::new(&p, pair);
            for k in 0..DIRECTIONS {
                let theta = 2.0 * PI * (k as f64 + 0.5) / DIRECTIONS as f64;
                let dir = Direction::from_angle(theta);
                let opposite = region.support(Direction::from_angle(theta + PI)).value;
                let mut value = region.support(dir).value;
                if opts.fault == Some(Fault::Support) {
                    value += 1e-2 * value.abs().max(1.0);
                }
                let c = support_check(&p, pair, dir.vector(), value, opposite);
                dominated &= c.dominated;
                if c.grid_err > worst.0 {
                    worst = (c.grid_err, theta.to_degrees());
                }
                worst_refined = worst_refined.max(c.refined_err);
                checks += 1;
            }
        }
    }
    SuiteResult {
        name: "support",
        pass: dominated && worst.0 <= 1e-4 && worst_refined <= 1e-4,
        detail: format!(
            "checks={checks} grid_rel_err={:.3e} at {:.2}deg refined_rel_err={worst_refined:.3e} grid_below={dominated}",
            worst.0, worst.1
        ),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SupportCheck {
    /// Plain grid against `value`, relative to `max(|h(θ)|, |h(θ+π)|, 1)`:
    /// the largest magnitude `w·s` takes on the region.
    pub grid_err: f64,
    /// Zoom-refined grid against `value`, relative to `max(|h(θ)|, 1)`.
    pub refined_err: f64,
    /// No grid point exceeds `value` beyond rounding.
    pub dominated: bool,
}

/// Compares a support value (and the value in the opposite direction) with
/// the brute-force oracles.
pub fn support_check(p: &InverterParams, pair: OutputPair, w: [f64; 2], value: f64, opposite: f64) -> SupportCheck {
    let grid = grid_support(p, pair, w, GRID_N).value;
    let refined = refined_grid_support(p, pair, w, GRID_N, 12).value;
    let magnitude = value.abs().max(opposite.abs()).max(1.0);
    let own = value.abs().max(1.0);
    SupportCheck {
        grid_err: (value - grid).abs() / magnitude,
        refined_err: (value - refined).abs() / own,
        dominated: grid.max(refined) <= value + 1e-9 * magnitude,
    }
}

fn witness_suite(opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> SuiteResult {
    let mut worst_err = 0.0f64;
    let mut worst_norm = 0.0f64;
    let mut failures = 0;
    let mut checks = 0;
    for p in param_sets(opts, rng, 3) {
        for pair in OutputPair::ALL {
            let region = FeasibleRegion::new(&p, pair);
            let Ok(lf) = region.lemma_form() else {
                failures += 1;
                continue;
            };
            for _ in 0..300 {
                let i1 = random_current(rng, p.i_max);
                let i2 = random_current(rng, p.i_max);
                let (s1, s2) = (region.output(i1), region.output(i2));
                for l in 1..=9 {
                    let lambda = l as f64 / 10.0;
                    checks += 1;
                    let Ok(y) = region.midpoint_witness_with(&lf, i1, i2, lambda) else {
                        failures += 1;
                        continue;
                    };
                    let sy = region.output(y);
                    for k in 0..2 {
                        let want = lambda * s1[k] + (1.0 - lambda) * s2[k];
                        let scale = s1[k].abs().max(s2[k].abs()).max(1.0);
                        worst_err = worst_err.max((sy[k] - want).abs() / scale);
                    }
                    worst_norm = worst_norm.max(y.norm() / p.i_max);
                }
            }
        }
    }
    SuiteResult {
        name: "witness",
        pass: failures == 0 && worst_err <= 1e-8 && worst_norm <= 1.0 + 1e-9,
        detail: format!(
            "checks={checks} failures={failures} max_rel_err={worst_err:.3e} max_norm/i_max={worst_norm:.12}"
        ),
    }
}

pub fn objectives_agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= (5e-3 * a.abs().max(b.abs())).max(1e-6)
}

fn solver_suite(_opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> SuiteResult {
    let instances = random_instances(rng, 24);
    let mut disagreements = 0;
    let mut errors = 0;
    for inst in &instances {
        let sdp = solve_sdp(&inst.params, inst.pair, &inst.objective, &SdpOptions::default());
        let fw = solve_frank_wolfe(&inst.params, inst.pair, &inst.objective, &FrankWolfeOptions::default());
        let grid = brute_force(&inst.params, inst.pair, &inst.objective, BRUTE_FORCE_N);
        match (sdp, fw, grid) {
            (Ok(a), Ok(b), Ok(c)) => {
                if !(objectives_agree(a.objective, b.objective) && objectives_agree(a.objective, c.objective)) {
                    disagreements += 1;
                }
            }
            _ => errors += 1,
        }
    }
    SuiteResult {
        name: "solvers",
        pass: disagreements == 0 && errors == 0,
        detail: format!("instances={} disagreements={disagreements} errors={errors}", instances.len()),
    }
}

fn oc_expm_suite(opts: &VerifyOptions, _rng: &mut ChaCha8Rng) -> SuiteResult {
    let cfg = SimConfig::reference();
    let mut worst = 0.0f64;
    let mut errors = 0;
    for name in ["oc-pq", "oc-pv2", "oc-qv2"] {
        let scenario = Scenario::preset(name).expect("preset exists");
        let dev = run_scenario(&opts.params, &scenario, &cfg, &opts.gains)
            .ok()
            .and_then(|t| oc_deviation(&opts.params, opts.gains.oc.k_v, &t));
        match dev {
            Some((rel, _)) => worst = worst.max(rel),
            None => errors += 1,
        }
    }
    SuiteResult {
        name: "oc-expm",
        pass: errors == 0 && worst <= 1e-6,
        detail: format!("scenarios=3 errors={errors} max_rel_err={worst:.3e}"),
    }
}

/// Every SDP solution is rank 1 once the fallback has run. The share of
/// unregularized solutions that already are is reported, not enforced.
fn rank1_suite(_opts: &VerifyOptions, rng: &mut ChaCha8Rng) -> SuiteResult {
    let instances = random_instances(rng, 24);
    let mut raw = 0;
    let mut fin = 0;
    let mut errors = 0;
    for inst in &instances {
        match solve_sdp(&inst.params, inst.pair, &inst.objective, &SdpOptions::default()) {
            Ok(r) => {
                raw += usize::from(r.raw_rank1_residual <= 1e-6);
                fin += usize::from(r.rank1_residual <= 1e-6);
            }
            Err(_) => errors += 1,
        }
    }
    let n = instances.len();
    SuiteResult {
        name: "rank1",
        pass: errors == 0 && fin == n,
        detail: format!("instances={n} rank1_raw={raw} rank1_final={fin} errors={errors}"),
    }
}
