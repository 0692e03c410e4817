use invfeas_core::model::{output_triple, system_matrix};
use invfeas_core::optimizer::SdpOptions;
use invfeas_core::simulator::{
    resolve_setpoints, run_scenario, simulate, steady_state_metrics, Controller, Gains,
    ResolvedSetpoints, Scenario, SimConfig, Trajectory,
};
use invfeas_core::{DqVector, InverterParams, OutputPair};

fn reference() -> InverterParams {
    InverterParams::reference()
}

fn optimized(name: &str) -> Scenario {
    Scenario { optimize_setpoints: true, ..Scenario::preset(name).unwrap() }
}

#[test]
fn oc_from_rest_reaches_target_current() {
    let p = reference();
    let target = DqVector::new(4.0, -1.5);
    let sp = ResolvedSetpoints {
        outputs: [OutputPair::PQ.evaluate(&p, target); 2],
        currents: Some([target; 2]),
    };
    let t = simulate(&p, Controller::Oc, OutputPair::PQ, sp, &SimConfig::reference(), &Gains::reference())
        .unwrap();
    let last = t.last().unwrap();
    assert!((last.i - target).norm() < 1e-3 * target.norm());
}

#[test]
fn oc_closed_loop_modes_are_stable() {
    // Block-triangular closed loop: current modes are the eigenvalues of A,
    // voltage modes are -k_v.
    let p = reference();
    let a = system_matrix(&p);
    let re = 0.5 * a.trace();
    let im_sq = a.det() - re * re;
    assert_eq!(re, -p.r / p.l);
    assert!((im_sq.sqrt() - p.omega).abs() < 1e-9 * p.omega);
    assert!(Gains::reference().oc.k_v > 0.0);
}

#[test]
fn droop_pq_settles_to_pre_disturbance_power() {
    let p = reference();
    let t = run_scenario(&p, &Scenario::preset("droop-pq").unwrap(), &SimConfig::reference(), &Gains::reference())
        .unwrap();
    let at_t0 = t.records[SimConfig::reference().switch_index()];
    assert!((at_t0.p - 800.0).abs() < 0.01 * 800.0, "{}", at_t0.p);
}

#[test]
fn droop_pv2_infeasible_setpoint_violates_limit() {
    let p = reference();
    let t = run_scenario(&p, &Scenario::preset("droop-pv2").unwrap(), &SimConfig::reference(), &Gains::reference())
        .unwrap();
    let m = steady_state_metrics(&t, 0.1).unwrap();
    assert!(m.i_mag.mean > p.i_max);
    assert!((m.p.mean - 850.0).abs() < 1.0);
    assert!((m.v_sq.mean - 14400.0).abs() < 1.0);
}

#[test]
fn optimized_setpoints_are_safe_in_steady_state() {
    let p = reference();
    // Long horizon so the slowest channel (1/m_v2 = 0.2 s) has settled.
    let cfg = SimConfig::new(1e-4, 4.0, 0.2).unwrap();
    for name in ["droop-pv2", "oc-pq", "oc-pv2", "oc-qv2"] {
        let t = run_scenario(&p, &optimized(name), &cfg, &Gains::reference()).unwrap();
        let m = steady_state_metrics(&t, 0.1).unwrap();
        assert!(m.i_mag.mean <= p.i_max * (1.0 + 1e-3), "{name}: {}", m.i_mag.mean);
        assert!(m.i_mag.max <= p.i_max * (1.0 + 1e-3), "{name}: {}", m.i_mag.max);
    }
}

#[test]
fn oc_feasible_pq_stays_inside_limit_and_tracks() {
    let p = reference();
    let t = run_scenario(&p, &Scenario::preset("oc-pq").unwrap(), &SimConfig::reference(), &Gains::reference())
        .unwrap();
    assert!(t.records.iter().all(|r| r.i_mag() <= p.i_max));
    let m = steady_state_metrics(&t, 0.1).unwrap();
    assert!((m.p.mean - 1100.0).abs() < 0.005 * 1100.0);
}

#[test]
fn oc_infeasible_pv2_settles_on_the_limit() {
    let p = reference();
    let t = run_scenario(&p, &Scenario::preset("oc-pv2").unwrap(), &SimConfig::reference(), &Gains::reference())
        .unwrap();
    let m = steady_state_metrics(&t, 0.1).unwrap();
    assert!((m.i_mag.mean - p.i_max).abs() < 0.005 * p.i_max);
    assert!(t.records.iter().all(|r| r.i_mag() <= p.i_max * (1.0 + 1e-6)));
}

#[test]
fn runs_are_bit_identical() {
    let p = reference();
    let cfg = SimConfig::new(1e-4, 0.3, 0.1).unwrap();
    for name in Scenario::PRESETS {
        let s = optimized(name);
        let a = run_scenario(&p, &s, &cfg, &Gains::reference()).unwrap();
        let b = run_scenario(&p, &s, &cfg, &Gains::reference()).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.i.d.to_bits(), y.i.d.to_bits());
            assert_eq!(x.v_sq.to_bits(), y.v_sq.to_bits());
        }
    }
}

fn max_tail_rate(t: &Trajectory) -> f64 {
    let n = t.records.len();
    let dt = t.config.dt;
    let mut worst = 0.0f64;
    for w in t.records[n - n / 10..].windows(2) {
        let di = (w[1].i - w[0].i).norm() / dt;
        let dv = (w[1].v - w[0].v).norm() / dt;
        worst = worst.max(di).max(dv);
    }
    worst
}

#[test]
fn settled_runs_agree_with_the_steady_state_maps() {
    let p = reference();
    let cfg = SimConfig::new(1e-4, 4.0, 0.2).unwrap();
    let mut checked = 0;
    for name in Scenario::PRESETS {
        for opt in [false, true] {
            let s = Scenario { optimize_setpoints: opt, ..Scenario::preset(name).unwrap() };
            let t = run_scenario(&p, &s, &cfg, &Gains::reference()).unwrap();
            if max_tail_rate(&t) >= 1e-6 {
                continue;
            }
            checked += 1;
            let last = t.last().unwrap();
            let ss = output_triple(&p, last.i);
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
            assert!(rel(last.p, ss.p) < 1e-6, "{name} P {} {}", last.p, ss.p);
            assert!(rel(last.q, ss.q) < 1e-6, "{name} Q {} {}", last.q, ss.q);
            assert!(rel(last.v_sq, ss.v_sq) < 1e-6, "{name} V2 {} {}", last.v_sq, ss.v_sq);
        }
    }
    assert!(checked >= 5, "only {checked} runs settled");
}

#[test]
fn oc_setpoints_come_from_the_optimizer() {
    let p = reference();
    let s = Scenario::preset("oc-pv2").unwrap();
    let r = resolve_setpoints(&p, &s, &SdpOptions::default()).unwrap();
    let currents = r.currents.unwrap();
    assert!((currents[1].norm() - p.i_max).abs() < 1e-6 * p.i_max);
    assert_eq!(r.outputs[1], OutputPair::PV2.evaluate(&p, currents[1]));
    let droop = Scenario::preset("droop-pv2").unwrap();
    assert_eq!(resolve_setpoints(&p, &droop, &SdpOptions::default()).unwrap().outputs[1], [850.0, 14400.0]);
}
