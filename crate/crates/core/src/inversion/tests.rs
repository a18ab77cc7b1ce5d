use std::cell::Cell;

use super::*;
use crate::diffnet::ArchConfig;

/// Returns a fixed cost per evaluation, in order; gradient is all ones.
struct Scripted {
    costs: Vec<f64>,
    calls: Cell<usize>,
    len: usize,
}

impl Scripted {
    fn new(costs: &[f64]) -> Self {
        Self {
            costs: costs.to_vec(),
            calls: Cell::new(0),
            len: 3,
        }
    }
}

impl Objective for Scripted {
    type Tape = ();
    fn input_len(&self) -> usize {
        self.len
    }
    fn evaluate(&self, _x: &[f64]) -> Result<(f64, ())> {
        let i = self.calls.get();
        self.calls.set(i + 1);
        Ok((self.costs[i.min(self.costs.len() - 1)], ()))
    }
    fn gradient(&self, _x: &[f64], _t: &()) -> Vec<f64> {
        vec![1.0; self.len]
    }
}

/// c(x) = 1 - exp(-|x - 1|^2), minimised at x = 1.
struct Bowl;

impl Objective for Bowl {
    type Tape = f64;
    fn input_len(&self) -> usize {
        4
    }
    fn evaluate(&self, x: &[f64]) -> Result<(f64, f64)> {
        let r2: f64 = x.iter().map(|v| (v - 1.0).powi(2)).sum();
        Ok((1.0 - (-r2).exp(), (-r2).exp()))
    }
    fn gradient(&self, x: &[f64], e: &f64) -> Vec<f64> {
        x.iter().map(|v| 2.0 * (v - 1.0) * e).collect()
    }
}

fn cfg(alpha: usize, beta: usize, gamma: f64, lambda: f64) -> MIConfig {
    MIConfig {
        alpha,
        beta,
        gamma,
        lambda,
    }
}

#[test]
fn patience_needs_a_full_window() {
    assert!(!patience_exhausted(&[0.5], 0.9, 1));
    assert!(patience_exhausted(&[0.5, 0.5], 0.5, 1));
    assert!(!patience_exhausted(&[0.9, 0.8, 0.7], 0.75, 2));
    assert!(patience_exhausted(&[0.9, 0.8, 0.7], 0.8, 2));
}

#[test]
fn zero_step_stops_on_patience_after_beta_plus_one() {
    let r = standard_mi(&Bowl, &[0.0; 4], &cfg(1000, 10, 0.001, 0.0)).unwrap();
    assert_eq!(r.iterations_run, 11);
    assert_eq!(r.stop_reason, StopReason::Patience);
    assert_eq!(r.best_input, vec![0.0; 4]);
    assert_eq!(r.costs.len(), 12);
}

#[test]
fn gamma_one_stops_at_first_step() {
    let r = standard_mi(&Bowl, &[3.0; 4], &cfg(1000, 10, 1.0, 0.0)).unwrap();
    assert_eq!(r.iterations_run, 1);
    assert_eq!(r.stop_reason, StopReason::Threshold);
    assert_eq!(r.best_input, vec![3.0; 4]);
}

#[test]
fn threshold_reached_on_bowl() {
    let r = standard_mi(&Bowl, &[0.8; 4], &cfg(1000, 10, 0.001, 0.2)).unwrap();
    assert_eq!(r.stop_reason, StopReason::Threshold);
    assert!(r.best_cost <= 0.001);
    assert!(r.best_input.iter().all(|v| (v - 1.0).abs() < 0.05));
}

#[test]
fn budget_exhausted() {
    let s = Scripted::new(&[0.9, 0.8, 0.7, 0.6, 0.5]);
    let r = standard_mi(&s, &[0.0; 3], &cfg(3, 10, 0.0, 0.1)).unwrap();
    assert_eq!((r.iterations_run, r.stop_reason), (3, StopReason::MaxIters));
    assert_eq!(r.best_cost, 0.6);
    assert!(r.best_input.iter().all(|v| (v + 0.3).abs() < 1e-12));
}

#[test]
fn patience_takes_precedence_over_threshold() {
    // c_3 = 0.7 >= max(c_1, c_2) fires patience (beta = 2) before the threshold is consulted.
    let s = Scripted::new(&[0.9, 0.7, 0.7, 0.7]);
    let r = standard_mi(&s, &[0.0; 3], &cfg(10, 2, 0.0, 0.1)).unwrap();
    assert_eq!((r.iterations_run, r.stop_reason), (3, StopReason::Patience));
    let s = Scripted::new(&[0.9, 0.7, 0.7, 0.7]);
    let r = standard_mi(&s, &[0.0; 3], &cfg(10, 2, 0.7, 0.1)).unwrap();
    assert_eq!((r.iterations_run, r.stop_reason), (1, StopReason::Threshold));
    let s = Scripted::new(&[0.9, 0.8, 0.7, 0.7]);
    let r = standard_mi(&s, &[0.0; 3], &cfg(10, 2, 0.7, 0.1)).unwrap();
    assert_eq!((r.iterations_run, r.stop_reason), (2, StopReason::Threshold));
}

#[test]
fn earliest_iterate_wins_ties() {
    let s = Scripted::new(&[0.9, 0.4, 0.4, 0.6]);
    let r = standard_mi(&s, &[0.0; 3], &cfg(3, 10, 0.0, 1.0)).unwrap();
    assert_eq!(r.best_cost, 0.4);
    assert_eq!(r.best_input, vec![-1.0; 3]);
}

#[test]
fn non_finite_cost_reports_last_good_iterate() {
    let s = Scripted::new(&[0.9, 0.8, f64::NAN]);
    match standard_mi(&s, &[0.0; 3], &cfg(10, 10, 0.0, 0.5)) {
        Err(crate::Error::Numerical {
            iteration, last_finite, ..
        }) => {
            assert_eq!(iteration, 2);
            assert_eq!(last_finite, vec![-0.5; 3]);
        }
        other => panic!("expected numerical error, got {other:?}"),
    }
}

#[test]
fn config_and_shape_errors() {
    assert!(cfg(0, 10, 0.001, 0.01).validate().unwrap_err().is_config());
    assert!(cfg(10, 0, 0.001, 0.01).validate().is_err());
    assert!(cfg(10, 1, 1.5, 0.01).validate().is_err());
    assert!(cfg(10, 1, 0.1, -1.0).validate().is_err());
    assert!(standard_mi(&Bowl, &[0.0; 3], &MIConfig::default()).is_err());
    assert!(standard_mi(&Bowl, &[0.0, f64::INFINITY, 0.0, 0.0], &MIConfig::default()).is_err());
}

#[test]
fn sliding_offsets_and_trim() {
    let c = SlidingConfig {
        length: 20,
        stride: 3,
        window: 4,
        inner: cfg(5, 2, 0.0, 0.0),
    };
    assert_eq!(c.offsets(), vec![0, 3, 6, 9, 12, 15]);
    let init: Vec<f64> = (0..20).map(f64::from).collect();
    let r = sliding_mi_from(&Bowl, init.clone(), &c).unwrap();
    assert_eq!(r.windows.len(), 6);
    assert_eq!(r.samples, init[2..18].to_vec());
}

#[test]
fn sliding_writes_back_each_window() {
    let c = SlidingConfig {
        length: 12,
        stride: 2,
        window: 4,
        inner: cfg(200, 5, 1e-6, 0.3),
    };
    let r = sliding_mi_from(&Bowl, vec![0.5; 12], &c).unwrap();
    assert!(r.working.iter().all(|v| (v - 1.0).abs() < 0.01), "{:?}", r.working);
    // Later windows start near the optimum already.
    assert!(r.windows[4].iterations_run < r.windows[0].iterations_run);
}

#[test]
fn sliding_rejects_bad_geometry() {
    let mut c = SlidingConfig {
        length: 10,
        stride: 5,
        window: 4,
        inner: MIConfig::default(),
    };
    assert!(sliding_mi_from(&Bowl, vec![0.0; 9], &c).is_err());
    c.stride = 0;
    assert!(c.validate().is_err());
    c.stride = 5;
    assert!(c.validate().is_err());
    c.stride = 2;
    c.window = 5;
    assert!(c.validate().is_err());
}

fn tiny_model() -> SpeakerModel {
    let arch = ArchConfig {
        input_window_len: 400,
        n_filters: 4,
        sinc_kernel_len: 33,
        conv_channels: 4,
        conv_kernel: 5,
        hidden_dim: 16,
        dvector_dim: 8,
        num_classes: 3,
        ..ArchConfig::default()
    };
    SpeakerModel::new(arch, 5).unwrap()
}

#[test]
fn cost_matches_probabilities() {
    let m = tiny_model();
    let x: Vec<f64> = (0..400).map(|i| (i as f64 * 0.05).sin() * 0.3).collect();
    let p = m.probabilities(&x).unwrap();
    let c = cost(&m, AttackSurface::Full, &x, 2).unwrap();
    assert!((c - (1.0 - p[2])).abs() < 1e-15);
    assert!(cost(&m, AttackSurface::Full, &x, 3).is_err());
    assert!(cost(&m, AttackSurface::Head, &x, 0).is_err());
}

#[test]
fn batch_inversion_is_deterministic_and_per_class() {
    let m = tiny_model();
    let attack = AttackConfig {
        kind: AttackKind::Sliding,
        mi: cfg(5, 3, 0.001, 0.05),
        output_len: 400,
        stride: 200,
    };
    let init = InitSpec::parse("gaussian", 9).unwrap();
    let a = invert_all_speakers(&m, &attack, &init).unwrap();
    let b = invert_all_speakers(&m, &attack, &init).unwrap();
    assert!(a.failures.is_empty());
    assert_eq!(a.outcomes.len(), 3);
    for (c, o) in &a.outcomes {
        assert_eq!(o.samples.len(), 400);
        assert_eq!(o.windows.len(), 3);
        assert_eq!(o.samples, b.outcomes[c].samples);
    }
    assert_ne!(a.outcomes[&0].init_seed, a.outcomes[&1].init_seed);
}

#[test]
fn standard_attack_needs_whole_windows() {
    let m = tiny_model();
    let mut attack = AttackConfig {
        kind: AttackKind::Standard,
        mi: cfg(3, 3, 0.001, 0.01),
        output_len: 500,
        stride: 200,
    };
    assert!(attack.working_len(&m).unwrap_err().is_config());
    attack.output_len = 800;
    let o = invert_class(&m, &attack, &InitSpec::parse("laplace", 1).unwrap(), 1).unwrap();
    assert_eq!(o.samples.len(), 800);
    assert_eq!(o.windows.iter().map(|w| w.offset).collect::<Vec<_>>(), vec![0, 400]);
}

#[test]
fn learning_rate_table() {
    let k = |s: &str| InitSpec::parse(s, 0).unwrap().kind;
    assert_eq!(default_learning_rate(&k("zeros"), AttackKind::Standard), 1e-8);
    assert_eq!(default_learning_rate(&k("zeros"), AttackKind::Sliding), 0.5);
    assert_eq!(default_learning_rate(&k("ones"), AttackKind::Sliding), 0.2);
    assert_eq!(default_learning_rate(&k("brown"), AttackKind::Sliding), 0.05);
    assert_eq!(default_learning_rate(&k("external-mean50:/x"), AttackKind::Standard), 0.001);
    assert_eq!(default_learning_rate(&k("vonmises"), AttackKind::Sliding), 0.01);
}
