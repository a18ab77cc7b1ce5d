mod common;

use proptest::prelude::*;
use speaker_mi::diffnet::{ops, ArchConfig, SpeakerModel};
use speaker_mi::init_zoo::{generate, InitSpec};
use speaker_mi::inversion::{
    cost, dvector_mi, invert_windows, sliding_mi, sliding_mi_from, standard_mi, AttackSurface, FullModelCost, HeadCost,
    MIConfig, Objective, SlidingConfig, StopReason,
};
use speaker_mi::Result;

use common::{expected_stop, Scripted};

fn tiny_arch() -> ArchConfig {
    ArchConfig {
        input_window_len: 400,
        n_filters: 4,
        sinc_kernel_len: 33,
        conv_channels: 4,
        conv_kernel: 5,
        hidden_dim: 16,
        dvector_dim: 8,
        num_classes: 3,
        ..ArchConfig::default()
    }
}

/// Two-class linear softmax on four inputs.
struct LinearSoftmax {
    w: [[f64; 4]; 2],
    target: usize,
}

impl Objective for LinearSoftmax {
    type Tape = Vec<f64>;
    fn input_len(&self) -> usize {
        4
    }
    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let z: Vec<f64> = self.w.iter().map(|r| ops::dot(r, x)).collect();
        let p = ops::softmax(&z);
        Ok((1.0 - p[self.target], p))
    }
    fn gradient(&self, _x: &[f64], p: &Vec<f64>) -> Vec<f64> {
        let gl = speaker_mi::diffnet::target_cost_grad_logits(p, self.target);
        (0..4).map(|i| gl[0] * self.w[0][i] + gl[1] * self.w[1][i]).collect()
    }
}

#[test]
fn descent_result_is_the_lowest_point_on_its_path() {
    let obj = LinearSoftmax {
        w: [[0.3, -0.2, 0.5, 0.1], [-0.4, 0.6, 0.2, -0.3]],
        target: 1,
    };
    let x0 = [0.5, -0.5, 0.25, 1.0];
    let cfg = MIConfig {
        alpha: 200,
        beta: 10,
        gamma: 0.0,
        lambda: 0.5,
    };
    let r = standard_mi(&obj, &x0, &cfg).unwrap();
    // With two classes every gradient is parallel to w_t - w_other, so the
    // path is a straight line; search it exhaustively.
    let u: Vec<f64> = (0..4).map(|i| obj.w[1][i] - obj.w[0][i]).collect();
    let norm = ops::dot(&u, &u).sqrt();
    let dir: Vec<f64> = u.iter().map(|v| v / norm).collect();
    let moved: Vec<f64> = r.best_input.iter().zip(&x0).map(|(a, b)| a - b).collect();
    let dist = ops::dot(&moved, &moved).sqrt();
    assert!((ops::dot(&moved, &dir) - dist).abs() < 1e-9, "path left the line");
    let mut grid_min = f64::INFINITY;
    for k in 0..=20_000 {
        let tau = dist * k as f64 / 20_000.0;
        let x: Vec<f64> = x0.iter().zip(&dir).map(|(a, d)| a + tau * d).collect();
        grid_min = grid_min.min(obj.evaluate(&x).unwrap().0);
    }
    assert!((r.best_cost - grid_min).abs() < 1e-3, "{} vs {grid_min}", r.best_cost);
}

#[test]
fn stride_equal_to_window_reduces_to_independent_runs() {
    let m = SpeakerModel::new(tiny_arch(), 2).unwrap();
    let obj = FullModelCost::new(&m, 1).unwrap();
    let inner = MIConfig {
        alpha: 15,
        beta: 4,
        gamma: 0.001,
        lambda: 0.05,
    };
    let init = generate(&InitSpec::parse("laplace", 77).unwrap(), 800).unwrap();
    let cfg = SlidingConfig {
        length: 800,
        stride: 400,
        window: 400,
        inner: inner.clone(),
    };
    let s = sliding_mi_from(&obj, init.clone(), &cfg).unwrap();
    let a = standard_mi(&obj, &init[..400], &inner).unwrap();
    let b = standard_mi(&obj, &init[400..], &inner).unwrap();
    let joined: Vec<u64> = a.best_input.iter().chain(&b.best_input).map(|v| v.to_bits()).collect();
    assert_eq!(s.working.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), joined);
    assert_eq!(s.samples, s.working[200..600].to_vec());
}

#[test]
fn sliding_output_length_is_l_minus_w() {
    let m = SpeakerModel::new(ArchConfig::default(), 2).unwrap();
    let cfg = SlidingConfig {
        length: 2 * 3200 + 4 * 500,
        stride: 500,
        window: 3200,
        inner: MIConfig {
            alpha: 1,
            ..MIConfig::default()
        },
    };
    let r = sliding_mi(&m, 3, &cfg, &InitSpec::parse("gumbel", 1).unwrap()).unwrap();
    assert_eq!(r.samples.len(), 5200);
    assert_eq!(r.windows.len(), 11);
}

#[test]
fn cost_identities() {
    let m = SpeakerModel::new(tiny_arch(), 6).unwrap();
    let x = generate(&InitSpec::parse("white", 3).unwrap(), 400).unwrap();
    let p = m.probabilities(&x).unwrap();
    for t in 0..3 {
        let c = cost(&m, AttackSurface::Full, &x, t).unwrap();
        assert!((c + p[t] - 1.0).abs() < 1e-12);
    }
    // Zero head weights and biases: uniform posteriors, cost 1 - 1/m.
    let mut flat = SpeakerModel::new(ArchConfig { num_classes: 20, ..tiny_arch() }, 6).unwrap();
    flat.params.head_w.data_mut().fill(0.0);
    flat.params.head_b.data_mut().fill(0.0);
    let c = cost(&flat, AttackSurface::Head, &[0.3; 8], 4).unwrap();
    assert!((c - 0.95).abs() < 1e-12);
}

#[test]
fn head_line_search_step_decreases_cost() {
    let m = SpeakerModel::new(tiny_arch(), 9).unwrap();
    let obj = HeadCost::new(&m, 2).unwrap();
    let d = vec![0.1, -0.2, 0.3, 0.0, 0.5, -0.1, 0.2, 0.4];
    let (c0, tape) = obj.evaluate(&d).unwrap();
    let g = obj.gradient(&d, &tape);
    let best = (1..=4000)
        .map(|k| {
            let tau = k as f64 * 1e-3;
            let x: Vec<f64> = d.iter().zip(&g).map(|(a, b)| a - tau * b).collect();
            obj.evaluate(&x).unwrap().0
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best < c0, "{best} !< {c0}");
}

#[test]
fn dvector_from_zeros_with_gamma_one_returns_x0() {
    let m = SpeakerModel::new(tiny_arch(), 9).unwrap();
    let cfg = MIConfig {
        gamma: 1.0,
        lambda: 0.1,
        ..MIConfig::default()
    };
    let r = dvector_mi(&m, &[0.0; 8], 0, &cfg).unwrap();
    assert_eq!(r.stop_reason, StopReason::Threshold);
    assert_eq!(r.iterations_run, 1);
    // Only a step that lowers the cost can replace x0.
    if r.costs[1] >= r.costs[0] {
        assert_eq!(r.best_input, vec![0.0; 8]);
    }
    assert!(dvector_mi(&m, &[0.0; 7], 0, &cfg).is_err());
}

#[test]
fn invert_windows_covers_only_full_windows() {
    let m = SpeakerModel::new(tiny_arch(), 2).unwrap();
    let obj = FullModelCost::new(&m, 0).unwrap();
    let mut x = vec![0.01; 1000];
    let tail = x[800..].to_vec();
    let cfg = MIConfig {
        alpha: 2,
        ..MIConfig::default()
    };
    let reports = invert_windows(&obj, &mut x, 400, &cfg).unwrap();
    assert_eq!(reports.iter().map(|r| r.offset).collect::<Vec<_>>(), vec![0, 400]);
    assert_eq!(x[800..], tail[..]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn result_invariants(seed in 0u64..1000, lambda in 0.0f64..0.5, alpha in 1usize..25, beta in 1usize..6, target in 0usize..3) {
        let m = SpeakerModel::new(tiny_arch(), 4).unwrap();
        let before = m.params.clone();
        let x0 = generate(&InitSpec::parse("gaussian", seed).unwrap(), 400).unwrap();
        let cfg = MIConfig { alpha, beta, gamma: 0.001, lambda };
        let r = standard_mi(&FullModelCost::new(&m, target).unwrap(), &x0, &cfg).unwrap();
        let min = r.costs.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(r.best_cost, min);
        prop_assert!(r.best_cost <= r.costs[0]);
        prop_assert!((0.0..=1.0).contains(&r.best_cost));
        prop_assert_eq!(r.costs.len(), r.iterations_run + 1);
        prop_assert!(r.iterations_run <= alpha);
        let first_best = r.costs.iter().position(|c| *c == min).unwrap();
        prop_assert!(r.costs[..first_best].iter().all(|c| *c > min));
        prop_assert!(m.params.bit_eq(&before));
        let again = standard_mi(&FullModelCost::new(&m, target).unwrap(), &x0, &cfg).unwrap();
        prop_assert_eq!(again, r);
    }

    #[test]
    fn stops_at_first_patience_or_threshold_hit(
        costs in proptest::collection::vec(0.0f64..1.0, 2..30),
        beta in 1usize..5,
        gamma in 0.0f64..0.2,
    ) {
        let alpha = costs.len() - 1;
        let obj = Scripted::new(&costs);
        let r = standard_mi(&obj, &[0.0], &MIConfig { alpha, beta, gamma, lambda: 0.1 }).unwrap();
        let expect = expected_stop(&costs, alpha, beta, gamma);
        prop_assert_eq!((r.iterations_run, r.stop_reason), expect);
        prop_assert_eq!(&r.costs[..], &costs[..=expect.0]);
    }
}
