mod common;

use common::{mann_whitney, naive_conv, naive_maxpool};
use earconv::layers::{conv2d_forward, maxpool_forward, ConvParams, Padding, PoolParams};
use earconv::metrics::{confusion, precision_recall, roc_auc, EvalReport};
use earconv::{Rng, Tensor};

fn padding(rng: &mut Rng) -> Padding {
    if rng.bernoulli(0.5) { Padding::Same } else { Padding::Valid }
}

#[test]
fn conv_matches_loop_oracle() {
    let mut rng = Rng::new(1);
    for case in 0..100 {
        let (k, s) = (1 + rng.below(4), 1 + rng.below(3));
        let (h, w) = (k + rng.below(8), k + rng.below(8));
        let (ci, co) = (1 + rng.below(4), 1 + rng.below(5));
        let n = 1 + rng.below(2);
        let x: Tensor<f64> = rng.uniform(&[n, h, w, ci], -1.0, 1.0).unwrap();
        let p = ConvParams {
            weights: rng.uniform(&[k, k, ci, co], -1.0, 1.0).unwrap(),
            bias: rng.uniform(&[co], -1.0, 1.0).unwrap(),
            stride: s,
            padding: padding(&mut rng),
        };
        let want = naive_conv(&x, &p.weights, &p.bias, s, p.padding);
        let got = conv2d_forward(&x, &p).unwrap();
        assert_eq!(got.shape(), want.shape(), "case {case}");
        assert!(got.max_abs_diff(&want) <= 1e-5, "case {case}");

        let got32 = conv2d_forward(&x.cast::<f32>(), &p.cast_params()).unwrap();
        assert!(got32.cast::<f64>().max_abs_diff(&want) <= 1e-5, "case {case} (32-bit)");
    }
}

trait CastParams {
    fn cast_params(&self) -> ConvParams<f32>;
}

impl CastParams for ConvParams<f64> {
    fn cast_params(&self) -> ConvParams<f32> {
        ConvParams { weights: self.weights.cast(), bias: self.bias.cast(), stride: self.stride, padding: self.padding }
    }
}

#[test]
fn maxpool_matches_loop_oracle() {
    let mut rng = Rng::new(2);
    for case in 0..100 {
        let (k, s) = (1 + rng.below(3), 1 + rng.below(3));
        let shape = [1 + rng.below(2), k + rng.below(8), k + rng.below(8), 1 + rng.below(4)];
        let x: Tensor<f64> = rng.uniform(&shape, -1.0, 1.0).unwrap();
        let p = PoolParams { window: k, stride: s, padding: padding(&mut rng) };
        let want = naive_maxpool(&x, k, s, p.padding);
        let (got, _) = maxpool_forward(&x, p).unwrap();
        assert_eq!(got.shape(), want.shape(), "case {case}");
        assert!(got.max_abs_diff(&want) <= 1e-5, "case {case}");
    }
}

#[test]
fn auc_matches_pairwise_oracle() {
    let mut rng = Rng::new(3);
    for case in 0..200 {
        let n = 2 + rng.below(49);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        labels[0] = 0;
        labels[1] = 1;
        // coarse scores so that ties occur
        let scores: Vec<f64> = (0..n).map(|_| rng.below(10) as f64 / 10.0).collect();
        let (_, auc) = roc_auc(&scores, &labels).unwrap();
        assert!((auc - mann_whitney(&scores, &labels)).abs() < 1e-9, "case {case}");

        let swapped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
        assert!((roc_auc(&flipped, &swapped).unwrap().1 - auc).abs() < 1e-9, "case {case}");
    }
}

#[test]
fn auc_complements_under_negation_without_ties() {
    let mut rng = Rng::new(4);
    for _ in 0..50 {
        let n = 10 + rng.below(30);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        labels[..2].copy_from_slice(&[0, 1]);
        let scores: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = roc_auc(&scores, &labels).unwrap().1 + roc_auc(&neg, &labels).unwrap().1;
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn confusion_and_rates_match_tallies() {
    let mut rng = Rng::new(5);
    for _ in 0..200 {
        let n = 1 + rng.below(60);
        let labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        let preds: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
        let cm = confusion(&labels, &preds).unwrap();
        let mut tally = [[0u64; 2]; 2];
        for (&l, &p) in labels.iter().zip(&preds) {
            tally[l as usize][p as usize] += 1;
        }
        assert_eq!(cm.0, tally);
        assert_eq!(cm.total(), n as u64);
        assert_eq!(cm.accuracy(), (tally[0][0] + tally[1][1]) as f64 / n as f64);
        let pr = precision_recall(&cm);
        for c in 0..2 {
            let col = tally[0][c] + tally[1][c];
            let row = tally[c][0] + tally[c][1];
            let p = if col == 0 { 0.0 } else { tally[c][c] as f64 / col as f64 };
            let r = if row == 0 { 0.0 } else { tally[c][c] as f64 / row as f64 };
            assert_eq!((pr[c].precision, pr[c].recall), (p, r));
        }
    }
}

#[test]
fn report_json_has_documented_keys() {
    let probs = [[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.3, 0.7]];
    let r = EvalReport::from_probs(&probs, &[0, 1, 1, 0]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    for key in ["confusion", "accuracy", "per_class", "roc", "auc"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
