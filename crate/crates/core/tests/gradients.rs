//! Central finite differences against the hand-written backward passes.

mod common;

use common::*;
use volgraph_core::neural::{Input, Model, ModelSpec, Reduction};

fn assert_case(case: &str) {
    for (t, e) in gradient_trials(case).into_iter().enumerate() {
        assert!(e < GRAD_TOL, "{case} trial {t}: relative error {e:e}");
    }
}

#[test]
fn dense() {
    assert_case("dense");
}

#[test]
fn conv2d() {
    assert_case("conv2d");
}

#[test]
fn conv3d() {
    assert_case("conv3d");
}

#[test]
fn relu_and_maxpool() {
    assert_case("maxpool2d");
    assert_case("maxpool3d");
}

#[test]
fn spline_conv_and_pooling() {
    assert_case("splineconv");
}

#[test]
fn softmax_cross_entropy_logits() {
    for (t, e) in softmax_ce_trials().into_iter().enumerate() {
        assert!(e < GRAD_TOL, "trial {t}: {e:e}");
    }
}

#[test]
fn duplicated_sample_doubles_summed_gradient() {
    let mut r = rng(5);
    let m = Model::<f64>::init(ModelSpec::default_gnn(5, 3).unwrap(), 1).unwrap();
    let x = Input::Graph(random_graph(&mut r, 5, 3));
    let (l1, g1) = m.batch_gradients(&[(&x, 2)], Reduction::Sum).unwrap();
    let (l2, g2) = m
        .batch_gradients(&[(&x, 2), (&x, 2)], Reduction::Sum)
        .unwrap();
    assert_eq!(l2, 2.0 * l1);
    for (a, b) in g1.iter().zip(&g2) {
        assert_eq!(2.0 * a, *b);
    }
}

#[test]
fn saturated_correct_class_has_vanishing_gradient() {
    let spec: ModelSpec = serde_json::from_str(
        r#"{"kind":"cnn","input":{"type":"grid","channels":1,"dims":[2,1,1]},
            "layers":[{"type":"dense","inputs":2,"outputs":7},{"type":"softmax"}]}"#,
    )
    .unwrap();
    let mut m = Model::<f64>::new(spec).unwrap();
    let n = m.param_len();
    m.params_mut()[n - 7 + 3] = 60.0;
    let x = Input::Grid {
        channels: 1,
        dims: [2, 1, 1],
        ndim: 3,
        data: vec![0.3, -0.2],
    };
    let (_, g) = m.loss_and_grad(&x, 3).unwrap();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm < 1e-8, "{norm:e}");
}
