//! Backpropagated gradients against central finite differences.

use fracseir::fractional::{build_weights, weight_sensitivity, TimeGrid};
use fracseir::model::{
    ch_term_alpha_gradient, ch_term_gradient, loss_and_gradient, loss_report, LossContext,
    LossWeights, ModelInit, SeirConstants, SeirModel, TrainingMesh, TrainingWindow,
    COMPARTMENT_LAYERS, RATE_LAYERS,
};
use fracseir::nn::{Activation, DenseNet, InputScaling};
use fracseir::synthetic::SyntheticRegime;

/// `‖a − b‖∞ / ‖b‖∞`.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    diff / scale
}

fn central_difference(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn network(layers: &[usize], seed: u64) -> DenseNet {
    DenseNet::new(layers, Activation::Tanh, seed)
        .unwrap()
        .with_input_scaling(InputScaling::unit_interval(1.0, 30.0))
}

fn check_network_shape(layers: &[usize]) {
    let net = network(layers, 7);
    let ts: Vec<f64> = (0..25).map(|i| 1.0 + 1.2 * i as f64).collect();
    let targets: Vec<f64> = ts.iter().map(|t| (t / 10.0).sin()).collect();
    let loss = |n: &DenseNet| -> f64 {
        n.forward_batch(&ts)
            .outputs()
            .iter()
            .zip(&targets)
            .map(|(y, z)| (y - z).powi(2))
            .sum()
    };
    let pass = net.forward_batch(&ts);
    let upstream: Vec<f64> = pass
        .outputs()
        .iter()
        .zip(&targets)
        .map(|(y, z)| 2.0 * (y - z))
        .collect();
    let grads = net.backward(&pass, &upstream).unwrap().into_grads();
    let mut probe = net.clone();
    let fd = central_difference(net.params(), 1e-6, |p| {
        probe.set_params(p).unwrap();
        loss(&probe)
    });
    let err = relative_error(&grads, &fd);
    assert!(err < 1e-5, "{layers:?}: relative error {err:e}");
}

#[test]
fn rate_network_gradient_matches_differences() {
    check_network_shape(&RATE_LAYERS);
}

#[test]
fn compartment_network_gradient_matches_differences() {
    check_network_shape(&COMPARTMENT_LAYERS);
}

#[test]
fn ch_term_parameter_gradient_matches_differences() {
    let net = network(&COMPARTMENT_LAYERS, 11);
    let grid = TimeGrid::uniform(1.0, 0.1, 120).unwrap();
    let table = build_weights(&grid, 0.7).unwrap();
    for k in [1, 2, 37, 120] {
        let grads = ch_term_gradient(&net, &table, k).unwrap().into_grads();
        let mut probe = net.clone();
        let fd = central_difference(net.params(), 1e-6, |p| {
            probe.set_params(p).unwrap();
            let values = probe.forward_batch(grid.points()).outputs().to_vec();
            table.derivative(&values, k).unwrap()
        });
        let err = relative_error(&grads, &fd);
        assert!(err < 1e-4, "k = {k}: relative error {err:e}");
    }
}

#[test]
fn ch_term_alpha_gradient_matches_differences() {
    let grid = TimeGrid::uniform(1.0, 0.1, 80).unwrap();
    let values: Vec<f64> = grid.points().iter().map(|t| (0.3 * t).sin() + t.ln()).collect();
    for alpha in [0.2, 0.55, 0.9] {
        let sens = weight_sensitivity(&grid, alpha, 1e-4).unwrap();
        for k in [1, 10, 80] {
            let g = ch_term_alpha_gradient(&sens, &values, k).unwrap();
            let h = 1e-3;
            let at = |a: f64| build_weights(&grid, a).unwrap().derivative(&values, k).unwrap();
            let fd = (at(alpha + h) - at(alpha - h)) / (2.0 * h);
            assert!(((g - fd) / fd).abs() < 1e-3, "alpha {alpha}, k {k}: {g} vs {fd}");
        }
    }
}

fn small_model(n_data: usize) -> SeirModel {
    let constants = SeirConstants::new(1e6, 1.0 / 3.0).unwrap();
    let window = TrainingWindow {
        n_data,
        tau: 0.5,
        start_date: None,
    };
    SeirModel::new(constants, window, ModelInit::default()).unwrap()
}

#[test]
fn full_loss_gradient_matches_differences() {
    let n_data = 8;
    let data = SyntheticRegime::reference().training_data(n_data).unwrap();
    let mut model = small_model(n_data);
    // Move the order off its initial value so the decoding slope is generic.
    model.set_raw_alpha(0.4);
    let mesh = TrainingMesh::new(n_data, 0.5).unwrap();
    let weights = LossWeights {
        data: [1.0, 2.0, 0.5, 1.5, 3.0],
        residual: [1.0, 0.5, 2.0, 1.0, 0.7],
    };
    let table = build_weights(mesh.grid(), model.alpha()).unwrap();
    let sens = weight_sensitivity(mesh.grid(), model.alpha(), 1e-5).unwrap();
    let ctx = LossContext {
        mesh: &mesh,
        data: &data,
        table: &table,
        sensitivity: Some(&sens),
        weights: &weights,
    };
    let (report, grad) = loss_and_gradient(&model, &ctx).unwrap();
    assert_eq!(report.total, loss_report(&model, &ctx).unwrap().total);

    // Network parameters with the table held fixed.
    let params = model.params();
    let n_net = params.len() - 1;
    let mut probe = model.clone();
    let fd = central_difference(&params[..n_net], 1e-6, |p| {
        let mut full = p.to_vec();
        full.push(params[n_net]);
        probe.set_params(&full).unwrap();
        loss_report(&probe, &ctx).unwrap().total
    });
    let err = relative_error(&grad[..n_net], &fd);
    assert!(err < 1e-5, "network parameters: relative error {err:e}");

    // Raw order, rebuilding the table at each probe.
    let h = 1e-4;
    let mut at = |raw: f64| {
        probe.set_params(&params).unwrap();
        probe.set_raw_alpha(raw);
        let table = build_weights(mesh.grid(), probe.alpha()).unwrap();
        let ctx = LossContext { table: &table, ..ctx };
        loss_report(&probe, &ctx).unwrap().total
    };
    let fd_alpha = (at(0.4 + h) - at(0.4 - h)) / (2.0 * h);
    let g = grad[n_net];
    assert!(((g - fd_alpha) / fd_alpha).abs() < 1e-3, "{g} vs {fd_alpha}");
}
