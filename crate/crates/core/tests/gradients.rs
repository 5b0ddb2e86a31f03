//! Finite-difference oracles for the network's analytic gradients.

use camolab_core::learners::mlp::{mlp_input_gradient, mlp_loss_and_gradients};
use camolab_core::learners::{Activation, Mlp, Objective};
use camolab_core::rng::rng_from;
use ndarray::{Array1, Array2};
use rand::Rng;

const STEP: f64 = 1e-6;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-7)
}

fn loss(m: &Mlp, x: &Array2<f64>, t: &Array2<f64>) -> f64 {
    mlp_loss_and_gradients(m, x.view(), t.view()).unwrap().0
}

/// Central differences over every weight and bias.
fn check_parameter_gradients(m: &Mlp, x: &Array2<f64>, t: &Array2<f64>, tol: f64) {
    let (_, grads) = mlp_loss_and_gradients(m, x.view(), t.view()).unwrap();
    for li in 0..m.layers().len() {
        let (rows, cols) = m.layers()[li].weights.dim();
        for r in 0..rows {
            for c in 0..cols {
                let mut plus = m.clone();
                plus.layers_mut()[li].weights[[r, c]] += STEP;
                let mut minus = m.clone();
                minus.layers_mut()[li].weights[[r, c]] -= STEP;
                let fd = (loss(&plus, x, t) - loss(&minus, x, t)) / (2.0 * STEP);
                let an = grads.layers[li].weights[[r, c]];
                assert!(
                    rel_err(fd, an) < tol || (fd - an).abs() < 1e-9,
                    "layer {li} w[{r},{c}]: fd {fd} analytic {an}"
                );
            }
        }
        for c in 0..cols {
            let mut plus = m.clone();
            plus.layers_mut()[li].bias[c] += STEP;
            let mut minus = m.clone();
            minus.layers_mut()[li].bias[c] -= STEP;
            let fd = (loss(&plus, x, t) - loss(&minus, x, t)) / (2.0 * STEP);
            let an = grads.layers[li].bias[c];
            assert!(rel_err(fd, an) < tol || (fd - an).abs() < 1e-9, "layer {li} b[{c}]: fd {fd} analytic {an}");
        }
    }
}

fn objective_value(m: &Mlp, x: &Array1<f64>, obj: &Objective) -> f64 {
    let s = m.forward(x.view());
    match obj {
        Objective::Score(c) => s[*c],
        Objective::Weighted(w) => s.iter().zip(w).map(|(a, b)| a * b).sum(),
        Objective::BinaryCrossEntropy(t) => {
            s.iter().zip(t).map(|(p, t)| -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())).sum::<f64>() / t.len() as f64
        }
    }
}

fn check_input_gradient(m: &Mlp, x: &Array1<f64>, obj: &Objective, tol: f64) {
    let an = mlp_input_gradient(m, x.view(), obj).unwrap();
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp[i] += STEP;
        let mut xm = x.clone();
        xm[i] -= STEP;
        let fd = (objective_value(m, &xp, obj) - objective_value(m, &xm, obj)) / (2.0 * STEP);
        assert!(rel_err(fd, an[i]) < tol || (fd - an[i]).abs() < 1e-9, "x[{i}]: fd {fd} analytic {}", an[i]);
    }
}

fn random_batch(rng: &mut impl Rng, rows: usize, inputs: usize, outputs: usize) -> (Array2<f64>, Array2<f64>) {
    let x = Array2::from_shape_fn((rows, inputs), |_| rng.random_range(-2.0..2.0));
    let t = Array2::from_shape_fn((rows, outputs), |_| if rng.random_bool(0.3) { 1.0 } else { 0.0 });
    (x, t)
}

#[test]
fn two_two_two_network_matches_finite_differences() {
    let mut rng = rng_from(11);
    let m = Mlp::new(&[2, 2, 2], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
    let (x, t) = random_batch(&mut rng, 4, 2, 2);
    check_parameter_gradients(&m, &x, &t, 1e-5);
}

#[test]
fn three_four_three_input_gradient_matches_finite_differences() {
    let mut rng = rng_from(12);
    let m = Mlp::new(&[3, 4, 3], Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
    let x = Array1::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
    for obj in [
        Objective::Score(2),
        Objective::Weighted(vec![0.5, -1.0, 2.0]),
        Objective::BinaryCrossEntropy(vec![0.0, 1.0, 0.0]),
    ] {
        check_input_gradient(&m, &x, &obj, 1e-5);
    }
}

#[test]
fn twenty_random_small_networks_match_finite_differences() {
    let mut rng = rng_from(2024);
    for trial in 0..20 {
        let depth = rng.random_range(1..=3);
        let mut sizes = vec![rng.random_range(2..=5)];
        for _ in 0..depth {
            sizes.push(rng.random_range(2..=6));
        }
        sizes.push(rng.random_range(2..=4));
        let m = Mlp::new(&sizes, Activation::Relu, Activation::Sigmoid, &mut rng).unwrap();
        let (x, t) = random_batch(&mut rng, 3, sizes[0], *sizes.last().unwrap());
        check_parameter_gradients(&m, &x, &t, 1e-4);
        let out = *sizes.last().unwrap();
        let target: Vec<f64> = (0..out).map(|i| if i == trial % out { 1.0 } else { 0.0 }).collect();
        check_input_gradient(&m, &x.row(0).to_owned(), &Objective::BinaryCrossEntropy(target), 1e-4);
        check_input_gradient(&m, &x.row(1).to_owned(), &Objective::Score(trial % out), 1e-4);
    }
}

#[test]
fn tanh_output_network_input_gradient() {
    let mut rng = rng_from(5);
    let m = Mlp::new(&[4, 6, 3], Activation::Relu, Activation::Tanh, &mut rng).unwrap();
    let x = Array1::from_shape_fn(4, |_| rng.random_range(-1.0..1.0));
    check_input_gradient(&m, &x, &Objective::Weighted(vec![1.0, -0.5, 0.25]), 1e-5);
}
