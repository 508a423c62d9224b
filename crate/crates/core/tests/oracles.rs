//! Hand-built networks whose gradients have closed forms.

use hcfs::ddpg::{actor_objective_and_grad, critic_loss_and_grad, ModelParams, Transition};
use hcfs::nn::{Activation, Dense, Mlp};
use hcfs::rng::stream;
use ndarray::{Array1, Array2};
use rand::Rng;

fn dense(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Dense {
    Dense {
        weight,
        bias,
        activation,
    }
}

#[test]
fn actor_gradient_through_frozen_linear_critic() {
    // Q(s, u) = c·s + w_u·u + b with u = tanh(W s + β). The policy gradient of
    // the batch mean of Q is mean_i w_u (1 - u_i²) [s_i, 1].
    let mut rng = stream(11, "linear-critic");
    let c: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w_u = c[6];
    let critic = Mlp::from_layers(vec![dense(
        Array2::from_shape_vec((1, 7), c.clone()).unwrap(),
        Array1::from_elem(1, 0.4),
        Activation::Identity,
    )])
    .unwrap();
    let w = Array2::from_shape_fn((1, 6), |_| rng.random_range(-0.5..0.5));
    let beta = Array1::from_elem(1, 0.1);
    let actor = Mlp::from_layers(vec![dense(w.clone(), beta.clone(), Activation::Tanh)]).unwrap();

    let m = 16;
    let states = Array2::from_shape_fn((m, 6), |_| rng.random_range(-1.0..1.0));
    let (objective, grads) = actor_objective_and_grad(&actor, &critic, states.view()).unwrap();

    let mut want_w = [0.0; 6];
    let mut want_b = 0.0;
    let mut want_obj = 0.0;
    for s in states.rows() {
        let z: f64 = (0..6).map(|j| w[[0, j]] * s[j]).sum::<f64>() + beta[0];
        let u = z.tanh();
        want_obj += (0..6).map(|j| c[j] * s[j]).sum::<f64>() + w_u * u + 0.4;
        let g = w_u * (1.0 - u * u);
        for j in 0..6 {
            want_w[j] += g * s[j];
        }
        want_b += g;
    }
    let mf = m as f64;
    assert!((objective - want_obj / mf).abs() < 1e-12);
    for j in 0..6 {
        assert!((grads.layers[0].0[[0, j]] - want_w[j] / mf).abs() < 1e-6);
    }
    assert!((grads.layers[0].1[0] - want_b / mf).abs() < 1e-6);
}

#[test]
fn critic_gradient_vanishes_at_zero_td_error() {
    // A critic that outputs the constant q everywhere, targets included, has
    // zero TD error when each reward equals q(1 - γ) on non-terminal steps and
    // q on terminal ones.
    let gamma = 0.99;
    let q = -2.5;
    let mut rng = stream(12, "zero-td");
    let mut model = ModelParams::init(16, &mut rng);
    for critic in [&mut model.critic, &mut model.target_critic] {
        let last = critic.layers_mut().last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(q);
    }
    let batch: Vec<Transition> = (0..32)
        .map(|i| {
            let done = i % 5 == 0;
            Transition {
                s: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                a: rng.random_range(-3.0..3.0),
                r: if done { q } else { q * (1.0 - gamma) },
                s_next: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                done,
            }
        })
        .collect();
    let (loss, grads) = critic_loss_and_grad(&model, &batch, gamma, 3.0).unwrap();
    assert!(loss < 1e-24, "loss {loss}");
    assert!(grads.norm() < 1e-10, "gradient norm {}", grads.norm());
}

#[test]
fn critic_gradient_of_linear_critic_is_td_weighted_input() {
    // For a single linear layer the gradient of mean (Q - y)² is
    // (2/m) Σ (Q_i - y_i) [x_i, 1] with x_i = [s_i, a_i / a_max].
    let mut rng = stream(13, "linear-td");
    let a_max = 3.0;
    let gamma = 0.9;
    let linear = || {
        let w = Array2::from_shape_fn((1, 7), |(_, j)| 0.1 * (j as f64 + 1.0));
        Mlp::from_layers(vec![dense(w, Array1::from_elem(1, -0.2), Activation::Identity)]).unwrap()
    };
    let actor = Mlp::from_layers(vec![dense(
        Array2::from_elem((1, 6), 0.05),
        Array1::zeros(1),
        Activation::Tanh,
    )])
    .unwrap();
    let model = ModelParams::from_networks(actor, linear());
    let batch: Vec<Transition> = (0..8)
        .map(|_| Transition {
            s: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            a: rng.random_range(-a_max..a_max),
            r: rng.random_range(-1.0..0.0),
            s_next: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            done: false,
        })
        .collect();
    let (_, grads) = critic_loss_and_grad(&model, &batch, gamma, a_max).unwrap();

    let q_of = |s: &[f64; 6], u: f64| {
        (0..6).map(|j| 0.1 * (j as f64 + 1.0) * s[j]).sum::<f64>() + 0.7 * u - 0.2
    };
    let mut want = [0.0; 8];
    for t in &batch {
        let u_next = (0.05 * t.s_next.iter().sum::<f64>()).tanh();
        let y = t.r + gamma * q_of(&t.s_next, u_next);
        let diff = q_of(&t.s, t.a / a_max) - y;
        let x: Vec<f64> = t.s.iter().copied().chain([t.a / a_max, 1.0]).collect();
        for (j, xj) in x.iter().enumerate() {
            want[j] += 2.0 * diff * xj / batch.len() as f64;
        }
    }
    for j in 0..7 {
        assert!((grads.layers[0].0[[0, j]] - want[j]).abs() < 1e-12);
    }
    assert!((grads.layers[0].1[0] - want[7]).abs() < 1e-12);
}
