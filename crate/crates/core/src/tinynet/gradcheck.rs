use super::{NetError, NetworkModel, Tensor};

/// Compares back-propagated gradients of the binary cross-entropy loss with
/// central finite differences over every parameter.
///
/// Returns `max |g_a - g_n| / max(|g_a|, |g_n|, 1e-12)` over all weights and
/// biases.
pub fn gradient_check(
    model: &NetworkModel,
    input: &Tensor,
    target: f64,
    epsilon: f64,
) -> Result<f64, NetError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(NetError::Config(format!(
            "epsilon {epsilon} outside [1e-7, 1e-3]"
        )));
    }
    // validates the input shape as a side effect
    model.logit(input)?;

    let acts = model.trace(input.data());
    let z = acts.last().expect("trace")[0];
    let mut analytic = model.zero_grads();
    model.backprop(&acts, super::layer::sigmoid(z) - target, &mut analytic);

    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (li, layer_grads) in analytic.iter().enumerate() {
        for (ti, grads) in layer_grads.iter().enumerate() {
            for (wi, &ga) in grads.iter().enumerate() {
                let original = model.params()[li][ti].data()[wi];
                probe.params_mut()[li][ti].data_mut()[wi] = original + epsilon;
                let up = probe.logit(input)?;
                probe.params_mut()[li][ti].data_mut()[wi] = original - epsilon;
                let down = probe.logit(input)?;
                probe.params_mut()[li][ti].data_mut()[wi] = original;
                let gn = loss_difference(up, down, target) / (2.0 * epsilon);
                let rel = (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-12);
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

/// `bce(z_up) - bce(z_down)` without subtracting two rounded losses:
/// `softplus(u) - softplus(d) = ln(1 + sigmoid(d)·(e^(u-d) - 1))`.
fn loss_difference(z_up: f64, z_down: f64, target: f64) -> f64 {
    let delta = z_up - z_down;
    (super::layer::sigmoid(z_down) * delta.exp_m1()).ln_1p() - target * delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tinynet::{LayerSpec, Padding};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_input(shape: Vec<usize>, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn dense_stack() {
        let m = NetworkModel::new(
            vec![9],
            vec![
                LayerSpec::dense(9, 4),
                LayerSpec::ReLU,
                LayerSpec::dense(4, 1),
                LayerSpec::Sigmoid,
            ],
            "t",
            42,
        )
        .unwrap();
        let err = gradient_check(&m, &random_input(vec![9], 1), 1.0, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn strided_conv_with_dense_head() {
        let m = NetworkModel::new(
            vec![1, 7, 9],
            vec![
                LayerSpec::conv(1, 2, (3, 3), 2, Padding::Valid),
                LayerSpec::LeakyReLU,
                LayerSpec::Flatten,
                LayerSpec::dense(2 * 3 * 4, 1),
                LayerSpec::Sigmoid,
            ],
            "t",
            7,
        )
        .unwrap();
        let err = gradient_check(&m, &random_input(vec![1, 7, 9], 2), 0.0, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn same_padding_conv() {
        let m = NetworkModel::new(
            vec![2, 5, 6],
            vec![
                LayerSpec::conv(2, 3, (3, 3), 2, Padding::Same),
                LayerSpec::ReLU,
                LayerSpec::conv(3, 2, (2, 2), 1, Padding::Same),
                LayerSpec::Sigmoid,
                LayerSpec::Flatten,
                LayerSpec::dense(2 * 3 * 3, 1),
                LayerSpec::Sigmoid,
            ],
            "t",
            3,
        )
        .unwrap();
        let err = gradient_check(&m, &random_input(vec![2, 5, 6], 4), 1.0, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn zero_weights_are_exact() {
        let m = NetworkModel::new(
            vec![9],
            vec![
                LayerSpec::dense(9, 4),
                LayerSpec::ReLU,
                LayerSpec::dense(4, 1),
                LayerSpec::Sigmoid,
            ],
            "t",
            0,
        )
        .unwrap()
        .zeroed();
        let err = gradient_check(&m, &random_input(vec![9], 3), 1.0, 1e-5).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn epsilon_range_enforced() {
        let m = NetworkModel::new(vec![1], vec![LayerSpec::dense(1, 1), LayerSpec::Sigmoid], "t", 0).unwrap();
        let x = Tensor::vector(vec![0.5]).unwrap();
        assert!(gradient_check(&m, &x, 1.0, 1e-2).is_err());
        assert!(gradient_check(&m, &x, 1.0, 1e-9).is_err());
    }

    #[test]
    fn loss_difference_matches_direct_subtraction() {
        use crate::tinynet::network::bce_from_logit;
        for (u, d, t) in [(0.3, -0.2, 1.0), (5.0, 4.0, 0.0), (-30.0, -31.0, 1.0), (40.0, 39.5, 0.0)] {
            let direct = bce_from_logit(u, t) - bce_from_logit(d, t);
            assert!((loss_difference(u, d, t) - direct).abs() < 1e-12, "{u} {d} {t}");
        }
    }
}
