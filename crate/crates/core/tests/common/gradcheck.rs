//! Central finite-difference checks of every backward pass, run in the f64
//! instantiation of the layer code with step 1e-3.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vispro::ndnn::*;
use vispro::prosqn::{fire_backward, fire_forward, Architecture, FireModule, FireSpec, ProSqnModel};

const STEP: f64 = 1e-3;
const TOL: f64 = 1e-3;
// Gradients smaller than this are compared absolutely.
const FLOOR: f64 = 1e-6;

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_tensor(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Checks `grad[i]` against central differences of `loss` in `values[i]`.
fn check(what: &str, values: &mut [f64], grad: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> f64 {
    assert_eq!(values.len(), grad.len(), "{what}: gradient length");
    let mut worst: f64 = 0.0;
    for i in 0..values.len() {
        let orig = values[i];
        values[i] = orig + STEP;
        let up = loss(values);
        values[i] = orig - STEP;
        let down = loss(values);
        values[i] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let e = rel_err(grad[i], numeric);
        assert!(e < TOL, "{what}[{i}]: analytic {} vs numeric {numeric} (rel {e:.2e})", grad[i]);
        worst = worst.max(e);
    }
    worst
}

/// Linear probe `Σ r_i y_i`, so that d(loss)/dy = r.
fn probe(y: &Tensor<f64>, r: &[f64]) -> f64 {
    y.data().iter().zip(r).map(|(a, b)| a * b).sum()
}

fn conv_case(k: usize, stride: usize, padding: usize, seed: u64) {
    let mut r = rng(seed);
    let mut layer: ConvLayer<f64> = ConvLayer::init(k, 2, 2, stride, padding, &mut r);
    for b in &mut layer.bias {
        *b = r.random_range(-0.5..0.5);
    }
    let mut input = random_tensor(&[5, 5, 2], &mut r);
    let out = conv2d(&input, &layer).unwrap();
    let probe_w: Vec<f64> = (0..out.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let g = Tensor::from_vec(out.shape(), probe_w.clone()).unwrap();
    let mut grad = ConvLayer::zeros(k, 2, 2, stride, padding);
    let gin = conv2d_backward(&input, &layer, &g, &mut grad).unwrap();

    let shape = input.shape().to_vec();
    let l2 = layer.clone();
    check("conv input", input.data_mut(), gin.data(), |v| {
        probe(&conv2d(&Tensor::from_vec(&shape, v.to_vec()).unwrap(), &l2).unwrap(), &probe_w)
    });
    let mut w = layer.weight.clone();
    check("conv weight", &mut w, &grad.weight, |v| {
        let mut l = layer.clone();
        l.weight = v.to_vec();
        probe(&conv2d(&input, &l).unwrap(), &probe_w)
    });
    let mut b = layer.bias.clone();
    check("conv bias", &mut b, &grad.bias, |v| {
        let mut l = layer.clone();
        l.bias = v.to_vec();
        probe(&conv2d(&input, &l).unwrap(), &probe_w)
    });
}

pub fn conv_5x5x2_to_2_filters() {
    conv_case(3, 1, 0, 1);
    conv_case(3, 1, 1, 2);
    conv_case(3, 2, 1, 3);
    conv_case(1, 1, 0, 4);
    conv_case(5, 1, 0, 5);
}

pub fn maxpool_4x4() {
    let mut r = rng(11);
    let mut input = random_tensor(&[4, 4, 2], &mut r);
    let (out, idx) = maxpool2d(&input, 3, 2).unwrap();
    assert_eq!(out.shape(), &[2, 2, 2]);
    let pw: Vec<f64> = (0..out.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let gin = maxpool2d_backward(input.shape(), &idx, &Tensor::from_vec(out.shape(), pw.clone()).unwrap()).unwrap();
    let shape = input.shape().to_vec();
    check("maxpool", input.data_mut(), gin.data(), |v| {
        probe(&maxpool2d(&Tensor::from_vec(&shape, v.to_vec()).unwrap(), 3, 2).unwrap().0, &pw)
    });
}

pub fn global_maxpool_and_leaky() {
    let mut r = rng(12);
    let mut input = random_tensor(&[3, 3, 4], &mut r);
    let (out, idx) = global_maxpool(&input).unwrap();
    let pw: Vec<f64> = (0..out.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let gin = global_maxpool_backward(input.shape(), &idx, &Tensor::from_vec(out.shape(), pw.clone()).unwrap()).unwrap();
    let shape = input.shape().to_vec();
    check("global maxpool", input.data_mut(), gin.data(), |v| {
        probe(&global_maxpool(&Tensor::from_vec(&shape, v.to_vec()).unwrap()).unwrap().0, &pw)
    });

    let mut x = random_tensor(&[10], &mut r);
    let pw: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
    let gin = leaky_relu_backward(&x, &Tensor::from_vec(&[10], pw.clone()).unwrap(), LEAKY_SLOPE);
    check("leaky relu", x.data_mut(), gin.data(), |v| {
        probe(&leaky_relu(&Tensor::from_vec(&[10], v.to_vec()).unwrap(), LEAKY_SLOPE), &pw)
    });
}

pub fn dense_3_to_2_with_mse() {
    let mut r = rng(13);
    let layer: DenseLayer<f64> = DenseLayer::init(3, 2, &mut r);
    let mut input = random_tensor(&[3], &mut r);
    let target = [0.3, -0.7];
    let loss_of = |x: &Tensor<f64>, l: &DenseLayer<f64>| mse_loss(&dense(x, l).unwrap(), &target).unwrap().0;
    let (_, g) = mse_loss(&dense(&input, &layer).unwrap(), &target).unwrap();
    let mut grad = DenseLayer::zeros(3, 2);
    let gin = dense_backward(&input, &layer, &g, &mut grad).unwrap();
    check("dense input", input.data_mut(), gin.data(), |v| {
        loss_of(&Tensor::from_vec(&[3], v.to_vec()).unwrap(), &layer)
    });
    let mut w = layer.weight.clone();
    check("dense weight", &mut w, &grad.weight, |v| {
        let mut l = layer.clone();
        l.weight = v.to_vec();
        loss_of(&input, &l)
    });
    let mut b = layer.bias.clone();
    check("dense bias", &mut b, &grad.bias, |v| {
        let mut l = layer.clone();
        l.bias = v.to_vec();
        loss_of(&input, &l)
    });
}

pub fn single_weight_dense_mse() {
    let layer = DenseLayer::from_parts(1, 1, vec![0.7f64], vec![0.1]).unwrap();
    let x = Tensor::from_vec(&[1], vec![2.0]).unwrap();
    let (_, g) = mse_loss(&dense(&x, &layer).unwrap(), &[1.0]).unwrap();
    let mut grad = DenseLayer::zeros(1, 1);
    dense_backward(&x, &layer, &g, &mut grad).unwrap();
    let mut w = vec![0.7];
    check("w", &mut w, &grad.weight, |v| {
        let l = DenseLayer::from_parts(1, 1, v.to_vec(), vec![0.1]).unwrap();
        mse_loss(&dense(&x, &l).unwrap(), &[1.0]).unwrap().0
    });
}

pub fn concatenation() {
    let mut r = rng(14);
    let a = random_tensor(&[3], &mut r);
    let b = random_tensor(&[2], &mut r);
    let pw: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
    let (ga, gb) = concat_backward(&[3], &[2], &Tensor::from_vec(&[5], pw.clone()).unwrap()).unwrap();
    let mut av = a.data().to_vec();
    check("concat a", &mut av, ga.data(), |v| {
        probe(&concat(&Tensor::from_vec(&[3], v.to_vec()).unwrap(), &b), &pw)
    });
    let mut bv = b.data().to_vec();
    check("concat b", &mut bv, gb.data(), |v| {
        probe(&concat(&a, &Tensor::from_vec(&[2], v.to_vec()).unwrap()), &pw)
    });
}

pub fn fire_module() {
    let mut r = rng(15);
    let spec = FireSpec::new(2, 3, 3);
    let fire: FireModule<f64> = FireModule::init(4, spec, &mut r);
    let mut input = random_tensor(&[4, 4, 4], &mut r);
    let (out, cache) = fire_forward(&input, &fire).unwrap();
    let pw: Vec<f64> = (0..out.len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut grad = FireModule::zeros(4, spec);
    let gin = fire_backward(&fire, &cache, &Tensor::from_vec(out.shape(), pw.clone()).unwrap(), &mut grad).unwrap();
    let shape = input.shape().to_vec();
    check("fire input", input.data_mut(), gin.data(), |v| {
        probe(&fire_forward(&Tensor::from_vec(&shape, v.to_vec()).unwrap(), &fire).unwrap().0, &pw)
    });
    let mut w = fire.expand3.weight.clone();
    check("fire expand3", &mut w, &grad.expand3.weight, |v| {
        let mut f = fire.clone();
        f.expand3.weight = v.to_vec();
        probe(&fire_forward(&input, &f).unwrap().0, &pw)
    });
    let mut w = fire.squeeze.weight.clone();
    check("fire squeeze", &mut w, &grad.squeeze.weight, |v| {
        let mut f = fire.clone();
        f.squeeze.weight = v.to_vec();
        probe(&fire_forward(&input, &f).unwrap().0, &pw)
    });
}

/// Every parameter of the width-reduced model. The network is piecewise
/// linear and the loss quadratic in the output, so away from activation
/// switches the central difference is exact for any step. A ±1e-3 probe
/// occasionally straddles a leaky-ReLU or max-pool switch; that shows up as
/// a disagreement between the steps 1e-3 and 5e-4. Only there is the
/// comparison repeated with a 1e-6 step, still at 1e-3 relative tolerance.
pub fn reduced_prosqn_every_parameter() -> (usize, usize) {
    let model32 = ProSqnModel::build(Architecture::REDUCED, 21);
    let mut model: ProSqnModel<f64> = model32.cast();
    let mut r = rng(22);
    let input = Tensor::from_vec(&[64, 64, 1], (0..4096).map(|_| r.random_range(0.0..1.0)).collect()).unwrap();
    let t = 0.4;
    let target = 0.25;
    let loss = |m: &ProSqnModel<f64>| {
        let y = m.forward_normalized(&input, t).unwrap();
        (y - target) * (y - target)
    };
    let cache = model.forward_cached(&input, t).unwrap();
    let mut grad = model.zeros_like();
    model.backward(&cache, 2.0 * (cache.output - target), &mut grad).unwrap();
    let names = model.param_names();
    let grads: Vec<Vec<f64>> = grad.param_slices().iter().map(|g| g.to_vec()).collect();
    let (mut checked, mut kinks) = (0, 0);
    for (k, name) in names.iter().enumerate() {
        for i in 0..grads[k].len() {
            let orig = model.param_slices()[k][i];
            let mut at = |h: f64| {
                model.param_slices_mut()[k][i] = orig + h;
                let up = loss(&model);
                model.param_slices_mut()[k][i] = orig - h;
                let down = loss(&model);
                model.param_slices_mut()[k][i] = orig;
                (up, down)
            };
            let (up, down) = at(STEP);
            let analytic = grads[k][i];
            let mut numeric = (up - down) / (2.0 * STEP);
            if rel_err(analytic, numeric) >= TOL {
                let (up2, down2) = at(0.5 * STEP);
                let half = (up2 - down2) / STEP;
                assert!(
                    rel_err(numeric, half) > 1e-6,
                    "{name}[{i}]: smooth region but analytic {analytic} vs numeric {numeric}"
                );
                kinks += 1;
                let (up, down) = at(1e-6);
                numeric = (up - down) / 2e-6;
            }
            let e = rel_err(analytic, numeric);
            assert!(e < TOL, "{name}[{i}]: analytic {analytic} vs numeric {numeric} (rel {e:.2e})");
            checked += 1;
        }
    }
    let total: usize = model.param_slices().iter().map(|p| p.len()).sum();
    assert_eq!(checked, total);
    assert!(kinks * 20 < total, "{kinks} of {total} parameters needed the kink fallback");
    (checked, kinks)
}
