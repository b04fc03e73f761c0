use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    Architecture, FireSpec, CONV1_KERNEL, CONV1_STRIDE, DEN2_UNITS, DEN3_UNITS, LATENT,
    POOL_AFTER_FIRE, POOL_KERNEL, POOL_STRIDE,
};
use crate::error::{Error, Result};
use crate::ndnn::{
    concat, concat_backward, conv2d, conv2d_backward, dense, dense_backward, global_maxpool,
    global_maxpool_backward, leaky_relu, leaky_relu_backward, maxpool2d, maxpool2d_backward,
    ConvLayer, DenseLayer, PoolIndices, Scalar, Tensor, LEAKY_SLOPE,
};
use crate::tfa::TfaImage;

/// Squeeze 1×1 conv, then parallel 1×1 and padded 3×3 expand convs whose
/// outputs are concatenated channelwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FireModule<T = f32> {
    pub spec: FireSpec,
    pub squeeze: ConvLayer<T>,
    pub expand1: ConvLayer<T>,
    pub expand3: ConvLayer<T>,
}

impl<T: Scalar> FireModule<T> {
    pub fn zeros(c_in: usize, spec: FireSpec) -> Self {
        FireModule {
            spec,
            squeeze: ConvLayer::zeros(1, c_in, spec.squeeze, 1, 0),
            expand1: ConvLayer::zeros(1, spec.squeeze, spec.expand1, 1, 0),
            expand3: ConvLayer::zeros(3, spec.squeeze, spec.expand3, 1, 1),
        }
    }

    pub fn init<R: rand::Rng>(c_in: usize, spec: FireSpec, rng: &mut R) -> Self {
        FireModule {
            spec,
            squeeze: ConvLayer::init(1, c_in, spec.squeeze, 1, 0, rng),
            expand1: ConvLayer::init(1, spec.squeeze, spec.expand1, 1, 0, rng),
            expand3: ConvLayer::init(3, spec.squeeze, spec.expand3, 1, 1, rng),
        }
    }

    pub fn weight_count(&self) -> usize {
        self.squeeze.weight_count() + self.expand1.weight_count() + self.expand3.weight_count()
    }

    fn cast<U: Scalar>(&self) -> FireModule<U> {
        FireModule {
            spec: self.spec,
            squeeze: self.squeeze.cast(),
            expand1: self.expand1.cast(),
            expand3: self.expand3.cast(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FireCache<T> {
    input: Tensor<T>,
    squeeze_pre: Tensor<T>,
    squeezed: Tensor<T>,
    expand1_pre: Tensor<T>,
    expand3_pre: Tensor<T>,
}

/// Channelwise concatenation of two HWC tensors with equal spatial size.
fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, ca) = a.hwc()?;
    let (hb, wb, cb) = b.hwc()?;
    if (h, w) != (hb, wb) {
        return Err(Error::Shape(format!(
            "cannot concatenate {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = Vec::with_capacity(h * w * (ca + cb));
    for p in 0..h * w {
        out.extend_from_slice(&a.data()[p * ca..(p + 1) * ca]);
        out.extend_from_slice(&b.data()[p * cb..(p + 1) * cb]);
    }
    Tensor::from_vec(&[h, w, ca + cb], out)
}

fn split_channels<T: Scalar>(g: &Tensor<T>, ca: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let (h, w, c) = g.hwc()?;
    let cb = c - ca;
    let mut a = Vec::with_capacity(h * w * ca);
    let mut b = Vec::with_capacity(h * w * cb);
    for p in 0..h * w {
        a.extend_from_slice(&g.data()[p * c..p * c + ca]);
        b.extend_from_slice(&g.data()[p * c + ca..(p + 1) * c]);
    }
    Ok((Tensor::from_vec(&[h, w, ca], a)?, Tensor::from_vec(&[h, w, cb], b)?))
}

pub fn fire_forward<T: Scalar>(
    input: &Tensor<T>,
    fire: &FireModule<T>,
) -> Result<(Tensor<T>, FireCache<T>)> {
    let squeeze_pre = conv2d(input, &fire.squeeze)?;
    let squeezed = leaky_relu(&squeeze_pre, LEAKY_SLOPE);
    let expand1_pre = conv2d(&squeezed, &fire.expand1)?;
    let expand3_pre = conv2d(&squeezed, &fire.expand3)?;
    let out = concat_channels(
        &leaky_relu(&expand1_pre, LEAKY_SLOPE),
        &leaky_relu(&expand3_pre, LEAKY_SLOPE),
    )?;
    Ok((
        out,
        FireCache {
            input: input.clone(),
            squeeze_pre,
            squeezed,
            expand1_pre,
            expand3_pre,
        },
    ))
}

pub fn fire_backward<T: Scalar>(
    fire: &FireModule<T>,
    cache: &FireCache<T>,
    grad_out: &Tensor<T>,
    grad: &mut FireModule<T>,
) -> Result<Tensor<T>> {
    let (g1, g3) = split_channels(grad_out, fire.spec.expand1)?;
    let g1 = leaky_relu_backward(&cache.expand1_pre, &g1, LEAKY_SLOPE);
    let g3 = leaky_relu_backward(&cache.expand3_pre, &g3, LEAKY_SLOPE);
    let mut gs = conv2d_backward(&cache.squeezed, &fire.expand1, &g1, &mut grad.expand1)?;
    let gs3 = conv2d_backward(&cache.squeezed, &fire.expand3, &g3, &mut grad.expand3)?;
    for (a, &b) in gs.data_mut().iter_mut().zip(gs3.data()) {
        *a += b;
    }
    let gs = leaky_relu_backward(&cache.squeeze_pre, &gs, LEAKY_SLOPE);
    conv2d_backward(&cache.input, &fire.squeeze, &gs, &mut grad.squeeze)
}

#[derive(Debug, Clone)]
enum StageCache<T> {
    Conv { input: Tensor<T>, pre: Tensor<T> },
    Pool { in_shape: Vec<usize>, idx: PoolIndices },
    Fire(FireCache<T>),
    Global { in_shape: Vec<usize>, idx: PoolIndices },
}

/// Activations recorded by a forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    stages: Vec<StageCache<T>>,
    pooled: Tensor<T>,
    den1_pre: Tensor<T>,
    head_in: Tensor<T>,
    den2_pre: Tensor<T>,
    den2_act: Tensor<T>,
    den3_pre: Tensor<T>,
    den3_act: Tensor<T>,
    /// Normalized network output.
    pub output: T,
}

/// Full parameter set. Convolutional layers are followed by leaky-ReLU, as
/// are Den1–Den3; Den4 is linear. The time input enters Den2 as `t / time_scale`
/// and the output is a RUL in units of `rul_scale` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProSqnModel<T = f32> {
    pub arch: Architecture,
    pub conv1: ConvLayer<T>,
    pub fires: Vec<FireModule<T>>,
    pub conv10: ConvLayer<T>,
    pub den1: DenseLayer<T>,
    pub den2: DenseLayer<T>,
    pub den3: DenseLayer<T>,
    pub den4: DenseLayer<T>,
    pub time_scale: f32,
    pub rul_scale: f32,
}

impl ProSqnModel<f32> {
    /// Seeded He-uniform initialization.
    pub fn build(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = arch.conv1_filters();
        let conv1 = ConvLayer::init(CONV1_KERNEL, 1, c, CONV1_STRIDE, 0, &mut rng);
        let mut fires = Vec::with_capacity(8);
        for spec in arch.fire_specs() {
            fires.push(FireModule::init(c, spec, &mut rng));
            c = spec.out_channels();
        }
        let conv10 = ConvLayer::init(1, c, arch.conv10_filters(), 1, 0, &mut rng);
        ProSqnModel {
            arch,
            conv1,
            fires,
            conv10,
            den1: DenseLayer::init(arch.conv10_filters(), LATENT, &mut rng),
            den2: DenseLayer::init(LATENT + 1, DEN2_UNITS, &mut rng),
            den3: DenseLayer::init(DEN2_UNITS, DEN3_UNITS, &mut rng),
            den4: DenseLayer::init(DEN3_UNITS, 1, &mut rng),
            time_scale: 1.0,
            rul_scale: 1.0,
        }
    }

    /// Estimated RUL in seconds for a normalized image taken at `t` seconds.
    pub fn forward(&self, image: &TfaImage, t: f64) -> Result<f64> {
        if image.n_rows != 64 || image.n_cols != 64 {
            return Err(Error::Input(format!(
                "expected a 64x64 image, got {}x{}",
                image.n_rows, image.n_cols
            )));
        }
        if let Some(v) = image
            .values
            .iter()
            .find(|&&v| !(-1e-6..=1.0 + 1e-6).contains(&v))
        {
            return Err(Error::Input(format!(
                "image at t={}s is not normalized (value {v} outside [0,1])",
                image.timestamp
            )));
        }
        if !(t >= 0.0) {
            return Err(Error::Input(format!("time must be nonnegative, got {t}")));
        }
        let input = Tensor::from_vec(&[64, 64, 1], image.values.clone())?;
        let out = self.forward_normalized(&input, self.normalize_time(t))?;
        Ok(out as f64 * self.rul_scale as f64)
    }

    pub fn normalize_time(&self, t: f64) -> f32 {
        (t / self.time_scale as f64) as f32
    }
}

impl<T: Scalar> ProSqnModel<T> {
    /// Every parameter set to zero, same architecture. Used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        let mut m = self.clone();
        for p in m.param_slices_mut() {
            p.fill(T::zero());
        }
        m
    }

    pub fn cast<U: Scalar>(&self) -> ProSqnModel<U> {
        ProSqnModel {
            arch: self.arch,
            conv1: self.conv1.cast(),
            fires: self.fires.iter().map(FireModule::cast).collect(),
            conv10: self.conv10.cast(),
            den1: self.den1.cast(),
            den2: self.den2.cast(),
            den3: self.den3.cast(),
            den4: self.den4.cast(),
            time_scale: self.time_scale,
            rul_scale: self.rul_scale,
        }
    }

    /// Weight count excluding biases.
    pub fn weight_count(&self) -> usize {
        self.conv1.weight_count()
            + self.fires.iter().map(FireModule::weight_count).sum::<usize>()
            + self.conv10.weight_count()
            + [&self.den1, &self.den2, &self.den3, &self.den4]
                .iter()
                .map(|d| d.weight_count())
                .sum::<usize>()
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = vec!["conv1.weight".to_string(), "conv1.bias".to_string()];
        for i in 0..self.fires.len() {
            for part in ["squeeze", "expand1", "expand3"] {
                names.push(format!("fire{}.{part}.weight", i + 2));
                names.push(format!("fire{}.{part}.bias", i + 2));
            }
        }
        for layer in ["conv10", "den1", "den2", "den3", "den4"] {
            names.push(format!("{layer}.weight"));
            names.push(format!("{layer}.bias"));
        }
        names
    }

    /// Parameter tensors in a fixed order matching `param_names`.
    pub fn param_slices(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = vec![&self.conv1.weight, &self.conv1.bias];
        for f in &self.fires {
            for c in [&f.squeeze, &f.expand1, &f.expand3] {
                v.push(&c.weight);
                v.push(&c.bias);
            }
        }
        v.push(&self.conv10.weight);
        v.push(&self.conv10.bias);
        for d in [&self.den1, &self.den2, &self.den3, &self.den4] {
            v.push(&d.weight);
            v.push(&d.bias);
        }
        v
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = vec![&mut self.conv1.weight, &mut self.conv1.bias];
        for f in &mut self.fires {
            for c in [&mut f.squeeze, &mut f.expand1, &mut f.expand3] {
                v.push(&mut c.weight);
                v.push(&mut c.bias);
            }
        }
        v.push(&mut self.conv10.weight);
        v.push(&mut self.conv10.bias);
        for d in [&mut self.den1, &mut self.den2, &mut self.den3, &mut self.den4] {
            v.push(&mut d.weight);
            v.push(&mut d.bias);
        }
        v
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let conv = |c: &ConvLayer<T>| vec![vec![c.k_h, c.k_w, c.c_in, c.c_out], vec![c.c_out]];
        let den = |d: &DenseLayer<T>| vec![vec![d.n_in, d.n_out], vec![d.n_out]];
        let mut v = conv(&self.conv1);
        for f in &self.fires {
            v.extend(conv(&f.squeeze));
            v.extend(conv(&f.expand1));
            v.extend(conv(&f.expand3));
        }
        v.extend(conv(&self.conv10));
        for d in [&self.den1, &self.den2, &self.den3, &self.den4] {
            v.extend(den(d));
        }
        v
    }

    pub fn forward_normalized(&self, input: &Tensor<T>, t_norm: T) -> Result<T> {
        Ok(self.forward_cached(input, t_norm)?.output)
    }

    /// Forward pass over a 64×64×1 tensor recording everything `backward` needs.
    pub fn forward_cached(&self, input: &Tensor<T>, t_norm: T) -> Result<ForwardCache<T>> {
        let mut stages = Vec::with_capacity(16);
        let pre = conv2d(input, &self.conv1)?;
        let mut x = leaky_relu(&pre, LEAKY_SLOPE);
        stages.push(StageCache::Conv {
            input: input.clone(),
            pre,
        });
        x = self.pool_stage(x, &mut stages)?;
        for (i, fire) in self.fires.iter().enumerate() {
            let (out, cache) = fire_forward(&x, fire)?;
            stages.push(StageCache::Fire(cache));
            x = out;
            if POOL_AFTER_FIRE.contains(&i) {
                x = self.pool_stage(x, &mut stages)?;
            }
        }
        let pre = conv2d(&x, &self.conv10)?;
        let act = leaky_relu(&pre, LEAKY_SLOPE);
        stages.push(StageCache::Conv { input: x, pre });
        let (pooled, idx) = global_maxpool(&act)?;
        stages.push(StageCache::Global {
            in_shape: act.shape().to_vec(),
            idx,
        });
        let pooled = pooled.reshape(&[act.shape()[2]])?;

        let den1_pre = dense(&pooled, &self.den1)?;
        let latent = leaky_relu(&den1_pre, LEAKY_SLOPE);
        let head_in = concat(&latent, &Tensor::from_vec(&[1], vec![t_norm])?);
        let den2_pre = dense(&head_in, &self.den2)?;
        let den2_act = leaky_relu(&den2_pre, LEAKY_SLOPE);
        let den3_pre = dense(&den2_act, &self.den3)?;
        let den3_act = leaky_relu(&den3_pre, LEAKY_SLOPE);
        let out = dense(&den3_act, &self.den4)?;
        out.debug_check_finite();
        Ok(ForwardCache {
            stages,
            pooled,
            den1_pre,
            head_in,
            den2_pre,
            den2_act,
            den3_pre,
            den3_act,
            output: out.data()[0],
        })
    }

    fn pool_stage(&self, x: Tensor<T>, stages: &mut Vec<StageCache<T>>) -> Result<Tensor<T>> {
        let (out, idx) = maxpool2d(&x, POOL_KERNEL, POOL_STRIDE)?;
        stages.push(StageCache::Pool {
            in_shape: x.shape().to_vec(),
            idx,
        });
        Ok(out)
    }

    /// Reverse pass: accumulates d(loss)/d(param) into `grad` given
    /// d(loss)/d(output).
    pub fn backward(&self, cache: &ForwardCache<T>, grad_output: T, grad: &mut Self) -> Result<()> {
        let g = Tensor::from_vec(&[1], vec![grad_output])?;
        let g = dense_backward(&cache.den3_act, &self.den4, &g, &mut grad.den4)?;
        let g = leaky_relu_backward(&cache.den3_pre, &g, LEAKY_SLOPE);
        let g = dense_backward(&cache.den2_act, &self.den3, &g, &mut grad.den3)?;
        let g = leaky_relu_backward(&cache.den2_pre, &g, LEAKY_SLOPE);
        let g = dense_backward(&cache.head_in, &self.den2, &g, &mut grad.den2)?;
        let (g, _time_grad) = concat_backward(&[LATENT], &[1], &g)?;
        let g = leaky_relu_backward(&cache.den1_pre, &g, LEAKY_SLOPE);
        let g = dense_backward(&cache.pooled, &self.den1, &g, &mut grad.den1)?;
        let c = g.len();
        let mut g = g.reshape(&[1, 1, c])?;

        let mut fire_idx = self.fires.len();
        let n_stages = cache.stages.len();
        for (k, stage) in cache.stages.iter().enumerate().rev() {
            g = match stage {
                StageCache::Global { in_shape, idx } => global_maxpool_backward(in_shape, idx, &g)?,
                StageCache::Pool { in_shape, idx } => maxpool2d_backward(in_shape, idx, &g)?,
                StageCache::Fire(fc) => {
                    fire_idx -= 1;
                    fire_backward(&self.fires[fire_idx], fc, &g, &mut grad.fires[fire_idx])?
                }
                StageCache::Conv { input, pre } => {
                    let gp = leaky_relu_backward(pre, &g, LEAKY_SLOPE);
                    if k == 0 {
                        conv2d_backward(input, &self.conv1, &gp, &mut grad.conv1)?
                    } else {
                        debug_assert_eq!(k, n_stages - 2);
                        conv2d_backward(input, &self.conv10, &gp, &mut grad.conv10)?
                    }
                }
            };
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe(v: f32) -> TfaImage {
        TfaImage::from_values(0.0, vec![v; 4096]).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = ProSqnModel::build(Architecture::REDUCED, 1).zeros_like();
        assert_eq!(m.forward(&probe(0.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn forward_is_repeatable() {
        let m = ProSqnModel::build(Architecture::REDUCED, 42);
        let a = m.forward(&probe(0.5), 0.0).unwrap();
        assert_eq!(a.to_bits(), m.forward(&probe(0.5), 0.0).unwrap().to_bits());
    }

    #[test]
    fn rejects_unnormalized_image() {
        let m = ProSqnModel::build(Architecture::REDUCED, 0);
        assert!(matches!(m.forward(&probe(1.5), 0.0), Err(Error::Input(_))));
        assert!(matches!(m.forward(&probe(0.5), -1.0), Err(Error::Input(_))));
    }

    fn time_only(m: &ProSqnModel) -> ProSqnModel {
        let mut z = m.zeros_like();
        let n = z.den2.n_out;
        for j in 0..n {
            z.den2.weight[LATENT * n + j] = 0.01 * (j + 1) as f32;
        }
        z
    }

    #[test]
    fn time_injection_is_affine() {
        let base = ProSqnModel::build(Architecture::REDUCED, 3);
        let mut m = time_only(&base);
        m.time_scale = 100.0;
        // literal case: downstream weights zero, output constant
        let outs: Vec<f64> = [0.0, 50.0, 200.0].iter().map(|&t| m.forward(&probe(0.3), t).unwrap()).collect();
        assert!(outs.iter().all(|&o| o == outs[0]));
        // positive downstream weights keep every unit in its linear region for t >= 0
        m.den3.weight.fill(0.02);
        m.den4.weight.fill(0.5);
        let ts = [0.0, 50.0, 200.0];
        let o: Vec<f64> = ts.iter().map(|&t| m.forward(&probe(0.3), t).unwrap()).collect();
        let s1 = (o[1] - o[0]) / (ts[1] - ts[0]);
        let s2 = (o[2] - o[1]) / (ts[2] - ts[1]);
        assert!(s1 > 0.0 && ((s1 - s2) / s1).abs() < 1e-4);
    }

    #[test]
    fn time_input_is_live() {
        let mut m = ProSqnModel::build(Architecture::REDUCED, 5);
        m.time_scale = 1000.0;
        let a = m.forward(&probe(0.4), 0.0).unwrap();
        let b = m.forward(&probe(0.4), 900.0).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn param_views_agree() {
        let m = ProSqnModel::build(Architecture::REDUCED, 0);
        let names = m.param_names();
        let slices = m.param_slices();
        let shapes = m.param_shapes();
        assert_eq!(names.len(), slices.len());
        for (s, shape) in slices.iter().zip(&shapes) {
            assert_eq!(s.len(), shape.iter().product::<usize>());
        }
    }
}
