//! The four translation networks: generators G_FC (SC→FC) and G_SC (FC→SC)
//! and one discriminator per domain.
//!
//! Generator: conv 3×3 (1→w₁) → conv 3×3 stride 2 (w₁→w₂) → conv 3×3
//! (w₂→w₂) → transposed conv 4×4 stride 2 (w₂→w₁) → conv 3×3 (w₁→1), all
//! hidden layers leaky-ReLU, then tanh (FC) or sigmoid (SC), a (X+Xᵀ)/2
//! layer and the domain's diagonal rule. Discriminator: two stride-2 3×3
//! convs, a dense head and a sigmoid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::connectome::{Connectome, Domain, Matrix};
use crate::error::{Error, Result};
use crate::nn::{Activation, Bound, ParamSet, Real, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub gen_widths: [usize; 2],
    pub disc_widths: [usize; 2],
}

impl ModelConfig {
    pub const MIN_NODES: usize = 8;

    pub fn new(n: usize) -> Self {
        ModelConfig {
            n,
            gen_widths: [16, 32],
            disc_widths: [16, 32],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < Self::MIN_NODES {
            return Err(Error::InvalidArgument(format!(
                "n = {} is too small for two stride-2 stages (need at least {})",
                self.n,
                Self::MIN_NODES
            )));
        }
        if self.gen_widths.contains(&0) || self.disc_widths.contains(&0) {
            return Err(Error::InvalidArgument("channel widths must be positive".into()));
        }
        // the decoder must be able to cover n before cropping
        if 2 * self.bottleneck_side() < self.n {
            return Err(Error::InvalidArgument(format!("decoder cannot reach n = {}", self.n)));
        }
        Ok(())
    }

    /// Spatial side after a 3×3, stride-2, pad-1 convolution.
    fn halve(side: usize) -> usize {
        (side - 1) / 2 + 1
    }

    pub fn bottleneck_side(&self) -> usize {
        Self::halve(self.n)
    }

    pub fn disc_side(&self) -> usize {
        Self::halve(Self::halve(self.n))
    }
}

fn he_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor<f64> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.random_range(-bound..bound))
}

// generator parameter order
const G_ENC1_W: usize = 0;
const G_ENC1_B: usize = 1;
const G_ENC2_W: usize = 2;
const G_ENC2_B: usize = 3;
const G_MID_W: usize = 4;
const G_MID_B: usize = 5;
const G_DEC_W: usize = 6;
const G_DEC_B: usize = 7;
const G_OUT_W: usize = 8;
const G_OUT_B: usize = 9;

// discriminator parameter order
const D_CONV1_W: usize = 0;
const D_CONV1_B: usize = 1;
const D_CONV2_W: usize = 2;
const D_CONV2_B: usize = 3;
const D_HEAD_W: usize = 4;
const D_HEAD_B: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    target: Domain,
    config: ModelConfig,
    params: ParamSet<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    source: Domain,
    config: ModelConfig,
    params: ParamSet<T>,
}

fn generator_params(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<ParamSet<f64>> {
    let [w1, w2] = cfg.gen_widths;
    let mut p = ParamSet::new();
    p.add("enc1.weight", he_uniform(rng, &[w1, 1, 3, 3], 9))?;
    p.add("enc1.bias", Tensor::zeros(&[w1]))?;
    p.add("enc2.weight", he_uniform(rng, &[w2, w1, 3, 3], w1 * 9))?;
    p.add("enc2.bias", Tensor::zeros(&[w2]))?;
    p.add("mid.weight", he_uniform(rng, &[w2, w2, 3, 3], w2 * 9))?;
    p.add("mid.bias", Tensor::zeros(&[w2]))?;
    // transposed kernel is stored in × out × K × K; each output sees w₂·4 taps
    p.add("dec.weight", he_uniform(rng, &[w2, w1, 4, 4], w2 * 4))?;
    p.add("dec.bias", Tensor::zeros(&[w1]))?;
    p.add("out.weight", he_uniform(rng, &[1, w1, 3, 3], w1 * 9))?;
    p.add("out.bias", Tensor::zeros(&[1]))?;
    Ok(p)
}

fn discriminator_params(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Result<ParamSet<f64>> {
    let [d1, d2] = cfg.disc_widths;
    let side = cfg.disc_side();
    let flat = d2 * side * side;
    let mut p = ParamSet::new();
    p.add("conv1.weight", he_uniform(rng, &[d1, 1, 3, 3], 9))?;
    p.add("conv1.bias", Tensor::zeros(&[d1]))?;
    p.add("conv2.weight", he_uniform(rng, &[d2, d1, 3, 3], d1 * 9))?;
    p.add("conv2.bias", Tensor::zeros(&[d2]))?;
    p.add("head.weight", he_uniform(rng, &[flat, 1], flat))?;
    p.add("head.bias", Tensor::zeros(&[1]))?;
    Ok(p)
}

fn check_params<T: Real>(params: &ParamSet<T>, expected: &ParamSet<f64>, what: &str) -> Result<()> {
    if params.len() != expected.len() {
        return Err(Error::Shape(format!(
            "{what}: expected {} parameter tensors, got {}",
            expected.len(),
            params.len()
        )));
    }
    for (p, e) in params.iter().zip(expected.iter()) {
        if p.name != e.name || p.value.shape() != e.value.shape() {
            return Err(Error::Shape(format!(
                "{what}: parameter {} has shape {:?}, expected {} {:?}",
                p.name,
                p.value.shape(),
                e.name,
                e.value.shape()
            )));
        }
    }
    Ok(())
}

/// Batch of matrices as a B×1×n×n tensor.
pub fn stack<T: Real>(xs: &[&Matrix]) -> Result<Tensor<T>> {
    let n = xs.first().map_or(0, |m| m.n());
    if xs.iter().any(|m| m.n() != n) {
        return Err(Error::Shape("matrices in a batch must share n".into()));
    }
    let data = xs.iter().flat_map(|m| m.as_slice().iter().map(|&v| T::of(v))).collect();
    Tensor::new(vec![xs.len(), 1, n, n], data)
}

/// Splits a B×1×n×n tensor back into matrices.
pub fn unstack<T: Real>(t: &Tensor<T>) -> Result<Vec<Matrix>> {
    let (b, c, h, w) = t.dims4()?;
    if c != 1 || h != w {
        return Err(Error::Shape(format!("expected B×1×n×n, got {:?}", t.shape())));
    }
    t.data()
        .chunks(h * w)
        .take(b)
        .map(|chunk| Matrix::from_vec(h, chunk.iter().map(|v| v.as_f64()).collect()))
        .collect()
}

impl<T: Real> Generator<T> {
    pub fn from_params(target: Domain, config: ModelConfig, params: ParamSet<T>) -> Result<Self> {
        config.validate()?;
        let expected = generator_params(&config, &mut ChaCha8Rng::seed_from_u64(0))?;
        check_params(&params, &expected, "generator")?;
        Ok(Generator { target, config, params })
    }

    pub fn target(&self) -> Domain {
        self.target
    }

    pub fn source(&self) -> Domain {
        self.target.other()
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> Generator<U> {
        Generator {
            target: self.target,
            config: self.config,
            params: self.params.cast(),
        }
    }

    /// Records the forward pass for a B×1×n×n input.
    pub fn forward(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let n = self.config.n;
        let (_, c, h, w) = tape.value(x).dims4()?;
        if c != 1 || h != n || w != n {
            return Err(Error::Shape(format!(
                "generator expects B×1×{n}×{n}, got {:?}",
                tape.value(x).shape()
            )));
        }
        let lrelu = Activation::LEAKY;
        let h = tape.conv2d(x, p[G_ENC1_W], 1, 1)?;
        let h = tape.add_channel_bias(h, p[G_ENC1_B])?;
        let h = tape.activation(h, lrelu);
        let h = tape.conv2d(h, p[G_ENC2_W], 2, 1)?;
        let h = tape.add_channel_bias(h, p[G_ENC2_B])?;
        let h = tape.activation(h, lrelu);
        let h = tape.conv2d(h, p[G_MID_W], 1, 1)?;
        let h = tape.add_channel_bias(h, p[G_MID_B])?;
        let h = tape.activation(h, lrelu);
        let h = tape.conv_transpose2d(h, p[G_DEC_W], 2, 1, Some((n, n)))?;
        let h = tape.add_channel_bias(h, p[G_DEC_B])?;
        let h = tape.activation(h, lrelu);
        let h = tape.conv2d(h, p[G_OUT_W], 1, 1)?;
        let h = tape.add_channel_bias(h, p[G_OUT_B])?;
        let h = tape.activation(h, output_activation(self.target));
        let h = tape.symmetrize(h)?;
        tape.fill_diagonal(h, T::of(self.target.diagonal()))
    }

    /// Forward pass without gradient bookkeeping.
    pub fn apply(&self, x: Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let x = tape.constant(x);
        let y = self.forward(&mut tape, &p, x)?;
        Ok(tape.value(y).clone())
    }

    /// x̃ = G(x) for a connectome of the generator's source domain.
    pub fn translate(&self, x: &Connectome) -> Result<Connectome> {
        Ok(self.translate_batch(std::slice::from_ref(x))?.remove(0))
    }

    pub fn translate_batch(&self, xs: &[Connectome]) -> Result<Vec<Connectome>> {
        for x in xs {
            if x.domain() != self.source() {
                return Err(Error::DomainMismatch {
                    expected: self.source(),
                    found: x.domain(),
                });
            }
            if x.n() != self.config.n {
                return Err(Error::DimensionMismatch {
                    expected: self.config.n,
                    found: x.n(),
                });
            }
        }
        let mats: Vec<&Matrix> = xs.iter().map(|x| x.values()).collect();
        let out = unstack(&self.apply(stack(&mats)?)?)?;
        out.into_iter()
            .zip(xs)
            .map(|(m, x)| Connectome::new(self.target, m, x.subject_id(), x.label()))
            .collect()
    }
}

fn output_activation(target: Domain) -> Activation {
    match target {
        Domain::Fc => Activation::Tanh,
        Domain::Sc => Activation::Sigmoid,
    }
}

impl<T: Real> Discriminator<T> {
    pub fn from_params(source: Domain, config: ModelConfig, params: ParamSet<T>) -> Result<Self> {
        config.validate()?;
        let expected = discriminator_params(&config, &mut ChaCha8Rng::seed_from_u64(0))?;
        check_params(&params, &expected, "discriminator")?;
        Ok(Discriminator { source, config, params })
    }

    pub fn source(&self) -> Domain {
        self.source
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn cast<U: Real>(&self) -> Discriminator<U> {
        Discriminator {
            source: self.source,
            config: self.config,
            params: self.params.cast(),
        }
    }

    /// Records the forward pass; returns B×1 probabilities.
    pub fn forward(&self, tape: &mut Tape<T>, p: &Bound, x: Var) -> Result<Var> {
        let n = self.config.n;
        let (b, c, h, w) = tape.value(x).dims4()?;
        if c != 1 || h != n || w != n {
            return Err(Error::Shape(format!(
                "discriminator expects B×1×{n}×{n}, got {:?}",
                tape.value(x).shape()
            )));
        }
        let lrelu = Activation::LEAKY;
        let h = tape.conv2d(x, p[D_CONV1_W], 2, 1)?;
        let h = tape.add_channel_bias(h, p[D_CONV1_B])?;
        let h = tape.activation(h, lrelu);
        let h = tape.conv2d(h, p[D_CONV2_W], 2, 1)?;
        let h = tape.add_channel_bias(h, p[D_CONV2_B])?;
        let h = tape.activation(h, lrelu);
        let flat = tape.value(h).numel() / b;
        let h = tape.reshape(h, &[b, flat])?;
        let h = tape.dense(h, p[D_HEAD_W], p[D_HEAD_B])?;
        Ok(tape.activation(h, Activation::Sigmoid))
    }

    /// Probability that `x` is a real connectome of the source domain.
    pub fn discriminate(&self, x: &Connectome) -> Result<f64> {
        if x.domain() != self.source {
            return Err(Error::DomainMismatch {
                expected: self.source,
                found: x.domain(),
            });
        }
        if x.n() != self.config.n {
            return Err(Error::DimensionMismatch {
                expected: self.config.n,
                found: x.n(),
            });
        }
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape, false);
        let x = tape.constant(stack(&[x.values()])?);
        let y = self.forward(&mut tape, &p, x)?;
        Ok(tape.value(y).item().as_f64())
    }
}

/// The four networks of the translation model.
#[derive(Debug, Clone, PartialEq)]
pub struct Models<T> {
    /// SC → FC.
    pub g_fc: Generator<T>,
    /// FC → SC.
    pub g_sc: Generator<T>,
    pub d_fc: Discriminator<T>,
    pub d_sc: Discriminator<T>,
}

impl<T: Real> Models<T> {
    pub fn config(&self) -> &ModelConfig {
        self.g_fc.config()
    }

    pub fn cast<U: Real>(&self) -> Models<U> {
        Models {
            g_fc: self.g_fc.cast(),
            g_sc: self.g_sc.cast(),
            d_fc: self.d_fc.cast(),
            d_sc: self.d_sc.cast(),
        }
    }
}

/// Seeded He-uniform initialization; biases start at zero. Each network
/// draws from its own ChaCha stream, so the result depends only on
/// (`config`, `seed`).
pub fn init_models<T: Real>(config: &ModelConfig, seed: u64) -> Result<Models<T>> {
    config.validate()?;
    let stream = |k: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        rng
    };
    let g_fc = generator_params(config, &mut stream(0))?.cast();
    let g_sc = generator_params(config, &mut stream(1))?.cast();
    let d_fc = discriminator_params(config, &mut stream(2))?.cast();
    let d_sc = discriminator_params(config, &mut stream(3))?.cast();
    Ok(Models {
        g_fc: Generator::from_params(Domain::Fc, *config, g_fc)?,
        g_sc: Generator::from_params(Domain::Sc, *config, g_sc)?,
        d_fc: Discriminator::from_params(Domain::Fc, *config, d_fc)?,
        d_sc: Discriminator::from_params(Domain::Sc, *config, d_sc)?,
    })
}

/// A batch map between connectome matrices; implemented by the generators
/// and by fixtures such as [`IdentityMap`].
pub trait Translate {
    fn translate_matrices(&self, xs: &[Matrix]) -> Result<Vec<Matrix>>;
}

impl<T: Real> Translate for Generator<T> {
    fn translate_matrices(&self, xs: &[Matrix]) -> Result<Vec<Matrix>> {
        let refs: Vec<&Matrix> = xs.iter().collect();
        unstack(&self.apply(stack(&refs)?)?)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMap;

impl Translate for IdentityMap {
    fn translate_matrices(&self, xs: &[Matrix]) -> Result<Vec<Matrix>> {
        Ok(xs.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_connectome(domain: Domain, n: usize, seed: u64) -> Connectome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (lo, hi) = domain.range();
        let mut m = Matrix::from_fn(n, |_, _| rng.random_range(lo..hi));
        m = crate::connectome::symmetrize(&m);
        for i in 0..n {
            m.set(i, i, domain.diagonal());
        }
        Connectome::new(domain, m, "s", None).unwrap()
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = ModelConfig::new(16);
        let a = init_models::<f32>(&cfg, 7).unwrap();
        let b = init_models::<f32>(&cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = init_models::<f32>(&cfg, 8).unwrap();
        assert_ne!(a.g_fc.params().fingerprint(), c.g_fc.params().fingerprint());
    }

    #[test]
    fn rejects_small_n() {
        assert!(init_models::<f32>(&ModelConfig::new(7), 0).is_err());
        assert!(init_models::<f32>(&ModelConfig::new(8), 0).is_ok());
    }

    #[test]
    fn output_shape_for_odd_and_even_n() {
        for n in [8, 9, 15, 16, 33] {
            let models = init_models::<f32>(&ModelConfig::new(n), 1).unwrap();
            let x = random_connectome(Domain::Sc, n, 3);
            let y = models.g_fc.translate(&x).unwrap();
            assert_eq!(y.n(), n);
            assert_eq!(y.domain(), Domain::Fc);
        }
    }

    #[test]
    fn outputs_respect_domain_invariants() {
        let models = init_models::<f32>(&ModelConfig::new(12), 2).unwrap();
        for seed in 0..10 {
            let fc = models.g_fc.translate(&random_connectome(Domain::Sc, 12, seed)).unwrap();
            assert!(fc.values().is_symmetric());
            let sc = models.g_sc.translate(&random_connectome(Domain::Fc, 12, seed)).unwrap();
            assert!(sc.values().is_symmetric());
            for i in 0..12 {
                assert_eq!(fc.values().get(i, i), 1.0);
                assert_eq!(sc.values().get(i, i), 0.0);
            }
        }
    }

    #[test]
    fn domain_and_size_mismatch() {
        let models = init_models::<f32>(&ModelConfig::new(10), 2).unwrap();
        let fc = random_connectome(Domain::Fc, 10, 1);
        assert!(matches!(models.g_fc.translate(&fc), Err(Error::DomainMismatch { .. })));
        let small = random_connectome(Domain::Sc, 9, 1);
        assert!(matches!(models.g_fc.translate(&small), Err(Error::DimensionMismatch { .. })));
        assert!(models.d_sc.discriminate(&fc).is_err());
    }

    #[test]
    fn discriminator_probability_in_open_interval() {
        let models = init_models::<f32>(&ModelConfig::new(16), 4).unwrap();
        for seed in 0..5 {
            let p = models.d_fc.discriminate(&random_connectome(Domain::Fc, 16, seed)).unwrap();
            assert!(p > 0.0 && p < 1.0 && p.is_finite());
        }
    }
}
