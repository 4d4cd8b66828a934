//! Adversarial, cycle, identity and structure-preserving losses, both as
//! plain functions over matrices and as differentiable tape operations.
//!
//! All reductions run in f64 regardless of the tape precision.

use serde::{Deserialize, Serialize};

use crate::connectome::Matrix;
use crate::error::{Error, Result};
use crate::model::{Discriminator, Generator, Translate};
use crate::nn::{Bound, CustomOp, Real, Tape, Tensor, Var};

/// Probabilities are clamped to [EPS, 1 − EPS] before taking logs.
pub const PROB_EPS: f64 = 1e-7;

/// How the PCC terms of the structure-preserving loss pair their arguments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpPairing {
    /// PCC(x_FC, x̃_SC) + PCC(x_SC, x̃_FC): each source against its own translation.
    #[default]
    Literal,
    /// PCC(x_SC, x̃_SC) + PCC(x_FC, x̃_FC): each translation against its paired truth.
    Paired,
}

/// Normalization of the region-wise PCC terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PccRows {
    /// 2 − r_b − (1/n)·Σ rᵢ, in [0, 4].
    #[default]
    Mean,
    /// 1 + n − r_b − Σ rᵢ, in [0, 2n + 2].
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub adv: f64,
    pub cyc: f64,
    pub id: f64,
    pub sp: f64,
    pub sp_enabled: bool,
    pub sp_pairing: SpPairing,
    pub pcc_rows: PccRows,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            adv: 1.0,
            cyc: 1.0,
            id: 1.0,
            sp: 1.0,
            sp_enabled: true,
            sp_pairing: SpPairing::Literal,
            pcc_rows: PccRows::Mean,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("adv", self.adv), ("cyc", self.cyc), ("id", self.id), ("sp", self.sp)] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "loss weight {name} must be finite and non-negative, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Unweighted loss values of one step, adversarial terms per direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub gan_g_fc: f64,
    pub gan_g_sc: f64,
    pub gan_d_fc: f64,
    pub gan_d_sc: f64,
    pub cyc: f64,
    pub id: f64,
    pub sp_mse: f64,
    pub sp_pcc: f64,
}

/// One step (or an epoch average) as logged; `sp_*` are `None` when the
/// structure-preserving loss is disabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub gan_g: f64,
    pub gan_d: f64,
    pub cyc: f64,
    pub id: f64,
    pub sp_mse: Option<f64>,
    pub sp_pcc: Option<f64>,
    pub total: f64,
}

impl LossReport {
    pub fn new(c: &LossComponents, w: &LossWeights) -> Result<Self> {
        let (total, _) = total_objective(c, w)?;
        Ok(LossReport {
            gan_g: c.gan_g_fc + c.gan_g_sc,
            gan_d: c.gan_d_fc + c.gan_d_sc,
            cyc: c.cyc,
            id: c.id,
            sp_mse: w.sp_enabled.then_some(c.sp_mse),
            sp_pcc: w.sp_enabled.then_some(c.sp_pcc),
            total,
        })
    }

    /// Component-wise mean; `None` for an empty slice.
    pub fn mean(reports: &[LossReport]) -> Option<LossReport> {
        if reports.is_empty() {
            return None;
        }
        let k = reports.len() as f64;
        let avg = |f: fn(&LossReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
        let avg_opt = |f: fn(&LossReport) -> Option<f64>| {
            reports.iter().map(f).sum::<Option<f64>>().map(|s| s / k)
        };
        Some(LossReport {
            gan_g: avg(|r| r.gan_g),
            gan_d: avg(|r| r.gan_d),
            cyc: avg(|r| r.cyc),
            id: avg(|r| r.id),
            sp_mse: avg_opt(|r| r.sp_mse),
            sp_pcc: avg_opt(|r| r.sp_pcc),
            total: avg(|r| r.total),
        })
    }
}

/// (generator_total, discriminator_total).
pub fn total_objective(c: &LossComponents, w: &LossWeights) -> Result<(f64, f64)> {
    w.validate()?;
    let sp = if w.sp_enabled { w.sp * (c.sp_mse + c.sp_pcc) } else { 0.0 };
    let g = w.adv * (c.gan_g_fc + c.gan_g_sc) + w.cyc * c.cyc + w.id * c.id + sp;
    let d = w.adv * (c.gan_d_fc + c.gan_d_sc);
    Ok((g, d))
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn nonempty(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument(format!("{what}: empty batch")));
    }
    Ok(())
}

/// −mean log D(real) − mean log(1 − D(fake)).
pub fn gan_loss_discriminator(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    nonempty(d_real, "gan_loss_discriminator")?;
    nonempty(d_fake, "gan_loss_discriminator")?;
    let real = d_real.iter().map(|&p| -clamp_prob(p).ln()).sum::<f64>() / d_real.len() as f64;
    let fake = d_fake.iter().map(|&p| -(1.0 - clamp_prob(p)).ln()).sum::<f64>() / d_fake.len() as f64;
    Ok(real + fake)
}

/// Non-saturating generator loss −mean log D(fake).
pub fn gan_loss_generator(d_fake: &[f64]) -> Result<f64> {
    nonempty(d_fake, "gan_loss_generator")?;
    Ok(d_fake.iter().map(|&p| -clamp_prob(p).ln()).sum::<f64>() / d_fake.len() as f64)
}

fn same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: b.n(),
        });
    }
    Ok(())
}

pub fn mean_abs_error(a: &Matrix, b: &Matrix) -> Result<f64> {
    same_shape(a, b)?;
    let s: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum();
    Ok(s / a.as_slice().len() as f64)
}

pub fn mean_squared_error(a: &Matrix, b: &Matrix) -> Result<f64> {
    same_shape(a, b)?;
    let s: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.as_slice().len() as f64)
}

/// Pearson correlation with ∂r/∂x and ∂r/∂y added (scaled by `scale`) into
/// the optional gradient buffers. A zero-variance operand gives r = 0 with
/// zero gradient.
fn pearson_accumulate(x: &[f64], y: &[f64], grads: Option<(&mut [f64], &mut [f64])>, scale: f64) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if is_degenerate(sxx, x) || is_degenerate(syy, y) {
        return 0.0;
    }
    let denom = (sxx * syy).sqrt();
    let r = (sxy / denom).clamp(-1.0, 1.0);
    if let Some((gx, gy)) = grads {
        for i in 0..x.len() {
            let (dx, dy) = (x[i] - mx, y[i] - my);
            gx[i] += scale * (dy / denom - r * dx / sxx);
            gy[i] += scale * (dx / denom - r * dy / syy);
        }
    }
    r
}

/// Variance indistinguishable from rounding noise at the data's magnitude.
fn is_degenerate(ss: f64, v: &[f64]) -> bool {
    let peak = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let noise = 8.0 * f64::EPSILON * peak;
    ss <= v.len() as f64 * noise * noise
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    pearson_accumulate(x, y, None, 0.0)
}

/// Brain-wide plus region-wise PCC loss for one pair of n×n matrices (row
/// major), optionally accumulating `scale`·gradients.
fn pcc_loss_accumulate(
    x: &[f64],
    y: &[f64],
    n: usize,
    rows: PccRows,
    mut grads: Option<(&mut [f64], &mut [f64])>,
    scale: f64,
) -> f64 {
    let (row_weight, offset) = match rows {
        PccRows::Mean => (1.0 / n as f64, 2.0),
        PccRows::Sum => (1.0, 1.0 + n as f64),
    };
    let r_b = pearson_accumulate(x, y, grads.as_mut().map(|(gx, gy)| (&mut **gx, &mut **gy)), -scale);
    let mut row_sum = 0.0;
    for i in 0..n {
        let span = i * n..(i + 1) * n;
        let g = grads
            .as_mut()
            .map(|(gx, gy)| (&mut gx[span.clone()], &mut gy[span.clone()]));
        row_sum += pearson_accumulate(&x[span.clone()], &y[span], g, -scale * row_weight);
    }
    offset - r_b - row_weight * row_sum
}

/// 2 − r_b − mean(rᵢ): zero for a perfect positive linear relation, 4 for a
/// perfect negative one.
pub fn pcc_loss(x: &Matrix, y: &Matrix) -> Result<f64> {
    pcc_loss_with(x, y, PccRows::Mean)
}

pub fn pcc_loss_with(x: &Matrix, y: &Matrix, rows: PccRows) -> Result<f64> {
    same_shape(x, y)?;
    if x.n() < 2 {
        return Err(Error::InvalidArgument("pcc_loss needs n ≥ 2".into()));
    }
    Ok(pcc_loss_accumulate(x.as_slice(), y.as_slice(), x.n(), rows, None, 0.0))
}

fn paired_batches(a: &[Matrix], b: &[Matrix], what: &str) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "{what}: batches must be non-empty and paired ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a[0].n();
    for m in a.iter().chain(b) {
        same_shape(&a[0], m).map_err(|_| Error::DimensionMismatch { expected: n, found: m.n() })?;
    }
    Ok(())
}

fn batch_mean(a: &[Matrix], b: &[Matrix], f: impl Fn(&Matrix, &Matrix) -> Result<f64>) -> Result<f64> {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += f(x, y)?;
    }
    Ok(s / a.len() as f64)
}

/// mean‖G_SC(G_FC(x_SC)) − x_SC‖₁/n² + mean‖G_FC(G_SC(x_FC)) − x_FC‖₁/n².
pub fn cycle_loss(
    g_fc: &dyn Translate,
    g_sc: &dyn Translate,
    x_fc: &[Matrix],
    x_sc: &[Matrix],
) -> Result<f64> {
    paired_batches(x_fc, x_sc, "cycle_loss")?;
    let rec_sc = g_sc.translate_matrices(&g_fc.translate_matrices(x_sc)?)?;
    let rec_fc = g_fc.translate_matrices(&g_sc.translate_matrices(x_fc)?)?;
    Ok(batch_mean(&rec_sc, x_sc, mean_abs_error)? + batch_mean(&rec_fc, x_fc, mean_abs_error)?)
}

/// mean‖G_FC(x_FC) − x_FC‖₁/n² + mean‖G_SC(x_SC) − x_SC‖₁/n².
pub fn identity_loss(
    g_fc: &dyn Translate,
    g_sc: &dyn Translate,
    x_fc: &[Matrix],
    x_sc: &[Matrix],
) -> Result<f64> {
    paired_batches(x_fc, x_sc, "identity_loss")?;
    let idt_fc = g_fc.translate_matrices(x_fc)?;
    let idt_sc = g_sc.translate_matrices(x_sc)?;
    Ok(batch_mean(&idt_fc, x_fc, mean_abs_error)? + batch_mean(&idt_sc, x_sc, mean_abs_error)?)
}

/// (sp_mse, sp_pcc) for a subject-paired batch, where x̃_fc = G_FC(x_sc) and
/// x̃_sc = G_SC(x_fc).
pub fn sp_loss(
    x_fc: &[Matrix],
    x_sc: &[Matrix],
    fake_fc: &[Matrix],
    fake_sc: &[Matrix],
    pairing: SpPairing,
    rows: PccRows,
) -> Result<(f64, f64)> {
    paired_batches(x_fc, x_sc, "sp_loss")?;
    paired_batches(x_fc, fake_fc, "sp_loss")?;
    paired_batches(x_fc, fake_sc, "sp_loss")?;
    let mse = batch_mean(x_fc, fake_fc, mean_squared_error)? + batch_mean(x_sc, fake_sc, mean_squared_error)?;
    let pcc = |a: &Matrix, b: &Matrix| pcc_loss_with(a, b, rows);
    let pcc = match pairing {
        SpPairing::Literal => batch_mean(x_fc, fake_sc, pcc)? + batch_mean(x_sc, fake_fc, pcc)?,
        SpPairing::Paired => batch_mean(x_sc, fake_sc, pcc)? + batch_mean(x_fc, fake_fc, pcc)?,
    };
    Ok((mse, pcc))
}

// ---- differentiable versions -------------------------------------------

fn to_f64<T: Real>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.as_f64()).collect()
}

fn from_f64<T: Real>(shape: &[usize], v: &[f64]) -> Tensor<T> {
    Tensor::from_fn(shape, |i| T::of(v[i]))
}

fn check_same<T: Real>(tape: &Tape<T>, a: Var, b: Var, what: &str) -> Result<()> {
    if tape.value(a).shape() != tape.value(b).shape() {
        return Err(Error::Shape(format!(
            "{what}: {:?} vs {:?}",
            tape.value(a).shape(),
            tape.value(b).shape()
        )));
    }
    Ok(())
}

struct MeanAbsDiff;

impl<T: Real> CustomOp<T> for MeanAbsDiff {
    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, grad_out: &Tensor<T>) -> Vec<Tensor<T>> {
        let scale = grad_out.item() / T::of(inputs[0].numel() as f64);
        let ga = Tensor::from_fn(inputs[0].shape(), |i| {
            let d = inputs[0].data()[i] - inputs[1].data()[i];
            if d > T::zero() {
                scale
            } else if d < T::zero() {
                -scale
            } else {
                T::zero()
            }
        });
        let gb = ga.map(|v| -v);
        vec![ga, gb]
    }
}

struct MeanSqDiff;

impl<T: Real> CustomOp<T> for MeanSqDiff {
    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, grad_out: &Tensor<T>) -> Vec<Tensor<T>> {
        let scale = T::of(2.0) * grad_out.item() / T::of(inputs[0].numel() as f64);
        let ga = Tensor::from_fn(inputs[0].shape(), |i| scale * (inputs[0].data()[i] - inputs[1].data()[i]));
        let gb = ga.map(|v| -v);
        vec![ga, gb]
    }
}

/// Mean absolute difference over all elements (equal-size batch members, so
/// this is also the batch mean of per-matrix means).
pub fn l1_loss<T: Real>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    check_same(tape, a, b, "l1_loss")?;
    let (x, y) = (to_f64(tape.value(a)), to_f64(tape.value(b)));
    let v = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64;
    Ok(tape.custom(&[a, b], Tensor::scalar(T::of(v)), Box::new(MeanAbsDiff)))
}

pub fn mse_loss<T: Real>(tape: &mut Tape<T>, a: Var, b: Var) -> Result<Var> {
    check_same(tape, a, b, "mse_loss")?;
    let (x, y) = (to_f64(tape.value(a)), to_f64(tape.value(b)));
    let v = x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len() as f64;
    Ok(tape.custom(&[a, b], Tensor::scalar(T::of(v)), Box::new(MeanSqDiff)))
}

struct PccLossOp {
    rows: PccRows,
}

impl PccLossOp {
    fn run(&self, x: &[f64], y: &[f64], n: usize, grads: Option<(&mut [f64], &mut [f64])>, scale: f64) -> f64 {
        let per = n * n;
        let batch = x.len() / per;
        let mut total = 0.0;
        let mut grads = grads;
        for b in 0..batch {
            let span = b * per..(b + 1) * per;
            let g = grads
                .as_mut()
                .map(|(gx, gy)| (&mut gx[span.clone()], &mut gy[span.clone()]));
            total += pcc_loss_accumulate(&x[span.clone()], &y[span], n, self.rows, g, scale / batch as f64);
        }
        total / batch as f64
    }
}

impl<T: Real> CustomOp<T> for PccLossOp {
    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, grad_out: &Tensor<T>) -> Vec<Tensor<T>> {
        let shape = inputs[0].shape();
        let n = shape[shape.len() - 1];
        let (x, y) = (to_f64(inputs[0]), to_f64(inputs[1]));
        let mut gx = vec![0.0; x.len()];
        let mut gy = vec![0.0; y.len()];
        self.run(&x, &y, n, Some((&mut gx, &mut gy)), grad_out.item().as_f64());
        vec![from_f64(shape, &gx), from_f64(shape, &gy)]
    }
}

/// Batch mean of the PCC loss over B×1×n×n tensors.
pub fn pcc_loss_var<T: Real>(tape: &mut Tape<T>, a: Var, b: Var, rows: PccRows) -> Result<Var> {
    check_same(tape, a, b, "pcc_loss")?;
    let (_, _, h, w) = tape.value(a).dims4()?;
    if h != w || h < 2 {
        return Err(Error::Shape(format!("pcc_loss needs square n ≥ 2, got {h}×{w}")));
    }
    let op = PccLossOp { rows };
    let v = op.run(&to_f64(tape.value(a)), &to_f64(tape.value(b)), h, None, 0.0);
    Ok(tape.custom(&[a, b], Tensor::scalar(T::of(v)), Box::new(op)))
}

struct GanDiscriminatorOp;

impl<T: Real> CustomOp<T> for GanDiscriminatorOp {
    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, grad_out: &Tensor<T>) -> Vec<Tensor<T>> {
        let g = grad_out.item().as_f64();
        let real_n = inputs[0].numel() as f64;
        let fake_n = inputs[1].numel() as f64;
        let real = Tensor::from_fn(inputs[0].shape(), |i| {
            let p = inputs[0].data()[i].as_f64();
            T::of(if clamped(p) { 0.0 } else { -g / (real_n * p) })
        });
        let fake = Tensor::from_fn(inputs[1].shape(), |i| {
            let p = inputs[1].data()[i].as_f64();
            T::of(if clamped(p) { 0.0 } else { g / (fake_n * (1.0 - p)) })
        });
        vec![real, fake]
    }
}

struct GanGeneratorOp;

impl<T: Real> CustomOp<T> for GanGeneratorOp {
    fn backward(&self, inputs: &[&Tensor<T>], _: &Tensor<T>, grad_out: &Tensor<T>) -> Vec<Tensor<T>> {
        let g = grad_out.item().as_f64();
        let k = inputs[0].numel() as f64;
        vec![Tensor::from_fn(inputs[0].shape(), |i| {
            let p = inputs[0].data()[i].as_f64();
            T::of(if clamped(p) { 0.0 } else { -g / (k * p) })
        })]
    }
}

fn clamped(p: f64) -> bool {
    !(PROB_EPS..=1.0 - PROB_EPS).contains(&p)
}

pub fn gan_d_var<T: Real>(tape: &mut Tape<T>, d_real: Var, d_fake: Var) -> Result<Var> {
    let v = gan_loss_discriminator(&to_f64(tape.value(d_real)), &to_f64(tape.value(d_fake)))?;
    Ok(tape.custom(&[d_real, d_fake], Tensor::scalar(T::of(v)), Box::new(GanDiscriminatorOp)))
}

pub fn gan_g_var<T: Real>(tape: &mut Tape<T>, d_fake: Var) -> Result<Var> {
    let v = gan_loss_generator(&to_f64(tape.value(d_fake)))?;
    Ok(tape.custom(&[d_fake], Tensor::scalar(T::of(v)), Box::new(GanGeneratorOp)))
}

// ---- composite objective on a tape --------------------------------------

/// All generator outputs needed by one step.
#[derive(Debug, Clone, Copy)]
pub struct Translations {
    /// G_FC(x_SC)
    pub fake_fc: Var,
    /// G_SC(x_FC)
    pub fake_sc: Var,
    /// G_FC(G_SC(x_FC))
    pub rec_fc: Var,
    /// G_SC(G_FC(x_SC))
    pub rec_sc: Var,
    /// G_FC(x_FC)
    pub idt_fc: Var,
    /// G_SC(x_SC)
    pub idt_sc: Var,
}

pub fn translate_all<T: Real>(
    tape: &mut Tape<T>,
    g_fc: (&Generator<T>, &Bound),
    g_sc: (&Generator<T>, &Bound),
    x_fc: Var,
    x_sc: Var,
) -> Result<Translations> {
    let fake_fc = g_fc.0.forward(tape, g_fc.1, x_sc)?;
    let fake_sc = g_sc.0.forward(tape, g_sc.1, x_fc)?;
    let rec_fc = g_fc.0.forward(tape, g_fc.1, fake_sc)?;
    let rec_sc = g_sc.0.forward(tape, g_sc.1, fake_fc)?;
    let idt_fc = g_fc.0.forward(tape, g_fc.1, x_fc)?;
    let idt_sc = g_sc.0.forward(tape, g_sc.1, x_sc)?;
    Ok(Translations {
        fake_fc,
        fake_sc,
        rec_fc,
        rec_sc,
        idt_fc,
        idt_sc,
    })
}

/// Scalar nodes of the generator objective.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorTerms {
    pub gan_g_fc: Var,
    pub gan_g_sc: Var,
    pub cyc: Var,
    pub id: Var,
    pub sp_mse: Option<Var>,
    pub sp_pcc: Option<Var>,
    pub total: Var,
}

impl GeneratorTerms {
    /// Named scalar terms, for diagnostics.
    pub fn named(&self) -> Vec<(&'static str, Var)> {
        let mut v = vec![
            ("gan_g_fc", self.gan_g_fc),
            ("gan_g_sc", self.gan_g_sc),
            ("cyc", self.cyc),
            ("id", self.id),
        ];
        v.extend(self.sp_mse.map(|s| ("sp_mse", s)));
        v.extend(self.sp_pcc.map(|s| ("sp_pcc", s)));
        v.push(("total", self.total));
        v
    }
}

pub fn cycle_loss_var<T: Real>(tape: &mut Tape<T>, t: &Translations, x_fc: Var, x_sc: Var) -> Result<Var> {
    let a = l1_loss(tape, t.rec_sc, x_sc)?;
    let b = l1_loss(tape, t.rec_fc, x_fc)?;
    tape.lin_comb(&[(a, T::one()), (b, T::one())])
}

pub fn identity_loss_var<T: Real>(tape: &mut Tape<T>, t: &Translations, x_fc: Var, x_sc: Var) -> Result<Var> {
    let a = l1_loss(tape, t.idt_fc, x_fc)?;
    let b = l1_loss(tape, t.idt_sc, x_sc)?;
    tape.lin_comb(&[(a, T::one()), (b, T::one())])
}

/// (sp_mse, sp_pcc) nodes.
pub fn sp_loss_var<T: Real>(
    tape: &mut Tape<T>,
    t: &Translations,
    x_fc: Var,
    x_sc: Var,
    pairing: SpPairing,
    rows: PccRows,
) -> Result<(Var, Var)> {
    let m1 = mse_loss(tape, x_fc, t.fake_fc)?;
    let m2 = mse_loss(tape, x_sc, t.fake_sc)?;
    let mse = tape.lin_comb(&[(m1, T::one()), (m2, T::one())])?;
    let (p1, p2) = match pairing {
        SpPairing::Literal => (
            pcc_loss_var(tape, x_fc, t.fake_sc, rows)?,
            pcc_loss_var(tape, x_sc, t.fake_fc, rows)?,
        ),
        SpPairing::Paired => (
            pcc_loss_var(tape, x_sc, t.fake_sc, rows)?,
            pcc_loss_var(tape, x_fc, t.fake_fc, rows)?,
        ),
    };
    let pcc = tape.lin_comb(&[(p1, T::one()), (p2, T::one())])?;
    Ok((mse, pcc))
}

/// Builds the weighted generator objective. The discriminators' parameters
/// should be bound without gradients.
pub fn generator_objective<T: Real>(
    tape: &mut Tape<T>,
    t: &Translations,
    d_fc: (&Discriminator<T>, &Bound),
    d_sc: (&Discriminator<T>, &Bound),
    x_fc: Var,
    x_sc: Var,
    w: &LossWeights,
) -> Result<GeneratorTerms> {
    w.validate()?;
    let p_fc = d_fc.0.forward(tape, d_fc.1, t.fake_fc)?;
    let p_sc = d_sc.0.forward(tape, d_sc.1, t.fake_sc)?;
    let gan_g_fc = gan_g_var(tape, p_fc)?;
    let gan_g_sc = gan_g_var(tape, p_sc)?;
    let cyc = cycle_loss_var(tape, t, x_fc, x_sc)?;
    let id = identity_loss_var(tape, t, x_fc, x_sc)?;
    let mut terms = vec![
        (gan_g_fc, T::of(w.adv)),
        (gan_g_sc, T::of(w.adv)),
        (cyc, T::of(w.cyc)),
        (id, T::of(w.id)),
    ];
    let (sp_mse, sp_pcc) = if w.sp_enabled {
        let (mse, pcc) = sp_loss_var(tape, t, x_fc, x_sc, w.sp_pairing, w.pcc_rows)?;
        terms.push((mse, T::of(w.sp)));
        terms.push((pcc, T::of(w.sp)));
        (Some(mse), Some(pcc))
    } else {
        (None, None)
    };
    let total = tape.lin_comb(&terms)?;
    Ok(GeneratorTerms {
        gan_g_fc,
        gan_g_sc,
        cyc,
        id,
        sp_mse,
        sp_pcc,
        total,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct DiscriminatorTerms {
    pub gan_d_fc: Var,
    pub gan_d_sc: Var,
    pub total: Var,
}

/// λ_adv·(gan_d_FC + gan_d_SC) on real batches versus (detached) fakes.
pub fn discriminator_objective<T: Real>(
    tape: &mut Tape<T>,
    d_fc: (&Discriminator<T>, &Bound),
    d_sc: (&Discriminator<T>, &Bound),
    real_fc: Var,
    real_sc: Var,
    fake_fc: Var,
    fake_sc: Var,
    w: &LossWeights,
) -> Result<DiscriminatorTerms> {
    w.validate()?;
    let r_fc = d_fc.0.forward(tape, d_fc.1, real_fc)?;
    let f_fc = d_fc.0.forward(tape, d_fc.1, fake_fc)?;
    let r_sc = d_sc.0.forward(tape, d_sc.1, real_sc)?;
    let f_sc = d_sc.0.forward(tape, d_sc.1, fake_sc)?;
    let gan_d_fc = gan_d_var(tape, r_fc, f_fc)?;
    let gan_d_sc = gan_d_var(tape, r_sc, f_sc)?;
    let total = tape.lin_comb(&[(gan_d_fc, T::of(w.adv)), (gan_d_sc, T::of(w.adv))])?;
    Ok(DiscriminatorTerms {
        gan_d_fc,
        gan_d_sc,
        total,
    })
}
