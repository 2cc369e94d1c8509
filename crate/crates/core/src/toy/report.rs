use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    lora_grad_check, process_sequence, quadratic_loss, FusionBlock, GradCheck, LoraLinear, MemoryAttention,
    RetentionPolicy, Tensor3, ToyError,
};

/// Fusion followed by a per-pixel adapted projection to token space.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    pub fusion: FusionBlock,
    pub proj: LoraLinear,
}

impl ToyEncoder {
    pub fn new(channels: usize, dim: usize, rank: usize, depth: usize, rng: &mut impl Rng) -> Result<Self, ToyError> {
        let s = 1.0 / (channels as f64).sqrt();
        let w0 = DMatrix::from_fn(dim, channels, |_, _| rng.gen_range(-s..s));
        Ok(Self {
            fusion: FusionBlock::new(channels, depth, rng)?,
            proj: LoraLinear::new(w0, rank, rng)?,
        })
    }

    /// One token per pixel, row-major.
    pub fn forward(&self, g: &Tensor3, p: &Tensor3) -> Result<DMatrix<f64>, ToyError> {
        let fused = self.fusion.fuse(g, p)?;
        self.project(&fused, |f| self.proj.forward(f))
    }

    /// The frozen path: base projection of the image features alone.
    pub fn base_forward(&self, g: &Tensor3) -> Result<DMatrix<f64>, ToyError> {
        self.project(g, |f| Ok(self.proj.w0() * f))
    }

    fn project(
        &self,
        t: &Tensor3,
        f: impl Fn(&DVector<f64>) -> Result<DVector<f64>, ToyError>,
    ) -> Result<DMatrix<f64>, ToyError> {
        let d = self.proj.shape().0;
        let mut out = DMatrix::zeros(t.height * t.width, d);
        for y in 0..t.height {
            for x in 0..t.width {
                let v = f(&DVector::from_column_slice(t.pixel(y, x)))?;
                out.row_mut(y * t.width + x).copy_from(&v.transpose());
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LoraSection {
    pub full_rank_forward_rel_err: f64,
    pub grad_check: GradCheck,
    pub w0_bitwise_frozen_after_100_steps: bool,
    pub loss_decreased: bool,
    pub rank_bound_enforced: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FusionSection {
    pub zero_init_identity_depth1: bool,
    pub zero_init_identity_depth3: bool,
    pub residual_max_abs_after_one_step: f64,
    pub point_branch_open_after_one_step: bool,
    pub residual_linear_in_weights: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemorySection {
    pub full_retention_bootstrap_entries: usize,
    pub fifo7_frames: Vec<usize>,
    pub bootstrap_changes_frame0: bool,
    pub max_attention_row_sum_error: f64,
    pub permutation_max_abs_diff: f64,
    pub causal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyReport {
    pub seed: u64,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub dim: usize,
    pub encoder_identity_at_init: bool,
    pub lora: LoraSection,
    pub fusion: FusionSection,
    pub memory: MemorySection,
    pub passed: bool,
}

fn bitwise_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Runs every toy invariant with `C = 8`, `16 x 16` maps and `d = 16`.
pub fn invariant_report(seed: u64) -> Result<ToyReport, ToyError> {
    const C: usize = 8;
    const H: usize = 16;
    const W: usize = 16;
    const D: usize = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Adapter.
    let full = LoraLinear::with_factors(rand_mat(&mut rng, 5, 7), rand_mat(&mut rng, 5, 5), rand_mat(&mut rng, 5, 7))?;
    let f = rand_vec(&mut rng, 7);
    let dense = full.dense() * &f;
    let full_rank_forward_rel_err = (full.forward(&f)? - &dense).norm() / dense.norm();
    let probe = LoraLinear::with_factors(rand_mat(&mut rng, 4, 6), rand_mat(&mut rng, 4, 2), rand_mat(&mut rng, 2, 6))?;
    let grad_check = lora_grad_check(&probe, &rand_vec(&mut rng, 6), &rand_vec(&mut rng, 4), 1e-6)?;
    let mut layer = LoraLinear::new(rand_mat(&mut rng, D, C), 4, &mut rng)?;
    let w0 = layer.w0().clone();
    let (x, y) = (rand_vec(&mut rng, C), rand_vec(&mut rng, D));
    let first = quadratic_loss(&layer, &x, &y)?.0;
    for _ in 0..100 {
        let (_, g) = quadratic_loss(&layer, &x, &y)?;
        let grads = layer.grads(&x, &g);
        layer.sgd_step(&grads, 0.05);
    }
    let lora = LoraSection {
        full_rank_forward_rel_err,
        grad_check,
        w0_bitwise_frozen_after_100_steps: bitwise_eq(layer.w0().as_slice(), w0.as_slice()),
        loss_decreased: quadratic_loss(&layer, &x, &y)?.0 < first,
        rank_bound_enforced: matches!(
            LoraLinear::new(DMatrix::zeros(4, 6), 3, &mut rng),
            Err(ToyError::Rank { .. })
        ),
    };

    // Fusion.
    let g = Tensor3::random(H, W, C, &mut rng);
    let p = Tensor3::random(H, W, C, &mut rng);
    let identity = |depth: usize, rng: &mut ChaCha8Rng| -> Result<bool, ToyError> {
        let block = FusionBlock::new(C, depth, rng)?;
        Ok(bitwise_eq(&block.fuse(&g, &p)?.data, &g.data))
    };
    let zero_init_identity_depth1 = identity(1, &mut rng)?;
    let zero_init_identity_depth3 = identity(3, &mut rng)?;
    let mut block = FusionBlock::new(C, 1, &mut rng)?;
    block.train_step(&g, &p, &p, 1e-3)?;
    let r1 = block.residual(&g, &p)?;
    let r2 = block.scaled(2.0).residual(&g, &p)?;
    let doubled: Vec<f64> = r1.data.iter().map(|v| 2.0 * v).collect();
    let fusion = FusionSection {
        zero_init_identity_depth1,
        zero_init_identity_depth3,
        residual_max_abs_after_one_step: r1.max_abs(),
        point_branch_open_after_one_step: block.reads_point_branch(),
        residual_linear_in_weights: bitwise_eq(&r2.data, &doubled),
    };

    // Encoder at init, then a 12-frame memory sequence of its outputs.
    let encoder = ToyEncoder::new(C, D, 4, 1, &mut rng)?;
    let encoder_identity_at_init = bitwise_eq(encoder.forward(&g, &p)?.as_slice(), encoder.base_forward(&g)?.as_slice());
    let attn = MemoryAttention::new(D, &mut rng);
    let frames = (0..12)
        .map(|_| {
            let g = Tensor3::random(H, W, C, &mut rng);
            let p = Tensor3::random(H, W, C, &mut rng);
            encoder.forward(&g, &p)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let full = process_sequence(&attn, &frames, RetentionPolicy::FullRetention, true)?;
    let fifo = process_sequence(&attn, &frames, RetentionPolicy::Fifo(7), false)?;
    let mut shuffled = full.bank.clone();
    let mut order: Vec<usize> = (0..shuffled.len()).collect();
    order.reverse();
    order.swap(0, 5);
    shuffled.permute(&order);
    let query = &frames[11];
    let permutation_max_abs_diff = (attn.attend(query, &full.bank)? - attn.attend(query, &shuffled)?).amax();
    let mut altered = frames.clone();
    for f in &mut altered[7..] {
        *f *= -2.0;
    }
    let alt = process_sequence(&attn, &altered, RetentionPolicy::FullRetention, true)?;
    let causal = full.outputs[..7] == alt.outputs[..7] && full.first_pass == alt.first_pass;
    let memory = MemorySection {
        full_retention_bootstrap_entries: full.bank.len(),
        fifo7_frames: fifo.bank.frames(),
        bootstrap_changes_frame0: full.first_pass.as_ref().is_some_and(|f0| *f0 != full.outputs[0]),
        max_attention_row_sum_error: full.max_row_sum_error.max(fifo.max_row_sum_error),
        permutation_max_abs_diff,
        causal,
    };

    let passed = encoder_identity_at_init
        && lora.full_rank_forward_rel_err < 1e-10
        && lora.grad_check.max_rel_err_a < 1e-5
        && lora.grad_check.max_rel_err_b < 1e-5
        && lora.grad_check.w0_grad_max_abs == 0.0
        && lora.w0_bitwise_frozen_after_100_steps
        && lora.loss_decreased
        && lora.rank_bound_enforced
        && fusion.zero_init_identity_depth1
        && fusion.zero_init_identity_depth3
        && fusion.residual_max_abs_after_one_step > 0.0
        && fusion.point_branch_open_after_one_step
        && fusion.residual_linear_in_weights
        && memory.full_retention_bootstrap_entries == 13
        && memory.fifo7_frames == (5..12).collect::<Vec<_>>()
        && memory.bootstrap_changes_frame0
        && memory.max_attention_row_sum_error < 1e-12
        && memory.permutation_max_abs_diff < 1e-12
        && memory.causal;
    Ok(ToyReport {
        seed,
        channels: C,
        height: H,
        width: W,
        dim: D,
        encoder_identity_at_init,
        lora,
        fusion,
        memory,
        passed,
    })
}
