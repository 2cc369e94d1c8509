use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::ToyError;

/// A frozen base matrix plus a trainable low-rank update: `W = W0 + A B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraLinear {
    w0: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

/// Gradients of a scalar loss with respect to the adapter factors.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraGrads {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LoraLinear {
    /// Rank-`rank` adapter over `w0` with `A = 0` and random `B`, so the layer
    /// starts out equal to its base. Requires `rank <= min(m, n) / 2`.
    pub fn new(w0: DMatrix<f64>, rank: usize, rng: &mut impl Rng) -> Result<Self, ToyError> {
        let (m, n) = w0.shape();
        let max = m.min(n) / 2;
        if rank == 0 || rank > max {
            return Err(ToyError::Rank { rank, max });
        }
        let scale = 1.0 / (n as f64).sqrt();
        let b = DMatrix::from_fn(rank, n, |_, _| rng.gen_range(-scale..scale));
        Ok(Self {
            w0,
            a: DMatrix::zeros(m, rank),
            b,
        })
    }

    /// Layer from explicit factors. Only shapes are checked; the rank bound of
    /// [`LoraLinear::new`] does not apply.
    pub fn with_factors(w0: DMatrix<f64>, a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self, ToyError> {
        let (m, n) = w0.shape();
        if a.nrows() != m || b.ncols() != n || a.ncols() != b.nrows() {
            return Err(ToyError::Shape(format!(
                "W0 {m}x{n}, A {}x{}, B {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { w0, a, b })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.w0.shape()
    }

    pub fn w0(&self) -> &DMatrix<f64> {
        &self.w0
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn a_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.a
    }

    pub fn b_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.b
    }

    /// `W0 f + A (B f)`, never forming `W0 + A B`.
    pub fn forward(&self, f: &DVector<f64>) -> Result<DVector<f64>, ToyError> {
        if f.len() != self.w0.ncols() {
            return Err(ToyError::Dimension {
                expected: self.w0.ncols(),
                got: f.len(),
            });
        }
        Ok(&self.w0 * f + &self.a * (&self.b * f))
    }

    /// The dense adapted weight, for reference checks.
    pub fn dense(&self) -> DMatrix<f64> {
        &self.w0 + &self.a * &self.b
    }

    /// Backpropagates `grad_out = dL/d(output)` for input `f`.
    pub fn grads(&self, f: &DVector<f64>, grad_out: &DVector<f64>) -> LoraGrads {
        let bf = &self.b * f;
        LoraGrads {
            a: grad_out * bf.transpose(),
            b: self.a.transpose() * grad_out * f.transpose(),
        }
    }

    /// Gradient with respect to `W0` under the freeze contract.
    pub fn w0_grad(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.w0.nrows(), self.w0.ncols())
    }

    /// Plain gradient descent on the factors only.
    pub fn sgd_step(&mut self, grads: &LoraGrads, lr: f64) {
        self.a -= &grads.a * lr;
        self.b -= &grads.b * lr;
    }
}

/// Quadratic toy loss `0.5 * |W f - y|^2` and its output gradient.
pub fn quadratic_loss(layer: &LoraLinear, f: &DVector<f64>, y: &DVector<f64>) -> Result<(f64, DVector<f64>), ToyError> {
    let r = layer.forward(f)? - y;
    Ok((0.5 * r.norm_squared(), r))
}

/// Result of comparing analytic adapter gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GradCheck {
    pub max_rel_err_a: f64,
    pub max_rel_err_b: f64,
    pub w0_grad_max_abs: f64,
}

/// `|x - y| / (|x| + |y|)` over whole tensors, `0` when both vanish.
fn rel_err(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let denom = x.norm() + y.norm();
    if denom == 0.0 {
        0.0
    } else {
        (x - y).norm() / denom
    }
}

/// Central finite differences with step `h` on the quadratic loss.
pub fn lora_grad_check(layer: &LoraLinear, f: &DVector<f64>, y: &DVector<f64>, h: f64) -> Result<GradCheck, ToyError> {
    let (_, g) = quadratic_loss(layer, f, y)?;
    let analytic = layer.grads(f, &g);
    let mut probe = layer.clone();
    let mut fd = |which: bool| -> Result<DMatrix<f64>, ToyError> {
        let shape = if which { layer.a.shape() } else { layer.b.shape() };
        let mut out = DMatrix::zeros(shape.0, shape.1);
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let m = if which { &mut probe.a } else { &mut probe.b };
                let orig = m[(i, j)];
                m[(i, j)] = orig + h;
                let plus = quadratic_loss(&probe, f, y)?.0;
                let m = if which { &mut probe.a } else { &mut probe.b };
                m[(i, j)] = orig - h;
                let minus = quadratic_loss(&probe, f, y)?.0;
                let m = if which { &mut probe.a } else { &mut probe.b };
                m[(i, j)] = orig;
                out[(i, j)] = (plus - minus) / (2.0 * h);
            }
        }
        Ok(out)
    };
    let fd_a = fd(true)?;
    let fd_b = fd(false)?;
    Ok(GradCheck {
        max_rel_err_a: rel_err(&analytic.a, &fd_a),
        max_rel_err_b: rel_err(&analytic.b, &fd_b),
        w0_grad_max_abs: layer.w0_grad().amax(),
    })
}
