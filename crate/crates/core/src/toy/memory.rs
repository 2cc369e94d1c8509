use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ToyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetentionPolicy {
    /// Keep every memory ever written.
    FullRetention,
    /// Keep only the most recent `n`.
    Fifo(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryEntry {
    pub frame: usize,
    pub token: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryBank {
    policy: RetentionPolicy,
    entries: VecDeque<MemoryEntry>,
}

impl MemoryBank {
    pub fn new(policy: RetentionPolicy) -> Self {
        Self {
            policy,
            entries: VecDeque::new(),
        }
    }

    pub fn policy(&self) -> RetentionPolicy {
        self.policy
    }

    pub fn push(&mut self, entry: MemoryEntry) {
        self.entries.push_back(entry);
        if let RetentionPolicy::Fifo(cap) = self.policy {
            while self.entries.len() > cap {
                self.entries.pop_front();
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &MemoryEntry> {
        self.entries.iter()
    }

    pub fn frames(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.frame).collect()
    }

    /// Reorders the stored entries; attention must not care.
    pub fn permute(&mut self, order: &[usize]) {
        let old: Vec<MemoryEntry> = self.entries.drain(..).collect();
        self.entries = order.iter().map(|&i| old[i].clone()).collect();
    }
}

/// Single-head cross attention from frame tokens to memory tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryAttention {
    pub wq: DMatrix<f64>,
    pub wk: DMatrix<f64>,
    pub wv: DMatrix<f64>,
    /// Projects a pooled frame output to its memory token.
    pub wmem: DMatrix<f64>,
}

fn softmax_rows(m: &mut DMatrix<f64>) {
    for mut row in m.row_iter_mut() {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.iter_mut().for_each(|v| *v = (*v - max).exp());
        let s = row.sum();
        row /= s;
    }
}

impl MemoryAttention {
    pub fn new(dim: usize, rng: &mut impl Rng) -> Self {
        let s = 1.0 / (dim as f64).sqrt();
        let mut m = || DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-s..s));
        Self {
            wq: m(),
            wk: m(),
            wv: m(),
            wmem: m(),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.nrows()
    }

    /// Attention weights of `frame` (tokens as rows) over the bank.
    pub fn weights(&self, frame: &DMatrix<f64>, bank: &MemoryBank) -> Result<DMatrix<f64>, ToyError> {
        let d = self.dim();
        if frame.ncols() != d {
            return Err(ToyError::Dimension {
                expected: d,
                got: frame.ncols(),
            });
        }
        let mem = DMatrix::from_rows(&bank.entries().map(|e| e.token.transpose()).collect::<Vec<_>>());
        let q = frame * &self.wq;
        let k = mem * &self.wk;
        let mut a = q * k.transpose() / (d as f64).sqrt();
        softmax_rows(&mut a);
        Ok(a)
    }

    /// `F + softmax(Q K^T / sqrt(d)) V`; with an empty bank this is `F`.
    pub fn attend(&self, frame: &DMatrix<f64>, bank: &MemoryBank) -> Result<DMatrix<f64>, ToyError> {
        if bank.is_empty() {
            if frame.ncols() != self.dim() {
                return Err(ToyError::Dimension {
                    expected: self.dim(),
                    got: frame.ncols(),
                });
            }
            return Ok(frame.clone());
        }
        let a = self.weights(frame, bank)?;
        let mem = DMatrix::from_rows(&bank.entries().map(|e| e.token.transpose()).collect::<Vec<_>>());
        Ok(frame + a * (mem * &self.wv))
    }

    pub fn token(&self, output: &DMatrix<f64>) -> DVector<f64> {
        let mean = output.row_mean().transpose();
        &self.wmem * mean
    }
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    /// One output per frame; for a bootstrapped frame 0 this is the second pass.
    pub outputs: Vec<DMatrix<f64>>,
    /// Frame 0 before bootstrapping, when enabled.
    pub first_pass: Option<DMatrix<f64>>,
    pub bank: MemoryBank,
    /// Largest `|row sum - 1|` over every attention matrix formed.
    pub max_row_sum_error: f64,
}

/// Runs frames in order, each attending to memories of earlier frames only.
/// With `bootstrap`, frame 0 is processed twice so its second pass can attend
/// to its own first-pass memory; both passes are written to the bank.
pub fn process_sequence(
    attn: &MemoryAttention,
    frames: &[DMatrix<f64>],
    policy: RetentionPolicy,
    bootstrap: bool,
) -> Result<SequenceOutput, ToyError> {
    let mut bank = MemoryBank::new(policy);
    let mut outputs = Vec::with_capacity(frames.len());
    let mut first_pass = None;
    let mut max_err: f64 = 0.0;
    let mut step = |frame: usize, f: &DMatrix<f64>, bank: &mut MemoryBank| -> Result<DMatrix<f64>, ToyError> {
        if !bank.is_empty() {
            let a = attn.weights(f, bank)?;
            for row in a.row_iter() {
                max_err = max_err.max((row.sum() - 1.0).abs());
            }
        }
        let out = attn.attend(f, bank)?;
        bank.push(MemoryEntry {
            frame,
            token: attn.token(&out),
        });
        Ok(out)
    };
    for (i, f) in frames.iter().enumerate() {
        if i == 0 && bootstrap {
            first_pass = Some(step(0, f, &mut bank)?);
        }
        outputs.push(step(i, f, &mut bank)?);
    }
    Ok(SequenceOutput {
        outputs,
        first_pass,
        bank,
        max_row_sum_error: max_err,
    })
}
