use rand::Rng;

use super::ToyError;

/// Dense `height x width x channels` feature map, channels innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn random(height: usize, width: usize, channels: usize, rng: &mut impl Rng) -> Self {
        let data = (0..height * width * channels).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Channels of pixel `(y, x)`.
    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Channel-wise concatenation `[self || other]`.
    pub fn concat(&self, other: &Self) -> Result<Self, ToyError> {
        if !self.same_grid(other) {
            return Err(ToyError::Shape(format!(
                "cannot concatenate {}x{} with {}x{}",
                self.height, self.width, other.height, other.width
            )));
        }
        let c = self.channels + other.channels;
        let mut data = Vec::with_capacity(self.height * self.width * c);
        for (a, b) in self.data.chunks(self.channels.max(1)).zip(other.data.chunks(other.channels.max(1))) {
            data.extend_from_slice(a);
            data.extend_from_slice(b);
        }
        Ok(Self {
            height: self.height,
            width: self.width,
            channels: c,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// 3x3 convolution with zero padding and stride 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3 {
    pub cin: usize,
    pub cout: usize,
    /// `[cout][cin][ky][kx]`, flattened.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

struct ConvGrads {
    weight: Vec<f64>,
    bias: Vec<f64>,
    input: Tensor3,
}

impl Conv3x3 {
    pub fn zeros(cin: usize, cout: usize) -> Self {
        Self {
            cin,
            cout,
            weight: vec![0.0; cout * cin * 9],
            bias: vec![0.0; cout],
        }
    }

    pub fn random(cin: usize, cout: usize, rng: &mut impl Rng) -> Self {
        let s = 1.0 / ((cin * 9) as f64).sqrt();
        Self {
            cin,
            cout,
            weight: (0..cout * cin * 9).map(|_| rng.gen_range(-s..s)).collect(),
            bias: vec![0.0; cout],
        }
    }

    #[inline]
    fn widx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.cin + i) * 3 + ky) * 3 + kx
    }

    /// Input pixel under kernel tap `(ky, kx)` for output `(y, x)`, if inside.
    #[inline]
    fn tap(h: usize, w: usize, y: usize, x: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let sy = (y + ky).checked_sub(1)?;
        let sx = (x + kx).checked_sub(1)?;
        (sy < h && sx < w).then_some((sy, sx))
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3, ToyError> {
        if x.channels != self.cin {
            return Err(ToyError::Dimension {
                expected: self.cin,
                got: x.channels,
            });
        }
        let mut out = Tensor3::zeros(x.height, x.width, self.cout);
        for y in 0..x.height {
            for xx in 0..x.width {
                for o in 0..self.cout {
                    let mut acc = self.bias[o];
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let Some((sy, sx)) = Self::tap(x.height, x.width, y, xx, ky, kx) else {
                                continue;
                            };
                            let px = x.pixel(sy, sx);
                            for (i, &v) in px.iter().enumerate() {
                                acc += self.weight[self.widx(o, i, ky, kx)] * v;
                            }
                        }
                    }
                    out.data[(y * x.width + xx) * self.cout + o] = acc;
                }
            }
        }
        Ok(out)
    }

    fn backward(&self, x: &Tensor3, gy: &Tensor3) -> ConvGrads {
        let mut g = ConvGrads {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.cout],
            input: Tensor3::zeros(x.height, x.width, self.cin),
        };
        for y in 0..x.height {
            for xx in 0..x.width {
                for o in 0..self.cout {
                    let d = gy.at(y, xx, o);
                    if d == 0.0 {
                        continue;
                    }
                    g.bias[o] += d;
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let Some((sy, sx)) = Self::tap(x.height, x.width, y, xx, ky, kx) else {
                                continue;
                            };
                            let base = (sy * x.width + sx) * self.cin;
                            for i in 0..self.cin {
                                let wi = self.widx(o, i, ky, kx);
                                g.weight[wi] += d * x.data[base + i];
                                g.input.data[base + i] += d * self.weight[wi];
                            }
                        }
                    }
                }
            }
        }
        g
    }

    fn is_zero(&self) -> bool {
        self.weight.iter().chain(&self.bias).all(|&v| v == 0.0)
    }
}

/// Fuses image features `G` with point-branch features `P` as
/// `G + conv([G || P])`, where the last convolution starts at zero.
///
/// Depth 1 is a single linear 2C to C convolution whose weights and biases
/// are all zero at construction. Depth 3 inserts two randomly initialized
/// convolutions with ReLU in front of the zero one.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionBlock {
    channels: usize,
    layers: Vec<Conv3x3>,
}

impl FusionBlock {
    pub fn new(channels: usize, depth: usize, rng: &mut impl Rng) -> Result<Self, ToyError> {
        let layers = match depth {
            1 => vec![Conv3x3::zeros(2 * channels, channels)],
            3 => vec![
                Conv3x3::random(2 * channels, channels, rng),
                Conv3x3::random(channels, channels, rng),
                Conv3x3::zeros(channels, channels),
            ],
            d => return Err(ToyError::Depth(d)),
        };
        Ok(Self { channels, layers })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Conv3x3] {
        &self.layers
    }

    /// Whether the output convolution is still all zeros.
    pub fn output_is_zero(&self) -> bool {
        self.layers.last().is_some_and(Conv3x3::is_zero)
    }

    /// Whether any output weight reading a point-branch channel is nonzero.
    pub fn reads_point_branch(&self) -> bool {
        let first = &self.layers[0];
        (0..first.cout).any(|o| {
            (self.channels..first.cin).any(|i| (0..9).any(|k| first.weight[(o * first.cin + i) * 9 + k] != 0.0))
        }) && !self.output_is_zero()
    }

    /// Copy with every weight and bias multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= factor);
        }
        out
    }

    fn check(&self, g: &Tensor3, p: &Tensor3) -> Result<(), ToyError> {
        for t in [g, p] {
            if t.channels != self.channels {
                return Err(ToyError::Dimension {
                    expected: self.channels,
                    got: t.channels,
                });
            }
        }
        Ok(())
    }

    /// Activations of every layer, starting with the concatenated input.
    fn activations(&self, g: &Tensor3, p: &Tensor3) -> Result<Vec<Tensor3>, ToyError> {
        self.check(g, p)?;
        let mut acts = vec![g.concat(p)?];
        for (k, layer) in self.layers.iter().enumerate() {
            let mut y = layer.forward(acts.last().expect("input is present"))?;
            if k + 1 < self.layers.len() {
                y.data.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(y);
        }
        Ok(acts)
    }

    /// The residual term `conv([G || P])`.
    pub fn residual(&self, g: &Tensor3, p: &Tensor3) -> Result<Tensor3, ToyError> {
        Ok(self.activations(g, p)?.pop().expect("at least one layer"))
    }

    pub fn fuse(&self, g: &Tensor3, p: &Tensor3) -> Result<Tensor3, ToyError> {
        let mut y = self.residual(g, p)?;
        for (o, &gi) in y.data.iter_mut().zip(&g.data) {
            *o += gi;
        }
        Ok(y)
    }

    /// One gradient step on `0.5 * |fuse(G, P) - target|^2`; returns the loss
    /// before the step.
    pub fn train_step(&mut self, g: &Tensor3, p: &Tensor3, target: &Tensor3, lr: f64) -> Result<f64, ToyError> {
        let acts = self.activations(g, p)?;
        let out = acts.last().expect("output is present");
        if target.data.len() != out.data.len() {
            return Err(ToyError::Dimension {
                expected: out.data.len(),
                got: target.data.len(),
            });
        }
        let mut grad = out.clone();
        let mut loss = 0.0;
        for ((d, &gi), &t) in grad.data.iter_mut().zip(&g.data).zip(&target.data) {
            let r = *d + gi - t;
            loss += 0.5 * r * r;
            *d = r;
        }
        for k in (0..self.layers.len()).rev() {
            let input = &acts[k];
            let gr = self.layers[k].backward(input, &grad);
            let layer = &mut self.layers[k];
            for (w, dw) in layer.weight.iter_mut().zip(&gr.weight) {
                *w -= lr * dw;
            }
            for (b, db) in layer.bias.iter_mut().zip(&gr.bias) {
                *b -= lr * db;
            }
            grad = gr.input;
            if k > 0 {
                // Through the ReLU that produced this layer's input.
                for (d, &a) in grad.data.iter_mut().zip(&input.data) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
        }
        Ok(loss)
    }
}
