//! The actor-critic network: two strided convolutions, one dense layer, a
//! five-way policy head and a scalar value head, with hand-written
//! backpropagation. Parameters live in one flat buffer so the optimizer and
//! serializer can treat them uniformly.

use std::fmt::Debug;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::{Driver, ObsConfig, Observation, SimError, VehicleState, ACTION_COUNT};
use crate::track::Track;

/// Floating-point element type of a network. Production nets use `f32`;
/// `f64` nets exist for finite-difference gradient checks.
pub trait Scalar:
    Float + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub fn out_size(&self, input: usize) -> usize {
        (input - self.kernel) / self.stride + 1
    }
}

/// Layer sizes. Inputs are square `frames x size x size` rasters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetConfig {
    pub frames: usize,
    pub size: usize,
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub dense: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            frames: 3,
            size: 24,
            conv1: ConvSpec {
                filters: 8,
                kernel: 5,
                stride: 2,
            },
            conv2: ConvSpec {
                filters: 16,
                kernel: 3,
                stride: 2,
            },
            dense: 128,
        }
    }
}

impl NetConfig {
    /// Observation settings producing this network's input shape.
    pub fn obs_config(&self) -> ObsConfig {
        ObsConfig {
            frames: self.frames,
            size: self.size,
            ..ObsConfig::default()
        }
    }

    /// A tiny 4x4-input network for numerical checks.
    pub fn shrunken() -> Self {
        NetConfig {
            frames: 3,
            size: 4,
            conv1: ConvSpec {
                filters: 2,
                kernel: 2,
                stride: 1,
            },
            conv2: ConvSpec {
                filters: 3,
                kernel: 2,
                stride: 1,
            },
            dense: 6,
        }
    }

    pub fn input_len(&self) -> usize {
        self.frames * self.size * self.size
    }

    pub fn conv1_out(&self) -> usize {
        self.conv1.out_size(self.size)
    }

    pub fn conv2_out(&self) -> usize {
        self.conv2.out_size(self.conv1_out())
    }

    pub fn flat_len(&self) -> usize {
        self.conv2.filters * self.conv2_out() * self.conv2_out()
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        let c1 = self.conv1;
        let c2 = self.conv2;
        if self.frames == 0 || self.dense == 0 || c1.filters == 0 || c2.filters == 0 {
            return bad("layer sizes must be positive");
        }
        if c1.stride == 0 || c2.stride == 0 || c1.kernel == 0 || c2.kernel == 0 {
            return bad("kernels and strides must be positive");
        }
        if c1.kernel > self.size || c2.kernel > self.conv1_out() {
            return bad("kernel larger than its input");
        }
        Ok(())
    }

    /// Tensor names and shapes in storage order.
    pub fn tensor_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (c1, c2) = (self.conv1, self.conv2);
        vec![
            ("conv1.weight", vec![c1.filters, self.frames, c1.kernel, c1.kernel]),
            ("conv1.bias", vec![c1.filters]),
            ("conv2.weight", vec![c2.filters, c1.filters, c2.kernel, c2.kernel]),
            ("conv2.bias", vec![c2.filters]),
            ("dense.weight", vec![self.dense, self.flat_len()]),
            ("dense.bias", vec![self.dense]),
            ("policy.weight", vec![ACTION_COUNT, self.dense]),
            ("policy.bias", vec![ACTION_COUNT]),
            ("value.weight", vec![1, self.dense]),
            ("value.bias", vec![1]),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensor_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("input shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
}

/// Location of one named tensor inside the flat parameter buffer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layout {
    c1w: usize,
    c1b: usize,
    c2w: usize,
    c2b: usize,
    dw: usize,
    db: usize,
    pw: usize,
    pb: usize,
    vw: usize,
    vb: usize,
}

impl Layout {
    fn new(cfg: &NetConfig) -> Self {
        let offs: Vec<usize> = tensor_infos(cfg).iter().map(|t| t.offset).collect();
        Layout {
            c1w: offs[0],
            c1b: offs[1],
            c2w: offs[2],
            c2b: offs[3],
            dw: offs[4],
            db: offs[5],
            pw: offs[6],
            pb: offs[7],
            vw: offs[8],
            vb: offs[9],
        }
    }
}

fn tensor_infos(cfg: &NetConfig) -> Vec<TensorInfo> {
    let mut offset = 0;
    cfg.tensor_shapes()
        .into_iter()
        .map(|(name, shape)| {
            let len = shape.iter().product();
            let info = TensorInfo {
                name,
                shape,
                offset,
                len,
            };
            offset += len;
            info
        })
        .collect()
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Clone, Debug)]
pub struct Activations<T> {
    pub conv1: Vec<T>,
    pub conv2: Vec<T>,
    pub dense: Vec<T>,
    pub logits: [T; ACTION_COUNT],
    pub value: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet<T: Scalar = f32> {
    cfg: NetConfig,
    layout: Layout,
    params: Vec<T>,
}

impl<T: Scalar> PolicyNet<T> {
    /// All-zero parameters.
    pub fn zeros(cfg: NetConfig) -> Result<Self, NetError> {
        cfg.validate()?;
        Ok(PolicyNet {
            layout: Layout::new(&cfg),
            params: vec![T::zero(); cfg.param_count()],
            cfg,
        })
    }

    /// Orthogonal initialization: gain sqrt(2) for hidden layers, 0.01 for
    /// the policy head and 1 for the value head; zero biases.
    pub fn new(cfg: NetConfig, seed: u64) -> Result<Self, NetError> {
        let mut net = Self::zeros(cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains = [
            ("conv1.weight", 2f64.sqrt()),
            ("conv2.weight", 2f64.sqrt()),
            ("dense.weight", 2f64.sqrt()),
            ("policy.weight", 0.01),
            ("value.weight", 1.0),
        ];
        for info in net.tensors() {
            let Some(&(_, gain)) = gains.iter().find(|(n, _)| *n == info.name) else {
                continue;
            };
            let rows = info.shape[0];
            let cols = info.len / rows;
            let m = orthogonal(rows, cols, &mut rng);
            for (dst, v) in net.params[info.offset..info.offset + info.len].iter_mut().zip(m) {
                *dst = T::of(gain * v);
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn tensors(&self) -> Vec<TensorInfo> {
        tensor_infos(&self.cfg)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Same network in another precision.
    pub fn cast<U: Scalar>(&self) -> PolicyNet<U> {
        PolicyNet {
            cfg: self.cfg,
            layout: self.layout,
            params: self.params.iter().map(|p| U::of(p.f64())).collect(),
        }
    }

    fn check_len(&self, input: &[T]) -> Result<(), NetError> {
        if input.len() != self.cfg.input_len() {
            return Err(NetError::ShapeMismatch {
                expected: (self.cfg.frames, self.cfg.size, self.cfg.size),
                actual: (input.len(), 1, 1),
            });
        }
        Ok(())
    }

    /// Logits and value for a flat `frames x size x size` input.
    pub fn forward(&self, input: &[T]) -> Result<([T; ACTION_COUNT], T), NetError> {
        let a = self.activations(input)?;
        Ok((a.logits, a.value))
    }

    pub fn forward_obs(&self, obs: &Observation) -> Result<([T; ACTION_COUNT], T), NetError> {
        let expected = (self.cfg.frames, self.cfg.size, self.cfg.size);
        if obs.shape() != expected {
            return Err(NetError::ShapeMismatch {
                expected,
                actual: obs.shape(),
            });
        }
        let input: Vec<T> = obs.data.iter().map(|&v| T::of(v as f64)).collect();
        self.forward(&input)
    }

    pub fn activations(&self, input: &[T]) -> Result<Activations<T>, NetError> {
        self.check_len(input)?;
        let cfg = &self.cfg;
        let l = self.layout;
        let p = &self.params;
        let (c1, c2) = (cfg.conv1, cfg.conv2);
        let (o1, o2) = (cfg.conv1_out(), cfg.conv2_out());

        let mut conv1 = vec![T::zero(); c1.filters * o1 * o1];
        conv_forward(
            input,
            cfg.frames,
            cfg.size,
            &p[l.c1w..l.c1b],
            &p[l.c1b..l.c2w],
            c1,
            o1,
            &mut conv1,
        );
        let mut conv2 = vec![T::zero(); c2.filters * o2 * o2];
        conv_forward(
            &conv1,
            c1.filters,
            o1,
            &p[l.c2w..l.c2b],
            &p[l.c2b..l.dw],
            c2,
            o2,
            &mut conv2,
        );
        let mut dense = vec![T::zero(); cfg.dense];
        dense_forward(&conv2, &p[l.dw..l.db], &p[l.db..l.pw], &mut dense);
        relu(&mut dense);
        let mut logits = [T::zero(); ACTION_COUNT];
        dense_forward(&dense, &p[l.pw..l.pb], &p[l.pb..l.vw], &mut logits);
        let mut value = [T::zero()];
        dense_forward(&dense, &p[l.vw..l.vb], &p[l.vb..], &mut value);
        Ok(Activations {
            conv1,
            conv2,
            dense,
            logits,
            value: value[0],
        })
    }

    /// Accumulates parameter gradients into `grads` given upstream
    /// gradients for the logits and value of the pass that produced `acts`.
    pub fn backward(
        &self,
        input: &[T],
        acts: &Activations<T>,
        dlogits: &[T; ACTION_COUNT],
        dvalue: T,
        grads: &mut [T],
    ) {
        debug_assert_eq!(grads.len(), self.params.len());
        let cfg = &self.cfg;
        let l = self.layout;
        let p = &self.params;
        let (c1, c2) = (cfg.conv1, cfg.conv2);
        let (o1, o2) = (cfg.conv1_out(), cfg.conv2_out());

        let mut d_dense = vec![T::zero(); cfg.dense];
        {
            let (gw, gb) = grads[l.pw..l.vw].split_at_mut(l.pb - l.pw);
            dense_backward(&acts.dense, &p[l.pw..l.pb], dlogits, gw, gb, Some(&mut d_dense));
        }
        {
            let (gw, gb) = grads[l.vw..].split_at_mut(l.vb - l.vw);
            dense_backward(&acts.dense, &p[l.vw..l.vb], &[dvalue], gw, gb, Some(&mut d_dense));
        }
        relu_backward(&acts.dense, &mut d_dense);

        let mut d_conv2 = vec![T::zero(); acts.conv2.len()];
        {
            let (gw, gb) = grads[l.dw..l.pw].split_at_mut(l.db - l.dw);
            dense_backward(&acts.conv2, &p[l.dw..l.db], &d_dense, gw, gb, Some(&mut d_conv2));
        }
        relu_backward(&acts.conv2, &mut d_conv2);

        let mut d_conv1 = vec![T::zero(); acts.conv1.len()];
        {
            let (gw, gb) = grads[l.c2w..l.dw].split_at_mut(l.c2b - l.c2w);
            conv_backward(
                &acts.conv1,
                c1.filters,
                o1,
                &p[l.c2w..l.c2b],
                c2,
                o2,
                &d_conv2,
                gw,
                gb,
                Some(&mut d_conv1),
            );
        }
        relu_backward(&acts.conv1, &mut d_conv1);
        let (gw, gb) = grads[l.c1w..l.c2w].split_at_mut(l.c1b - l.c1w);
        conv_backward(
            input,
            cfg.frames,
            cfg.size,
            &p[l.c1w..l.c1b],
            c1,
            o1,
            &d_conv1,
            gw,
            gb,
            None,
        );
    }
}

impl<T: Scalar> Driver for PolicyNet<T> {
    fn logits(
        &mut self,
        obs: &Observation,
        _state: &VehicleState,
        _track: &Track,
    ) -> Result<[f64; ACTION_COUNT], SimError> {
        let (logits, _) = self.forward_obs(obs).map_err(|e| match e {
            NetError::ShapeMismatch { expected, actual } => SimError::ShapeMismatch { expected, actual },
            NetError::InvalidConfig(_) => SimError::NonFinite,
        })?;
        Ok(logits.map(|l| l.f64()))
    }

    fn input_shape(&self) -> Option<(usize, usize, usize)> {
        Some((self.cfg.frames, self.cfg.size, self.cfg.size))
    }
}

/// Row-orthonormal (or column-orthonormal when rows > cols) matrix from
/// Gram-Schmidt on Gaussian samples, returned row-major.
fn orthogonal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, d) = if rows <= cols { (rows, cols) } else { (cols, rows) };
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = if rows <= cols { basis[r][c] } else { basis[c][r] };
        }
    }
    out
}

fn relu<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

fn relu_backward<T: Scalar>(activated: &[T], grad: &mut [T]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Valid strided convolution followed by a rectifier.
#[allow(clippy::too_many_arguments)]
fn conv_forward<T: Scalar>(
    input: &[T],
    channels: usize,
    size: usize,
    weight: &[T],
    bias: &[T],
    spec: ConvSpec,
    out_size: usize,
    out: &mut [T],
) {
    let k = spec.kernel;
    let s = spec.stride;
    for f in 0..spec.filters {
        for oy in 0..out_size {
            for ox in 0..out_size {
                let mut acc = bias[f];
                for c in 0..channels {
                    for ky in 0..k {
                        let row = &input[(c * size + oy * s + ky) * size + ox * s..][..k];
                        let w = &weight[((f * channels + c) * k + ky) * k..][..k];
                        for kx in 0..k {
                            acc += row[kx] * w[kx];
                        }
                    }
                }
                out[(f * out_size + oy) * out_size + ox] = if acc > T::zero() { acc } else { T::zero() };
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    input: &[T],
    channels: usize,
    size: usize,
    weight: &[T],
    spec: ConvSpec,
    out_size: usize,
    d_out: &[T],
    gw: &mut [T],
    gb: &mut [T],
    mut d_in: Option<&mut [T]>,
) {
    let k = spec.kernel;
    let s = spec.stride;
    for f in 0..spec.filters {
        for oy in 0..out_size {
            for ox in 0..out_size {
                let g = d_out[(f * out_size + oy) * out_size + ox];
                if g == T::zero() {
                    continue;
                }
                gb[f] += g;
                for c in 0..channels {
                    for ky in 0..k {
                        let at = (c * size + oy * s + ky) * size + ox * s;
                        let wo = ((f * channels + c) * k + ky) * k;
                        let row = &input[at..at + k];
                        for (gwk, &x) in gw[wo..wo + k].iter_mut().zip(row) {
                            *gwk += g * x;
                        }
                        if let Some(d) = d_in.as_deref_mut() {
                            for (dx, &w) in d[at..at + k].iter_mut().zip(&weight[wo..wo + k]) {
                                *dx += g * w;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn dense_forward<T: Scalar>(input: &[T], weight: &[T], bias: &[T], out: &mut [T]) {
    let n = input.len();
    for (o, y) in out.iter_mut().enumerate() {
        let w = &weight[o * n..(o + 1) * n];
        let mut acc = bias[o];
        for (a, b) in w.iter().zip(input) {
            acc += *a * *b;
        }
        *y = acc;
    }
}

fn dense_backward<T: Scalar>(
    input: &[T],
    weight: &[T],
    d_out: &[T],
    gw: &mut [T],
    gb: &mut [T],
    mut d_in: Option<&mut [T]>,
) {
    let n = input.len();
    for (o, &g) in d_out.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        gb[o] += g;
        for (gwk, &x) in gw[o * n..(o + 1) * n].iter_mut().zip(input) {
            *gwk += g * x;
        }
        if let Some(d) = d_in.as_deref_mut() {
            for (dx, &w) in d.iter_mut().zip(&weight[o * n..(o + 1) * n]) {
                *dx += g * w;
            }
        }
    }
}
