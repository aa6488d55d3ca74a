use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernels::gemm;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Layer descriptor. Parametric layers carry their own sizes so a list of
/// descriptors plus an input shape fully determines the parameter layout.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
    },
    /// Valid (unpadded) 2-D convolution over `[channels, height, width]`.
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Relu,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct ConvGeom {
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

impl ConvGeom {
    fn patch_len(&self) -> usize {
        self.in_ch * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let p = self.positions();
        let k = self.kernel;
        for c in 0..self.in_ch {
            for ki in 0..k {
                for kj in 0..k {
                    let r = (c * k + ki) * k + kj;
                    let row = &mut cols[r * p..(r + 1) * p];
                    for oy in 0..self.out_h {
                        let iy = oy * self.stride + ki;
                        let src = &x[(c * self.in_h + iy) * self.in_w..];
                        for ox in 0..self.out_w {
                            row[oy * self.out_w + ox] = src[ox * self.stride + kj];
                        }
                    }
                }
            }
        }
    }

    fn col2im_add(&self, cols: &[f64], dx: &mut [f64]) {
        let p = self.positions();
        let k = self.kernel;
        for c in 0..self.in_ch {
            for ki in 0..k {
                for kj in 0..k {
                    let r = (c * k + ki) * k + kj;
                    let row = &cols[r * p..(r + 1) * p];
                    for oy in 0..self.out_h {
                        let iy = oy * self.stride + ki;
                        let base = (c * self.in_h + iy) * self.in_w;
                        for ox in 0..self.out_w {
                            dx[base + ox * self.stride + kj] += row[oy * self.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
enum Layer {
    /// weight `[out, in]`, bias `[out]`
    Dense { weight: Tensor, bias: Tensor },
    /// weight `[out_ch, in_ch * k * k]`, bias `[out_ch]`
    Conv {
        geom: ConvGeom,
        weight: Tensor,
        bias: Tensor,
    },
    Relu,
    Tanh,
}

/// Per-parameter gradients, in the same order as [`Network::params`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients(net.params().map(|p| Tensor::zeros(p.shape())).collect())
    }

    pub fn global_norm(&self) -> f64 {
        self.0.iter().map(Tensor::squared_norm).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|g| g.data().iter().all(|&v| v == 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.0.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.0.iter_mut()
    }
}

/// Sequential network of dense / conv / relu / tanh layers.
///
/// [`forward`](Network::forward) caches activations for a following
/// [`backward`](Network::backward); [`infer`](Network::infer) is the
/// cache-free evaluation path used on snapshots.
#[derive(Debug)]
pub struct Network {
    input_shape: Vec<usize>,
    specs: Vec<LayerSpec>,
    layers: Vec<Layer>,
    output_len: usize,
    cache: Option<Vec<Tensor>>,
}

impl Clone for Network {
    fn clone(&self) -> Self {
        self.snapshot()
    }
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape
            && self.specs == other.specs
            && self.params().zip(other.params()).all(|(a, b)| a == b)
    }
}

impl Network {
    /// Builds a network with weights and biases drawn uniformly from
    /// `±1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(
        input_shape: &[usize],
        specs: &[LayerSpec],
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Network::zeroed(input_shape, specs)?;
        for layer in &mut net.layers {
            if let Layer::Dense { weight, bias } | Layer::Conv { weight, bias, .. } = layer {
                let fan_in = weight.shape()[1] as f64;
                let bound = 1.0 / fan_in.sqrt();
                for v in weight.data_mut().iter_mut().chain(bias.data_mut()) {
                    *v = rng.gen_range(-bound..=bound);
                }
            }
        }
        Ok(net)
    }

    /// Same layout as [`Network::new`] with every parameter set to zero.
    pub fn zeroed(input_shape: &[usize], specs: &[LayerSpec]) -> Result<Self> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::Config(format!("invalid input shape {input_shape:?}")));
        }
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Dense { input, output } => {
                    let flat: usize = shape.iter().product();
                    if flat != input || output == 0 {
                        return Err(Error::shape(&[input], &shape));
                    }
                    shape = vec![output];
                    Layer::Dense {
                        weight: Tensor::zeros(&[output, input]),
                        bias: Tensor::zeros(&[output]),
                    }
                }
                LayerSpec::Conv {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                } => {
                    if shape.len() != 3 || shape[0] != in_channels {
                        return Err(Error::shape(&[in_channels, 0, 0], &shape));
                    }
                    let (in_h, in_w) = (shape[1], shape[2]);
                    if kernel == 0 || stride == 0 || in_h < kernel || in_w < kernel {
                        return Err(Error::Config(format!(
                            "conv kernel {kernel} stride {stride} does not fit input {shape:?}"
                        )));
                    }
                    let geom = ConvGeom {
                        in_ch: in_channels,
                        out_ch: out_channels,
                        kernel,
                        stride,
                        in_h,
                        in_w,
                        out_h: (in_h - kernel) / stride + 1,
                        out_w: (in_w - kernel) / stride + 1,
                    };
                    shape = vec![out_channels, geom.out_h, geom.out_w];
                    Layer::Conv {
                        geom,
                        weight: Tensor::zeros(&[out_channels, geom.patch_len()]),
                        bias: Tensor::zeros(&[out_channels]),
                    }
                }
                LayerSpec::Relu => Layer::Relu,
                LayerSpec::Tanh => Layer::Tanh,
            };
            layers.push(layer);
        }
        Ok(Network {
            input_shape: input_shape.to_vec(),
            specs: specs.to_vec(),
            layers,
            output_len: shape.iter().product(),
            cache: None,
        })
    }

    /// Dense stack `input → hidden → … → output` with relu between layers.
    /// `depth` counts dense layers.
    pub fn mlp<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        output: usize,
        depth: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Network::new(&[input], &mlp_specs(input, hidden, output, depth), rng)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Deep copy of the parameters without cached activations.
    pub fn snapshot(&self) -> Network {
        Network {
            input_shape: self.input_shape.clone(),
            specs: self.specs.clone(),
            layers: self.layers.clone(),
            output_len: self.output_len,
            cache: None,
        }
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| match l {
            Layer::Dense { weight, bias } | Layer::Conv { weight, bias, .. } => {
                vec![weight, bias]
            }
            _ => Vec::new(),
        })
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| match l {
            Layer::Dense { weight, bias } | Layer::Conv { weight, bias, .. } => {
                vec![weight, bias]
            }
            _ => Vec::new(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.params().map(Tensor::len).sum()
    }

    pub fn same_layout(&self, other: &Network) -> bool {
        self.input_shape == other.input_shape && self.specs == other.specs
    }

    /// Bit-level fingerprint of all parameters.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.specs.hash(&mut h);
        for p in self.params() {
            for v in p.data() {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Zeroes the weights and bias of the last parametric layer.
    pub fn zero_output_layer(&mut self) {
        if let Some(Layer::Dense { weight, bias } | Layer::Conv { weight, bias, .. }) = self
            .layers
            .iter_mut()
            .rev()
            .find(|l| matches!(l, Layer::Dense { .. } | Layer::Conv { .. }))
        {
            weight.fill(0.0);
            bias.fill(0.0);
        }
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape().len() < 2 || input.sample_len() != self.input_len() {
            let mut expected = vec![input.batch()];
            expected.extend(&self.input_shape);
            return Err(Error::shape(&expected, input.shape()));
        }
        Ok(())
    }

    /// Evaluates the network and caches activations for `backward`.
    pub fn forward(&mut self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.clone());
        for layer in &self.layers {
            let next = layer_forward(layer, acts.last().expect("nonempty"));
            acts.push(next);
        }
        let out = acts.last().expect("nonempty").clone();
        self.cache = Some(acts);
        Ok(out)
    }

    /// Evaluates the network without touching the activation cache.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        self.check_input(input)?;
        let mut cur = input.clone();
        for layer in &self.layers {
            cur = layer_forward(layer, &cur);
        }
        Ok(cur)
    }

    /// Parameter gradients and the gradient with respect to the input of
    /// the last `forward` call.
    pub fn backward(&self, output_grad: &Tensor) -> Result<(Gradients, Tensor)> {
        let (g, dx) = self.backprop(output_grad, true, true)?;
        Ok((g.expect("requested"), dx.expect("requested")))
    }

    /// Parameter gradients only; skips the input gradient of the first layer.
    pub fn backward_params(&self, output_grad: &Tensor) -> Result<Gradients> {
        Ok(self
            .backprop(output_grad, true, false)?
            .0
            .expect("requested"))
    }

    /// Input gradient only; skips all weight gradients.
    pub fn input_gradient(&self, output_grad: &Tensor) -> Result<Tensor> {
        Ok(self
            .backprop(output_grad, false, true)?
            .1
            .expect("requested"))
    }

    fn backprop(
        &self,
        output_grad: &Tensor,
        want_params: bool,
        want_input: bool,
    ) -> Result<(Option<Gradients>, Option<Tensor>)> {
        let acts = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::Usage("backward called before forward".into()))?;
        let out = acts.last().expect("nonempty");
        if output_grad.len() != out.len() {
            return Err(Error::shape(out.shape(), output_grad.shape()));
        }
        let mut grads: Vec<Tensor> = Vec::new();
        let mut grad = output_grad.data().to_vec();
        let mut input_grad = None;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let x = &acts[i];
            let y = &acts[i + 1];
            let need_dx = i > 0 || want_input;
            let (pg, dx) = layer_backward(layer, x, y, &grad, want_params, need_dx);
            if let Some((dw, db)) = pg {
                grads.push(db);
                grads.push(dw);
            }
            match dx {
                Some(dx) if i > 0 => grad = dx,
                Some(dx) => input_grad = Some(Tensor::new(x.shape(), dx)?),
                None => {}
            }
        }
        grads.reverse();
        Ok((want_params.then_some(Gradients(grads)), input_grad))
    }
}

pub fn mlp_specs(input: usize, hidden: usize, output: usize, depth: usize) -> Vec<LayerSpec> {
    let depth = depth.max(1);
    let mut specs = Vec::with_capacity(2 * depth);
    let mut width = input;
    for i in 0..depth {
        let out = if i + 1 == depth { output } else { hidden };
        specs.push(LayerSpec::Dense {
            input: width,
            output: out,
        });
        if i + 1 < depth {
            specs.push(LayerSpec::Relu);
        }
        width = out;
    }
    specs
}

fn layer_forward(layer: &Layer, x: &Tensor) -> Tensor {
    let batch = x.batch();
    match layer {
        Layer::Dense { weight, bias } => {
            let (out, inp) = (weight.shape()[0], weight.shape()[1]);
            let mut y = Vec::with_capacity(batch * out);
            for _ in 0..batch {
                y.extend_from_slice(bias.data());
            }
            // y = x · wᵀ + b
            gemm(batch, inp, out, x.data(), inp, 1, weight.data(), 1, inp, 1.0, &mut y);
            Tensor::new(&[batch, out], y).expect("dense output shape")
        }
        Layer::Conv { geom, weight, bias } => {
            let r = geom.patch_len();
            let p = geom.positions();
            let in_len = geom.in_ch * geom.in_h * geom.in_w;
            let out_len = geom.out_ch * p;
            let mut cols = vec![0.0; r * p];
            let mut y = vec![0.0; batch * out_len];
            for s in 0..batch {
                geom.im2col(&x.data()[s * in_len..(s + 1) * in_len], &mut cols);
                let ys = &mut y[s * out_len..(s + 1) * out_len];
                for (oc, chunk) in ys.chunks_mut(p).enumerate() {
                    chunk.fill(bias.data()[oc]);
                }
                gemm(geom.out_ch, r, p, weight.data(), r, 1, &cols, p, 1, 1.0, ys);
            }
            Tensor::new(&[batch, geom.out_ch, geom.out_h, geom.out_w], y)
                .expect("conv output shape")
        }
        Layer::Relu => map(x, |v| v.max(0.0)),
        Layer::Tanh => map(x, f64::tanh),
    }
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(x.shape(), x.data().iter().map(|&v| f(v)).collect()).expect("same shape")
}

type ParamGrads = Option<(Tensor, Tensor)>;

fn layer_backward(
    layer: &Layer,
    x: &Tensor,
    y: &Tensor,
    dy: &[f64],
    want_params: bool,
    want_dx: bool,
) -> (ParamGrads, Option<Vec<f64>>) {
    let batch = x.batch();
    match layer {
        Layer::Dense { weight, .. } => {
            let (out, inp) = (weight.shape()[0], weight.shape()[1]);
            let pg = want_params.then(|| {
                let mut dw = vec![0.0; out * inp];
                // dw = dyᵀ · x
                gemm(out, batch, inp, dy, 1, out, x.data(), inp, 1, 0.0, &mut dw);
                let mut db = vec![0.0; out];
                for row in dy.chunks(out) {
                    db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                }
                (
                    Tensor::new(&[out, inp], dw).expect("dw"),
                    Tensor::new(&[out], db).expect("db"),
                )
            });
            let dx = want_dx.then(|| {
                let mut dx = vec![0.0; batch * inp];
                // dx = dy · w
                gemm(batch, out, inp, dy, out, 1, weight.data(), inp, 1, 0.0, &mut dx);
                dx
            });
            (pg, dx)
        }
        Layer::Conv { geom, weight, .. } => {
            let r = geom.patch_len();
            let p = geom.positions();
            let in_len = geom.in_ch * geom.in_h * geom.in_w;
            let out_len = geom.out_ch * p;
            let mut dw = vec![0.0; geom.out_ch * r];
            let mut db = vec![0.0; geom.out_ch];
            let mut dx = if want_dx {
                vec![0.0; batch * in_len]
            } else {
                Vec::new()
            };
            let mut cols = vec![0.0; r * p];
            let mut dcols = vec![0.0; r * p];
            for s in 0..batch {
                let dys = &dy[s * out_len..(s + 1) * out_len];
                if want_params {
                    geom.im2col(&x.data()[s * in_len..(s + 1) * in_len], &mut cols);
                    // dw += dy_s · colsᵀ
                    gemm(geom.out_ch, p, r, dys, p, 1, &cols, 1, p, 1.0, &mut dw);
                    for (oc, chunk) in dys.chunks(p).enumerate() {
                        db[oc] += chunk.iter().sum::<f64>();
                    }
                }
                if want_dx {
                    // dcols = wᵀ · dy_s
                    gemm(r, geom.out_ch, p, weight.data(), 1, r, dys, p, 1, 0.0, &mut dcols);
                    geom.col2im_add(&dcols, &mut dx[s * in_len..(s + 1) * in_len]);
                }
            }
            let pg = want_params.then(|| {
                (
                    Tensor::new(&[geom.out_ch, r], dw).expect("dw"),
                    Tensor::new(&[geom.out_ch], db).expect("db"),
                )
            });
            (pg, want_dx.then_some(dx))
        }
        Layer::Relu => {
            let dx = want_dx.then(|| {
                x.data()
                    .iter()
                    .zip(dy)
                    .map(|(&xi, &g)| if xi > 0.0 { g } else { 0.0 })
                    .collect()
            });
            (None, dx)
        }
        Layer::Tanh => {
            let dx = want_dx.then(|| {
                y.data()
                    .iter()
                    .zip(dy)
                    .map(|(&yi, &g)| g * (1.0 - yi * yi))
                    .collect()
            });
            (None, dx)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dense(w: f64, b: f64) -> Network {
        let mut net = Network::zeroed(&[1], &[LayerSpec::Dense { input: 1, output: 1 }]).unwrap();
        let mut params = net.params_mut();
        params.next().unwrap().data_mut()[0] = w;
        params.next().unwrap().data_mut()[0] = b;
        drop(params);
        net
    }

    #[test]
    fn dense_affine() {
        let net = dense(2.0, 1.0);
        let y = net.infer(&Tensor::from_rows(1, 1, vec![3.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[7.0]);
    }

    #[test]
    fn relu_forward() {
        let net = Network::zeroed(&[3], &[LayerSpec::Relu]).unwrap();
        let y = net
            .infer(&Tensor::from_rows(1, 3, vec![-1.0, 0.0, 2.0]).unwrap())
            .unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn conv_all_ones_center() {
        let spec = LayerSpec::Conv {
            in_channels: 1,
            out_channels: 1,
            kernel: 3,
            stride: 1,
        };
        let mut net = Network::zeroed(&[1, 3, 3], &[spec]).unwrap();
        net.params_mut().next().unwrap().fill(1.0);
        let y = net.infer(&Tensor::filled(&[1, 1, 3, 3], 1.0)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn mse_gradient_of_scalar_model() {
        // y = w·x, w = 2, x = 3, target 7: dL/dw = 2·(6 − 7)·3 = −6
        let mut net = dense(2.0, 0.0);
        let y = net.forward(&Tensor::from_rows(1, 1, vec![3.0]).unwrap()).unwrap();
        let dy = Tensor::from_rows(1, 1, vec![2.0 * (y.data()[0] - 7.0)]).unwrap();
        let (g, _) = net.backward(&dy).unwrap();
        assert_eq!(g.0[0].data(), &[-6.0]);
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::mlp(4, 8, 2, 3, &mut rng).unwrap();
        let x = Tensor::from_rows(2, 4, (0..8).map(|v| v as f64 * 0.1).collect()).unwrap();
        net.forward(&x).unwrap();
        let (g, dx) = net.backward(&Tensor::zeros(&[2, 2])).unwrap();
        assert!(g.is_zero());
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tanh_derivative_at_zero() {
        let mut net = Network::zeroed(&[1], &[LayerSpec::Tanh]).unwrap();
        net.forward(&Tensor::from_rows(1, 1, vec![0.0]).unwrap()).unwrap();
        let dx = net.input_gradient(&Tensor::from_rows(1, 1, vec![1.0]).unwrap()).unwrap();
        assert_eq!(dx.data(), &[1.0]);
    }

    #[test]
    fn backward_before_forward_is_usage_error() {
        let net = dense(1.0, 0.0);
        let err = net.backward(&Tensor::zeros(&[1, 1])).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Network::mlp(4, 8, 2, 3, &mut rng).unwrap();
        assert!(net.infer(&Tensor::zeros(&[1, 5])).is_err());
        assert!(Network::zeroed(&[4], &[LayerSpec::Dense { input: 3, output: 1 }]).is_err());
    }

    #[test]
    fn init_within_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::mlp(16, 32, 1, 3, &mut rng).unwrap();
        let w = net.params().next().unwrap();
        let bound = 1.0 / 16f64.sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
        assert_eq!(net.param_count(), 16 * 32 + 32 + 32 * 32 + 32 + 32 + 1);
    }

    #[test]
    fn snapshot_is_deep_and_forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = Network::mlp(3, 4, 1, 2, &mut rng).unwrap();
        let x = Tensor::from_rows(1, 3, vec![0.1, -0.2, 0.3]).unwrap();
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a.data()[0].to_bits(), b.data()[0].to_bits());
        let snap = net.snapshot();
        net.params_mut().next().unwrap().fill(0.0);
        assert_ne!(snap.fingerprint(), net.fingerprint());
    }
}
