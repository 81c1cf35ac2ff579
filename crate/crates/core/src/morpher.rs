//! The shape morpher: an MLP that maps `[point, latent]` to a 3D flow vector.
//!
//! Hidden layers use softplus, the output layer is linear. Parameters live in
//! one flat buffer (per layer: row-major `out × in` weights followed by the
//! bias) so optimizers and gradient checks can treat them as a single vector.
//!
//! The latent code is concatenated to every point, so the first layer's
//! pre-activation splits into a per-point part (3 columns) and a shared part
//! `W_z · z + b` computed once per batch. The latent gradient is the sum of
//! per-point contributions, reduced in ascending point order.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::gemm::{gemm, MatRef};
use crate::geometry::{FlowField, Point3, PointCloud};
use crate::rng::rng_from_seed;
use crate::{Error, Real, Result};

pub const DEFAULT_HIDDEN_DIMS: [usize; 4] = [512, 256, 128, 64];
pub const DEFAULT_LATENT_DIM: usize = 256;
pub const POINT_DIM: usize = 3;
pub const OUTPUT_DIM: usize = 3;

/// Owned parameters of one dense layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<Real>,
    pub bias: Vec<Real>,
}

/// Borrowed view of one layer inside a [`MorpherNet`].
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: &'a [Real],
    pub bias: &'a [Real],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorpherNet {
    latent_dim: usize,
    /// Layer widths including input (`3 + latent_dim`) and output (3).
    dims: Vec<usize>,
    /// Start of each layer's block in `params`.
    offsets: Vec<usize>,
    params: Vec<Real>,
}

fn layout(dims: &[usize]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(dims.len() - 1);
    let mut total = 0;
    for w in dims.windows(2) {
        offsets.push(total);
        total += w[1] * w[0] + w[1];
    }
    (offsets, total)
}

impl MorpherNet {
    /// A net with every weight and bias set to zero.
    pub fn zeros(latent_dim: usize, hidden_dims: &[usize]) -> Result<Self> {
        if latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be at least 1"));
        }
        if hidden_dims.is_empty() || hidden_dims.contains(&0) {
            return Err(Error::invalid("hidden_dims must be non-empty and positive"));
        }
        let mut dims = vec![POINT_DIM + latent_dim];
        dims.extend_from_slice(hidden_dims);
        dims.push(OUTPUT_DIM);
        let (offsets, total) = layout(&dims);
        Ok(MorpherNet {
            latent_dim,
            dims,
            offsets,
            params: vec![0.0; total],
        })
    }

    /// Assembles a net from explicit layers, validating the dimension chain.
    pub fn from_layers(latent_dim: usize, layers: Vec<LayerParams>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::invalid("a morpher needs at least one hidden layer"));
        }
        let hidden: Vec<usize> = layers[..layers.len() - 1].iter().map(|l| l.out_dim).collect();
        let mut net = MorpherNet::zeros(latent_dim, &hidden)?;
        for (k, l) in layers.iter().enumerate() {
            let (want_in, want_out) = (net.dims[k], net.dims[k + 1]);
            if l.in_dim != want_in || l.out_dim != want_out {
                return Err(Error::invalid(format!(
                    "layer {k} is {}x{} but the chain requires {}x{}",
                    l.out_dim, l.in_dim, want_out, want_in
                )));
            }
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::invalid(format!("layer {k} buffers do not match its shape")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {k} has non-finite parameters")));
            }
            let off = net.offsets[k];
            let nw = l.weights.len();
            net.params[off..off + nw].copy_from_slice(&l.weights);
            net.params[off + nw..off + nw + l.out_dim].copy_from_slice(&l.bias);
        }
        Ok(net)
    }

    pub fn to_layers(&self) -> Vec<LayerParams> {
        (0..self.n_layers())
            .map(|k| {
                let v = self.layer(k);
                LayerParams {
                    in_dim: v.in_dim,
                    out_dim: v.out_dim,
                    weights: v.weights.to_vec(),
                    bias: v.bias.to_vec(),
                }
            })
            .collect()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn hidden_dims(&self) -> &[usize] {
        &self.dims[1..self.dims.len() - 1]
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[Real] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Real] {
        &mut self.params
    }

    fn layer_range(&self, k: usize) -> (usize, usize, usize) {
        let (i, o) = (self.dims[k], self.dims[k + 1]);
        (self.offsets[k], i, o)
    }

    pub fn layer(&self, k: usize) -> LayerView<'_> {
        let (off, in_dim, out_dim) = self.layer_range(k);
        let nw = in_dim * out_dim;
        LayerView {
            in_dim,
            out_dim,
            weights: &self.params[off..off + nw],
            bias: &self.params[off + nw..off + nw + out_dim],
        }
    }

    /// Human-readable name of a flat parameter index.
    pub fn describe_param(&self, index: usize) -> String {
        for k in (0..self.n_layers()).rev() {
            let (off, in_dim, out_dim) = self.layer_range(k);
            if index >= off {
                let local = index - off;
                return if local < in_dim * out_dim {
                    format!("layer{k}.w[{}][{}]", local / in_dim, local % in_dim)
                } else {
                    format!("layer{k}.b[{}]", local - in_dim * out_dim)
                };
            }
        }
        format!("param[{index}]")
    }

    /// Flat indices that are weights (not biases).
    pub fn weight_indices(&self) -> Vec<usize> {
        (0..self.n_layers())
            .flat_map(|k| {
                let (off, i, o) = self.layer_range(k);
                off..off + i * o
            })
            .collect()
    }

    fn check_latent(&self, z: &[Real]) -> Result<()> {
        if z.len() != self.latent_dim {
            return Err(Error::invalid(format!(
                "latent code has length {} but the net expects {}",
                z.len(),
                self.latent_dim
            )));
        }
        Ok(())
    }
}

/// Uniform `±1/sqrt(fan_in)` weights and zero biases.
pub fn init_net(latent_dim: usize, hidden_dims: &[usize], seed: u64) -> Result<MorpherNet> {
    let mut net = MorpherNet::zeros(latent_dim, hidden_dims)?;
    let mut rng = rng_from_seed(seed);
    for k in 0..net.n_layers() {
        let (off, in_dim, out_dim) = net.layer_range(k);
        let bound = 1.0 / (in_dim as Real).sqrt();
        for w in &mut net.params[off..off + in_dim * out_dim] {
            *w = rng.gen_range(-bound..=bound);
        }
    }
    Ok(net)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: Real) -> Real {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`]: the logistic sigmoid.
pub fn softplus_prime(x: Real) -> Real {
    1.0 / (1.0 + (-x).exp())
}

/// Softplus and its slope from a single exponential.
#[inline]
fn softplus_and_slope(x: Real) -> (Real, Real) {
    if x > 30.0 {
        let e = (-x).exp();
        (x + e.ln_1p(), 1.0 / (1.0 + e))
    } else {
        let e = x.exp();
        (e.ln_1p(), e / (1.0 + e))
    }
}

/// State recorded by [`forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    pub n_points: usize,
    /// `N × 3` input positions.
    pub positions: Vec<Real>,
    pub latent: Vec<Real>,
    /// Output of each hidden layer, `N × width`.
    pub activations: Vec<Vec<Real>>,
    /// Softplus slope at each hidden pre-activation, `N × width`.
    pub slopes: Vec<Vec<Real>>,
}

/// Evaluates the flow at every point with the same latent code.
pub fn forward(net: &MorpherNet, points: &PointCloud, z: &[Real]) -> Result<(FlowField, ForwardTape)> {
    net.check_latent(z)?;
    let n = points.len();
    let positions: Vec<Real> = points.points.iter().flat_map(|p| p.to_array()).collect();
    let n_layers = net.n_layers();
    let mut activations = Vec::with_capacity(n_layers - 1);
    let mut slopes = Vec::with_capacity(n_layers - 1);

    // Layer 0: shared latent term plus per-point position term.
    let l0 = net.layer(0);
    let h0 = l0.out_dim;
    let shared: Vec<Real> = (0..h0)
        .map(|r| {
            let row = &l0.weights[r * l0.in_dim + POINT_DIM..(r + 1) * l0.in_dim];
            let s: Real = row.iter().zip(z).map(|(w, v)| w * v).sum();
            l0.bias[r] + s
        })
        .collect();
    let mut act = vec![0.0; n * h0];
    let mut slope = vec![0.0; n * h0];
    for i in 0..n {
        let p = &positions[i * 3..i * 3 + 3];
        for r in 0..h0 {
            let w = &l0.weights[r * l0.in_dim..r * l0.in_dim + 3];
            let pre = shared[r] + w[0] * p[0] + w[1] * p[1] + w[2] * p[2];
            let (a, s) = softplus_and_slope(pre);
            act[i * h0 + r] = a;
            slope[i * h0 + r] = s;
        }
    }
    activations.push(act);
    slopes.push(slope);

    let mut output = Vec::new();
    for k in 1..n_layers {
        let layer = net.layer(k);
        let input = activations.last().expect("layer 0 pushed");
        let mut pre: Vec<Real> = Vec::with_capacity(n * layer.out_dim);
        for _ in 0..n {
            pre.extend_from_slice(layer.bias);
        }
        gemm(
            MatRef::row_major(input, n, layer.in_dim),
            MatRef::transposed(layer.weights, layer.out_dim, layer.in_dim),
            1.0,
            &mut pre,
        );
        if k + 1 == n_layers {
            output = pre;
        } else {
            let mut s = vec![0.0; pre.len()];
            for (x, sl) in pre.iter_mut().zip(s.iter_mut()) {
                let (a, d) = softplus_and_slope(*x);
                *x = a;
                *sl = d;
            }
            activations.push(pre);
            slopes.push(s);
        }
    }

    let flow = FlowField {
        vectors: output
            .chunks_exact(OUTPUT_DIM)
            .map(|c| Point3::new(c[0], c[1], c[2]))
            .collect(),
        source_frame_id: points.frame_id,
    };
    let tape = ForwardTape {
        n_points: n,
        positions,
        latent: z.to_vec(),
        activations,
        slopes,
    };
    Ok((flow, tape))
}

/// Gradients of a scalar loss with respect to all parameters and the latent.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same layout as [`MorpherNet::params`].
    pub params: Vec<Real>,
    pub latent: Vec<Real>,
}

/// Reverse pass given `dL/dflow` for every point.
pub fn backward(net: &MorpherNet, tape: &ForwardTape, upstream: &[Point3]) -> Result<Gradients> {
    let (params, latent) = backward_impl(net, tape, upstream, true)?;
    Ok(Gradients {
        params: params.expect("parameter gradients requested"),
        latent,
    })
}

/// Reverse pass for the latent only; skips every weight-gradient product.
pub fn backward_latent(net: &MorpherNet, tape: &ForwardTape, upstream: &[Point3]) -> Result<Vec<Real>> {
    Ok(backward_impl(net, tape, upstream, false)?.1)
}

fn backward_impl(
    net: &MorpherNet,
    tape: &ForwardTape,
    upstream: &[Point3],
    with_params: bool,
) -> Result<(Option<Vec<Real>>, Vec<Real>)> {
    let n = tape.n_points;
    if upstream.len() != n {
        return Err(Error::invalid(format!(
            "upstream gradient has {} rows but the tape holds {} points",
            upstream.len(),
            n
        )));
    }
    let n_layers = net.n_layers();
    if tape.activations.len() != n_layers - 1 || tape.latent.len() != net.latent_dim {
        return Err(Error::invalid("tape does not match the network architecture"));
    }
    let mut grads = with_params.then(|| vec![0.0; net.num_params()]);
    let mut delta: Vec<Real> = upstream.iter().flat_map(|p| p.to_array()).collect();

    for k in (1..n_layers).rev() {
        let layer = net.layer(k);
        let (in_dim, out_dim) = (layer.in_dim, layer.out_dim);
        let input = &tape.activations[k - 1];
        if let Some(g) = grads.as_mut() {
            let (off, _, _) = net.layer_range(k);
            let (gw, rest) = g[off..].split_at_mut(in_dim * out_dim);
            gemm(
                MatRef::transposed(&delta, n, out_dim),
                MatRef::row_major(input, n, in_dim),
                0.0,
                gw,
            );
            let gb = &mut rest[..out_dim];
            for row in delta.chunks_exact(out_dim) {
                for (b, d) in gb.iter_mut().zip(row) {
                    *b += d;
                }
            }
        }
        let mut d_input = vec![0.0; n * in_dim];
        gemm(
            MatRef::row_major(&delta, n, out_dim),
            MatRef::row_major(layer.weights, out_dim, in_dim),
            0.0,
            &mut d_input,
        );
        for (d, s) in d_input.iter_mut().zip(&tape.slopes[k - 1]) {
            *d *= s;
        }
        delta = d_input;
    }

    let l0 = net.layer(0);
    let (in0, h0) = (l0.in_dim, l0.out_dim);
    let mut delta_sum = vec![0.0; h0];
    for row in delta.chunks_exact(h0) {
        for (s, d) in delta_sum.iter_mut().zip(row) {
            *s += d;
        }
    }
    if let Some(g) = grads.as_mut() {
        let (gw, rest) = g[..].split_at_mut(in0 * h0);
        for i in 0..n {
            let p = &tape.positions[i * 3..i * 3 + 3];
            let drow = &delta[i * h0..(i + 1) * h0];
            for (r, d) in drow.iter().enumerate() {
                let w = &mut gw[r * in0..r * in0 + 3];
                w[0] += d * p[0];
                w[1] += d * p[1];
                w[2] += d * p[2];
            }
        }
        for (r, s) in delta_sum.iter().enumerate() {
            for (w, zj) in gw[r * in0 + POINT_DIM..(r + 1) * in0].iter_mut().zip(&tape.latent) {
                *w = s * zj;
            }
        }
        rest[..h0].copy_from_slice(&delta_sum);
    }
    let mut z_grad = vec![0.0; net.latent_dim];
    for (r, s) in delta_sum.iter().enumerate() {
        let row = &l0.weights[r * in0 + POINT_DIM..(r + 1) * in0];
        for (g, w) in z_grad.iter_mut().zip(row) {
            *g += w * s;
        }
    }
    Ok((grads, z_grad))
}

/// What a gradient-check entry refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GradTarget {
    Param(usize),
    Latent(usize),
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckEntry {
    pub target: GradTarget,
    pub analytic: Real,
    pub numeric: Real,
    pub rel_error: Real,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: Real,
    pub worst: Option<GradCheckEntry>,
    pub weights_checked: usize,
    pub params_checked: usize,
    pub latent_checked: usize,
    pub tol: Real,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub h: Real,
    pub tol: Real,
    /// Number of weight entries to sample (all weights when the net has fewer).
    pub weight_samples: usize,
    /// Number of bias entries to sample.
    pub bias_samples: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            h: 1e-6,
            tol: 1e-5,
            weight_samples: 128,
            bias_samples: 32,
            seed: 0,
        }
    }
}

/// Denominator floor for the relative error, so gradients that are zero up
/// to round-off are compared absolutely.
pub const REL_ERROR_FLOOR: Real = 1e-6;

pub fn relative_error(analytic: Real, numeric: Real) -> Real {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// A loss over the flow field that also returns `dL/dflow`.
pub type FlowLoss<'a> = dyn Fn(&FlowField) -> Result<(Real, Vec<Point3>)> + 'a;

/// Compares analytic gradients with central differences of `loss_fn ∘ forward`
/// over a seeded subset of parameters and every latent entry.
pub fn gradient_check(
    net: &MorpherNet,
    points: &PointCloud,
    z: &[Real],
    loss_fn: &FlowLoss<'_>,
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    if !(config.h > 0.0) {
        return Err(Error::invalid("finite-difference step must be > 0"));
    }
    let (flow, tape) = forward(net, points, z)?;
    let (_, upstream) = loss_fn(&flow)?;
    let analytic = backward(net, &tape, &upstream)?;

    let mut rng = rng_from_seed(config.seed);
    let mut pick = |pool: Vec<usize>, k: usize| -> Vec<usize> {
        if pool.len() <= k {
            pool
        } else {
            let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), k)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            chosen.sort_unstable();
            chosen
        }
    };
    let weights = net.weight_indices();
    let weight_set: std::collections::BTreeSet<usize> = weights.iter().copied().collect();
    let biases: Vec<usize> = (0..net.num_params()).filter(|i| !weight_set.contains(i)).collect();
    let sampled_weights = pick(weights, config.weight_samples);
    let sampled_biases = pick(biases, config.bias_samples);

    let mut probe = net.clone();
    let mut zp = z.to_vec();
    let eval = |net: &MorpherNet, z: &[Real]| -> Result<Real> {
        let (f, _) = forward(net, points, z)?;
        Ok(loss_fn(&f)?.0)
    };

    let mut entries = Vec::new();
    for &idx in sampled_weights.iter().chain(&sampled_biases) {
        let orig = probe.params[idx];
        probe.params[idx] = orig + config.h;
        let up = eval(&probe, z)?;
        probe.params[idx] = orig - config.h;
        let down = eval(&probe, z)?;
        probe.params[idx] = orig;
        let numeric = (up - down) / (2.0 * config.h);
        let a = analytic.params[idx];
        entries.push(GradCheckEntry {
            target: GradTarget::Param(idx),
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    for j in 0..z.len() {
        let orig = zp[j];
        zp[j] = orig + config.h;
        let up = eval(net, &zp)?;
        zp[j] = orig - config.h;
        let down = eval(net, &zp)?;
        zp[j] = orig;
        let numeric = (up - down) / (2.0 * config.h);
        let a = analytic.latent[j];
        entries.push(GradCheckEntry {
            target: GradTarget::Latent(j),
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }

    let worst = entries
        .iter()
        .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
        .cloned();
    let max_rel_error = worst.as_ref().map_or(0.0, |w| w.rel_error);
    Ok(GradCheckReport {
        max_rel_error,
        worst,
        weights_checked: sampled_weights.len(),
        params_checked: sampled_weights.len() + sampled_biases.len(),
        latent_checked: z.len(),
        tol: config.tol,
        passed: config.tol == Real::INFINITY || max_rel_error < config.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal_vec;

    fn cloud(n: usize, seed: u64) -> PointCloud {
        let v = standard_normal_vec(seed, 3 * n);
        PointCloud::new(v.chunks(3).map(|c| Point3::new(c[0], c[1], c[2])).collect(), 0).unwrap()
    }

    /// Sum of squares of the flow, `dL/df = 2f`.
    fn square_loss(f: &FlowField) -> Result<(Real, Vec<Point3>)> {
        let l = f.vectors.iter().map(|v| v.norm_squared()).sum();
        Ok((l, f.vectors.iter().map(|&v| v * 2.0).collect()))
    }

    #[test]
    fn default_architecture_shapes() {
        let net = init_net(DEFAULT_LATENT_DIM, &DEFAULT_HIDDEN_DIMS, 1).unwrap();
        let l0 = net.layer(0);
        assert_eq!((l0.out_dim, l0.in_dim), (512, 259));
        assert_eq!(l0.weights.len(), 512 * 259);
        assert_eq!(net.layer(4).out_dim, 3);
        assert_eq!(net.hidden_dims(), &DEFAULT_HIDDEN_DIMS);
    }

    #[test]
    fn init_is_bounded_deterministic_with_zero_bias() {
        let net = init_net(4, &[8, 6], 5).unwrap();
        assert_eq!(net, init_net(4, &[8, 6], 5).unwrap());
        assert_ne!(net, init_net(4, &[8, 6], 6).unwrap());
        for k in 0..net.n_layers() {
            let l = net.layer(k);
            assert!(l.bias.iter().all(|&b| b == 0.0));
            let bound = 1.0 / (l.in_dim as Real).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= bound));
        }
        assert!(init_net(0, &[4], 0).is_err());
        assert!(init_net(2, &[], 0).is_err());
    }

    #[test]
    fn softplus_values() {
        assert!((softplus(0.0) - std::f64::consts::LN_2 as Real).abs() < 1e-15);
        assert!(softplus(50.0) - 50.0 < 1e-15);
        assert!(softplus(1000.0).is_finite());
        assert!(softplus(-1000.0) >= 0.0);
        assert_eq!(softplus_prime(0.0), 0.5);
        for x in [-40.0, -3.0, -0.5, 0.0, 0.7, 12.0, 29.0, 31.0, 80.0] {
            let (s, d) = softplus_and_slope(x);
            assert!((s - softplus(x)).abs() <= 1e-15 * (1.0 + s.abs()));
            assert!((d - softplus_prime(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_net_gives_zero_flow() {
        let net = MorpherNet::zeros(3, &[5, 4]).unwrap();
        let (f, _) = forward(&net, &cloud(7, 1), &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(f.len(), 7);
        assert!(f.vectors.iter().all(|&v| v == Point3::ZERO));
    }

    #[test]
    fn latent_length_is_checked() {
        let net = init_net(3, &[4], 0).unwrap();
        assert!(forward(&net, &cloud(2, 0), &[0.0; 2]).is_err());
    }

    #[test]
    fn empty_batch_is_allowed() {
        let net = init_net(2, &[4], 0).unwrap();
        let (f, tape) = forward(&net, &PointCloud::new(vec![], 0).unwrap(), &[0.1, 0.2]).unwrap();
        assert!(f.is_empty());
        let g = backward(&net, &tape, &[]).unwrap();
        assert!(g.params.iter().all(|&v| v == 0.0));
        assert!(g.latent.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tiny_net_matches_hand_computation() {
        // latent 1, hidden [2]: input (x, y, z, l).
        let layers = vec![
            LayerParams {
                in_dim: 4,
                out_dim: 2,
                weights: vec![1.0, 0.0, 0.0, 0.5, 0.0, -1.0, 2.0, 0.0],
                bias: vec![0.1, -0.2],
            },
            LayerParams {
                in_dim: 2,
                out_dim: 3,
                weights: vec![1.0, 0.0, 0.0, 1.0, 2.0, -3.0],
                bias: vec![0.0, 0.5, 1.0],
            },
        ];
        let net = MorpherNet::from_layers(1, layers).unwrap();
        let p = PointCloud::new(vec![Point3::new(0.3, -0.4, 0.25)], 0).unwrap();
        let (f, _) = forward(&net, &p, &[2.0]).unwrap();
        // h0 = 0.3 + 0.5*2 + 0.1 = 1.4 ; h1 = 0.4 + 0.5 - 0.2 = 0.7
        let a0 = (1.0 + (1.4 as Real).exp()).ln();
        let a1 = (1.0 + (0.7 as Real).exp()).ln();
        let want = Point3::new(a0, a1 + 0.5, 2.0 * a0 - 3.0 * a1 + 1.0);
        assert!(f.vectors[0].distance(want) < 1e-14, "{:?} vs {want:?}", f.vectors[0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = init_net(3, &[6, 5], 2).unwrap();
        let c = cloud(4, 3);
        let (_, tape) = forward(&net, &c, &[0.3, 0.1, -0.2]).unwrap();
        let g = backward(&net, &tape, &[Point3::ZERO; 4]).unwrap();
        assert!(g.params.iter().all(|&v| v == 0.0));
        assert!(g.latent.iter().all(|&v| v == 0.0));
        assert!(backward(&net, &tape, &[Point3::ZERO; 3]).is_err());
    }

    #[test]
    fn latent_gradient_is_additive_over_points() {
        let net = init_net(4, &[8, 8], 9).unwrap();
        let z = standard_normal_vec(10, 4);
        let both = cloud(2, 11);
        let up = [Point3::new(0.3, -1.0, 0.2), Point3::new(-0.7, 0.1, 0.9)];
        let (_, tape) = forward(&net, &both, &z).unwrap();
        let g = backward(&net, &tape, &up).unwrap();
        let mut sum = vec![0.0; 4];
        for i in 0..2 {
            let single = both.with_points(vec![both.points[i]]);
            let (_, t) = forward(&net, &single, &z).unwrap();
            let gi = backward(&net, &t, &up[i..i + 1]).unwrap();
            for (s, v) in sum.iter_mut().zip(&gi.latent) {
                *s += v;
            }
        }
        for (a, b) in g.latent.iter().zip(&sum) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(backward_latent(&net, &tape, &up).unwrap(), g.latent);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let net = init_net(4, &[8, 8], 21).unwrap();
        let z = standard_normal_vec(22, 4);
        let pts = cloud(6, 23);
        let report = gradient_check(&net, &pts, &z, &square_loss, &GradCheckConfig::default()).unwrap();
        assert!(report.passed, "{report:?}");
        assert_eq!(report.latent_checked, 4);
    }

    #[test]
    fn infinite_tolerance_always_passes() {
        let net = init_net(2, &[3], 0).unwrap();
        let bogus = |f: &FlowField| -> Result<(Real, Vec<Point3>)> {
            Ok((0.0, vec![Point3::new(1.0, 1.0, 1.0); f.len()]))
        };
        let cfg = GradCheckConfig {
            tol: Real::INFINITY,
            ..Default::default()
        };
        let r = gradient_check(&net, &cloud(3, 0), &[0.0, 1.0], &bogus, &cfg).unwrap();
        assert!(r.passed);
        assert!(r.max_rel_error > 0.5);
    }

    #[test]
    fn gradient_check_covers_enough_weights() {
        let net = init_net(4, &[16, 16], 1).unwrap();
        let r = gradient_check(
            &net,
            &cloud(3, 1),
            &standard_normal_vec(2, 4),
            &square_loss,
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(r.weights_checked >= 100);
        assert_eq!(r.latent_checked, 4);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn describe_param_names_layers() {
        let net = init_net(1, &[2], 0).unwrap();
        assert_eq!(net.describe_param(0), "layer0.w[0][0]");
        assert_eq!(net.describe_param(8), "layer0.b[0]");
        assert_eq!(net.describe_param(10), "layer1.w[0][0]");
    }

    #[test]
    fn from_layers_rejects_broken_chain() {
        let mut layers = init_net(2, &[4], 0).unwrap().to_layers();
        layers[1].in_dim = 5;
        assert!(MorpherNet::from_layers(2, layers).is_err());
    }
}
