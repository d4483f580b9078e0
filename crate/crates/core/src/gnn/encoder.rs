//! GraphSAGE-style encoder: forward pass, tape and analytic backward pass.
//!
//! For layer `l` and a node `v` with children `C(v)` in the compute graph:
//!
//! ```text
//! f_l(x)  = act_l(W_l x + b_l)
//! AGG     = mean_{c in C(v)} f_l(h(c))                      (mean mode)
//!         = sum_c softmax_c(leaky(a . [f_l(h(v)) || f_l(h(c))])) f_l(h(c))
//! h_l(v)  = act_l(U_l h_{l-1}(v) + AGG)                      (AGG = 0 when C(v) is empty)
//! ```
//!
//! Layer `l` is evaluated for nodes at depths `0..=L-l`, so the query node
//! receives `L` rounds of aggregation and leaves contribute raw features.
//! All arithmetic is `f64`; parameters of other scalar types are cast once.

use std::ops::Range;

use super::compute_graph::ComputeGraph;
use super::params::{Activation, AggregationMode, EncoderLayer, EncoderParams, Grads, ATTENTION_LEAK};
use super::GnnError;
use crate::graph::NodeType;
use crate::scalar::Scalar;

/// Final-layer representation of a query node.
pub type Embedding<T> = Vec<T>;

/// Encodes the query node of `cg`.
pub fn encode<T: Scalar>(cg: &ComputeGraph, params: &EncoderParams<T>) -> Result<Embedding<T>, GnnError> {
    let p64 = params.cast::<f64>();
    let tape = forward(cg, &p64)?;
    Ok(tape.output().iter().map(|&x| T::of(x)).collect())
}

/// `f(x) = act(W x + b)`, returning (pre-activation, activation).
pub(crate) fn transform(layer: &EncoderLayer<f64>, x: &[f64], pre: &mut [f64], out: &mut [f64]) {
    let (rows, cols) = (layer.out_dim, layer.in_dim);
    for r in 0..rows {
        let row = &layer.transform[r * cols..(r + 1) * cols];
        let mut acc = layer.bias[r];
        for (w, v) in row.iter().zip(x) {
            acc += w * v;
        }
        pre[r] = acc;
        out[r] = layer.activation.apply(acc);
    }
}

#[inline]
fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        ATTENTION_LEAK * x
    }
}

#[inline]
fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        ATTENTION_LEAK
    }
}

/// Softmax in place, shifted by the maximum for stability.
pub(crate) fn softmax(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Raw attention scores `a . [g_center || g_child]` for each child.
fn attention_scores(a: &[f64], g_center: &[f64], g_children: &[f64], dim: usize, out: &mut [f64]) {
    let (a1, a2) = a.split_at(dim);
    let center: f64 = a1.iter().zip(g_center).map(|(x, y)| x * y).sum();
    for (c, s) in out.iter_mut().enumerate() {
        let g = &g_children[c * dim..(c + 1) * dim];
        *s = center + a2.iter().zip(g).map(|(x, y)| x * y).sum::<f64>();
    }
}

fn check_neighbors<T: Scalar>(neighbors: &[&[T]], layer: &EncoderLayer<T>) -> Result<(), GnnError> {
    if neighbors.is_empty() {
        return Err(GnnError::EmptyNeighborhood);
    }
    for n in neighbors {
        if n.len() != layer.in_dim {
            return Err(GnnError::DimensionMismatch {
                expected: layer.in_dim,
                got: n.len(),
            });
        }
    }
    Ok(())
}

fn transformed_neighbors(neighbors: &[&[f64]], layer: &EncoderLayer<f64>) -> Vec<f64> {
    let out = layer.out_dim;
    let mut pre = vec![0.0; out];
    let mut g = vec![0.0; neighbors.len() * out];
    for (i, n) in neighbors.iter().enumerate() {
        transform(layer, n, &mut pre, &mut g[i * out..(i + 1) * out]);
    }
    g
}

fn to_f64_rows<T: Scalar>(rows: &[&[T]]) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|x| x.as_f64()).collect()).collect()
}

/// `(1/|N|) sum_n f(x_n)`.
pub fn aggregate_mean<T: Scalar>(neighbors: &[&[T]], layer: &EncoderLayer<T>) -> Result<Vec<T>, GnnError> {
    check_neighbors(neighbors, layer)?;
    let l64 = layer.cast::<f64>();
    let rows = to_f64_rows(neighbors);
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let g = transformed_neighbors(&refs, &l64);
    let mut out = vec![0.0; layer.out_dim];
    mean_into(&g, layer.out_dim, &mut out);
    Ok(out.into_iter().map(T::of).collect())
}

/// Attention coefficients `alpha(center, n)` over the neighbors.
pub fn attention_weights<T: Scalar>(
    center: &[T],
    neighbors: &[&[T]],
    layer: &EncoderLayer<T>,
) -> Result<Vec<f64>, GnnError> {
    check_neighbors(neighbors, layer)?;
    check_neighbors(&[center], layer)?;
    let l64 = layer.cast::<f64>();
    let rows = to_f64_rows(neighbors);
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let g = transformed_neighbors(&refs, &l64);
    let c64: Vec<f64> = center.iter().map(|x| x.as_f64()).collect();
    let gc = transformed_neighbors(&[&c64], &l64);
    let mut s = vec![0.0; neighbors.len()];
    attention_scores(&l64.attention, &gc, &g, layer.out_dim, &mut s);
    for x in s.iter_mut() {
        *x = leaky(*x);
    }
    softmax(&mut s);
    Ok(s)
}

/// `sum_n alpha(center, n) f(x_n)`.
pub fn aggregate_attention<T: Scalar>(
    center: &[T],
    neighbors: &[&[T]],
    layer: &EncoderLayer<T>,
) -> Result<Vec<T>, GnnError> {
    let alpha = attention_weights(center, neighbors, layer)?;
    let l64 = layer.cast::<f64>();
    let rows = to_f64_rows(neighbors);
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let g = transformed_neighbors(&refs, &l64);
    let mut out = vec![0.0; layer.out_dim];
    weighted_into(&alpha, &g, layer.out_dim, &mut out);
    Ok(out.into_iter().map(T::of).collect())
}

/// Adds the mean of the `dim`-wide rows of `g` to `out`.
fn mean_into(g: &[f64], dim: usize, out: &mut [f64]) {
    let k = (g.len() / dim) as f64;
    for (r, o) in out.iter_mut().enumerate() {
        *o += g.iter().skip(r).step_by(dim).sum::<f64>() / k;
    }
}

/// Adds `sum_c alpha_c g_c` to `out`. Uniform weights take the mean path so
/// that zero attention reproduces mean aggregation bit for bit.
fn weighted_into(alpha: &[f64], g: &[f64], dim: usize, out: &mut [f64]) {
    if alpha.iter().all(|a| *a == alpha[0]) {
        return mean_into(g, dim, out);
    }
    for (r, o) in out.iter_mut().enumerate() {
        *o += alpha.iter().enumerate().map(|(c, a)| a * g[c * dim + r]).sum::<f64>();
    }
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncodeTape {
    ranges: Vec<Vec<Range<usize>>>,
    counts: Vec<usize>,
    /// `h[l][d]`: representations after `l` layers at depth `d`, flat.
    h: Vec<Vec<Vec<f64>>>,
    /// `t[l][d]`: pre-activation of the transform of layer `l + 1`.
    t: Vec<Vec<Vec<f64>>>,
    /// `g[l][d]`: activation of the transform of layer `l + 1`.
    g: Vec<Vec<Vec<f64>>>,
    /// `z[l][d]`: pre-activation of the combine of layer `l + 1`.
    z: Vec<Vec<Vec<f64>>>,
    /// Attention raw scores and coefficients, indexed by child at depth `d + 1`.
    s: Vec<Vec<Vec<f64>>>,
    alpha: Vec<Vec<Vec<f64>>>,
}

impl EncodeTape {
    pub fn output(&self) -> &[f64] {
        let last = self.h.len() - 1;
        &self.h[last][0]
    }

    /// Smallest distance of any pre-activation from a kink (rectifier or
    /// leaky attention score). Finite-difference checks need this margin.
    pub fn relu_margin(&self, p: &EncoderParams<f64>) -> f64 {
        let mut m = f64::INFINITY;
        let mut scan = |v: &[f64]| {
            for x in v {
                m = m.min(x.abs());
            }
        };
        for (li, layer) in p.layers.iter().enumerate() {
            if layer.activation == Activation::Relu {
                for (d, t) in self.t[li].iter().enumerate() {
                    if d > 0 || p.mode == AggregationMode::Attention {
                        scan(t);
                    }
                }
                for z in &self.z[li] {
                    scan(z);
                }
            }
            if p.mode == AggregationMode::Attention {
                for s in &self.s[li] {
                    scan(s);
                }
            }
        }
        m
    }
}

fn input_vector(
    p: &EncoderParams<f64>,
    node_type: NodeType,
    features: &[f32],
    out: &mut [f64],
) -> Result<(), GnnError> {
    if features.len() > p.feature_dim {
        return Err(GnnError::ShapeMismatch(format!(
            "{} features exceed encoder feature width {}",
            features.len(),
            p.feature_dim
        )));
    }
    out.fill(0.0);
    for (o, f) in out.iter_mut().zip(features) {
        *o = *f as f64;
    }
    if p.type_encoding {
        out[p.feature_dim + node_type.index()] = 1.0;
    }
    Ok(())
}

/// Forward pass over `cg`, recording the tape.
pub fn forward(cg: &ComputeGraph, p: &EncoderParams<f64>) -> Result<EncodeTape, GnnError> {
    let depth = p.num_layers();
    if cg.hops() != depth {
        return Err(GnnError::ShapeMismatch(format!(
            "compute graph has {} hops, encoder has {depth} layers",
            cg.hops()
        )));
    }
    let counts: Vec<usize> = cg.layers().iter().map(Vec::len).collect();
    let ranges: Vec<Vec<Range<usize>>> = (0..depth).map(|d| cg.child_ranges(d)).collect();

    let in0 = p.input_dim();
    let h0: Vec<Vec<f64>> = cg
        .layers()
        .iter()
        .map(|layer| {
            let mut flat = vec![0.0; layer.len() * in0];
            for (i, n) in layer.iter().enumerate() {
                input_vector(p, n.node.node_type, &n.features, &mut flat[i * in0..(i + 1) * in0])?;
            }
            Ok(flat)
        })
        .collect::<Result<_, GnnError>>()?;

    let mut tape = EncodeTape {
        ranges,
        counts,
        h: vec![h0],
        t: Vec::with_capacity(depth),
        g: Vec::with_capacity(depth),
        z: Vec::with_capacity(depth),
        s: Vec::with_capacity(depth),
        alpha: Vec::with_capacity(depth),
    };

    for (li, layer) in p.layers.iter().enumerate() {
        let (din, dout) = (layer.in_dim, layer.out_dim);
        let max_in = depth - li;
        let max_out = max_in - 1;
        let x = &tape.h[li];

        let mut t_l = Vec::with_capacity(max_in + 1);
        let mut g_l = Vec::with_capacity(max_in + 1);
        for d in 0..=max_in {
            let n = tape.counts[d];
            let mut t = vec![0.0; n * dout];
            let mut g = vec![0.0; n * dout];
            let skip = d == 0 && p.mode == AggregationMode::Mean;
            if !skip {
                for i in 0..n {
                    transform(
                        layer,
                        &x[d][i * din..(i + 1) * din],
                        &mut t[i * dout..(i + 1) * dout],
                        &mut g[i * dout..(i + 1) * dout],
                    );
                }
            }
            t_l.push(t);
            g_l.push(g);
        }

        let mut z_l = Vec::with_capacity(max_out + 1);
        let mut h_l = Vec::with_capacity(max_out + 1);
        let mut s_l = Vec::with_capacity(max_out + 1);
        let mut a_l = Vec::with_capacity(max_out + 1);
        for d in 0..=max_out {
            let n = tape.counts[d];
            let nc = tape.counts[d + 1];
            let mut z = vec![0.0; n * dout];
            let mut h = vec![0.0; n * dout];
            let mut s_all = vec![0.0; if p.mode == AggregationMode::Attention { nc } else { 0 }];
            let mut a_all = s_all.clone();
            for v in 0..n {
                let zv = &mut z[v * dout..(v + 1) * dout];
                let xv = &x[d][v * din..(v + 1) * din];
                for (r, zr) in zv.iter_mut().enumerate() {
                    let row = &layer.self_weights[r * din..(r + 1) * din];
                    *zr = row.iter().zip(xv).map(|(w, xi)| w * xi).sum();
                }
                let range = tape.ranges[d][v].clone();
                if !range.is_empty() {
                    let gc = &g_l[d + 1][range.start * dout..range.end * dout];
                    match p.mode {
                        AggregationMode::Mean => mean_into(gc, dout, zv),
                        AggregationMode::Attention => {
                            let s = &mut s_all[range.clone()];
                            attention_scores(
                                &layer.attention,
                                &g_l[d][v * dout..(v + 1) * dout],
                                gc,
                                dout,
                                s,
                            );
                            let a = &mut a_all[range.clone()];
                            for (ai, si) in a.iter_mut().zip(s.iter()) {
                                *ai = leaky(*si);
                            }
                            softmax(a);
                            weighted_into(a, gc, dout, zv);
                        }
                    }
                }
                for (hr, zr) in h[v * dout..(v + 1) * dout].iter_mut().zip(zv.iter()) {
                    *hr = layer.activation.apply(*zr);
                }
            }
            z_l.push(z);
            h_l.push(h);
            s_l.push(s_all);
            a_l.push(a_all);
        }
        tape.t.push(t_l);
        tape.g.push(g_l);
        tape.z.push(z_l);
        tape.s.push(s_l);
        tape.alpha.push(a_l);
        tape.h.push(h_l);
    }
    Ok(tape)
}

/// Accumulates parameter gradients of `d_output . embedding` into `grads`
/// (aligned with `EncoderParams::tensors()`).
pub fn backward(
    tape: &EncodeTape,
    p: &EncoderParams<f64>,
    d_output: &[f64],
    grads: &mut Grads,
) {
    let depth = p.num_layers();
    // dh[d]: gradient w.r.t. h_{li+1} at depth d.
    let mut dh: Vec<Vec<f64>> = vec![d_output.to_vec()];
    for li in (0..depth).rev() {
        let layer = &p.layers[li];
        let (din, dout) = (layer.in_dim, layer.out_dim);
        let max_in = depth - li;
        let max_out = max_in - 1;
        let x = &tape.h[li];
        let (gw, rest) = grads.0[li * 4..li * 4 + 4].split_at_mut(1);
        let (gb, rest) = rest.split_at_mut(1);
        let (gu, ga) = rest.split_at_mut(1);
        let (gw, gb, gu, ga) = (&mut gw[0], &mut gb[0], &mut gu[0], &mut ga[0]);

        let mut dx: Vec<Vec<f64>> = (0..=max_in).map(|d| vec![0.0; tape.counts[d] * din]).collect();
        let mut dg: Vec<Vec<f64>> = (0..=max_in).map(|d| vec![0.0; tape.counts[d] * dout]).collect();
        let mut dz = vec![0.0; dout];

        for d in 0..=max_out {
            for v in 0..tape.counts[d] {
                let zv = &tape.z[li][d][v * dout..(v + 1) * dout];
                let dhv = &dh[d][v * dout..(v + 1) * dout];
                let mut any = false;
                for r in 0..dout {
                    dz[r] = dhv[r] * layer.activation.grad(zv[r]);
                    any |= dz[r] != 0.0;
                }
                if !any {
                    continue;
                }
                let xv = &x[d][v * din..(v + 1) * din];
                let dxv = &mut dx[d][v * din..(v + 1) * din];
                for r in 0..dout {
                    let g = dz[r];
                    if g == 0.0 {
                        continue;
                    }
                    let row = &layer.self_weights[r * din..(r + 1) * din];
                    let grow = &mut gu[r * din..(r + 1) * din];
                    for i in 0..din {
                        grow[i] += g * xv[i];
                        dxv[i] += g * row[i];
                    }
                }
                let range = tape.ranges[d][v].clone();
                if range.is_empty() {
                    continue;
                }
                match p.mode {
                    AggregationMode::Mean => {
                        let k = range.len() as f64;
                        for c in range {
                            let dgc = &mut dg[d + 1][c * dout..(c + 1) * dout];
                            for r in 0..dout {
                                dgc[r] += dz[r] / k;
                            }
                        }
                    }
                    AggregationMode::Attention => {
                        let alpha = &tape.alpha[li][d][range.clone()];
                        let s = &tape.s[li][d][range.clone()];
                        let g_next = &tape.g[li][d + 1];
                        let d_alpha: Vec<f64> = range
                            .clone()
                            .map(|c| {
                                let gc = &g_next[c * dout..(c + 1) * dout];
                                gc.iter().zip(&dz).map(|(a, b)| a * b).sum()
                            })
                            .collect();
                        let mean: f64 = alpha.iter().zip(&d_alpha).map(|(a, b)| a * b).sum();
                        let gv: Vec<f64> = tape.g[li][d][v * dout..(v + 1) * dout].to_vec();
                        let (a1, a2) = layer.attention.split_at(dout);
                        let mut dgv = vec![0.0; dout];
                        for (k, c) in range.enumerate() {
                            let ds = alpha[k] * (d_alpha[k] - mean) * leaky_grad(s[k]);
                            let gc = &g_next[c * dout..(c + 1) * dout];
                            let dgc = &mut dg[d + 1][c * dout..(c + 1) * dout];
                            for r in 0..dout {
                                dgc[r] += alpha[k] * dz[r] + ds * a2[r];
                                ga[r] += ds * gv[r];
                                ga[dout + r] += ds * gc[r];
                                dgv[r] += ds * a1[r];
                            }
                        }
                        for (a, b) in dg[d][v * dout..(v + 1) * dout].iter_mut().zip(&dgv) {
                            *a += b;
                        }
                    }
                }
            }
        }

        let mut dt = vec![0.0; dout];
        for d in 0..=max_in {
            for i in 0..tape.counts[d] {
                let dgi = &dg[d][i * dout..(i + 1) * dout];
                let ti = &tape.t[li][d][i * dout..(i + 1) * dout];
                let mut any = false;
                for r in 0..dout {
                    dt[r] = dgi[r] * layer.activation.grad(ti[r]);
                    any |= dt[r] != 0.0;
                }
                if !any {
                    continue;
                }
                let xi = &x[d][i * din..(i + 1) * din];
                let dxi = &mut dx[d][i * din..(i + 1) * din];
                for r in 0..dout {
                    let g = dt[r];
                    if g == 0.0 {
                        continue;
                    }
                    gb[r] += g;
                    let row = &layer.transform[r * din..(r + 1) * din];
                    let grow = &mut gw[r * din..(r + 1) * din];
                    for j in 0..din {
                        grow[j] += g * xi[j];
                        dxi[j] += g * row[j];
                    }
                }
            }
        }
        dh = dx;
    }
}
