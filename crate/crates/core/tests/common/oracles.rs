//! Scalar reference implementations, written independently of the library.

use linksage::gnn::{
    aggregate_attention, aggregate_mean, bce_with_logit, decode_cosine, decode_dot, decode_mlp, loss_cross_entropy,
    sigmoid, Activation, Dense, EncoderLayer, LabelMatrix, Matrix, Mlp,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u64 = 100;
pub const TOLERANCE: f64 = 1e-6;

fn vector(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-2.0..2.0)).collect()
}

fn naive_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// `act(W x + b)` for a row-major `out x in` matrix.
fn affine(w: &[f64], b: &[f64], x: &[f64], relu_out: bool) -> Vec<f64> {
    let n = x.len();
    (0..b.len())
        .map(|r| {
            let z = dot(&w[r * n..(r + 1) * n], x) + b[r];
            if relu_out {
                relu(z)
            } else {
                z
            }
        })
        .collect()
}

struct Worst(f64);

impl Worst {
    fn see(&mut self, a: f64, b: f64) {
        self.0 = self.0.max((a - b).abs());
    }
}

fn verdict(name: &str, worst: f64) -> Result<String, String> {
    let msg = format!("{name}: max abs error {worst:.2e} over {CASES} cases");
    if worst <= TOLERANCE {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn loss() -> Result<String, String> {
    let mut r = ChaCha8Rng::seed_from_u64(101);
    let mut w = Worst(0.0);
    for _ in 0..CASES {
        let (rows, cols) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let s: Vec<f64> = (0..rows * cols).map(|_| r.gen_range(-8.0..8.0)).collect();
        let y: Vec<u8> = (0..rows * cols).map(|_| r.gen_range(0..=1)).collect();
        let (l, g) = loss_cross_entropy(
            &Matrix::from_vec(rows, cols, s.clone()).unwrap(),
            &LabelMatrix::from_vec(rows, cols, y.clone()).unwrap(),
        )
        .unwrap();
        let mut expect = 0.0;
        for i in 0..s.len() {
            let p = naive_sigmoid(s[i]);
            let t = y[i] as f64;
            expect -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
            w.see(g.data[i], p - t);
        }
        w.see(l, expect);
    }
    verdict("loss_cross_entropy", w.0)
}

pub fn decoders() -> Result<String, String> {
    let mut r = ChaCha8Rng::seed_from_u64(202);
    let (mut wd, mut wc, mut wm) = (Worst(0.0), Worst(0.0), Worst(0.0));
    for _ in 0..CASES {
        let d = r.gen_range(1..=6);
        let (nm, nj) = (r.gen_range(1..=4), r.gen_range(1..=4));
        let m: Vec<Vec<f64>> = (0..nm).map(|_| vector(&mut r, d)).collect();
        let j: Vec<Vec<f64>> = (0..nj).map(|_| vector(&mut r, d)).collect();
        let hidden = r.gen_range(1..=5);
        let mlp = Mlp {
            layers: vec![
                Dense {
                    in_dim: 2 * d,
                    out_dim: hidden,
                    weights: vector(&mut r, 2 * d * hidden),
                    bias: vector(&mut r, hidden),
                },
                Dense {
                    in_dim: hidden,
                    out_dim: 1,
                    weights: vector(&mut r, hidden),
                    bias: vector(&mut r, 1),
                },
            ],
        };
        let sd = decode_dot(&m, &j).unwrap();
        let sc = decode_cosine(&m, &j).unwrap();
        let sm = decode_mlp(&m, &j, &mlp).unwrap();
        for a in 0..nm {
            for b in 0..nj {
                let d0 = dot(&m[a], &j[b]);
                wd.see(sd.get(a, b), d0);
                wc.see(sc.get(a, b), d0 / (dot(&m[a], &m[a]).sqrt() * dot(&j[b], &j[b]).sqrt()));
                let x: Vec<f64> = m[a].iter().chain(&j[b]).copied().collect();
                let h = affine(&mlp.layers[0].weights, &mlp.layers[0].bias, &x, true);
                let o = affine(&mlp.layers[1].weights, &mlp.layers[1].bias, &h, false);
                wm.see(sm.get(a, b), o[0]);
            }
        }
    }
    let out = [
        verdict("decode_dot", wd.0),
        verdict("decode_cosine", wc.0),
        verdict("decode_mlp", wm.0),
    ];
    join(out)
}

fn join<const N: usize>(parts: [Result<String, String>; N]) -> Result<String, String> {
    let ok = parts.iter().all(Result::is_ok);
    let text = parts
        .into_iter()
        .map(|p| p.unwrap_or_else(|e| format!("FAILED {e}")))
        .collect::<Vec<_>>()
        .join("; ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn random_layer(r: &mut ChaCha8Rng, in_dim: usize, out_dim: usize) -> EncoderLayer<f64> {
    let mut l = EncoderLayer::zeros(in_dim, out_dim, if r.gen_bool(0.5) { Activation::Relu } else { Activation::Identity });
    l.transform = vector(r, in_dim * out_dim);
    l.bias = vector(r, out_dim);
    l.self_weights = vector(r, in_dim * out_dim);
    l.attention = vector(r, 2 * out_dim);
    l
}

fn f(l: &EncoderLayer<f64>, x: &[f64]) -> Vec<f64> {
    let z = affine(&l.transform, &l.bias, x, false);
    z.into_iter().map(|v| if l.activation == Activation::Relu { relu(v) } else { v }).collect()
}

pub fn aggregators() -> Result<String, String> {
    let mut r = ChaCha8Rng::seed_from_u64(303);
    let (mut wm, mut wa) = (Worst(0.0), Worst(0.0));
    for _ in 0..CASES {
        let (i, o) = (r.gen_range(1..=5), r.gen_range(1..=5));
        let l = random_layer(&mut r, i, o);
        let center = vector(&mut r, i);
        let ns: Vec<Vec<f64>> = (0..r.gen_range(1..=6)).map(|_| vector(&mut r, i)).collect();
        let refs: Vec<&[f64]> = ns.iter().map(Vec::as_slice).collect();
        let fs: Vec<Vec<f64>> = ns.iter().map(|n| f(&l, n)).collect();

        let mean = aggregate_mean(&refs, &l).unwrap();
        for k in 0..o {
            wm.see(mean[k], fs.iter().map(|v| v[k]).sum::<f64>() / fs.len() as f64);
        }

        let fc = f(&l, &center);
        let e: Vec<f64> = fs
            .iter()
            .map(|v| {
                let s = dot(&l.attention[..o], &fc) + dot(&l.attention[o..], v);
                if s > 0.0 {
                    s
                } else {
                    0.2 * s
                }
            })
            .collect();
        let z: f64 = e.iter().map(|x| x.exp()).sum();
        let att = aggregate_attention(&center, &refs, &l).unwrap();
        for k in 0..o {
            let expect: f64 = fs.iter().zip(&e).map(|(v, s)| s.exp() / z * v[k]).sum();
            wa.see(att[k], expect);
        }
    }
    join([verdict("aggregate_mean", wm.0), verdict("aggregate_attention", wa.0)])
}

pub fn fixed_points() -> Result<String, String> {
    let ln2 = std::f64::consts::LN_2;
    let zero = Matrix::from_vec(1, 1, vec![0.0]).unwrap();
    let mut errs = vec![(sigmoid(0.0) - 0.5).abs()];
    for y in [0u8, 1] {
        errs.push((bce_with_logit(0.0, y) - ln2).abs());
        let (l, g) = loss_cross_entropy(&zero, &LabelMatrix::from_vec(1, 1, vec![y]).unwrap()).unwrap();
        errs.push((l - ln2).abs());
        errs.push((g.data[0] - (0.5 - y as f64)).abs());
    }
    let worst = errs.into_iter().fold(0.0, f64::max);
    let msg = format!("ln 2 and sigmoid(0) fixed points: max error {worst:.1e}");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn all() -> Result<String, String> {
    join([loss(), decoders(), aggregators(), fixed_points()])
}
