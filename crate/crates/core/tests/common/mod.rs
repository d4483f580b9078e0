#![allow(dead_code)]

use linksage::gnn::{
    loss_cross_entropy_masked, make_in_batch_labels, AggregationMode, Batch, CgNode, ComputeGraph,
    Decoder, EncoderConfig, EncoderParams, LabelMatrix, Mlp, Model,
};
use linksage::graph::{NodeRef, NodeType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-3;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Denominator floor: at step 1e-3 the central difference itself carries
/// about 1e-6 absolute truncation error, so near-zero gradients are compared
/// against this scale.
pub const FD_FLOOR: f64 = 1e-2;
/// A second pass with a fine step resolves small gradients tightly.
pub const FD_FINE_STEP: f64 = 1e-5;
pub const FD_FINE_FLOOR: f64 = 1e-4;
/// Instances with a pre-activation closer than this to a kink are redrawn.
pub const KINK_MARGIN: f64 = 0.05;
/// Cosine curvature grows like 1/|v|^3; redraw nearly degenerate embeddings.
pub const MIN_COSINE_NORM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Dot,
    Cosine,
    Mlp,
    InBatch,
}

pub const KINDS: [Kind; 4] = [Kind::Dot, Kind::Cosine, Kind::Mlp, Kind::InBatch];
pub const MODES: [AggregationMode; 2] = [AggregationMode::Mean, AggregationMode::Attention];

/// Random layered tree of the given depth; 0 to 3 children per node.
pub fn random_cg(r: &mut ChaCha8Rng, root: NodeRef, hops: usize, feature_dim: usize) -> ComputeGraph {
    let feats = |r: &mut ChaCha8Rng| -> Vec<f32> { (0..feature_dim).map(|_| r.gen_range(-1.5f32..1.5)).collect() };
    let mut layers = vec![vec![CgNode {
        node: root,
        parent: 0,
        weight: 0.0,
        features: feats(r),
    }]];
    for _ in 0..hops {
        let prev = layers.last().unwrap().len();
        let mut next = Vec::new();
        for p in 0..prev {
            for _ in 0..r.gen_range(0..=3) {
                let t = NodeType::ALL[r.gen_range(0..NodeType::COUNT)];
                next.push(CgNode {
                    node: NodeRef::new(t, r.gen_range(0..50)),
                    parent: p,
                    weight: 1.0,
                    features: feats(r),
                });
            }
        }
        layers.push(next);
    }
    ComputeGraph::from_layers(layers).unwrap()
}

pub struct Instance {
    pub model: Model<f64>,
    pub batch: Batch,
}

fn jitter(model: &mut Model<f64>, r: &mut ChaCha8Rng) {
    for t in model.tensors_mut() {
        for x in t.iter_mut() {
            *x += r.gen_range(-0.3..0.3);
        }
    }
}

/// A small random model and batch: dims <= 4, at most 2 layers, at most 3
/// members and jobs.
pub fn random_instance(seed: u64, kind: Kind, mode: AggregationMode) -> Instance {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let feature_dim = r.gen_range(1..=4);
    let hops = r.gen_range(1..=2);
    let min_out = if kind == Kind::Cosine { 2 } else { 1 };
    let layer_dims: Vec<usize> = (0..hops).map(|_| r.gen_range(min_out.max(2)..=4)).collect();
    let cfg = EncoderConfig {
        feature_dim,
        layer_dims,
        mode,
        type_encoding: false,
    };
    let enc = EncoderParams::<f64>::init(&cfg, r.gen());
    let out = enc.output_dim();
    let decoder = match kind {
        Kind::Mlp => Decoder::Mlp(Mlp::init(2 * out, &[r.gen_range(1..=4)], r.gen())),
        Kind::Cosine => Decoder::Cosine,
        Kind::Dot | Kind::InBatch => Decoder::Dot,
    };
    let mut model = Model::new(enc, decoder).unwrap();
    jitter(&mut model, &mut r);
    let (nm, nj) = if kind == Kind::InBatch {
        let b = r.gen_range(2..=3);
        (b, b)
    } else {
        (r.gen_range(1..=3), r.gen_range(1..=3))
    };
    let members = (0..nm)
        .map(|i| random_cg(&mut r, NodeRef::member(i as u64), hops, feature_dim))
        .collect();
    let jobs = (0..nj)
        .map(|i| random_cg(&mut r, NodeRef::job(i as u64), hops, feature_dim))
        .collect();
    let labels = if kind == Kind::InBatch {
        make_in_batch_labels(nm)
    } else {
        LabelMatrix::from_vec(nm, nj, (0..nm * nj).map(|_| r.gen_range(0..=1)).collect()).unwrap()
    };
    let mut batch = Batch::new(members, jobs, labels).unwrap();
    if kind != Kind::InBatch && r.gen_bool(0.5) {
        let mut mask: Vec<bool> = (0..nm * nj).map(|_| r.gen_bool(0.7)).collect();
        mask[0] = true;
        batch = batch.with_mask(mask).unwrap();
    }
    Instance { model, batch }
}

pub fn batch_loss(model: &Model<f64>, batch: &Batch) -> f64 {
    let st = model.forward(batch).unwrap();
    loss_cross_entropy_masked(&st.scores, &batch.labels, batch.mask.as_deref())
        .unwrap()
        .0
}

pub struct GradCheck {
    pub max_rel_err: f64,
    pub max_rel_err_fine: f64,
    pub params: usize,
    pub redraws: u64,
}

/// Draws a kink-free instance (starting from `seed`) and compares analytic
/// against central-difference gradients for every parameter.
pub fn grad_check(seed: u64, kind: Kind, mode: AggregationMode) -> GradCheck {
    let mut redraws = 0;
    let inst = loop {
        let inst = random_instance(seed.wrapping_add(redraws * 1_000_003), kind, mode);
        // Zero-norm embeddings (cosine) are a legitimate error; redraw.
        if let Ok(st) = inst.model.forward(&inst.batch) {
            let norm = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let min_norm = st
                .member_embeddings()
                .iter()
                .chain(st.job_embeddings())
                .map(norm)
                .fold(f64::INFINITY, f64::min);
            let conditioned = kind != Kind::Cosine || min_norm >= MIN_COSINE_NORM;
            if st.relu_margin() > KINK_MARGIN && conditioned {
                break inst;
            }
        }
        redraws += 1;
    };
    let Instance { model, batch } = inst;
    let st = model.forward(&batch).unwrap();
    let (_, d) = loss_cross_entropy_masked(&st.scores, &batch.labels, batch.mask.as_deref()).unwrap();
    let g = model.backward(&batch, &st, &d).unwrap();
    let analytic: Vec<f64> = g.encoder.flatten().into_iter().chain(g.decoder.flatten()).collect();

    let mut probe = model.clone();
    let mut max_rel_err: f64 = 0.0;
    let mut max_rel_err_fine: f64 = 0.0;
    let mut k = 0;
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut central = |ti: usize, i: usize, h: f64| {
        let orig = probe.tensors()[ti][i];
        probe.tensors_mut()[ti][i] = orig + h;
        let up = batch_loss(&probe, &batch);
        probe.tensors_mut()[ti][i] = orig - h;
        let down = batch_loss(&probe, &batch);
        probe.tensors_mut()[ti][i] = orig;
        (up - down) / (2.0 * h)
    };
    let rel = |a: f64, n: f64, floor: f64| (a - n).abs() / a.abs().max(n.abs()).max(floor);
    for (ti, &len) in shapes.iter().enumerate() {
        for i in 0..len {
            let a = analytic[k];
            max_rel_err = max_rel_err.max(rel(a, central(ti, i, FD_STEP), FD_FLOOR));
            max_rel_err_fine = max_rel_err_fine.max(rel(a, central(ti, i, FD_FINE_STEP), FD_FINE_FLOOR));
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    GradCheck {
        max_rel_err,
        max_rel_err_fine,
        params: k,
        redraws,
    }
}

pub mod marketplace;
pub mod oracles;
pub mod sampling;
