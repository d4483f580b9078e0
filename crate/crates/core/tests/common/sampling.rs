//! Empirical inclusion frequencies of the neighbor sampler.

use linksage::graph::{
    sample_neighborhood, EdgeTypeSet, GraphSchema, HeteroGraph, NodeRef, Relation, SamplerConfig, SamplingStrategy,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const UNIFORM_TRIALS: u64 = 30_000;
pub const WEIGHTED_TRIALS: u64 = 40_000;

fn star(weights: &[f64]) -> HeteroGraph {
    let mut g = HeteroGraph::new(GraphSchema::uniform(1));
    g.add_node(NodeRef::member(0), vec![0.0]).unwrap();
    for (j, &w) in weights.iter().enumerate() {
        g.add_node(NodeRef::job(j as u64), vec![1.0]).unwrap();
        g.add_edge(Relation::SeekerEngagement.into(), NodeRef::member(0), NodeRef::job(j as u64), w, true)
            .unwrap();
    }
    g
}

/// Upper-tail probability of the chi-square statistic for `observed`
/// against `expected` counts.
pub fn chi_square_p(observed: &[u64], expected: &[f64]) -> f64 {
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

fn draws(g: &HeteroGraph, cfg: &SamplerConfig, trials: u64) -> Vec<Vec<u64>> {
    let types = [EdgeTypeSet::all()];
    (0..trials)
        .map(|t| {
            let cg = sample_neighborhood(g, NodeRef::member(0), &cfg.with_seed(t), &types).unwrap();
            let mut ids: Vec<u64> = cg.layers()[1].iter().map(|n| n.node.id).collect();
            ids.sort_unstable();
            ids
        })
        .collect()
}

pub struct Frequencies {
    pub inclusion: Vec<f64>,
    pub p_value: f64,
}

/// Fanout 2 of 3 equal-weight neighbors: each is kept with probability 2/3
/// and each of the three pairs is equally likely.
pub fn uniform_two_of_three() -> Frequencies {
    let g = star(&[1.0, 1.0, 1.0]);
    let cfg = SamplerConfig::uniform(vec![2], 0);
    let mut hits = [0u64; 3];
    let mut pairs = [0u64; 3];
    for ids in draws(&g, &cfg, UNIFORM_TRIALS) {
        assert_eq!(ids.len(), 2);
        for &i in &ids {
            hits[i as usize] += 1;
        }
        // The pair is named by the neighbor left out.
        pairs[(3 - ids[0] - ids[1]) as usize] += 1;
    }
    let n = UNIFORM_TRIALS as f64;
    Frequencies {
        inclusion: hits.iter().map(|&h| h as f64 / n).collect(),
        p_value: chi_square_p(&pairs, &[n / 3.0; 3]),
    }
}

/// Fanout 1 over weights 3 and 1: the heavy neighbor wins with probability 3/4.
pub fn weighted_three_to_one() -> Frequencies {
    let g = star(&[3.0, 1.0]);
    let cfg = SamplerConfig {
        strategy: SamplingStrategy::Weighted,
        ..SamplerConfig::uniform(vec![1], 0)
    };
    let mut counts = [0u64; 2];
    for ids in draws(&g, &cfg, WEIGHTED_TRIALS) {
        counts[ids[0] as usize] += 1;
    }
    let n = WEIGHTED_TRIALS as f64;
    Frequencies {
        inclusion: counts.iter().map(|&c| c as f64 / n).collect(),
        p_value: chi_square_p(&counts, &[0.75 * n, 0.25 * n]),
    }
}

pub fn check() -> Result<String, String> {
    let u = uniform_two_of_three();
    let w = weighted_three_to_one();
    let u_ok = u.inclusion.iter().all(|f| (f - 2.0 / 3.0).abs() <= 0.02) && u.p_value > 0.01;
    let w_ok = (w.inclusion[0] - 0.75).abs() <= 0.01 && w.p_value > 0.01;
    let msg = format!(
        "uniform 2-of-3 inclusion {:?} (chi-square p {:.3}); weighted 3:1 heavy share {:.4} (p {:.3})",
        u.inclusion.iter().map(|f| format!("{f:.4}")).collect::<Vec<_>>(),
        u.p_value,
        w.inclusion[0],
        w.p_value
    );
    if u_ok && w_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}
