use std::collections::HashMap;

use super::types::NodeRef;

/// Picks the `k` most relevant skills of one member or job.
///
/// Relevance is rarity weighted: `raw_weight * ln(total_entities / frequency)`,
/// so a skill every entity lists scores zero however strongly it is held.
/// Ties go to the lower skill id. Skills missing from `global_frequency` are
/// treated as having frequency 1.
pub fn compute_top_skills(
    entity_skills: &[(NodeRef, f64)],
    global_frequency: &HashMap<NodeRef, u64>,
    total_entities: u64,
    k: usize,
) -> Vec<NodeRef> {
    if entity_skills.is_empty() || k == 0 {
        return Vec::new();
    }
    let total = total_entities.max(1) as f64;
    let mut scored: Vec<(f64, NodeRef)> = entity_skills
        .iter()
        .map(|&(skill, raw)| {
            let freq = global_frequency.get(&skill).copied().unwrap_or(1).max(1) as f64;
            (raw * (total / freq).ln(), skill)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(_, s)| s).collect()
}
