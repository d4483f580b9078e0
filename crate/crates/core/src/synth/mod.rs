//! Synthetic marketplaces with planted interest clusters, at desk scale.
//!
//! Members and jobs belong to latent clusters; features are noisy cluster
//! centroids, attribute and engagement edges mostly stay within a cluster,
//! and the emitted event log replays the graph's attribute and
//! engagement edges in time order.

mod generate;
mod stats;

pub use generate::{generate, write_events, write_events_to, SynthDataset};
pub use stats::{stats, GraphStats};

pub const DAY_MS: i64 = 86_400_000;
/// Timeline origin of generated data (epoch milliseconds).
pub const EPOCH_MS: i64 = 1_700_000_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub member_count: usize,
    /// Members per job; jobs = member_count / members_per_job.
    pub members_per_job: usize,
    pub companies_per_member: f64,
    pub positions_per_member: f64,
    pub title_count: usize,
    pub skill_count: usize,
    /// Mean top-skill edges per member.
    pub member_top_skills: f64,
    /// Mean top-skill edges per job.
    pub job_top_skills: f64,
    /// Candidate skills listed per member or job before top-skill selection.
    pub raw_skills_per_entity: usize,
    /// Mean distinct jobs a member engages with over the whole timeline.
    pub engagements_per_member: f64,
    /// Probability an engagement is followed by a second action on the same job.
    pub repeat_probability: f64,
    pub recruiter_interactions_per_job: f64,
    pub cluster_count: usize,
    /// Share of engagements that stay in the member's cluster; the rest go
    /// to the next cluster.
    pub in_cluster_fraction: f64,
    /// Probability a title, company or position is drawn from the owner's cluster.
    pub attribute_in_cluster: f64,
    pub skill_in_cluster: f64,
    pub feature_dim: usize,
    /// Standard deviation of cluster centroid coordinates.
    pub centroid_scale: f64,
    /// Per-coordinate standard deviation around the centroid for members and jobs.
    pub feature_noise: f64,
    pub attribute_noise: f64,
    pub cold_start_fraction: f64,
    pub negatives_per_positive: usize,
    pub time_span_ms: i64,
    /// Position of the graph snapshot cutoff within the time span.
    pub cutoff_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            member_count: 20_000,
            members_per_job: 20,
            companies_per_member: 0.01,
            positions_per_member: 0.02,
            title_count: 100,
            skill_count: 500,
            member_top_skills: 1.2,
            job_top_skills: 0.67,
            raw_skills_per_entity: 5,
            engagements_per_member: 4.0,
            repeat_probability: 0.25,
            recruiter_interactions_per_job: 5.0,
            cluster_count: 20,
            in_cluster_fraction: 0.9,
            attribute_in_cluster: 0.5,
            skill_in_cluster: 0.9,
            feature_dim: 16,
            centroid_scale: 1.0,
            feature_noise: 1.5,
            attribute_noise: 0.5,
            cold_start_fraction: 0.2,
            negatives_per_positive: 4,
            time_span_ms: 30 * DAY_MS,
            cutoff_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Node counts implied by a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthCounts {
    pub members: usize,
    pub jobs: usize,
    pub companies: usize,
    pub positions: usize,
    pub titles: usize,
    pub skills: usize,
}

impl SynthConfig {
    /// A small configuration for tests and demos: one cluster per hundred
    /// members, between 2 and 20.
    pub fn small(member_count: usize, seed: u64) -> Self {
        Self {
            member_count,
            cluster_count: (member_count / 100).clamp(2, 20),
            seed,
            ..Self::default()
        }
    }

    pub fn counts(&self) -> SynthCounts {
        let scaled = |r: f64| (r * self.member_count as f64).round() as usize;
        SynthCounts {
            members: self.member_count,
            jobs: self.member_count / self.members_per_job.max(1),
            companies: scaled(self.companies_per_member),
            positions: scaled(self.positions_per_member),
            titles: self.title_count,
            skills: self.skill_count,
        }
    }

    pub fn cutoff(&self) -> i64 {
        EPOCH_MS + (self.time_span_ms as f64 * self.cutoff_fraction).round() as i64
    }

    pub fn validate(&self) -> Result<SynthCounts, SynthError> {
        let bad = |m: String| Err(SynthError::InfeasibleConfig(m));
        if self.members_per_job == 0 {
            return bad("members_per_job must be positive".into());
        }
        if self.cluster_count == 0 || self.feature_dim == 0 {
            return bad("cluster_count and feature_dim must be positive".into());
        }
        for (name, r) in [
            ("companies_per_member", self.companies_per_member),
            ("positions_per_member", self.positions_per_member),
        ] {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("{name} must be a positive ratio, got {r}"));
            }
        }
        for (name, f) in [
            ("in_cluster_fraction", self.in_cluster_fraction),
            ("attribute_in_cluster", self.attribute_in_cluster),
            ("skill_in_cluster", self.skill_in_cluster),
            ("cold_start_fraction", self.cold_start_fraction),
            ("repeat_probability", self.repeat_probability),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} must lie in [0, 1], got {f}"));
            }
        }
        if !(self.cutoff_fraction > 0.05 && self.cutoff_fraction < 1.0) {
            return bad(format!("cutoff_fraction must lie in (0.05, 1), got {}", self.cutoff_fraction));
        }
        if self.time_span_ms < 1000 {
            return bad("time_span_ms must be at least 1000".into());
        }
        for (name, v) in [
            ("centroid_scale", self.centroid_scale),
            ("feature_noise", self.feature_noise),
            ("attribute_noise", self.attribute_noise),
            ("recruiter_interactions_per_job", self.recruiter_interactions_per_job),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.engagements_per_member >= 1.0 && self.engagements_per_member.is_finite()) {
            return bad(format!(
                "engagements_per_member must be >= 1, got {}",
                self.engagements_per_member
            ));
        }
        let c = self.counts();
        let per_cluster = [
            ("members", c.members),
            ("jobs", c.jobs),
            ("companies", c.companies),
            ("positions", c.positions),
            ("titles", c.titles),
            ("skills", c.skills),
        ];
        for (name, n) in per_cluster {
            if n < self.cluster_count {
                return bad(format!(
                    "{n} {name} cannot cover {} clusters",
                    self.cluster_count
                ));
            }
        }
        if self.raw_skills_per_entity > c.skills {
            return bad(format!(
                "{} raw skills per entity but only {} skills",
                self.raw_skills_per_entity, c.skills
            ));
        }
        for (name, d) in [("member_top_skills", self.member_top_skills), ("job_top_skills", self.job_top_skills)] {
            if !(d >= 0.0 && d <= self.raw_skills_per_entity as f64) {
                return bad(format!(
                    "{name} = {d} is outside [0, raw_skills_per_entity = {}]",
                    self.raw_skills_per_entity
                ));
            }
        }
        // Every member's engagements must fit in distinct jobs of two clusters.
        let jobs_per_cluster = c.jobs / self.cluster_count;
        if self.engagements_per_member > (2 * jobs_per_cluster) as f64 {
            return bad(format!(
                "{} engagements per member exceed the {} jobs of two clusters",
                self.engagements_per_member,
                2 * jobs_per_cluster
            ));
        }
        if self.negatives_per_positive >= c.jobs {
            return bad(format!(
                "{} negatives per positive but only {} jobs",
                self.negatives_per_positive, c.jobs
            ));
        }
        Ok(c)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("infeasible synth configuration: {0}")]
    InfeasibleConfig(String),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_counts() {
        let c = SynthConfig::default().validate().unwrap();
        assert_eq!((c.members, c.jobs, c.companies, c.positions), (20_000, 1_000, 200, 400));
    }

    #[test]
    fn infeasible_configs() {
        let cases = [
            SynthConfig {
                cold_start_fraction: 1.5,
                ..SynthConfig::small(400, 0)
            },
            SynthConfig {
                title_count: 3,
                ..SynthConfig::small(400, 0)
            },
            SynthConfig {
                member_top_skills: 9.0,
                ..SynthConfig::small(400, 0)
            },
            SynthConfig {
                engagements_per_member: 50.0,
                ..SynthConfig::small(2000, 0)
            },
            SynthConfig {
                negatives_per_positive: 5,
                ..SynthConfig::small(100, 0)
            },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(SynthError::InfeasibleConfig(_))), "{c:?}");
        }
    }
}
