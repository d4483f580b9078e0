use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six entity categories of the job marketplace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeType {
    Member,
    Job,
    Skill,
    Title,
    Company,
    Position,
}

impl NodeType {
    pub const ALL: [NodeType; 6] = [
        NodeType::Member,
        NodeType::Job,
        NodeType::Skill,
        NodeType::Title,
        NodeType::Company,
        NodeType::Position,
    ];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeType::Member => "Member",
            NodeType::Job => "Job",
            NodeType::Skill => "Skill",
            NodeType::Title => "Title",
            NodeType::Company => "Company",
            NodeType::Position => "Position",
        }
    }

    /// Attribute nodes are the static entities members and jobs link to.
    pub fn is_attribute(self) -> bool {
        !matches!(self, NodeType::Member | NodeType::Job)
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown node type `{s}`"))
    }
}

/// Typed node identity; the key used everywhere in the system.
///
/// Ordering is by node type, then id, which gives the ascending-id tie
/// break used by sampling and ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub node_type: NodeType,
    pub id: u64,
}

impl NodeRef {
    pub const fn new(node_type: NodeType, id: u64) -> Self {
        Self { node_type, id }
    }

    pub const fn member(id: u64) -> Self {
        Self::new(NodeType::Member, id)
    }

    pub const fn job(id: u64) -> Self {
        Self::new(NodeType::Job, id)
    }

    pub const fn skill(id: u64) -> Self {
        Self::new(NodeType::Skill, id)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.node_type, self.id)
    }
}

impl FromStr for NodeRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (t, id) = s
            .split_once(':')
            .ok_or_else(|| format!("node reference `{s}` is not `<type>:<id>`"))?;
        let node_type = t.parse()?;
        let id = id
            .parse::<u64>()
            .map_err(|e| format!("bad node id in `{s}`: {e}"))?;
        Ok(NodeRef { node_type, id })
    }
}

impl Serialize for NodeRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A directed relation of the marketplace schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    MemberTitle,
    MemberCompany,
    MemberPosition,
    MemberSkill,
    JobTitle,
    JobCompany,
    JobPosition,
    JobSkill,
    /// Member engaged with a job (save, apply, click).
    SeekerEngagement,
    /// Recruiter behind a job reached out to a member.
    RecruiterInteraction,
}

impl Relation {
    pub const ALL: [Relation; 10] = [
        Relation::MemberTitle,
        Relation::MemberCompany,
        Relation::MemberPosition,
        Relation::MemberSkill,
        Relation::JobTitle,
        Relation::JobCompany,
        Relation::JobPosition,
        Relation::JobSkill,
        Relation::SeekerEngagement,
        Relation::RecruiterInteraction,
    ];

    pub fn signature(self) -> (NodeType, NodeType) {
        use NodeType::*;
        match self {
            Relation::MemberTitle => (Member, Title),
            Relation::MemberCompany => (Member, Company),
            Relation::MemberPosition => (Member, Position),
            Relation::MemberSkill => (Member, Skill),
            Relation::JobTitle => (Job, Title),
            Relation::JobCompany => (Job, Company),
            Relation::JobPosition => (Job, Position),
            Relation::JobSkill => (Job, Skill),
            Relation::SeekerEngagement => (Member, Job),
            Relation::RecruiterInteraction => (Job, Member),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::MemberTitle => "MemberTitle",
            Relation::MemberCompany => "MemberCompany",
            Relation::MemberPosition => "MemberPosition",
            Relation::MemberSkill => "MemberSkill",
            Relation::JobTitle => "JobTitle",
            Relation::JobCompany => "JobCompany",
            Relation::JobPosition => "JobPosition",
            Relation::JobSkill => "JobSkill",
            Relation::SeekerEngagement => "SeekerEngagement",
            Relation::RecruiterInteraction => "RecruiterInteraction",
        }
    }

    /// The attribute relation linking `owner` (member or job) to `attribute`.
    pub fn attribute(owner: NodeType, attribute: NodeType) -> Option<Relation> {
        Relation::ALL
            .into_iter()
            .find(|r| r.signature() == (owner, attribute) && attribute.is_attribute())
    }
}

/// Edge type: a relation, or the reciprocal of one.
///
/// The reverse wrapper holds a [`Relation`] rather than another
/// `EdgeType`, so a doubly reversed edge type cannot be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeType {
    Forward(Relation),
    Reverse(Relation),
}

impl EdgeType {
    /// Every forward and reverse edge type, forward ones first.
    pub fn all() -> Vec<EdgeType> {
        Relation::ALL
            .into_iter()
            .map(EdgeType::Forward)
            .chain(Relation::ALL.into_iter().map(EdgeType::Reverse))
            .collect()
    }

    /// Dense index in `0..20`: forward relations first, then reverses.
    pub fn ordinal(self) -> usize {
        match self {
            EdgeType::Forward(r) => r as usize,
            EdgeType::Reverse(r) => Relation::ALL.len() + r as usize,
        }
    }

    pub fn relation(self) -> Relation {
        match self {
            EdgeType::Forward(r) | EdgeType::Reverse(r) => r,
        }
    }

    pub fn is_reverse(self) -> bool {
        matches!(self, EdgeType::Reverse(_))
    }

    /// (source type, destination type).
    pub fn signature(self) -> (NodeType, NodeType) {
        match self {
            EdgeType::Forward(r) => r.signature(),
            EdgeType::Reverse(r) => {
                let (s, d) = r.signature();
                (d, s)
            }
        }
    }

    /// The reciprocal edge type.
    pub fn reversed(self) -> EdgeType {
        match self {
            EdgeType::Forward(r) => EdgeType::Reverse(r),
            EdgeType::Reverse(r) => EdgeType::Forward(r),
        }
    }
}

impl From<Relation> for EdgeType {
    fn from(r: Relation) -> Self {
        EdgeType::Forward(r)
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeType::Forward(r) => f.write_str(r.name()),
            EdgeType::Reverse(r) => write!(f, "Reverse({})", r.name()),
        }
    }
}

impl FromStr for EdgeType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lookup = |name: &str| {
            Relation::ALL
                .into_iter()
                .find(|r| r.name() == name)
                .ok_or_else(|| format!("unknown edge type `{s}`"))
        };
        match s.strip_prefix("Reverse(").and_then(|r| r.strip_suffix(')')) {
            Some(inner) => Ok(EdgeType::Reverse(lookup(inner)?)),
            None => Ok(EdgeType::Forward(lookup(s)?)),
        }
    }
}

/// A set of edge types, used to restrict sampling per hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EdgeTypeSet(u32);

impl EdgeTypeSet {
    pub fn all() -> Self {
        EdgeType::all().into_iter().collect()
    }

    pub fn empty() -> Self {
        Self(0)
    }

    pub fn insert(&mut self, t: EdgeType) {
        self.0 |= 1 << t.ordinal();
    }

    pub fn contains(self, t: EdgeType) -> bool {
        self.0 & (1 << t.ordinal()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = EdgeType> {
        EdgeType::all().into_iter().filter(move |t| self.contains(*t))
    }

    /// Destination node types reachable through any member of the set.
    pub fn destination_types(self) -> Vec<NodeType> {
        let mut v: Vec<NodeType> = self.iter().map(|t| t.signature().1).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl FromIterator<EdgeType> for EdgeTypeSet {
    fn from_iter<I: IntoIterator<Item = EdgeType>>(iter: I) -> Self {
        let mut s = Self::empty();
        for t in iter {
            s.insert(t);
        }
        s
    }
}

/// Dense per-node input features.
pub type FeatureVector = Vec<f32>;

/// Feature dimensionality per node type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSchema {
    dims: [usize; NodeType::COUNT],
}

impl GraphSchema {
    pub const DEFAULT_DIM: usize = 16;

    pub fn uniform(dim: usize) -> Self {
        Self {
            dims: [dim; NodeType::COUNT],
        }
    }

    pub fn with_dim(mut self, node_type: NodeType, dim: usize) -> Self {
        self.dims[node_type.index()] = dim;
        self
    }

    pub fn dim(&self, node_type: NodeType) -> usize {
        self.dims[node_type.index()]
    }

    /// Widest feature vector across node types.
    pub fn max_dim(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }
}

impl Default for GraphSchema {
    fn default() -> Self {
        Self::uniform(Self::DEFAULT_DIM)
    }
}
