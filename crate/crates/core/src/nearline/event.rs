use serde::{Deserialize, Serialize};

use crate::graph::{FeatureVector, GraphSchema, NodeRef, NodeType};

/// What a member did with a job posting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Click,
    Save,
    Apply,
}

impl Action {
    /// Edge weight of the engagement: click 1, save 2, apply 3.
    pub fn weight(self) -> f64 {
        match self {
            Action::Click => 1.0,
            Action::Save => 2.0,
            Action::Apply => 3.0,
        }
    }
}

/// An attribute node linked by a job or member, optionally carrying the
/// attribute's own input features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeRef {
    pub node: NodeRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    JobCreated {
        job: NodeRef,
        features: FeatureVector,
        #[serde(default)]
        attributes: Vec<AttributeRef>,
    },
    SeekerEngagement {
        member: NodeRef,
        job: NodeRef,
        action: Action,
    },
    RecruiterInteraction {
        job: NodeRef,
        member: NodeRef,
    },
    /// Replaces the member's features and full attribute set.
    MemberAttributesUpdated {
        member: NodeRef,
        features: FeatureVector,
        #[serde(default)]
        attributes: Vec<AttributeRef>,
    },
    JobClosed {
        job: NodeRef,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::JobCreated { .. } => "JobCreated",
            EventBody::SeekerEngagement { .. } => "SeekerEngagement",
            EventBody::RecruiterInteraction { .. } => "RecruiterInteraction",
            EventBody::MemberAttributesUpdated { .. } => "MemberAttributesUpdated",
            EventBody::JobClosed { .. } => "JobClosed",
        }
    }

    /// The key an event of this payload must be partitioned by.
    pub fn expected_key(&self) -> NodeRef {
        match self {
            EventBody::JobCreated { job, .. }
            | EventBody::SeekerEngagement { job, .. }
            | EventBody::JobClosed { job } => *job,
            EventBody::RecruiterInteraction { member, .. } | EventBody::MemberAttributesUpdated { member, .. } => {
                *member
            }
        }
    }
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketplaceEvent {
    /// Epoch milliseconds.
    pub ts: i64,
    pub partition_key: NodeRef,
    #[serde(flatten)]
    pub body: EventBody,
}

impl MarketplaceEvent {
    pub fn new(ts: i64, body: EventBody) -> Self {
        Self {
            ts,
            partition_key: body.expected_key(),
            body,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }

    /// Parses and validates one log line.
    pub fn parse(line: &str, schema: &GraphSchema) -> Result<Self, String> {
        let e: MarketplaceEvent = serde_json::from_str(line).map_err(|e| format!("unparseable event: {e}"))?;
        e.validate(schema)?;
        Ok(e)
    }

    /// Checks node types, the partition key and feature dimensions.
    pub fn validate(&self, schema: &GraphSchema) -> Result<(), String> {
        let expect = |n: NodeRef, t: NodeType, field: &str| {
            if n.node_type == t {
                Ok(())
            } else {
                Err(format!("{} field `{field}` must be a {t}, got {n}", self.body.kind()))
            }
        };
        let dims = |n: NodeRef, f: &[f32]| {
            let want = schema.dim(n.node_type);
            if f.len() != want {
                return Err(format!("{n}: expected {want} features, got {}", f.len()));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(format!("{n}: non-finite feature"));
            }
            Ok(())
        };
        let attrs = |owner: NodeRef, a: &[AttributeRef]| {
            for r in a {
                if !r.node.node_type.is_attribute() {
                    return Err(format!("{owner}: {} is not an attribute node", r.node));
                }
                if let Some(f) = &r.features {
                    dims(r.node, f)?;
                }
            }
            Ok(())
        };
        match &self.body {
            EventBody::JobCreated {
                job,
                features,
                attributes,
            } => {
                expect(*job, NodeType::Job, "job")?;
                dims(*job, features)?;
                attrs(*job, attributes)?;
            }
            EventBody::SeekerEngagement { member, job, .. } | EventBody::RecruiterInteraction { job, member } => {
                expect(*member, NodeType::Member, "member")?;
                expect(*job, NodeType::Job, "job")?;
            }
            EventBody::MemberAttributesUpdated {
                member,
                features,
                attributes,
            } => {
                expect(*member, NodeType::Member, "member")?;
                dims(*member, features)?;
                attrs(*member, attributes)?;
            }
            EventBody::JobClosed { job } => expect(*job, NodeType::Job, "job")?,
        }
        let key = self.body.expected_key();
        if self.partition_key != key {
            return Err(format!(
                "{} must be partitioned by {key}, got {}",
                self.body.kind(),
                self.partition_key
            ));
        }
        Ok(())
    }
}
