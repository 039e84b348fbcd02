//! Shared domain types for multi-entity grounding.
//!
//! Everything here is an immutable value record once constructed. Constructors
//! enforce the geometric and role invariants so downstream modules can rely on
//! them without re-checking.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::DomainError;

/// Axis-aligned pixel-space rectangle, `(x1, y1)` top-left and `(x2, y2)`
/// bottom-right with y growing downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "[f64; 4]")]
pub struct BoundingBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, DomainError> {
        let coords = [x1, y1, x2, y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(DomainError::NonFiniteCoordinate);
        }
        if coords.iter().any(|&c| c < 0.0) {
            return Err(DomainError::NegativeCoordinate);
        }
        if x1 >= x2 || y1 >= y2 {
            return Err(DomainError::DegenerateBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn x2(&self) -> f64 {
        self.x2
    }

    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Whether the box lies inside `[0, width] x [0, height]`. Touching the
    /// border is allowed.
    pub fn fits_within(&self, width: f64, height: f64) -> bool {
        self.x2 <= width && self.y2 <= height
    }

    /// Shifts the box by `(dx, dy)`; fails if the result leaves the
    /// non-negative quadrant.
    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, DomainError> {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.corners()
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = DomainError;

    fn try_from(c: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(c[0], c[1], c[2], c[3])
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let corners = <[f64; 4]>::deserialize(d)?;
        Self::try_from(corners).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityRole {
    Subject,
    Object,
}

impl EntityRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            EntityRole::Subject => "subject",
            EntityRole::Object => "object",
        }
    }
}

impl fmt::Display for EntityRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A ground-truth entity: a role label attached to a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub role: EntityRole,
    pub bbox: BoundingBox,
}

impl Entity {
    pub fn new(role: EntityRole, bbox: BoundingBox) -> Self {
        Self { role, bbox }
    }

    pub fn subject(bbox: BoundingBox) -> Self {
        Self::new(EntityRole::Subject, bbox)
    }

    pub fn object(bbox: BoundingBox) -> Self {
        Self::new(EntityRole::Object, bbox)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One image-expression pair with exactly one subject and at least one
/// object.
///
/// Entities are stored subject first, then objects in annotation order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundingInstance {
    id: String,
    image_id: String,
    image_width: u32,
    image_height: u32,
    expression: String,
    entities: Vec<Entity>,
    cot: Option<String>,
    split: Split,
    extra: BTreeMap<String, serde_json::Value>,
}

/// Unvalidated field bundle accepted by [`GroundingInstance::new`].
#[derive(Debug, Clone)]
pub struct InstanceFields {
    pub id: String,
    pub image_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub expression: String,
    pub entities: Vec<Entity>,
    pub cot: Option<String>,
    pub split: Split,
}

impl GroundingInstance {
    pub fn new(fields: InstanceFields) -> Result<Self, DomainError> {
        let InstanceFields {
            id,
            image_id,
            image_width,
            image_height,
            expression,
            entities,
            cot,
            split,
        } = fields;

        if image_width == 0 || image_height == 0 {
            return Err(DomainError::EmptyImage);
        }
        let subjects = entities
            .iter()
            .filter(|e| e.role == EntityRole::Subject)
            .count();
        match subjects {
            0 => return Err(DomainError::MissingSubject),
            1 => {}
            n => return Err(DomainError::MultipleSubjects(n)),
        }
        if !entities.iter().any(|e| e.role == EntityRole::Object) {
            return Err(DomainError::NoObjects);
        }
        for (index, e) in entities.iter().enumerate() {
            if !e.bbox.fits_within(image_width as f64, image_height as f64) {
                return Err(DomainError::BoxOutOfBounds {
                    index,
                    width: image_width,
                    height: image_height,
                });
            }
        }

        // subject first, objects keep annotation order
        let mut ordered = Vec::with_capacity(entities.len());
        ordered.extend(entities.iter().filter(|e| e.role == EntityRole::Subject));
        ordered.extend(entities.iter().filter(|e| e.role == EntityRole::Object));

        Ok(Self {
            id,
            image_id,
            image_width,
            image_height,
            expression,
            entities: ordered,
            cot,
            split,
            extra: BTreeMap::new(),
        })
    }

    pub fn with_extra(mut self, extra: BTreeMap<String, serde_json::Value>) -> Self {
        self.extra = extra;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    pub fn expression(&self) -> &str {
        &self.expression
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn subject(&self) -> &Entity {
        &self.entities[0]
    }

    pub fn objects(&self) -> &[Entity] {
        &self.entities[1..]
    }

    pub fn cot(&self) -> Option<&str> {
        self.cot.as_deref()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    /// Unknown record fields carried through serialization untouched.
    pub fn extra(&self) -> &BTreeMap<String, serde_json::Value> {
        &self.extra
    }
}

/// An entity recovered from a completion, with the byte range of its segment
/// in the raw completion text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedEntity {
    pub role: EntityRole,
    pub bbox: BoundingBox,
    pub source_span: Range<usize>,
}

/// Structured decomposition of a raw completion.
///
/// `think_text` is only present when `structural_ok` holds. Entities are
/// extracted independently of the tag structure.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedCompletion {
    pub structural_ok: bool,
    pub think_text: Option<String>,
    pub entities: Vec<ParsedEntity>,
    pub malformed_segment_count: usize,
}

/// Weights and thresholds of the entity-aware reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight of the structural tag check.
    pub lambda1: f64,
    /// Weight of the entity-format check.
    pub lambda2: f64,
    pub alpha_subject: f64,
    pub alpha_object: f64,
    /// Bonus for subject plus at least one object matched.
    pub beta1: f64,
    /// Bonus for at least two objects matched.
    pub beta2: f64,
    /// `(threshold, score)` pairs, thresholds strictly decreasing. An IoU
    /// strictly above a threshold earns its score.
    pub iou_tiers: Vec<(f64, f64)>,
    /// IoU a ground-truth entity must strictly exceed to count as matched in
    /// the relational bonus.
    pub match_threshold: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.3,
            lambda2: 0.3,
            alpha_subject: 1.5,
            alpha_object: 1.25,
            beta1: 0.3,
            beta2: 0.3,
            iou_tiers: vec![(0.75, 1.0), (0.5, 0.8), (0.25, 0.4)],
            match_threshold: 0.25,
        }
    }
}

impl RewardConfig {
    /// Preset for training without a supervised cold start: both format
    /// weights raised by 0.2.
    pub fn grpo_only() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 0.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let weights = [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("alpha_subject", self.alpha_subject),
            ("alpha_object", self.alpha_object),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
        ];
        for (name, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(DomainError::InvalidConfig(format!(
                    "{name} must be finite and non-negative, got {w}"
                )));
            }
        }
        for &(threshold, score) in &self.iou_tiers {
            if !(0.0..=1.0).contains(&threshold) || !(0.0..=1.0).contains(&score) {
                return Err(DomainError::InvalidConfig(format!(
                    "tier ({threshold}, {score}) must lie in [0, 1]"
                )));
            }
        }
        for pair in self.iou_tiers.windows(2) {
            if pair[1].0 >= pair[0].0 || pair[1].1 >= pair[0].1 {
                return Err(DomainError::InvalidConfig(
                    "iou_tiers thresholds and scores must be strictly decreasing".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.match_threshold) {
            return Err(DomainError::InvalidConfig(format!(
                "match_threshold must lie in [0, 1], got {}",
                self.match_threshold
            )));
        }
        Ok(())
    }

    pub fn alpha(&self, role: EntityRole) -> f64 {
        match role {
            EntityRole::Subject => self.alpha_subject,
            EntityRole::Object => self.alpha_object,
        }
    }
}

/// One predicted entity paired with one ground-truth entity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub prediction: usize,
    pub ground_truth: usize,
    pub iou: f64,
}

/// Per-completion reward record. `r_total` is always the plain sum of the
/// three components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RewardBreakdown {
    pub r_fmt: f64,
    pub r_ent: f64,
    pub r_rel: f64,
    pub r_total: f64,
    pub matching: Vec<MatchedPair>,
    pub unmatched_predictions: Vec<usize>,
}
