//! Deterministic inputs shared by the benchmarks.

use groundrl::grpo::canonical_completion;
use groundrl::parser::{format_answer, format_completion};
use groundrl::{BoundingBox, Entity, EntityRole, GroundingInstance, InstanceFields, ParsedEntity, Split};

fn bbox(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
    BoundingBox::new(x1, y1, x2, y2).expect("fixture boxes are valid")
}

/// One subject and `objects` objects laid out on a 1000x1000 image.
pub fn instance(objects: usize) -> GroundingInstance {
    let mut entities = vec![Entity::subject(bbox(100.0, 100.0, 220.0, 260.0))];
    for k in 0..objects {
        let x = 300.0 + 80.0 * k as f64;
        entities.push(Entity::object(bbox(x, 400.0, x + 70.0, 520.0)));
    }
    GroundingInstance::new(InstanceFields {
        id: format!("bench-{objects}"),
        image_id: "bench".into(),
        image_width: 1000,
        image_height: 1000,
        expression: "the subject left of the objects".into(),
        entities,
        cot: Some("<think>Locate the row of objects, then the subject to their left.</think>".into()),
        split: Split::Train,
    })
    .expect("fixture instance is valid")
}

pub fn perfect_completion(instance: &GroundingInstance) -> String {
    canonical_completion(instance)
}

/// Every box shifted by `dx`, so IoUs fall into lower tiers.
pub fn shifted_completion(instance: &GroundingInstance, dx: f64) -> String {
    let moved: Vec<(EntityRole, BoundingBox)> = instance
        .entities()
        .iter()
        .map(|e| (e.role, e.bbox.translated(dx, 0.0).expect("shift stays valid")))
        .collect();
    format_completion("shifted", &format_answer(moved.iter().map(|(r, b)| (*r, b))))
}

/// Predictions overlapping every ground-truth entity, in reverse order.
pub fn predictions(instance: &GroundingInstance, dx: f64) -> Vec<ParsedEntity> {
    instance
        .entities()
        .iter()
        .rev()
        .map(|e| ParsedEntity {
            role: e.role,
            bbox: e.bbox.translated(dx, 0.0).expect("shift stays valid"),
            source_span: 0..0,
        })
        .collect()
}
