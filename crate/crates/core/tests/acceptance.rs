//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p groundrl --test acceptance`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use groundrl::data::{load_dataset, ErrorCode};
use groundrl::grpo::{
    group_advantages, grpo_loss, sft_loss, train_two_stage, ToyPolicy, ToyTask, TrainingMode,
    TrainingPlan, Vocabulary,
};
use groundrl::parser::{format_answer, format_completion};
use groundrl::{
    evaluate_dataset, iou, match_entities, parse_completion, tier_score, total_reward, BoundingBox,
    Entity, EntityRole, GroundingInstance, InstanceFields, ParsedEntity, RewardConfig, Split,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bbox(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
    BoundingBox::new(x1, y1, x2, y2).unwrap()
}

fn parsed(role: EntityRole, b: BoundingBox) -> ParsedEntity {
    ParsedEntity {
        role,
        bbox: b,
        source_span: 0..0,
    }
}

fn instance(id: &str, entities: Vec<Entity>) -> GroundingInstance {
    GroundingInstance::new(InstanceFields {
        id: id.into(),
        image_id: "img".into(),
        image_width: 1000,
        image_height: 1000,
        expression: "e".into(),
        entities,
        cot: None,
        split: Split::Test,
    })
    .unwrap()
}

fn completion_for(think: &str, entities: &[Entity]) -> String {
    format_completion(think, &format_answer(entities.iter().map(|e| (e.role, &e.bbox))))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Width-10 box sharing `overlap` columns with `[0, 10] x [0, 10]`.
fn shifted(overlap: f64) -> BoundingBox {
    bbox(10.0 - overlap, 0.0, 20.0 - overlap, 10.0)
}

/// Overlap giving IoU `v` against `[0, 10] x [0, 10]` with [`shifted`].
fn overlap_for(v: f64) -> f64 {
    20.0 * v / (1.0 + v)
}

fn tier_table() -> Outcome {
    let cfg = RewardConfig::default();
    let cases = [
        (1.0, 1.0),
        (0.76, 1.0),
        (0.75, 0.8),
        (0.51, 0.8),
        (0.5, 0.4),
        (0.26, 0.4),
        (0.25, 0.0),
        (0.1, 0.0),
        (0.0, 0.0),
    ];
    for (v, want) in cases {
        let got = tier_score(v, &cfg);
        ensure(got == want, || format!("tier({v}) = {got}, want {want}"))?;
    }
    Ok(format!("{} boundary cases", cases.len()))
}

fn format_enumeration() -> Outcome {
    let cfg = RewardConfig::default();
    let inst = instance("a", vec![Entity::subject(bbox(0.0, 0.0, 10.0, 10.0)), Entity::object(bbox(500.0, 500.0, 510.0, 510.0))]);
    // disjoint from ground truth so only the format term is non-zero
    let far = "subject: [(900, 900), (910, 910)]";
    let cases = [
        (format!("<think>t</think> <answer>{far}</answer>"), 0.6),
        ("<think>t</think> <answer>nothing here</answer>".to_string(), 0.3),
        (far.to_string(), 0.3),
        ("plain text".to_string(), 0.0),
    ];
    for (text, want) in &cases {
        let b = total_reward(text, &inst, &cfg);
        ensure((b.r_fmt - want).abs() < 1e-12, || format!("r_fmt({text:?}) = {}, want {want}", b.r_fmt))?;
    }
    Ok("4 combinations".into())
}

fn relational_enumeration() -> Outcome {
    let cfg = RewardConfig::default();
    let s = bbox(0.0, 0.0, 10.0, 10.0);
    let o1 = bbox(100.0, 0.0, 110.0, 10.0);
    let o2 = bbox(200.0, 0.0, 210.0, 10.0);
    let gt = vec![Entity::subject(s), Entity::object(o1), Entity::object(o2)];
    let inst = instance("a", gt.clone());
    let mut checked = 0;
    for mask in 0..8u32 {
        let matched: Vec<bool> = (0..3).map(|k| mask & (1 << k) != 0).collect();
        let preds: Vec<Entity> = gt
            .iter()
            .zip(&matched)
            .filter(|(_, &m)| m)
            .map(|(e, _)| *e)
            .collect();
        let text = completion_for("t", &preds);
        let b = total_reward(&text, &inst, &cfg);
        let objects = usize::from(matched[1]) + usize::from(matched[2]);
        let want = match (matched[0], objects) {
            (true, 2) => 0.6,
            (true, 1) => 0.3,
            (false, 2) => 0.3,
            _ => 0.0,
        };
        ensure((b.r_rel - want).abs() < 1e-12, || format!("mask {mask:03b}: r_rel {} want {want}", b.r_rel))?;
        checked += 1;
    }
    Ok(format!("{checked} subsets of (subject, object1, object2)"))
}

fn golden_total() -> Outcome {
    let cfg = RewardConfig::default();
    let gt = vec![Entity::subject(bbox(10.0, 20.0, 110.0, 220.0)), Entity::object(bbox(300.0, 300.0, 400.0, 380.0))];
    let inst = instance("a", gt.clone());
    let b = total_reward(&completion_for("reasoning", &gt), &inst, &cfg);
    ensure((b.r_total - 2.275).abs() < 1e-12, || format!("r_total = {}", b.r_total))?;
    ensure(
        (b.r_fmt - 0.6).abs() < 1e-12 && (b.r_ent - 1.375).abs() < 1e-12 && (b.r_rel - 0.3).abs() < 1e-12,
        || format!("components {} {} {}", b.r_fmt, b.r_ent, b.r_rel),
    )?;
    Ok(format!("r_total = {}", b.r_total))
}

fn random_box(rng: &mut ChaCha8Rng, extent: f64) -> BoundingBox {
    let x1 = rng.random_range(0.0..extent);
    let y1 = rng.random_range(0.0..extent);
    let w = rng.random_range(0.5..extent / 2.0);
    let h = rng.random_range(0.5..extent / 2.0);
    bbox(x1, y1, x1 + w, y1 + h)
}

fn iou_properties() -> Outcome {
    let third = iou(&bbox(0.0, 0.0, 2.0, 1.0), &bbox(1.0, 0.0, 3.0, 1.0));
    ensure((third - 1.0 / 3.0).abs() <= 1e-12, || format!("hand case gave {third}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let a = random_box(&mut rng, 100.0);
        let b = random_box(&mut rng, 100.0);
        let ab = iou(&a, &b);
        ensure((0.0..=1.0).contains(&ab), || format!("iou {ab} out of range"))?;
        ensure((ab - iou(&b, &a)).abs() <= 1e-12, || "not symmetric".into())?;
        ensure((iou(&a, &a) - 1.0).abs() <= 1e-12, || "self iou != 1".into())?;
        let far = a.translated(1000.0, 1000.0).unwrap();
        ensure(iou(&a, &far) == 0.0, || "disjoint iou != 0".into())?;
        let [x1, y1, x2, y2] = a.corners();
        let (dx, dy) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let moved = iou(&a.translated(dx + 100.0, dy + 100.0).unwrap(), &b.translated(dx + 100.0, dy + 100.0).unwrap());
        ensure((moved - ab).abs() <= 1e-12, || format!("translation changed iou {ab} -> {moved}"))?;
        // scaling both boxes by the same factor leaves IoU unchanged
        let k = rng.random_range(0.5..4.0);
        let [u1, v1, u2, v2] = b.corners();
        let scaled = iou(&bbox(k * x1, k * y1, k * x2, k * y2), &bbox(k * u1, k * v1, k * u2, k * v2));
        ensure((scaled - ab).abs() <= 1e-12, || format!("scaling changed iou {ab} -> {scaled}"))?;
    }
    Ok("1000 random pairs".into())
}

/// `(iou desc, prediction asc, ground truth asc)`: larger is preferred.
fn better(a: (f64, usize, usize), b: (f64, usize, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && (a.1 < b.1 || (a.1 == b.1 && a.2 < b.2)))
}

/// Repeatedly take the best remaining admissible pair.
fn greedy_oracle(preds: &[ParsedEntity], gt: &[Entity]) -> Vec<(f64, usize, usize)> {
    let mut used_p = vec![false; preds.len()];
    let mut used_g = vec![false; gt.len()];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, p) in preds.iter().enumerate() {
            for (k, g) in gt.iter().enumerate() {
                if used_p[i] || used_g[k] || p.role != g.role {
                    continue;
                }
                let v = iou(&p.bbox, &g.bbox);
                if v > 0.0 && best.map_or(true, |b| better((v, i, k), b)) {
                    best = Some((v, i, k));
                }
            }
        }
        let Some(b) = best else { break };
        used_p[b.1] = true;
        used_g[b.2] = true;
        out.push(b);
    }
    out
}

/// Enumerates every role-consistent one-to-one matching over positive-IoU
/// pairs and returns the one whose preference-sorted pair list is
/// lexicographically best.
fn enumeration_oracle(preds: &[ParsedEntity], gt: &[Entity]) -> Vec<(f64, usize, usize)> {
    fn rec(
        i: usize,
        preds: &[ParsedEntity],
        gt: &[Entity],
        used: &mut Vec<bool>,
        cur: &mut Vec<(f64, usize, usize)>,
        best: &mut Option<Vec<(f64, usize, usize)>>,
    ) {
        if i == preds.len() {
            let mut sorted = cur.clone();
            sorted.sort_by(|a, b| if better(*a, *b) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
            if best.as_ref().map_or(true, |b| lex_better(&sorted, b)) {
                *best = Some(sorted);
            }
            return;
        }
        rec(i + 1, preds, gt, used, cur, best);
        for k in 0..gt.len() {
            if used[k] || preds[i].role != gt[k].role {
                continue;
            }
            let v = iou(&preds[i].bbox, &gt[k].bbox);
            if v <= 0.0 {
                continue;
            }
            used[k] = true;
            cur.push((v, i, k));
            rec(i + 1, preds, gt, used, cur, best);
            cur.pop();
            used[k] = false;
        }
    }
    fn lex_better(a: &[(f64, usize, usize)], b: &[(f64, usize, usize)]) -> bool {
        for (x, y) in a.iter().zip(b) {
            if x != y {
                return better(*x, *y);
            }
        }
        a.len() > b.len()
    }
    let mut best = None;
    rec(0, preds, gt, &mut vec![false; gt.len()], &mut Vec::new(), &mut best);
    best.unwrap_or_default()
}

fn grid_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    // coarse integer grid so that exact IoU ties are common
    let x1 = rng.random_range(0..4) as f64 * 5.0;
    let y1 = rng.random_range(0..2) as f64 * 5.0;
    let w = rng.random_range(1..3) as f64 * 5.0;
    let h = rng.random_range(1..3) as f64 * 5.0;
    bbox(x1, y1, x1 + w, y1 + h)
}

fn random_role(rng: &mut ChaCha8Rng) -> EntityRole {
    if rng.random_bool(0.3) {
        EntityRole::Subject
    } else {
        EntityRole::Object
    }
}

fn matching_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut ties = 0;
    for trial in 0..500 {
        let np = rng.random_range(0..=4);
        let ng = rng.random_range(0..=4);
        let preds: Vec<_> = (0..np).map(|_| parsed(random_role(&mut rng), grid_box(&mut rng))).collect();
        let gt: Vec<_> = (0..ng).map(|_| Entity::new(random_role(&mut rng), grid_box(&mut rng))).collect();
        let m = match_entities(&preds, &gt);
        let mut got: Vec<_> = m.pairs.iter().map(|p| (p.iou, p.prediction, p.ground_truth)).collect();
        let greedy = greedy_oracle(&preds, &gt);
        let enumerated = enumeration_oracle(&preds, &gt);
        ensure(greedy == enumerated, || format!("trial {trial}: oracles disagree"))?;
        got.sort_by(|a, b| if better(*a, *b) { std::cmp::Ordering::Less } else { std::cmp::Ordering::Greater });
        ensure(got == greedy, || format!("trial {trial}: got {got:?}, want {greedy:?}"))?;
        let mut ious: Vec<f64> = got.iter().map(|p| p.0).collect();
        ious.dedup();
        ties += usize::from(ious.len() < got.len());
    }
    Ok(format!("500 trials, {ties} with tied IoUs"))
}

fn advantage_normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut degenerate = 0;
    for g in 0..1000 {
        let rewards: Vec<f64> = if g % 10 == 0 {
            degenerate += 1;
            vec![rng.random_range(0.0..2.275); 8]
        } else {
            (0..8).map(|_| rng.random_range(0.0..2.275)).collect()
        };
        let a = group_advantages(&rewards, 1e-8);
        if g % 10 == 0 {
            ensure(a.iter().all(|&x| x == 0.0), || format!("group {g}: equal rewards gave {a:?}"))?;
            continue;
        }
        let mean = a.iter().sum::<f64>() / 8.0;
        let std = (a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 8.0).sqrt();
        ensure(mean.abs() < 1e-9, || format!("group {g}: mean {mean}"))?;
        ensure((std - 1.0).abs() < 1e-6, || format!("group {g}: std {std}"))?;
    }
    Ok(format!("1000 groups of 8 ({degenerate} all-equal)"))
}

fn numeric_grad(policy: &ToyPolicy, f: &dyn Fn(&ToyPolicy) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut p = policy.clone();
    (0..policy.num_params())
        .map(|j| {
            let x = p.params()[j];
            p.params_mut()[j] = x + h;
            let up = f(&p);
            p.params_mut()[j] = x - h;
            let down = f(&p);
            p.params_mut()[j] = x;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

fn gradient_checks() -> Outcome {
    let vocab = Arc::new(Vocabulary::new(["", "a", "b", "c", "d"].map(String::from).to_vec(), 0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_sft: f64 = 0.0;
    let mut worst_grpo: f64 = 0.0;
    for seed in 0..20 {
        let policy = ToyPolicy::random(vocab.clone(), 6, 1.5, &mut rng);

        let len = rng.random_range(1..=6);
        let target: Vec<usize> = (0..len).map(|_| rng.random_range(0..5)).collect();
        let analytic = sft_loss(&policy, &target).unwrap().grad;
        let numeric = numeric_grad(&policy, &|p| sft_loss(p, &target).unwrap().loss);
        worst_sft = worst_sft.max(max_rel_err(&analytic, &numeric));

        // old policy near the current one so some ratios leave the clip band
        let mut old = policy.clone();
        for x in old.params_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
        let reference = ToyPolicy::random(vocab.clone(), 6, 1.0, &mut rng);
        let trajectories: Vec<_> = (0..8).map(|_| old.sample(&mut rng)).collect();
        let rewards: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..2.275)).collect();
        let adv = group_advantages(&rewards, 1e-8);
        let kl_beta = if seed % 2 == 0 { 0.0025 } else { 1.0 };
        let loss = |p: &ToyPolicy| grpo_loss(p, &old, &reference, &trajectories, &adv, 0.2, kl_beta).unwrap();
        let analytic = loss(&policy).grad;
        let numeric = numeric_grad(&policy, &|p| loss(p).loss);
        worst_grpo = worst_grpo.max(max_rel_err(&analytic, &numeric));
    }
    ensure(worst_sft < 1e-5 && worst_grpo < 1e-5, || {
        format!("max relative error sft {worst_sft:.2e}, grpo {worst_grpo:.2e}")
    })?;
    Ok(format!("20 policies, max relative error sft {worst_sft:.1e} grpo {worst_grpo:.1e}"))
}

fn convergence_instance() -> GroundingInstance {
    let (instances, _) = load_dataset(fixture("clean.jsonl")).unwrap();
    instances.into_iter().find(|i| i.id() == "harbor-0").unwrap()
}

fn toy_convergence() -> Outcome {
    let task = ToyTask::two_completion(convergence_instance());
    let mut steps = HashMap::new();
    for mode in [TrainingMode::TwoStage, TrainingMode::GrpoOnly] {
        let mut per_seed = Vec::new();
        for seed in 0..5 {
            let mut plan = TrainingPlan::toy(mode);
            plan.seed = seed;
            plan.grpo.steps = 200;
            let out = train_two_stage(&task, &plan).unwrap();
            let reached = out.trace.grpo_steps_to_reach(0.9);
            let Some(n) = reached else {
                return Err(format!("{mode:?} seed {seed} did not reach p > 0.9 in 200 steps"));
            };
            per_seed.push(n);
        }
        steps.insert(format!("{mode:?}"), per_seed);
    }
    let mean = |v: &Vec<usize>| v.iter().sum::<usize>() as f64 / v.len() as f64;
    let two = mean(&steps["TwoStage"]);
    let grpo = mean(&steps["GrpoOnly"]);
    ensure(grpo > two, || format!("GRPO-only mean {grpo} not above two-stage mean {two}"))?;
    Ok(format!(
        "steps to p > 0.9: two-stage {:?} (mean {two}), GRPO-only {:?} (mean {grpo})",
        steps["TwoStage"], steps["GrpoOnly"]
    ))
}

fn kl_domination() -> Outcome {
    let task = ToyTask::two_completion(convergence_instance());
    let mut plan = TrainingPlan::toy(TrainingMode::TwoStage);
    plan.grpo.kl_beta = 1e6;
    plan.grpo.steps = 100;
    let out = train_two_stage(&task, &plan).unwrap();
    let drift = out.policy.max_abs_diff(&out.reference);
    ensure(drift < 1e-3, || format!("max |theta - theta_ref| = {drift:e}"))?;
    Ok(format!("max |theta - theta_ref| = {drift:.1e} after 100 steps"))
}

fn evaluation_arithmetic() -> Outcome {
    let s = bbox(0.0, 0.0, 10.0, 10.0);
    let o1 = bbox(100.0, 0.0, 110.0, 10.0);
    let o2 = bbox(200.0, 0.0, 210.0, 10.0);
    let a = instance("a", vec![Entity::subject(s), Entity::object(o1)]);
    let b = instance("b", vec![Entity::subject(s), Entity::object(o1), Entity::object(o2)]);
    let data = vec![a.clone(), b];
    let mut preds = HashMap::new();
    preds.insert("a".to_string(), completion_for("t", a.entities()));
    // subject at IoU 0.4 misses, o1 matched exactly, o2 absent
    preds.insert(
        "b".to_string(),
        completion_for("t", &[Entity::subject(shifted(overlap_for(0.4))), Entity::object(o1)]),
    );
    let r = evaluate_dataset(&preds, &data, 0.5, false);
    let want = [50.0, 200.0 / 3.0, 60.0, 175.0 / 3.0];
    let got = [r.acc_sub, r.acc_obj, r.macc_micro, r.macc_macro];
    for (g, w) in got.iter().zip(want) {
        ensure((g - w).abs() < 0.01, || format!("got {got:?}, want {want:?}"))?;
    }
    Ok(format!(
        "Acc_sub {:.2} Acc_obj {:.2} mAcc {:.2} (macro {:.2})",
        r.acc_sub, r.acc_obj, r.macc_micro, r.macc_macro
    ))
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    const CHARS: &[u8] = b"abcdefghij xyz,.:;()[]0123456789\n";
    let n = rng.random_range(1..40);
    let s: String = (0..n).map(|_| CHARS[rng.random_range(0..CHARS.len())] as char).collect();
    if s.trim().is_empty() {
        "x".into()
    } else {
        s
    }
}

fn random_coord(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..3) {
        0 => rng.random_range(0..2000) as f64,
        1 => (rng.random_range(0.0..2000.0f64) * 100.0).round() / 100.0,
        _ => rng.random_range(0.0..2000.0),
    }
}

fn parser_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..1000 {
        let n = rng.random_range(0..6);
        let entities: Vec<Entity> = (0..n)
            .map(|_| {
                let (a, b) = (random_coord(&mut rng), random_coord(&mut rng));
                let (c, d) = (random_coord(&mut rng), random_coord(&mut rng));
                let b = bbox(a.min(b), c.min(d), a.max(b) + 1.0, c.max(d) + 1.0);
                Entity::new(random_role(&mut rng), b)
            })
            .collect();
        let text = completion_for(&random_text(&mut rng), &entities);
        let first = parse_completion(&text);
        ensure(first.structural_ok, || format!("trial {trial}: not structural: {text:?}"))?;
        let got: Vec<(EntityRole, BoundingBox)> = first.entities.iter().map(|e| (e.role, e.bbox)).collect();
        let want: Vec<(EntityRole, BoundingBox)> = entities.iter().map(|e| (e.role, e.bbox)).collect();
        ensure(got == want, || format!("trial {trial}: entities differ for {text:?}"))?;
        let canonical = first.to_canonical().ok_or_else(|| format!("trial {trial}: no canonical form"))?;
        ensure(canonical == text, || format!("trial {trial}: canonical {canonical:?} != {text:?}"))?;
        ensure(parse_completion(&canonical) == first, || format!("trial {trial}: reparse differs"))?;
    }
    Ok("1000 random completions".into())
}

fn validator_fixture() -> Outcome {
    let (_, clean) = load_dataset(fixture("clean.jsonl")).map_err(|e| e.to_string())?;
    ensure(clean.rejected == 0 && clean.accepted == 6, || format!("clean fixture: {clean}"))?;
    let (_, bad) = load_dataset(fixture("invalid_one_per_code.jsonl")).map_err(|e| e.to_string())?;
    let want = vec![
        ErrorCode::MissingSubject,
        ErrorCode::MultipleSubjects,
        ErrorCode::NoObjects,
        ErrorCode::BoxOutOfBounds,
        ErrorCode::DegenerateBox,
        ErrorCode::BadCotTags,
        ErrorCode::MalformedRecord,
        ErrorCode::DuplicateId,
    ];
    ensure(bad.codes() == want, || format!("codes {:?}", bad.codes()))?;
    let lines: Vec<usize> = bad.errors.iter().map(|e| e.line).collect();
    ensure(lines == (2..=9).collect::<Vec<_>>(), || format!("lines {lines:?}"))?;
    ensure(bad.accepted == 1, || format!("accepted {}", bad.accepted))?;
    Ok(format!("{} codes on their own lines, clean fixture accepted", want.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("iou tier table", tier_table),
        ("format reward enumeration", format_enumeration),
        ("relational reward enumeration", relational_enumeration),
        ("golden total reward", golden_total),
        ("iou properties", iou_properties),
        ("matching vs brute-force oracles", matching_oracle),
        ("group advantage normalization", advantage_normalization),
        ("sft and grpo gradient checks", gradient_checks),
        ("toy convergence", toy_convergence),
        ("kl domination", kl_domination),
        ("evaluation arithmetic", evaluation_arithmetic),
        ("parser round trip", parser_round_trip),
        ("dataset validator fixture", validator_fixture),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{ms} ms]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{ms} ms]");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
