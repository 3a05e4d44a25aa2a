//! Crop cascades and quota-constrained picture selection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::FaceCountCategory;

pub const CROP_STEP_W: u32 = 600;
pub const CROP_STEP_H: u32 = 400;
pub const MAX_CROP_STEPS: usize = 6;
pub const MIN_CROP_W: u32 = 1200;
pub const MIN_CROP_H: u32 = 800;
/// Largest instance [`selection_oracle`] will enumerate.
pub const ORACLE_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("candidate {0:?} has a non-finite score")]
    NonFiniteScore(String),
    #[error("oracle limited to {limit} candidates, got {got}")]
    TooLarge { limit: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropRect {
    pub x_tl: u32,
    pub y_tl: u32,
    pub x_br: u32,
    pub y_br: u32,
}

impl CropRect {
    pub fn width(&self) -> u32 {
        self.x_br - self.x_tl
    }

    pub fn height(&self) -> u32 {
        self.y_br - self.y_tl
    }

    fn centered_in(outer: &CropRect, w: u32, h: u32) -> Self {
        let x_tl = outer.x_tl + (outer.width() - w) / 2;
        let y_tl = outer.y_tl + (outer.height() - h) / 2;
        Self {
            x_tl,
            y_tl,
            x_br: x_tl + w,
            y_br: y_tl + h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropPlan {
    /// Successively smaller centered crops of the original image.
    pub zoom_steps: Vec<CropRect>,
    /// 4:3 crop centered in the last zoom step; absent when there are no steps.
    pub aspect_crop: Option<CropRect>,
}

impl CropPlan {
    pub fn rects(&self) -> impl Iterator<Item = &CropRect> {
        self.zoom_steps.iter().chain(self.aspect_crop.iter())
    }
}

/// Up to six centered crops, each 600 px narrower and 400 px shorter than
/// the one before, stopping before a crop would drop under 1200x800. The last
/// crop then gets a centered 4:3 crop with its width rounded down to even.
pub fn crop_cascade(width: u32, height: u32) -> CropPlan {
    let mut steps = Vec::new();
    let mut outer = CropRect {
        x_tl: 0,
        y_tl: 0,
        x_br: width,
        y_br: height,
    };
    for _ in 0..MAX_CROP_STEPS {
        let (w, h) = match (outer.width().checked_sub(CROP_STEP_W), outer.height().checked_sub(CROP_STEP_H)) {
            (Some(w), Some(h)) if w >= MIN_CROP_W && h >= MIN_CROP_H => (w, h),
            _ => break,
        };
        outer = CropRect::centered_in(&outer, w, h);
        steps.push(outer);
    }
    let aspect_crop = steps.last().map(|last| {
        let (w, h) = (last.width() as u64, last.height() as u64);
        // compare w/h with 4/3 in integers
        let (cw, ch) = if 3 * w > 4 * h {
            ((4 * h / 3) & !1, h)
        } else {
            (w, 3 * w / 4)
        };
        CropRect::centered_in(last, cw as u32, ch as u32)
    });
    CropPlan {
        zoom_steps: steps,
        aspect_crop,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPicture {
    pub picture_id: String,
    pub burst_id: String,
    pub category: FaceCountCategory,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConstraints {
    pub per_category_quota: usize,
    pub one_per_burst: bool,
    pub total: usize,
}

impl Default for SelectionConstraints {
    fn default() -> Self {
        Self {
            per_category_quota: 8,
            one_per_burst: true,
            total: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Picks in selection order.
    pub picks: Vec<ScoredPicture>,
    /// Categories whose quota could not be filled, with the number missing.
    pub shortfall: BTreeMap<FaceCountCategory, usize>,
}

impl Selection {
    pub fn picture_ids(&self) -> Vec<String> {
        self.picks.iter().map(|p| p.picture_id.clone()).collect()
    }
}

/// Rarest category first; equal counts go ThreePlus, Two, One.
pub fn category_order(candidates: &[ScoredPicture]) -> Vec<FaceCountCategory> {
    let mut order: Vec<(usize, FaceCountCategory)> = FaceCountCategory::ALL
        .iter()
        .map(|&c| (candidates.iter().filter(|p| p.category == c).count(), c))
        .collect();
    order.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    order.into_iter().map(|(_, c)| c).collect()
}

fn by_preference(a: &ScoredPicture, b: &ScoredPicture) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.picture_id.cmp(&b.picture_id))
}

fn check_scores(candidates: &[ScoredPicture]) -> Result<(), SelectionError> {
    match candidates.iter().find(|c| !c.score.is_finite()) {
        Some(c) => Err(SelectionError::NonFiniteScore(c.picture_id.clone())),
        None => Ok(()),
    }
}

fn shortfall(picks: &[ScoredPicture], c: &SelectionConstraints) -> BTreeMap<FaceCountCategory, usize> {
    FaceCountCategory::ALL
        .iter()
        .filter_map(|&cat| {
            let n = picks.iter().filter(|p| p.category == cat).count();
            (n < c.per_category_quota).then_some((cat, c.per_category_quota - n))
        })
        .collect()
}

/// Greedy selection: per category (see [`category_order`]), best score first,
/// skipping bursts already used, up to the quota and the overall total.
pub fn select_best(
    candidates: &[ScoredPicture],
    constraints: &SelectionConstraints,
) -> Result<Selection, SelectionError> {
    check_scores(candidates)?;
    let mut picks: Vec<ScoredPicture> = Vec::new();
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for cat in category_order(candidates) {
        let mut pool: Vec<&ScoredPicture> = candidates.iter().filter(|p| p.category == cat).collect();
        pool.sort_by(|a, b| by_preference(a, b));
        let mut taken = 0;
        for p in pool {
            if taken == constraints.per_category_quota || picks.len() == constraints.total {
                break;
            }
            if constraints.one_per_burst && !used.insert(&p.burst_id) {
                continue;
            }
            picks.push(p.clone());
            taken += 1;
        }
    }
    let shortfall = shortfall(&picks, constraints);
    Ok(Selection { picks, shortfall })
}

/// Exhaustive counterpart of [`select_best`] for small inputs. Per category,
/// among all feasible subsets it keeps the largest, breaking ties by the
/// lexicographically smallest vector of preference ranks.
pub fn selection_oracle(
    candidates: &[ScoredPicture],
    constraints: &SelectionConstraints,
) -> Result<Selection, SelectionError> {
    if candidates.len() > ORACLE_LIMIT {
        return Err(SelectionError::TooLarge {
            limit: ORACLE_LIMIT,
            got: candidates.len(),
        });
    }
    check_scores(candidates)?;
    let mut picks: Vec<ScoredPicture> = Vec::new();
    let mut used: Vec<String> = Vec::new();
    for cat in category_order(candidates) {
        let mut pool: Vec<&ScoredPicture> = candidates.iter().filter(|p| p.category == cat).collect();
        pool.sort_by(|a, b| by_preference(a, b));
        let cap = constraints
            .per_category_quota
            .min(constraints.total - picks.len().min(constraints.total));
        let mut best: Vec<usize> = Vec::new();
        for mask in 0u32..(1u32 << pool.len()) {
            let members: Vec<usize> = (0..pool.len()).filter(|i| mask >> i & 1 == 1).collect();
            if members.len() > cap || members.len() < best.len() {
                continue;
            }
            if constraints.one_per_burst {
                let bursts: Vec<&str> = members.iter().map(|&i| pool[i].burst_id.as_str()).collect();
                let distinct: BTreeSet<&str> = bursts.iter().copied().collect();
                if distinct.len() != bursts.len() || bursts.iter().any(|b| used.iter().any(|u| u == b)) {
                    continue;
                }
            }
            if members.len() > best.len() || members < best {
                best = members;
            }
        }
        for i in best {
            used.push(pool[i].burst_id.clone());
            picks.push(pool[i].clone());
        }
    }
    let shortfall = shortfall(&picks, constraints);
    Ok(Selection { picks, shortfall })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEntry {
    pub method: String,
    pub picture_id: String,
    pub burst_id: String,
    pub category: String,
    pub score: f64,
    /// 1-based position in selection order.
    pub rank: usize,
}

pub fn selection_entries(method: &str, selection: &Selection) -> Vec<SelectionEntry> {
    selection
        .picks
        .iter()
        .enumerate()
        .map(|(i, p)| SelectionEntry {
            method: method.to_owned(),
            picture_id: p.picture_id.clone(),
            burst_id: p.burst_id.clone(),
            category: p.category.to_string(),
            score: p.score,
            rank: i + 1,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cand(id: &str, burst: &str, cat: FaceCountCategory, score: f64) -> ScoredPicture {
        ScoredPicture {
            picture_id: id.into(),
            burst_id: burst.into(),
            category: cat,
            score,
        }
    }

    fn random_instance(rng: &mut ChaCha8Rng, max: usize, bursts: usize) -> Vec<ScoredPicture> {
        let n = rng.random_range(0..=max);
        (0..n)
            .map(|i| {
                cand(
                    &format!("p{i:03}"),
                    &format!("b{}", rng.random_range(0..bursts.max(1))),
                    FaceCountCategory::ALL[rng.random_range(0..3)],
                    // coarse scores so ties happen
                    rng.random_range(0..8) as f64 / 4.0,
                )
            })
            .collect()
    }

    #[test]
    fn cascade_6000x4000() {
        let plan = crop_cascade(6000, 4000);
        let sizes: Vec<(u32, u32)> = plan.zoom_steps.iter().map(|r| (r.width(), r.height())).collect();
        assert_eq!(
            sizes,
            vec![(5400, 3600), (4800, 3200), (4200, 2800), (3600, 2400), (3000, 2000), (2400, 1600)]
        );
        assert_eq!(plan.zoom_steps[0], CropRect { x_tl: 300, y_tl: 200, x_br: 5700, y_br: 3800 });
        assert_eq!(plan.zoom_steps[5], CropRect { x_tl: 1800, y_tl: 1200, x_br: 4200, y_br: 2800 });
        // 1600 * 4 / 3 = 2133.33, floored to even 2132; (2400 - 2132) / 2 = 134
        let last = plan.aspect_crop.unwrap();
        assert_eq!(last, CropRect { x_tl: 1934, y_tl: 1200, x_br: 4066, y_br: 2800 });
        for w in plan.rects().collect::<Vec<_>>().windows(2) {
            assert!(w[1].x_tl >= w[0].x_tl && w[1].x_br <= w[0].x_br);
            assert!(w[1].y_tl >= w[0].y_tl && w[1].y_br <= w[0].y_br);
        }
    }

    #[test]
    fn cascade_early_stop() {
        let plan = crop_cascade(1000, 700);
        assert!(plan.zoom_steps.is_empty());
        assert_eq!(plan.aspect_crop, None);
        let plan = crop_cascade(3000, 2000);
        assert_eq!(plan.zoom_steps.len(), 3);
        assert_eq!(plan.zoom_steps[2].width(), 1200);
        assert!(crop_cascade(0, 0).zoom_steps.is_empty());
    }

    #[test]
    fn cascade_tall_image() {
        let plan = crop_cascade(2400, 4000);
        let last = plan.zoom_steps.last().unwrap();
        let a = plan.aspect_crop.unwrap();
        assert_eq!(a.width(), last.width());
        assert_eq!(a.height(), last.width() * 3 / 4);
    }

    #[test]
    fn three_categories_ten_bursts() {
        let mut c = Vec::new();
        for (k, cat) in FaceCountCategory::ALL.iter().enumerate() {
            for b in 0..10 {
                c.push(cand(&format!("{k}-{b}"), &format!("{k}-{b}"), *cat, (k * 10 + b) as f64));
            }
        }
        let s = select_best(&c, &SelectionConstraints::default()).unwrap();
        assert_eq!(s.picks.len(), 24);
        for cat in FaceCountCategory::ALL {
            assert_eq!(s.picks.iter().filter(|p| p.category == cat).count(), 8);
        }
        let bursts: BTreeSet<_> = s.picks.iter().map(|p| &p.burst_id).collect();
        assert_eq!(bursts.len(), 24);
        assert!(s.shortfall.is_empty());
    }

    #[test]
    fn single_burst() {
        let c: Vec<_> = (0..9)
            .map(|i| cand(&format!("p{i}"), "b", FaceCountCategory::ALL[i % 3], i as f64))
            .collect();
        let s = select_best(&c, &SelectionConstraints::default()).unwrap();
        assert_eq!(s.picks.len(), 1);
        assert_eq!(s.shortfall.values().sum::<usize>(), 23);
    }

    #[test]
    fn order_and_ties() {
        use FaceCountCategory::*;
        let c = vec![
            cand("a", "1", One, 1.0),
            cand("b", "2", One, 1.0),
            cand("c", "1", Two, 5.0),
            cand("d", "3", ThreePlus, 0.5),
        ];
        assert_eq!(category_order(&c), vec![ThreePlus, Two, One]);
        let s = select_best(&c, &SelectionConstraints::default()).unwrap();
        // Two takes burst 1 first, so One falls back to "b"
        assert_eq!(s.picture_ids(), vec!["d", "c", "b"]);
        let no_burst_rule = SelectionConstraints { one_per_burst: false, ..Default::default() };
        assert_eq!(select_best(&c, &no_burst_rule).unwrap().picture_ids(), vec!["d", "c", "a", "b"]);
    }

    #[test]
    fn non_finite_rejected() {
        let c = vec![cand("a", "1", FaceCountCategory::One, f64::NAN)];
        assert!(select_best(&c, &SelectionConstraints::default()).is_err());
        assert!(selection_oracle(&c, &SelectionConstraints::default()).is_err());
    }

    #[test]
    fn oracle_edges() {
        let k = SelectionConstraints::default();
        assert!(selection_oracle(&[], &k).unwrap().picks.is_empty());
        let one = vec![cand("x", "b", FaceCountCategory::Two, 0.3)];
        assert_eq!(selection_oracle(&one, &k).unwrap().picture_ids(), vec!["x"]);
        let big: Vec<_> = (0..21).map(|i| cand(&i.to_string(), "b", FaceCountCategory::One, 0.0)).collect();
        assert!(matches!(selection_oracle(&big, &k), Err(SelectionError::TooLarge { .. })));
    }

    #[test]
    fn matches_oracle_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let c = random_instance(&mut rng, 12, 4);
            let k = SelectionConstraints {
                per_category_quota: rng.random_range(1..=4),
                one_per_burst: rng.random::<f64>() < 0.8,
                total: rng.random_range(1..=12),
            };
            assert_eq!(select_best(&c, &k).unwrap(), selection_oracle(&c, &k).unwrap());
        }
    }

    proptest! {
        #[test]
        fn removing_unselected_is_stable(seed in 0u64..10_000, drop in 0usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_instance(&mut rng, 40, 12);
            let k = SelectionConstraints { per_category_quota: 3, one_per_burst: true, total: 9 };
            let s = select_best(&c, &k).unwrap();
            let selected: BTreeSet<_> = s.picture_ids().into_iter().collect();
            let unselected: Vec<usize> =
                (0..c.len()).filter(|&i| !selected.contains(&c[i].picture_id)).collect();
            prop_assume!(!unselected.is_empty());
            let mut smaller = c.clone();
            smaller.remove(unselected[drop % unselected.len()]);
            // the property is about a fixed processing order
            prop_assume!(category_order(&smaller) == category_order(&c));
            prop_assert_eq!(select_best(&smaller, &k).unwrap().picks, s.picks);
        }

        #[test]
        fn quota_and_burst_invariants(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_instance(&mut rng, 200, 60);
            let k = SelectionConstraints::default();
            let s = select_best(&c, &k).unwrap();
            prop_assert!(s.picks.len() <= k.total);
            for cat in FaceCountCategory::ALL {
                prop_assert!(s.picks.iter().filter(|p| p.category == cat).count() <= k.per_category_quota);
            }
            let bursts: BTreeSet<_> = s.picks.iter().map(|p| &p.burst_id).collect();
            prop_assert_eq!(bursts.len(), s.picks.len());
        }
    }

    #[test]
    fn report_entries() {
        let c = vec![cand("a", "1", FaceCountCategory::ThreePlus, 2.5)];
        let s = select_best(&c, &SelectionConstraints::default()).unwrap();
        let e = selection_entries("baseline", &s);
        assert_eq!(e[0].category, "three_plus");
        assert_eq!(e[0].rank, 1);
        assert_eq!(e[0].method, "baseline");
    }
}
