//! Seeded synthetic datasets with known labeling rules, used for testing the
//! learners and for the `synth` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::composition::{BaselineThresholds, FaceGeometry, HeuristicThresholds};
use crate::model::{BoundingBox, FaceFeatures, FaceObservation, Label, PictureRecord};
use crate::threshold_opt::{ThresholdKind, ThresholdSet};

fn face(bbox: BoundingBox, rng: &mut ChaCha8Rng) -> FaceObservation {
    let mut f = FaceObservation::new(bbox, random_features(rng));
    f.score = Some(rng.random());
    f
}

fn random_features(rng: &mut ChaCha8Rng) -> FaceFeatures {
    let mut v = [0.0; 9];
    for (i, c) in v.iter_mut().enumerate() {
        *c = if i < 3 { rng.random_range(-90.0..90.0) } else { rng.random() };
    }
    FaceFeatures::from_array(v)
}

/// Pictures labeled by a hidden threshold set, with no face quantity closer
/// than `margin` to any threshold it is compared against.
#[derive(Debug, Clone)]
pub struct ThresholdDataConfig {
    pub hidden: ThresholdSet,
    pub count: usize,
    pub margin: f64,
    pub seed: u64,
}

impl ThresholdDataConfig {
    pub fn new(kind: ThresholdKind, count: usize, seed: u64) -> Self {
        let baseline = BaselineThresholds {
            x_min: 0.1,
            x_max: 0.9,
            y_min: 0.15,
            y_max: 0.85,
            occ_min: 0.03,
            occ_max: 0.2,
        };
        let hidden = match kind {
            ThresholdKind::Baseline => ThresholdSet::Baseline(baseline),
            ThresholdKind::Heuristic => ThresholdSet::Heuristic(HeuristicThresholds {
                baseline,
                r_min: 0.5,
                p_min: 0.4,
            }),
        };
        Self {
            hidden,
            count,
            margin: 0.02,
            seed,
        }
    }
}

const SIZES: [(u32, u32); 3] = [(600, 400), (900, 600), (1200, 800)];

fn clear_of(v: f64, t: f64, margin: f64) -> bool {
    (v - t).abs() >= margin
}

fn respects_margin(p: &PictureRecord, hidden: &ThresholdSet, margin: f64) -> bool {
    let g = hidden.genome();
    let geometry_ok = p.faces.iter().all(|f| {
        let q = FaceGeometry::new(&f.bbox, p.width, p.height);
        [
            (q.left, g[0]),
            (q.right, g[1]),
            (q.top, g[2]),
            (q.bottom, g[3]),
            (q.occupancy, g[4]),
            (q.occupancy, g[5]),
        ]
        .iter()
        .all(|&(v, t)| clear_of(v, t, margin))
    });
    if !geometry_ok || g.len() == 6 || p.faces.is_empty() {
        return geometry_ok;
    }
    let scores: Vec<f64> = p.faces.iter().map(|f| f.score.unwrap()).collect();
    let good = scores.iter().filter(|&&r| r > g[6]).count() as f64 / scores.len() as f64;
    scores.iter().all(|&r| clear_of(r, g[6], margin)) && clear_of(good, g[7], margin)
}

fn random_box(width: u32, height: u32, central: bool, rng: &mut ChaCha8Rng) -> BoundingBox {
    let (w, h) = (width as f64, height as f64);
    let side = rng.random_range(0.05..0.55) * h;
    let bw = (side * rng.random_range(0.8..1.2)).min(w - 2.0);
    let bh = side.min(h - 2.0);
    let (lo_x, lo_y) = if central { (0.12 * w, 0.17 * h) } else { (0.0, 0.0) };
    let (hi_x, hi_y) = if central { (0.88 * w - bw, 0.83 * h - bh) } else { (w - bw, h - bh) };
    let x = rng.random_range(lo_x..hi_x.max(lo_x + 1.0)).floor();
    let y = rng.random_range(lo_y..hi_y.max(lo_y + 1.0)).floor();
    let x1 = (x + bw).ceil().min(w);
    let y1 = (y + bh).ceil().min(h);
    BoundingBox::new(x as u32, y as u32, x1 as u32, y1 as u32).expect("positive box")
}

/// Half of the pictures are drawn with every face near the center so that
/// both classes are well represented; the rest are unconstrained.
pub fn threshold_pictures(cfg: &ThresholdDataConfig) -> Vec<PictureRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    while out.len() < cfg.count {
        let i = out.len();
        let (width, height) = SIZES[rng.random_range(0..SIZES.len())];
        let central = i % 2 == 0;
        let n = if rng.random::<f64>() < 0.03 { 0 } else { rng.random_range(1..=3) };
        let faces = (0..n)
            .map(|_| {
                let b = random_box(width, height, central, &mut rng);
                face(b, &mut rng)
            })
            .collect();
        let mut p = PictureRecord {
            picture_id: format!("syn-{i:05}"),
            burst_id: format!("burst-{:04}", i / 4),
            width,
            height,
            faces,
            label: None,
        };
        if !respects_margin(&p, &cfg.hidden, cfg.margin) {
            continue;
        }
        p.label = Some(
            crate::threshold_opt::classify_with_thresholds(&p, &cfg.hidden).expect("scored faces"),
        );
        out.push(p);
    }
    out
}

/// The face-feature rule: frontal (|yaw| < 20), smiling (joy > 0.6), sharp
/// (blur < 0.3).
pub fn face_rule(f: &FaceFeatures) -> bool {
    f.yaw.abs() < 20.0 && f.joy > 0.6 && f.blur < 0.3
}

/// Labeled faces for the feature classifier. Half have their rule features
/// drawn inside the good region (so the classes are roughly balanced), the
/// rest are uniform. Labels follow [`face_rule`], and a `noise` fraction of
/// labels is flipped.
pub fn face_feature_set(count: usize, noise: f64, seed: u64) -> Vec<FaceObservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut f = random_features(&mut rng);
            if rng.random::<bool>() {
                f.yaw = rng.random_range(-20.0..20.0);
                f.joy = rng.random_range(0.6..1.0);
                f.blur = rng.random_range(0.0..0.3);
            }
            let mut good = face_rule(&f);
            if rng.random::<f64>() < noise {
                good = !good;
            }
            let side = rng.random_range(30..120);
            let mut face = FaceObservation::new(BoundingBox::new(0, 0, side, side).unwrap(), f);
            face.label = Some(Label::from_good(good));
            face
        })
        .collect()
}

/// Picture size used for layout data; it maps onto the 150x100 canvas at
/// exactly 10 px per canvas pixel.
pub const LAYOUT_SIZE: (u32, u32) = (1500, 1000);

/// The layout rule: every face has `r >= 0.6` (canvas intensity >= 147) and
/// lies inside the central 80% of the frame.
pub fn layout_rule(p: &PictureRecord) -> bool {
    let (w, h) = (p.width as f64, p.height as f64);
    !p.faces.is_empty()
        && p.faces.iter().all(|f| {
            let b = &f.bbox;
            f.score.is_some_and(|r| r >= 0.6)
                && b.x_tl as f64 >= 0.1 * w
                && b.x_br as f64 <= 0.9 * w
                && b.y_tl as f64 >= 0.1 * h
                && b.y_br as f64 <= 0.9 * h
        })
}

/// Face layouts on [`LAYOUT_SIZE`] pictures with one to four faces, labeled by
/// [`layout_rule`]. Quality scores avoid the band around 0.6, and faces are
/// either comfortably inside the central region or clearly cross its edge.
pub fn layout_pictures(count: usize, seed: u64) -> Vec<PictureRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (LAYOUT_SIZE.0 as i64, LAYOUT_SIZE.1 as i64);
    (0..count)
        .map(|i| {
            let want_good = rng.random::<bool>();
            let n = rng.random_range(1..=4);
            let spoiled = if want_good { usize::MAX } else { rng.random_range(0..n) };
            let faces = (0..n)
                .map(|k| {
                    let bad_quality = k == spoiled && rng.random::<bool>();
                    let outside = k == spoiled && !bad_quality;
                    let r = if bad_quality {
                        rng.random_range(0.05..0.45)
                    } else {
                        rng.random_range(0.7..1.0)
                    };
                    let bw = rng.random_range(10..=40) * 10;
                    let bh = rng.random_range(10..=30) * 10;
                    let (x, y) = if outside {
                        // straddle one edge of the central region by at least 80 px
                        let overshoot = rng.random_range(80..=(bw.min(bh) - 20).max(80));
                        match rng.random_range(0..4) {
                            0 => (150 - overshoot, rng.random_range(100..=900 - bh)),
                            1 => (1350 - bw + overshoot, rng.random_range(100..=900 - bh)),
                            2 => (rng.random_range(150..=1350 - bw), 100 - overshoot),
                            _ => (rng.random_range(150..=1350 - bw), 900 - bh + overshoot),
                        }
                    } else {
                        (rng.random_range(180..=1320 - bw), rng.random_range(130..=870 - bh))
                    };
                    let (x, y) = (x.clamp(0, w - bw), y.clamp(0, h - bh));
                    let bbox =
                        BoundingBox::new(x as u32, y as u32, (x + bw) as u32, (y + bh) as u32).unwrap();
                    let mut f = FaceObservation::new(bbox, random_features(&mut rng));
                    f.score = Some(r);
                    f
                })
                .collect();
            let mut p = PictureRecord {
                picture_id: format!("layout-{i:05}"),
                burst_id: format!("burst-{i:05}"),
                width: LAYOUT_SIZE.0,
                height: LAYOUT_SIZE.1,
                faces,
                label: None,
            };
            p.label = Some(Label::from_good(layout_rule(&p)));
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::with_mirrors;

    #[test]
    fn layout_labels_survive_mirroring() {
        let pictures = layout_pictures(300, 8);
        for (i, q) in with_mirrors(&pictures).iter().enumerate() {
            assert_eq!(layout_rule(q), pictures[i / 4].label.unwrap().is_good(), "{}", q.picture_id);
        }
    }

    #[test]
    fn threshold_data_is_balanced_and_deterministic() {
        for kind in [ThresholdKind::Baseline, ThresholdKind::Heuristic] {
            let cfg = ThresholdDataConfig::new(kind, 500, 1);
            let a = threshold_pictures(&cfg);
            assert_eq!(a, threshold_pictures(&cfg));
            let good = a.iter().filter(|p| p.label == Some(Label::Good)).count();
            assert!((100..=400).contains(&good), "{kind:?}: {good} good of 500");
            assert!(a.iter().all(|p| respects_margin(p, &cfg.hidden, cfg.margin)));
            assert!(a.iter().all(|p| p.faces.iter().all(|f| f.bbox.fits_within(p.width, p.height))));
        }
    }

    #[test]
    fn face_set_noise_rate() {
        let faces = face_feature_set(2000, 0.1, 3);
        let flipped = faces
            .iter()
            .filter(|f| f.label.unwrap().is_good() != face_rule(&f.features))
            .count();
        assert!((140..=260).contains(&flipped), "{flipped}");
        let good = faces.iter().filter(|f| f.label.unwrap().is_good()).count();
        assert!((400..=1200).contains(&good), "{good}");
        assert_eq!(face_feature_set(0, 0.1, 3), vec![]);
    }

    #[test]
    fn layout_data() {
        let pics = layout_pictures(400, 2);
        let good = pics.iter().filter(|p| p.label == Some(Label::Good)).count();
        assert!((140..=260).contains(&good), "{good}");
        for p in &pics {
            assert!(p.faces.iter().all(|f| f.bbox.fits_within(p.width, p.height)));
            assert!((1..=4).contains(&p.faces.len()));
        }
    }
}
