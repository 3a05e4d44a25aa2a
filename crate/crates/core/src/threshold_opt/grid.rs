use super::{FitnessReport, OptError, Prepared, ThresholdKind, ThresholdSet};
use crate::model::PictureRecord;

pub const MAX_GRID_POINTS: u64 = 10_000_000;

/// Exhaustive search over `steps_per_axis` evenly spaced values in `[0, 1]`
/// per threshold. Genomes are visited in lexicographic order and only a
/// strictly better accuracy replaces the incumbent. Genomes are not repaired,
/// so grid points with `min >= max` simply fail their gate.
pub fn grid_search_oracle(
    train: &[PictureRecord],
    kind: ThresholdKind,
    steps_per_axis: usize,
) -> Result<FitnessReport, OptError> {
    let dims = kind.genome_len();
    let too_large = OptError::GridTooLarge {
        steps: steps_per_axis,
        dims,
        limit: MAX_GRID_POINTS,
    };
    let total = (steps_per_axis as u64)
        .checked_pow(dims as u32)
        .filter(|&n| n <= MAX_GRID_POINTS)
        .ok_or(too_large)?;
    if steps_per_axis < 2 {
        return Err(OptError::Config(format!("steps_per_axis {steps_per_axis} < 2")));
    }
    let data = Prepared::new(train, kind)?;
    let axis: Vec<f64> = (0..steps_per_axis)
        .map(|i| i as f64 / (steps_per_axis - 1) as f64)
        .collect();

    let mut idx = vec![0usize; dims];
    let mut genome = vec![0.0; dims];
    let mut best = (f64::NEG_INFINITY, genome.clone());
    for _ in 0..total {
        for (g, &i) in genome.iter_mut().zip(&idx) {
            *g = axis[i];
        }
        let acc = data.accuracy(&genome);
        if acc > best.0 {
            best = (acc, genome.clone());
        }
        for d in (0..dims).rev() {
            idx[d] += 1;
            if idx[d] < steps_per_axis {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(FitnessReport {
        best_thresholds: ThresholdSet::from_genome(kind, &best.1),
        best_accuracy: best.0,
        curve: Vec::new(),
        evaluations: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{threshold_pictures, ThresholdDataConfig};
    use crate::threshold_opt::accuracy;

    #[test]
    fn evaluation_count() {
        let pics = threshold_pictures(&ThresholdDataConfig::new(ThresholdKind::Baseline, 20, 1));
        let r = grid_search_oracle(&pics, ThresholdKind::Baseline, 5).unwrap();
        assert_eq!(r.evaluations, 15_625);
        assert_eq!(accuracy(&r.best_thresholds, &pics).unwrap(), r.best_accuracy);
    }

    #[test]
    fn refuses_huge_grids() {
        let pics = threshold_pictures(&ThresholdDataConfig::new(ThresholdKind::Heuristic, 5, 1));
        // 8^8 = 16.7M
        assert!(matches!(
            grid_search_oracle(&pics, ThresholdKind::Heuristic, 8),
            Err(OptError::GridTooLarge { .. })
        ));
        assert!(grid_search_oracle(&pics, ThresholdKind::Heuristic, 7).is_ok());
    }

    #[test]
    fn single_picture_is_all_or_nothing() {
        let pics = threshold_pictures(&ThresholdDataConfig::new(ThresholdKind::Baseline, 1, 9));
        let r = grid_search_oracle(&pics, ThresholdKind::Baseline, 3).unwrap();
        assert!(r.best_accuracy == 0.0 || r.best_accuracy == 1.0);
    }

    #[test]
    fn first_best_in_lexicographic_order() {
        // every picture bad: the all-zero genome (first visited) already scores 1
        let mut pics = threshold_pictures(&ThresholdDataConfig::new(ThresholdKind::Baseline, 30, 2));
        for p in &mut pics {
            p.label = Some(crate::model::Label::Bad);
        }
        let r = grid_search_oracle(&pics, ThresholdKind::Baseline, 4).unwrap();
        assert_eq!(r.best_accuracy, 1.0);
        assert_eq!(r.best_thresholds.genome(), vec![0.0; 6]);
    }
}
