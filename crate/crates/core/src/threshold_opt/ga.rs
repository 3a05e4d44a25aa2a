use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{rank, FitnessReport, GenerationStats, OptError, Prepared, ThresholdKind, ThresholdSet};
use crate::model::PictureRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub mutation_sigma: f64,
    pub elitism_count: usize,
    pub tournament_size: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 64,
            generations: 100,
            crossover_rate: 0.9,
            mutation_rate: 0.1,
            mutation_sigma: 0.05,
            elitism_count: 2,
            tournament_size: 3,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        let fail = |m: String| Err(OptError::Config(m));
        if self.population_size < 2 {
            return fail(format!("population_size {} < 2", self.population_size));
        }
        if self.elitism_count >= self.population_size {
            return fail(format!(
                "elitism_count {} must be below population_size {}",
                self.elitism_count, self.population_size
            ));
        }
        if self.tournament_size == 0 {
            return fail("tournament_size must be positive".into());
        }
        for (name, v) in [("crossover_rate", self.crossover_rate), ("mutation_rate", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return fail(format!("mutation_sigma {} must be finite and non-negative", self.mutation_sigma));
        }
        Ok(())
    }
}

/// Clamps every gene to `[0, 1]` and orders each min/max pair. Equal pairs are
/// pulled apart by 1e-9 so the strict gates stay satisfiable.
pub fn repair(genome: &mut [f64]) {
    for v in genome.iter_mut() {
        *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    }
    for pair in genome[..6].chunks_exact_mut(2) {
        if pair[0] > pair[1] {
            pair.swap(0, 1);
        }
        if pair[0] == pair[1] {
            if pair[1] < 1.0 {
                pair[1] = (pair[1] + 1e-9).min(1.0);
            } else {
                pair[0] -= 1e-9;
            }
        }
    }
}

pub fn ga_optimize(
    train: &[PictureRecord],
    kind: ThresholdKind,
    config: &GaConfig,
) -> Result<FitnessReport, OptError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let population = (0..config.population_size)
        .map(|_| {
            let mut g: Vec<f64> = (0..kind.genome_len()).map(|_| rng.random::<f64>()).collect();
            repair(&mut g);
            g
        })
        .collect();
    evolve(train, kind, config, population, rng)
}

/// Runs the GA from a caller-supplied initial population (repaired before use).
pub fn ga_optimize_with_population(
    train: &[PictureRecord],
    kind: ThresholdKind,
    config: &GaConfig,
    population: Vec<Vec<f64>>,
) -> Result<FitnessReport, OptError> {
    config.validate()?;
    if population.len() != config.population_size {
        return Err(OptError::Config(format!(
            "initial population has {} genomes, expected {}",
            population.len(),
            config.population_size
        )));
    }
    if let Some(g) = population.iter().find(|g| g.len() != kind.genome_len()) {
        return Err(OptError::Config(format!(
            "genome of length {} for a {}-threshold kind",
            g.len(),
            kind.genome_len()
        )));
    }
    let population = population
        .into_iter()
        .map(|mut g| {
            repair(&mut g);
            g
        })
        .collect();
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    evolve(train, kind, config, population, rng)
}

fn evolve(
    train: &[PictureRecord],
    kind: ThresholdKind,
    config: &GaConfig,
    mut population: Vec<Vec<f64>>,
    mut rng: ChaCha8Rng,
) -> Result<FitnessReport, OptError> {
    let data = Prepared::new(train, kind)?;
    let normal = Normal::new(0.0, config.mutation_sigma).expect("validated sigma");
    let mut evaluations = 0u64;
    let mut curve = Vec::with_capacity(config.generations + 1);
    let mut best: Option<(f64, Vec<f64>)> = None;

    for generation in 0..=config.generations {
        let mut scored: Vec<(f64, Vec<f64>)> = population
            .drain(..)
            .map(|g| (data.accuracy(&g), g))
            .collect();
        evaluations += scored.len() as u64;
        scored.sort_by(|a, b| rank((a.0, &a.1), (b.0, &b.1)));

        let mean = scored.iter().map(|s| s.0).sum::<f64>() / scored.len() as f64;
        curve.push(GenerationStats {
            generation,
            best: scored[0].0,
            mean,
        });
        let improves = match &best {
            None => true,
            Some((acc, g)) => rank((scored[0].0, &scored[0].1), (*acc, g)).is_lt(),
        };
        if improves {
            best = Some(scored[0].clone());
        }
        if generation == config.generations {
            break;
        }

        population = scored[..config.elitism_count].iter().map(|s| s.1.clone()).collect();
        while population.len() < config.population_size {
            let a = tournament(&scored, config.tournament_size, &mut rng);
            let b = tournament(&scored, config.tournament_size, &mut rng);
            let mut child = if rng.random::<f64>() < config.crossover_rate {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| if rng.random::<bool>() { *x } else { *y })
                    .collect()
            } else {
                a.clone()
            };
            for gene in child.iter_mut() {
                if rng.random::<f64>() < config.mutation_rate {
                    *gene += normal.sample(&mut rng);
                }
            }
            repair(&mut child);
            population.push(child);
        }
    }

    let (best_accuracy, genome) = best.expect("at least one generation");
    Ok(FitnessReport {
        best_thresholds: ThresholdSet::from_genome(kind, &genome),
        best_accuracy,
        curve,
        evaluations,
    })
}

/// `scored` is sorted best-first, so the smallest drawn index wins.
fn tournament<'a>(scored: &'a [(f64, Vec<f64>)], k: usize, rng: &mut ChaCha8Rng) -> &'a Vec<f64> {
    let winner = (0..k).map(|_| rng.random_range(0..scored.len())).min().unwrap();
    &scored[winner].1
}
