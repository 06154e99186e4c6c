//! Real-coded genetic algorithm over Givens-angle genotypes.
//!
//! Operators: linear-rank selection, whole-arithmetic crossover of parent
//! pairs, and uniform random mutation that redraws one gene of a selected
//! individual within the angle bounds. The best `elitism_count` individuals
//! survive unchanged, so the best fitness never decreases between
//! generations.
//!
//! With [`GaConfig::informed_start`] one member of the initial population
//! spans the leading eigenvectors of the mixture's between-component scatter
//! `sum_g tau_g (mu_g - mu)(mu_g - mu)^T`; the rest are uniform random.
//!
//! All random draws come from one sequential stream seeded by
//! [`GaConfig::seed`]. Fitness evaluations run in parallel but are pure, so
//! results do not depend on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{angles_from_basis, basis_from_angles, n_angles, AngleGenotype, ProjectionBasis, ANGLE_BOUND};
use super::entropy::{negentropy_parts, EntropyMethod};
use crate::error::{Error, Result};
use crate::linalg::sorted_eigen;
use crate::mixture::MixtureModel;

const IMPROVEMENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Stop after this many generations without a best-fitness gain above 1e-6.
    pub stagnation_generations: usize,
    pub crossover_rate: f64,
    /// Probability that an individual has one gene redrawn.
    pub mutation_rate: f64,
    pub elitism_count: usize,
    pub seed: u64,
    /// Seed the initial population with the between-component scatter basis.
    pub informed_start: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            max_generations: 200,
            stagnation_generations: 50,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            elitism_count: 2,
            seed: 0,
            informed_start: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let rates_ok = (0.0..=1.0).contains(&self.crossover_rate) && (0.0..=1.0).contains(&self.mutation_rate);
        if !rates_ok {
            return Err(Error::contract("GA rates must lie in [0, 1]"));
        }
        if self.population_size == 0 || self.max_generations == 0 || self.stagnation_generations == 0 {
            return Err(Error::contract("GA sizes must be at least 1"));
        }
        if self.elitism_count > self.population_size {
            return Err(Error::contract("elitism_count exceeds population_size"));
        }
        Ok(())
    }
}

/// Outcome of a projection-pursuit run.
#[derive(Debug, Clone)]
pub struct PpResult {
    /// Best basis found, sign-canonicalised.
    pub basis: ProjectionBasis,
    pub negentropy: f64,
    pub entropy: f64,
    pub gaussian_entropy: f64,
    pub generations_run: usize,
    /// Best fitness of each generation.
    pub history: Vec<f64>,
}

/// JSON form of a [`PpResult`]; `basis` is written as an array of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpDocument {
    pub basis: Vec<Vec<f64>>,
    pub negentropy: f64,
    pub entropy: f64,
    pub gaussian_entropy: f64,
    pub generations_run: usize,
    pub history: Vec<f64>,
}

impl PpDocument {
    pub fn from_result(r: &PpResult) -> Self {
        Self {
            basis: r
                .basis
                .matrix()
                .row_iter()
                .map(|row| row.iter().copied().collect())
                .collect(),
            negentropy: r.negentropy,
            entropy: r.entropy,
            gaussian_entropy: r.gaussian_entropy,
            generations_run: r.generations_run,
            history: r.history.clone(),
        }
    }

    pub fn basis(&self) -> Result<ProjectionBasis> {
        let p = self.basis.len();
        let d = self.basis.first().map_or(0, Vec::len);
        if p == 0 || self.basis.iter().any(|r| r.len() != d) {
            return Err(Error::contract("basis rows are ragged or empty"));
        }
        ProjectionBasis::new(DMatrix::from_fn(p, d, |i, j| self.basis[i][j]))
    }
}

struct Individual {
    genes: Vec<f64>,
    fitness: Option<f64>,
}

fn fitness(model: &MixtureModel, genes: &[f64], p: usize, d: usize) -> f64 {
    AngleGenotype::new(genes.to_vec())
        .and_then(|g| basis_from_angles(&g, p, d))
        .and_then(|b| negentropy_parts(model, &b, EntropyMethod::Unscented))
        .map(|parts| parts.negentropy)
        .ok()
        .filter(|v| v.is_finite())
        .unwrap_or(f64::NEG_INFINITY)
}

fn evaluate(pop: &mut [Individual], model: &MixtureModel, p: usize, d: usize) {
    pop.par_iter_mut()
        .filter(|ind| ind.fitness.is_none())
        .for_each(|ind| ind.fitness = Some(fitness(model, &ind.genes, p, d)));
}

fn fit_of(ind: &Individual) -> f64 {
    ind.fitness.unwrap_or(f64::NEG_INFINITY)
}

/// Indices sorted best-first; ties keep population order.
fn ranking(pop: &[Individual]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).collect();
    idx.sort_by(|&a, &b| fit_of(&pop[b]).total_cmp(&fit_of(&pop[a])));
    idx
}

/// The `d` leading eigenvectors of the between-component scatter of `model`.
pub fn between_scatter_basis(model: &MixtureModel, d: usize) -> Result<ProjectionBasis> {
    let p = model.dim();
    if d == 0 || d > p {
        return Err(Error::contract(format!("basis dimension must satisfy 1 <= d <= p, got d={d}, p={p}")));
    }
    let mut centre = nalgebra::DVector::zeros(p);
    for (w, mu) in model.weights().iter().zip(model.means()) {
        centre += mu * *w;
    }
    let mut scatter = DMatrix::zeros(p, p);
    for (w, mu) in model.weights().iter().zip(model.means()) {
        let dev = mu - &centre;
        scatter += &dev * dev.transpose() * *w;
    }
    let (_, vectors) = sorted_eigen(&scatter);
    let leading = vectors.columns(0, d).into_owned();
    // re-orthonormalise against eigen-solver round-off
    ProjectionBasis::new(leading.qr().q())
}

/// Maximise UT negentropy of the projection of `model` over `p x d` bases.
pub fn ga_optimize(model: &MixtureModel, d: usize, config: &GaConfig) -> Result<PpResult> {
    ga_optimize_with(model, d, config, &[])
}

/// As [`ga_optimize`], with extra genotypes placed in the initial
/// population ahead of the random ones.
pub fn ga_optimize_with(
    model: &MixtureModel,
    d: usize,
    config: &GaConfig,
    suggestions: &[AngleGenotype],
) -> Result<PpResult> {
    config.validate()?;
    let p = model.dim();
    if d == 0 || d >= p {
        return Err(Error::contract(format!("projection dimension must satisfy 1 <= d < p, got d={d}, p={p}")));
    }
    let n_genes = n_angles(p, d);
    if let Some(bad) = suggestions.iter().find(|s| s.angles().len() != n_genes) {
        return Err(Error::DimensionMismatch { expected: n_genes, found: bad.angles().len() });
    }
    let size = config.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let informed = match config.informed_start {
        true => vec![angles_from_basis(&between_scatter_basis(model, d)?)],
        false => Vec::new(),
    };
    let mut pop: Vec<Individual> = informed
        .iter()
        .chain(suggestions)
        .take(size)
        .map(|s| Individual { genes: s.angles().to_vec(), fitness: None })
        .collect();
    while pop.len() < size {
        let genes = (0..n_genes)
            .map(|_| rng.random_range(-ANGLE_BOUND..=ANGLE_BOUND))
            .collect();
        pop.push(Individual { genes, fitness: None });
    }
    evaluate(&mut pop, model, p, d);

    // linear ranking: P(rank r) = 2/N - 2(r-1)/(N(N-1)), r = 1..N
    let nf = size as f64;
    let rank_probs: Vec<f64> = (0..size)
        .map(|r| {
            if size == 1 {
                1.0
            } else {
                2.0 / nf - 2.0 * r as f64 / (nf * (nf - 1.0))
            }
        })
        .collect();

    let mut history = Vec::new();
    let mut best_seen = f64::NEG_INFINITY;
    let mut stale = 0;
    loop {
        let order = ranking(&pop);
        let best = fit_of(&pop[order[0]]);
        history.push(best);
        if best > best_seen + IMPROVEMENT_TOL {
            best_seen = best;
            stale = 0;
        } else {
            stale += 1;
        }
        if history.len() >= config.max_generations || stale >= config.stagnation_generations {
            break;
        }

        let elites: Vec<(Vec<f64>, Option<f64>)> = order
            .iter()
            .take(config.elitism_count)
            .map(|&i| (pop[i].genes.clone(), pop[i].fitness))
            .collect();

        let mut next: Vec<Individual> = (0..size)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = order[size - 1];
                for (r, prob) in rank_probs.iter().enumerate() {
                    acc += prob;
                    if u < acc {
                        pick = order[r];
                        break;
                    }
                }
                Individual { genes: pop[pick].genes.clone(), fitness: pop[pick].fitness }
            })
            .collect();

        for pair in next.chunks_mut(2) {
            if pair.len() < 2 || rng.random::<f64>() >= config.crossover_rate {
                continue;
            }
            let a: f64 = rng.random();
            let (left, right) = pair.split_at_mut(1);
            let (x, y) = (&mut left[0], &mut right[0]);
            for (gx, gy) in x.genes.iter_mut().zip(y.genes.iter_mut()) {
                let (u, v) = (*gx, *gy);
                *gx = (a * u + (1.0 - a) * v).clamp(-ANGLE_BOUND, ANGLE_BOUND);
                *gy = (a * v + (1.0 - a) * u).clamp(-ANGLE_BOUND, ANGLE_BOUND);
            }
            x.fitness = None;
            y.fitness = None;
        }

        for ind in next.iter_mut() {
            if rng.random::<f64>() < config.mutation_rate {
                let j = rng.random_range(0..n_genes);
                ind.genes[j] = rng.random_range(-ANGLE_BOUND..=ANGLE_BOUND);
                ind.fitness = None;
            }
        }

        evaluate(&mut next, model, p, d);
        let worst_first: Vec<usize> = ranking(&next).into_iter().rev().collect();
        for ((genes, fitness), &slot) in elites.into_iter().zip(&worst_first) {
            next[slot] = Individual { genes, fitness };
        }
        pop = next;
    }

    let order = ranking(&pop);
    let champion = &pop[order[0]];
    let basis = basis_from_angles(&AngleGenotype::new(champion.genes.clone())?, p, d)?.canonicalized();
    let parts = negentropy_parts(model, &basis, EntropyMethod::Unscented)?;
    Ok(PpResult {
        basis,
        negentropy: parts.negentropy,
        entropy: parts.entropy,
        gaussian_entropy: parts.gaussian_entropy,
        generations_run: history.len(),
        history,
    })
}
