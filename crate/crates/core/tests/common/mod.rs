//! Helpers shared by the integration tests: random models and databases,
//! and brute-force reference implementations.

#![allow(dead_code)]

use elicit::model::{DecisionModel, History, Outcome, Strategy};
use elicit::utility::{UtilityDatabase, UtilityFunction};
use rand::Rng;

pub fn random_model(
    rng: &mut impl Rng,
    outcomes: usize,
    strategies: usize,
    histories: usize,
) -> DecisionModel {
    let outcome_list = (0..outcomes)
        .map(|id| Outcome {
            id,
            label: format!("o{id}"),
            question_text: format!("outcome {id}"),
        })
        .collect();
    let mut priors: Vec<f64> = (0..histories).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = priors.iter().sum();
    priors.iter_mut().for_each(|p| *p /= total);
    let history_list = priors
        .iter()
        .enumerate()
        .map(|(id, &prior)| History {
            id,
            label: format!("h{id}"),
            prior,
        })
        .collect();
    let strategy_list = (0..strategies)
        .map(|id| Strategy {
            id,
            label: format!("s{id}"),
            description: String::new(),
        })
        .collect();
    let prob = (0..strategies)
        .map(|_| {
            (0..histories)
                .map(|_| {
                    let mut row: Vec<f64> = (0..outcomes)
                        .map(|_| {
                            if rng.gen_bool(0.2) {
                                0.0
                            } else {
                                rng.gen_range(0.0..1.0)
                            }
                        })
                        .collect();
                    row[rng.gen_range(0..outcomes)] += 0.1;
                    let s: f64 = row.iter().sum();
                    row.iter().map(|p| p / s).collect()
                })
                .collect()
        })
        .collect();
    DecisionModel::new(
        outcome_list,
        history_list,
        strategy_list,
        prob,
        0,
        outcomes - 1,
    )
    .unwrap()
}

pub fn random_utility(rng: &mut impl Rng, outcomes: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..outcomes).map(|_| rng.gen_range(0.0..=1.0)).collect();
    u[0] = 1.0;
    u[outcomes - 1] = 0.0;
    u
}

pub fn random_db(rng: &mut impl Rng, n: usize, outcomes: usize) -> UtilityDatabase {
    let functions = (0..n)
        .map(|i| {
            UtilityFunction::new(
                format!("f{i:02}"),
                random_utility(rng, outcomes),
                0,
                outcomes - 1,
            )
            .unwrap()
        })
        .collect();
    UtilityDatabase::new(functions, outcomes).unwrap()
}

/// Strategy maximizing expected utility by a direct loop; first maximum wins.
pub fn brute_best(model: &DecisionModel, u: &[f64], h: usize) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for s in 0..model.strategies().len() {
        let eu: f64 = (0..u.len())
            .map(|o| model.distribution(s, h)[o] * u[o])
            .sum();
        if eu > best.1 {
            best = (s, eu);
        }
    }
    best
}

pub fn brute_loss(model: &DecisionModel, truth: &[f64], proto: &[f64], h: usize) -> f64 {
    let eu = |s: usize| -> f64 {
        (0..truth.len())
            .map(|o| model.distribution(s, h)[o] * truth[o])
            .sum()
    };
    let (own, _) = brute_best(model, truth, h);
    let (theirs, _) = brute_best(model, proto, h);
    eu(own) - eu(theirs)
}

pub fn brute_distance(model: &DecisionModel, a: &[f64], b: &[f64], h: usize) -> f64 {
    (brute_loss(model, a, b, h) + brute_loss(model, b, a, h)) / 2.0
}
