use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::acquisition::{acquisition_score, Acquisition, KAPPA};
use super::gp::GaussianProcess;
use super::hedge::HedgeState;
use super::space::{Config, ConfigurationSpace};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;

/// Where a history entry's configuration came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    #[serde(rename = "initial")]
    Initial,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "EI")]
    Ei,
    #[serde(rename = "LCB")]
    Lcb,
    #[serde(rename = "PI")]
    Pi,
}

impl From<Acquisition> for Source {
    fn from(a: Acquisition) -> Self {
        match a {
            Acquisition::Ei => Source::Ei,
            Acquisition::Lcb => Source::Lcb,
            Acquisition::Pi => Source::Pi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub iteration: usize,
    pub config: Config,
    pub objective: f64,
    pub acquisition: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeOptions {
    /// Configurations evaluated before any random draw.
    pub initial: Vec<Config>,
    /// Defaults to `max(5, number of dimensions)`.
    pub n_init: Option<usize>,
    pub kappa: f64,
    pub eta: f64,
    pub n_candidates: usize,
    pub n_perturbations: usize,
    /// Standard deviation of the perturbations, in encoded units.
    pub perturbation_scale: f64,
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            initial: Vec::new(),
            n_init: None,
            kappa: KAPPA,
            eta: 1.0,
            n_candidates: 500,
            n_perturbations: 20,
            perturbation_scale: 0.1,
            deadline: None,
        }
    }
}

impl OptimizeOptions {
    pub fn with_initial(mut self, cfg: Config) -> Self {
        self.initial.push(cfg);
        self
    }

    pub fn with_deadline(mut self, deadline: Option<Instant>) -> Self {
        self.deadline = deadline;
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: Config,
    pub best_value: f64,
    pub best_iteration: usize,
    pub history: Vec<Observation>,
    pub hedge: HedgeState,
}

/// The three per-acquisition proposals of one hedge step and the one drawn.
#[derive(Debug, Clone)]
pub struct HedgeProposal {
    pub proposals: [Config; 3],
    pub encoded: [Vec<f64>; 3],
    pub chosen: Acquisition,
}

impl HedgeProposal {
    pub fn chosen_index(&self) -> usize {
        Acquisition::ALL.iter().position(|&a| a == self.chosen).unwrap_or(0)
    }
}

/// Minimizes each acquisition over a shared candidate pool, then draws one
/// proposal with probability `softmax(eta * gains)`.
#[allow(clippy::too_many_arguments)]
pub fn hedge_step<R: Rng + ?Sized>(
    gp: &GaussianProcess<f64>,
    hedge: &HedgeState,
    space: &ConfigurationSpace,
    best_encoded: &[f64],
    best_value: f64,
    observed: &[Vec<f64>],
    opts: &OptimizeOptions,
    rng: &mut R,
) -> Result<HedgeProposal> {
    let mut pool: Vec<(Config, Vec<f64>)> = Vec::with_capacity(opts.n_candidates + opts.n_perturbations);
    for _ in 0..opts.n_candidates {
        let c = space.sample(rng);
        let e = space.encode(&c)?;
        pool.push((c, e));
    }
    for _ in 0..opts.n_perturbations {
        let u: Vec<f64> = best_encoded
            .iter()
            .map(|&b| b + opts.perturbation_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let c = space.decode(&u)?;
        let e = space.encode(&c)?;
        pool.push((c, e));
    }
    let seen = |e: &[f64]| observed.iter().any(|o| o.iter().zip(e).all(|(a, b)| (a - b).abs() <= 1e-12));
    let fresh: Vec<usize> = (0..pool.len()).filter(|&i| !seen(&pool[i].1)).collect();
    let candidates: Vec<usize> = if fresh.is_empty() { (0..pool.len()).collect() } else { fresh };

    let post: Vec<(f64, f64)> = candidates
        .iter()
        .map(|&i| gp.posterior(&pool[i].1))
        .collect::<Result<_>>()?;
    let pick = |kind: Acquisition| {
        let mut best = 0;
        let mut best_score = f64::INFINITY;
        for (j, &(m, s)) in post.iter().enumerate() {
            let v = acquisition_score(kind, m, s, best_value, opts.kappa);
            if v < best_score {
                best_score = v;
                best = j;
            }
        }
        candidates[best]
    };
    let idx = [pick(Acquisition::Ei), pick(Acquisition::Lcb), pick(Acquisition::Pi)];
    let chosen = hedge.choose(rng);
    Ok(HedgeProposal {
        proposals: idx.map(|i| pool[i].0.clone()),
        encoded: idx.map(|i| pool[i].1.clone()),
        chosen,
    })
}

/// Sequential Bayesian optimization with a GP-Hedge acquisition portfolio.
///
/// Evaluates `opts.initial` first, then random draws up to the initial
/// design size, then hedge proposals. Objective errors and non-finite values
/// are recorded with the worst value seen so far (1 if nothing finite has
/// been seen). Stops early once `opts.deadline` passes, after at least one
/// evaluation.
pub fn optimize<O>(space: &ConfigurationSpace, mut objective: O, budget: usize, seed: u64, opts: &OptimizeOptions) -> Result<OptimizeResult>
where
    O: FnMut(&Config) -> Result<f64>,
{
    if budget == 0 {
        return Err(invalid("optimization budget must be at least 1"));
    }
    for c in &opts.initial {
        space.encode(c)?;
    }
    let n_init = opts.n_init.unwrap_or_else(|| space.len().max(5)).max(opts.initial.len()).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hedge = HedgeState {
        gains: [0.0; 3],
        eta: opts.eta,
    };
    let mut history: Vec<Observation> = Vec::with_capacity(budget);
    let mut encoded: Vec<Vec<f64>> = Vec::with_capacity(budget);
    let mut gp: Option<GaussianProcess<f64>> = None;
    let mut pending: Option<HedgeProposal> = None;

    for it in 0..budget {
        if it > 0 && opts.deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        let (cfg, source) = if it < opts.initial.len() {
            (opts.initial[it].clone(), Source::Initial)
        } else if it < n_init {
            (space.sample(&mut rng), Source::Random)
        } else {
            let g = gp.as_ref().expect("GP is fitted after the initial design");
            let (bi, bv) = best_of(&history);
            let p = hedge_step(g, &hedge, space, &encoded[bi], bv, &encoded, opts, &mut rng)?;
            let cfg = p.proposals[p.chosen_index()].clone();
            let src = Source::from(p.chosen);
            pending = Some(p);
            (cfg, src)
        };

        let worst = history
            .iter()
            .filter(|o| o.error.is_none())
            .map(|o| o.objective)
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .unwrap_or(1.0);
        let (value, error) = match objective(&cfg) {
            Ok(v) if v.is_finite() => (v, None),
            Ok(v) => (worst, Some(format!("objective returned {v}"))),
            Err(e) => (worst, Some(e.to_string())),
        };
        encoded.push(space.encode(&cfg)?);
        history.push(Observation {
            iteration: it,
            config: cfg,
            objective: value,
            acquisition: source,
            error,
        });

        if it + 1 >= n_init && it + 1 < budget {
            let x = Matrix::from_rows(&encoded)?;
            let y: Vec<f64> = history.iter().map(|o| o.objective).collect();
            let refit = GaussianProcess::fit(&x, &y)?;
            if let Some(p) = pending.take() {
                let mut mu = [0.0; 3];
                for (m, e) in mu.iter_mut().zip(&p.encoded) {
                    *m = refit.posterior(e)?.0;
                }
                hedge.reward(mu);
            }
            gp = Some(refit);
        }
    }
    let (bi, bv) = best_of(&history);
    Ok(OptimizeResult {
        best: history[bi].config.clone(),
        best_value: bv,
        best_iteration: bi,
        history,
        hedge,
    })
}

/// Index and value of the lowest objective; earliest wins ties.
fn best_of(history: &[Observation]) -> (usize, f64) {
    let mut bi = 0;
    for (i, o) in history.iter().enumerate() {
        if o.objective < history[bi].objective {
            bi = i;
        }
    }
    (bi, history[bi].objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesopt::space::{Dimension, Value};
    use crate::error::Error;

    fn unit() -> ConfigurationSpace {
        ConfigurationSpace::new(vec![Dimension::real("x", 0.0, 1.0)]).unwrap()
    }

    fn quad(c: &Config) -> Result<f64> {
        let x = c[0].as_f64().unwrap();
        Ok((x - 0.3) * (x - 0.3))
    }

    #[test]
    fn budget_one_is_a_single_draw() {
        let r = optimize(&unit(), quad, 1, 3, &OptimizeOptions::default()).unwrap();
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.history[0].acquisition, Source::Random);
        assert_eq!(r.best, r.history[0].config);
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(optimize(&unit(), quad, 0, 3, &OptimizeOptions::default()).is_err());
    }

    #[test]
    fn deterministic_and_prefix_consistent() {
        let o = OptimizeOptions::default();
        let a = optimize(&unit(), quad, 12, 9, &o).unwrap();
        let b = optimize(&unit(), quad, 12, 9, &o).unwrap();
        assert_eq!(a.history, b.history);
        let c = optimize(&unit(), quad, 8, 9, &o).unwrap();
        assert_eq!(&a.history[..8], &c.history[..]);
    }

    #[test]
    fn initial_configs_come_first() {
        let o = OptimizeOptions::default().with_initial(vec![Value::Real(0.9)]);
        let r = optimize(&unit(), quad, 6, 1, &o).unwrap();
        assert_eq!(r.history[0].config, vec![Value::Real(0.9)]);
        assert_eq!(r.history[0].acquisition, Source::Initial);
        assert!(r.history[1..5].iter().all(|h| h.acquisition == Source::Random));
        assert_ne!(r.history[5].acquisition, Source::Random);
    }

    #[test]
    fn failures_get_worst_penalty() {
        let mut calls = 0;
        let obj = |c: &Config| {
            calls += 1;
            if calls == 3 {
                Err(Error::InvalidArgument("boom".into()))
            } else if calls == 4 {
                Ok(f64::NAN)
            } else {
                quad(c)
            }
        };
        let r = optimize(&unit(), obj, 8, 4, &OptimizeOptions::default()).unwrap();
        assert_eq!(r.history.len(), 8);
        let worst = r.history[0].objective.max(r.history[1].objective);
        assert_eq!(r.history[2].objective, worst);
        assert_eq!(r.history[3].objective, worst);
        assert!(r.history[2].error.as_deref().unwrap().contains("boom"));
    }

    #[test]
    fn first_failure_scores_one() {
        let r = optimize(&unit(), |_: &Config| Err(Error::EmptyTable), 2, 1, &OptimizeOptions::default()).unwrap();
        assert!(r.history.iter().all(|o| o.objective == 1.0));
    }

    #[test]
    fn quadratic_converges_for_most_seeds() {
        let hits = (0..10)
            .filter(|&s| {
                let r = optimize(&unit(), quad, 25, s, &OptimizeOptions::default()).unwrap();
                (r.best[0].as_f64().unwrap() - 0.3).abs() < 0.05
            })
            .count();
        assert!(hits >= 9, "{hits}");
    }

    #[test]
    fn mixed_space_stays_in_bounds() {
        let s = ConfigurationSpace::new(vec![
            Dimension::integer("k", 1, 15),
            Dimension::categorical("c", &["a", "b", "c"]),
            Dimension::boolean("f"),
            Dimension::log_real("r", 1e-3, 10.0),
        ])
        .unwrap();
        let obj = |c: &Config| {
            let k = c[0].as_i64().unwrap() as f64;
            Ok((k - 5.0).abs() / 15.0 + if c[1].as_str() == Some("b") { 0.0 } else { 0.5 })
        };
        let r = optimize(&s, obj, 20, 2, &OptimizeOptions::default()).unwrap();
        assert_eq!(r.history.len(), 20);
        assert!(r.history.iter().all(|o| s.contains(&o.config)));
        assert!(r.hedge.is_finite());
    }

    #[test]
    fn history_json_shape() {
        let r = optimize(&unit(), quad, 6, 1, &OptimizeOptions::default()).unwrap();
        let v = serde_json::to_value(&r.history[5]).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["acquisition", "config", "iteration", "objective"]);
    }
}
