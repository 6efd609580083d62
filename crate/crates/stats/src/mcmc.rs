//! Metropolis-within-Gibbs sampling of one cell's posterior.
//!
//! The two conjugate hyper-means are drawn exactly from their Gaussian full
//! conditionals; every other coordinate uses a random-walk Metropolis step
//! whose scale adapts toward 20–40% acceptance during burn-in and is frozen
//! afterwards. Chains are independent and deterministically seeded, so a
//! fit is bit-reproducible given `(seed, options)`.

use crate::error::StatsError;
use crate::model::{
    ln_gamma_pdf, ln_normal, ln_truncation_mass, log_likelihood, HyperConfig, HyperParameters,
    ModelParameters,
};
use crate::sample::LandmarkSampleMatrix;
use momenta_core::seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Names of the random-walk coordinates, in update order.
const COORD_NAMES: [&str; 13] = [
    "mu_x", "mu_y", "sigma_x", "sigma_y", "rho", "prec_x", "prec_y", "a_x", "b_x", "a_y", "b_y",
    "mu_rho", "prec_rho",
];

const ADAPT_WINDOW: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcOptions {
    pub chains: usize,
    /// Burn-in sweeps per chain (with scale adaptation).
    pub burn_in: usize,
    /// Total kept draws across all chains.
    pub draws: usize,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
}

impl Default for McmcOptions {
    fn default() -> Self {
        McmcOptions {
            chains: 4,
            burn_in: 5_000,
            draws: 20_000,
            thin: 4,
        }
    }
}

impl McmcOptions {
    pub fn kept_per_chain(&self) -> usize {
        self.draws.div_ceil(self.chains)
    }

    pub fn validate(&self) -> Result<(), StatsError> {
        if self.chains == 0 || self.thin == 0 || self.draws == 0 {
            return Err(StatsError::InvalidOption(
                "chains, thin and draws must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinateAcceptance {
    pub name: String,
    /// Post-burn-in acceptance rate, averaged over chains.
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainMeta {
    pub seed: u64,
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub kept_per_chain: usize,
    pub acceptance: Vec<CoordinateAcceptance>,
    pub warnings: Vec<String>,
}

/// Posterior draws of one cell, kept per chain.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    chains: Vec<Vec<ModelParameters>>,
    pub meta: ChainMeta,
}

impl PosteriorDraws {
    /// Wraps externally produced draws (simulation studies, tests).
    pub fn from_chains(chains: Vec<Vec<ModelParameters>>, seed: u64) -> Self {
        let kept_per_chain = chains.iter().map(Vec::len).max().unwrap_or(0);
        let meta = ChainMeta {
            seed,
            chains: chains.len(),
            burn_in: 0,
            thin: 1,
            kept_per_chain,
            acceptance: Vec::new(),
            warnings: Vec::new(),
        };
        PosteriorDraws { chains, meta }
    }

    pub fn chains(&self) -> &[Vec<ModelParameters>] {
        &self.chains
    }

    pub fn draws(&self) -> impl Iterator<Item = &ModelParameters> {
        self.chains.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Potential scale reduction of each θ component across chains, in the
    /// order (μx, μy, σx, σy, ρ).
    pub fn psrf_all(&self) -> [f64; 5] {
        let extract = |f: fn(&ModelParameters) -> f64| -> Vec<Vec<f64>> {
            self.chains
                .iter()
                .map(|c| c.iter().map(f).collect())
                .collect()
        };
        [
            psrf(&extract(|t| t.mu_x)),
            psrf(&extract(|t| t.mu_y)),
            psrf(&extract(|t| t.sigma_x)),
            psrf(&extract(|t| t.sigma_y)),
            psrf(&extract(|t| t.rho)),
        ]
    }
}

/// Gelman–Rubin potential scale reduction factor over scalar chains.
pub fn psrf(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    if m < 2 {
        return 1.0;
    }
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if n < 2 {
        return f64::NAN;
    }
    let means: Vec<f64> = chains
        .iter()
        .map(|c| c[..n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b_over_n =
        means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>() / (m as f64 - 1.0);
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| {
            c[..n].iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n as f64 - 1.0)
        })
        .sum::<f64>()
        / m as f64;
    if w <= 0.0 {
        return 1.0;
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    (var_plus / w).sqrt()
}

struct CellState {
    theta: ModelParameters,
    m_x: f64,
    p_x: f64,
    m_y: f64,
    p_y: f64,
    a_x: f64,
    b_x: f64,
    a_y: f64,
    b_y: f64,
    m_rho: f64,
    p_rho: f64,
    ll: f64,
}

impl CellState {
    fn hyper(&self) -> HyperParameters {
        HyperParameters {
            mu_x0: self.m_x,
            sigma_x0: 1.0 / self.p_x.sqrt(),
            mu_y0: self.m_y,
            sigma_y0: 1.0 / self.p_y.sqrt(),
            a_x: self.a_x,
            b_x: self.b_x,
            a_y: self.a_y,
            b_y: self.b_y,
            mu_rho: self.m_rho,
            sigma_rho: 1.0 / self.p_rho.sqrt(),
        }
    }
}

struct Moments {
    mean_x: f64,
    sd_x: f64,
    mean_y: f64,
    sd_y: f64,
    corr: f64,
}

fn moments(rows: &[[f64; 2]]) -> Moments {
    let n = rows.len() as f64;
    let mean_x = rows.iter().map(|r| r[0]).sum::<f64>() / n;
    let mean_y = rows.iter().map(|r| r[1]).sum::<f64>() / n;
    let var_x = rows.iter().map(|r| (r[0] - mean_x).powi(2)).sum::<f64>() / (n - 1.0);
    let var_y = rows.iter().map(|r| (r[1] - mean_y).powi(2)).sum::<f64>() / (n - 1.0);
    let cov = rows
        .iter()
        .map(|r| (r[0] - mean_x) * (r[1] - mean_y))
        .sum::<f64>()
        / (n - 1.0);
    let sd_x = var_x.sqrt();
    let sd_y = var_y.sqrt();
    let corr = if sd_x > 0.0 && sd_y > 0.0 {
        (cov / (sd_x * sd_y)).clamp(-0.95, 0.95)
    } else {
        0.0
    };
    Moments {
        mean_x,
        sd_x,
        mean_y,
        sd_y,
        corr,
    }
}

/// Samples the posterior of one cell.
pub fn fit_posterior(
    sample: &LandmarkSampleMatrix,
    hyper: &HyperConfig,
    opts: &McmcOptions,
    seed_value: u64,
) -> Result<PosteriorDraws, StatsError> {
    opts.validate()?;
    if sample.len() < 2 {
        return Err(StatsError::TooFewRows {
            got: sample.len(),
            need: 2,
        });
    }
    for (axis, name) in [(0usize, "x"), (1usize, "y")] {
        let first = sample.rows[0][axis];
        if sample.rows.iter().all(|r| r[axis] == first) {
            return Err(StatsError::DegenerateSample {
                landmark: sample.landmark,
                group: sample.group.to_string(),
                axis: name,
            });
        }
    }

    let kept_per_chain = opts.kept_per_chain();
    let results: Vec<(Vec<ModelParameters>, [f64; 13])> = (0..opts.chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = seed::stream(seed_value, &[0xc417, chain as u64]);
            run_chain(&sample.rows, hyper, opts, kept_per_chain, &mut rng)
        })
        .collect();

    let mut chains = Vec::with_capacity(opts.chains);
    let mut rate_sums = [0.0f64; 13];
    for (draws, rates) in results {
        chains.push(draws);
        for (sum, r) in rate_sums.iter_mut().zip(rates) {
            *sum += r;
        }
    }
    let acceptance: Vec<CoordinateAcceptance> = COORD_NAMES
        .iter()
        .zip(rate_sums)
        .map(|(name, sum)| CoordinateAcceptance {
            name: (*name).to_owned(),
            rate: sum / opts.chains as f64,
        })
        .collect();
    let warnings: Vec<String> = acceptance
        .iter()
        .filter(|c| c.rate < 0.05 || c.rate > 0.95)
        .map(|c| {
            format!(
                "acceptance rate {:.3} for {} outside [0.05, 0.95] after adaptation",
                c.rate, c.name
            )
        })
        .collect();

    Ok(PosteriorDraws {
        chains,
        meta: ChainMeta {
            seed: seed_value,
            chains: opts.chains,
            burn_in: opts.burn_in,
            thin: opts.thin,
            kept_per_chain,
            acceptance,
            warnings,
        },
    })
}

fn run_chain(
    rows: &[[f64; 2]],
    hyper: &HyperConfig,
    opts: &McmcOptions,
    kept: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<ModelParameters>, [f64; 13]) {
    let mm = moments(rows);
    let m = rows.len() as f64;
    let jitter = |rng: &mut ChaCha8Rng, scale: f64| -> f64 {
        scale * rng.sample::<f64, _>(StandardNormal)
    };

    let sd_x = mm.sd_x.max(1e-6);
    let sd_y = mm.sd_y.max(1e-6);
    let mut state = CellState {
        theta: ModelParameters {
            mu_x: mm.mean_x + jitter(rng, sd_x / m.sqrt()),
            mu_y: mm.mean_y + jitter(rng, sd_y / m.sqrt()),
            sigma_x: sd_x * (1.0 + 0.2 * rng.random::<f64>()),
            sigma_y: sd_y * (1.0 + 0.2 * rng.random::<f64>()),
            rho: (mm.corr + jitter(rng, 0.05)).clamp(-0.9, 0.9),
        },
        m_x: mm.mean_x,
        p_x: 0.5,
        m_y: mm.mean_y,
        p_y: 0.5,
        a_x: 0.25,
        b_x: 0.5,
        a_y: 0.25,
        b_y: 0.5,
        m_rho: 0.0,
        p_rho: 0.5,
        ll: 0.0,
    };
    state.ll = log_likelihood(rows, &state.theta);

    let mut scales = [
        sd_x / m.sqrt(),
        sd_y / m.sqrt(),
        0.3 * sd_x,
        0.3 * sd_y,
        0.15,
        0.15,
        0.15,
        0.08,
        0.15,
        0.08,
        0.15,
        0.4,
        0.15,
    ];
    let mut window_accepts = [0usize; 13];
    let mut window_count = 0usize;
    let mut post_accepts = [0usize; 13];
    let mut post_trials = [0usize; 13];

    let total_sweeps = opts.burn_in + kept * opts.thin;
    let mut draws = Vec::with_capacity(kept);

    for sweep in 0..total_sweeps {
        let adapting = sweep < opts.burn_in;
        let accepted = sweep_once(rows, hyper, &mut state, &scales, rng);

        for (i, acc) in accepted.iter().enumerate() {
            if adapting {
                if *acc {
                    window_accepts[i] += 1;
                }
            } else {
                post_trials[i] += 1;
                if *acc {
                    post_accepts[i] += 1;
                }
            }
        }
        if adapting {
            window_count += 1;
            if window_count == ADAPT_WINDOW {
                for i in 0..13 {
                    let rate = window_accepts[i] as f64 / ADAPT_WINDOW as f64;
                    scales[i] =
                        (scales[i] * (1.2 * (rate - 0.3)).exp()).clamp(1e-9, 1e6);
                    window_accepts[i] = 0;
                }
                window_count = 0;
            }
        } else {
            let post = sweep - opts.burn_in;
            if (post + 1).is_multiple_of(opts.thin) && draws.len() < kept {
                draws.push(state.theta);
            }
        }
    }

    let mut rates = [0.0f64; 13];
    for i in 0..13 {
        rates[i] = if post_trials[i] > 0 {
            post_accepts[i] as f64 / post_trials[i] as f64
        } else {
            f64::NAN
        };
    }
    (draws, rates)
}

/// One full sweep over all coordinates; returns per-coordinate acceptance.
fn sweep_once(
    rows: &[[f64; 2]],
    hyper: &HyperConfig,
    state: &mut CellState,
    scales: &[f64; 13],
    rng: &mut ChaCha8Rng,
) -> [bool; 13] {
    let mut accepted = [false; 13];
    let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

    // --- θ updates (likelihood-coupled random walks) ---
    // each proposes one component, keeping the cached log likelihood current
    {
        let propose_theta =
            |idx: usize,
             apply: &dyn Fn(&ModelParameters, f64) -> ModelParameters,
             prior: &dyn Fn(&CellState, &ModelParameters) -> f64,
             rng: &mut ChaCha8Rng,
             state: &mut CellState,
             accepted: &mut [bool; 13]| {
                let step = scales[idx] * normal(rng);
                let trial = apply(&state.theta, step);
                if !trial.is_valid() {
                    return;
                }
                let trial_ll = log_likelihood(rows, &trial);
                let log_ratio =
                    trial_ll + prior(state, &trial) - state.ll - prior(state, &state.theta);
                if rng.random::<f64>().ln() < log_ratio {
                    state.theta = trial;
                    state.ll = trial_ll;
                    accepted[idx] = true;
                }
            };

        propose_theta(
            0,
            &|t, s| ModelParameters { mu_x: t.mu_x + s, ..*t },
            &|st, t| ln_normal(t.mu_x, st.m_x, 1.0 / st.p_x),
            rng,
            state,
            &mut accepted,
        );
        propose_theta(
            1,
            &|t, s| ModelParameters { mu_y: t.mu_y + s, ..*t },
            &|st, t| ln_normal(t.mu_y, st.m_y, 1.0 / st.p_y),
            rng,
            state,
            &mut accepted,
        );
        propose_theta(
            2,
            &|t, s| ModelParameters {
                sigma_x: t.sigma_x + s,
                ..*t
            },
            &|st, t| ln_gamma_pdf(t.sigma_x, st.a_x, st.b_x),
            rng,
            state,
            &mut accepted,
        );
        propose_theta(
            3,
            &|t, s| ModelParameters {
                sigma_y: t.sigma_y + s,
                ..*t
            },
            &|st, t| ln_gamma_pdf(t.sigma_y, st.a_y, st.b_y),
            rng,
            state,
            &mut accepted,
        );
        // the truncation normalizer does not involve ρ, so it cancels here
        propose_theta(
            4,
            &|t, s| ModelParameters { rho: t.rho + s, ..*t },
            &|st, t| ln_normal(t.rho, st.m_rho, 1.0 / st.p_rho),
            rng,
            state,
            &mut accepted,
        );
    }

    // --- hyper-mean Gibbs draws (Normal prior × one Normal observation) ---
    let mu_var = hyper.mu_variance();
    let gibbs_mean = |observed: f64, obs_prec: f64, rng: &mut ChaCha8Rng| -> f64 {
        let post_prec = 1.0 / mu_var + obs_prec;
        obs_prec * observed / post_prec + normal(rng) / post_prec.sqrt()
    };
    state.m_x = gibbs_mean(state.theta.mu_x, state.p_x, rng);
    state.m_y = gibbs_mean(state.theta.mu_y, state.p_y, rng);

    // --- scalar hyper updates (random walks on bounded supports) ---
    let propose_scalar = |idx: usize,
                              current: f64,
                              lo: f64,
                              hi: f64,
                              target: &dyn Fn(f64) -> f64,
                              rng: &mut ChaCha8Rng|
     -> (f64, bool) {
        let trial = current + scales[idx] * normal(rng);
        if trial <= lo || trial >= hi {
            return (current, false);
        }
        if rng.random::<f64>().ln() < target(trial) - target(current) {
            (trial, true)
        } else {
            (current, false)
        }
    };

    let (p_x, acc) = propose_scalar(
        5,
        state.p_x,
        0.0,
        hyper.precision_max,
        &|p| 0.5 * p.ln() - 0.5 * p * (state.theta.mu_x - state.m_x).powi(2),
        rng,
    );
    state.p_x = p_x;
    accepted[5] = acc;

    let (p_y, acc) = propose_scalar(
        6,
        state.p_y,
        0.0,
        hyper.precision_max,
        &|p| 0.5 * p.ln() - 0.5 * p * (state.theta.mu_y - state.m_y).powi(2),
        rng,
    );
    state.p_y = p_y;
    accepted[6] = acc;

    let (a_x, acc) = propose_scalar(
        7,
        state.a_x,
        0.0,
        hyper.shape_max,
        &|a| ln_gamma_pdf(state.theta.sigma_x, a, state.b_x),
        rng,
    );
    state.a_x = a_x;
    accepted[7] = acc;

    let (b_x, acc) = propose_scalar(
        8,
        state.b_x,
        0.0,
        hyper.rate_max,
        &|b| ln_gamma_pdf(state.theta.sigma_x, state.a_x, b),
        rng,
    );
    state.b_x = b_x;
    accepted[8] = acc;

    let (a_y, acc) = propose_scalar(
        9,
        state.a_y,
        0.0,
        hyper.shape_max,
        &|a| ln_gamma_pdf(state.theta.sigma_y, a, state.b_y),
        rng,
    );
    state.a_y = a_y;
    accepted[9] = acc;

    let (b_y, acc) = propose_scalar(
        10,
        state.b_y,
        0.0,
        hyper.rate_max,
        &|b| ln_gamma_pdf(state.theta.sigma_y, state.a_y, b),
        rng,
    );
    state.b_y = b_y;
    accepted[10] = acc;

    // truncated-normal prior on ρ: its normalizer depends on both hypers
    let rho = state.theta.rho;
    let rho_var = hyper.rho_variance();
    let (m_rho, acc) = propose_scalar(
        11,
        state.m_rho,
        f64::NEG_INFINITY,
        f64::INFINITY,
        &|mr| {
            -0.5 * state.p_rho * (rho - mr).powi(2) - ln_truncation_mass(mr, state.p_rho)
                + ln_normal(mr, 0.0, rho_var)
        },
        rng,
    );
    state.m_rho = m_rho;
    accepted[11] = acc;

    let (p_rho, acc) = propose_scalar(
        12,
        state.p_rho,
        0.0,
        hyper.precision_max,
        &|pr| {
            0.5 * pr.ln()
                - 0.5 * pr * (rho - state.m_rho).powi(2)
                - ln_truncation_mass(state.m_rho, pr)
        },
        rng,
    );
    state.p_rho = p_rho;
    accepted[12] = acc;

    accepted
}

/// Final hyper-parameter state of a short diagnostic run; exposed mainly for
/// inspection and tests.
pub fn hyper_snapshot(
    sample: &LandmarkSampleMatrix,
    hyper: &HyperConfig,
    sweeps: usize,
    seed_value: u64,
) -> Result<HyperParameters, StatsError> {
    if sample.len() < 2 {
        return Err(StatsError::TooFewRows {
            got: sample.len(),
            need: 2,
        });
    }
    let mut rng = seed::stream(seed_value, &[0xc417, 0]);
    let mm = moments(&sample.rows);
    let sd_x = mm.sd_x.max(1e-6);
    let sd_y = mm.sd_y.max(1e-6);
    let mut state = CellState {
        theta: ModelParameters {
            mu_x: mm.mean_x,
            mu_y: mm.mean_y,
            sigma_x: sd_x,
            sigma_y: sd_y,
            rho: mm.corr,
        },
        m_x: mm.mean_x,
        p_x: 0.5,
        m_y: mm.mean_y,
        p_y: 0.5,
        a_x: 0.25,
        b_x: 0.5,
        a_y: 0.25,
        b_y: 0.5,
        m_rho: 0.0,
        p_rho: 0.5,
        ll: 0.0,
    };
    state.ll = log_likelihood(&sample.rows, &state.theta);
    let scales = [
        sd_x, sd_y, 0.3 * sd_x, 0.3 * sd_y, 0.15, 0.15, 0.15, 0.08, 0.15, 0.08, 0.15, 0.4, 0.15,
    ];
    for _ in 0..sweeps {
        sweep_once(&sample.rows, hyper, &mut state, &scales, &mut rng);
    }
    Ok(state.hyper())
}
