//! Random-walk Metropolis-Hastings estimation of single-emitter
//! parameters from a measured transmission spectrum, and the two-dot
//! prediction built from two such fits.
//!
//! The likelihood is Gaussian in the normalized transmission with a
//! fixed-seed spectral-diffusion average per evaluation: the same
//! standard-normal draws are rescaled by each proposal's sigma_sd
//! (common random numbers), so the sampled surface is smooth instead of
//! stochastic. The forward model is the closed-form driven two-level
//! solution, which keeps a likelihood evaluation at microseconds.
//!
//! Parameters live in a fixed canonical order: beta, sigma_sd, gamma_d,
//! z_re, z_im, center. Each is either fixed or fitted with bounds and a
//! proposal scale; pure dephasing defaults to fixed at zero. Proposal
//! scales adapt during burn-in toward a 20-40% acceptance rate and are
//! frozen afterwards, so the retained chain satisfies detailed balance.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::operators::EmitterParams;
use crate::scattering::{
    single_emitter_intensity, transmission_spectrum, DecayLayout, ScatteringError,
    ScatteringSystem, SpectrumResult, WaveguideFano, ZConvention,
};

#[derive(Debug, Error)]
pub enum FittingError {
    #[error("bad measured spectrum: {0}")]
    BadData(&'static str),
    #[error("bad fit configuration: {0}")]
    BadConfig(String),
    #[error("no proposals accepted after burn-in; widen bounds or shrink proposal scales")]
    NoAcceptedMoves,
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
}

/// A measured normalized transmission spectrum. Detunings are angular,
/// rad/ns; laboratory GHz data convert at the CLI boundary.
#[derive(Debug, Clone)]
pub struct MeasuredSpectrum {
    pub detuning: Vec<f64>,
    pub t_over_t0: Vec<f64>,
    /// Per-point noise standard deviation; filled from the off-resonant
    /// baseline scatter when the caller does not supply one.
    pub sigma_noise: Vec<f64>,
}

impl MeasuredSpectrum {
    pub fn new(
        detuning: Vec<f64>,
        t_over_t0: Vec<f64>,
        sigma_noise: Option<Vec<f64>>,
    ) -> Result<Self, FittingError> {
        if detuning.len() != t_over_t0.len() {
            return Err(FittingError::BadData("detuning and value lengths differ"));
        }
        if detuning.len() < 4 {
            return Err(FittingError::BadData("need at least 4 points"));
        }
        if !detuning.iter().all(|d| d.is_finite()) {
            return Err(FittingError::BadData("non-finite detuning"));
        }
        let increasing = detuning.windows(2).all(|w| w[1] > w[0]);
        let decreasing = detuning.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(FittingError::BadData("detuning must be strictly monotone"));
        }
        if !t_over_t0.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(FittingError::BadData(
                "normalized transmission must be positive",
            ));
        }
        let sigma_noise = match sigma_noise {
            Some(s) => {
                if s.len() != detuning.len() {
                    return Err(FittingError::BadData("noise vector length differs"));
                }
                if !s.iter().all(|v| v.is_finite() && *v > 0.0) {
                    return Err(FittingError::BadData("noise sigmas must be positive"));
                }
                s
            }
            None => {
                let est = estimate_noise_sigma(&detuning, &t_over_t0);
                vec![est; detuning.len()]
            }
        };
        Ok(MeasuredSpectrum {
            detuning,
            t_over_t0,
            sigma_noise,
        })
    }
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

/// Noise scale from the off-resonant baseline: the median absolute
/// deviation of points farther than three dip widths from the dip,
/// scaled by 1.4826 to a Gaussian standard deviation. Falls back to
/// the whole spectrum when the dip is too shallow to locate or the
/// baseline would keep fewer than 8 points.
pub fn estimate_noise_sigma(detuning: &[f64], values: &[f64]) -> f64 {
    let n = values.len();
    let mut sorted: Vec<f64> = values.to_vec();
    let baseline_level = median_of(&mut sorted);
    let (i_min, &v_min) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let v_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let depth = baseline_level - v_min;
    let mut baseline_idx: Vec<usize> = Vec::new();
    if depth > 0.05 * (v_max - v_min) && v_max > v_min {
        // width from the half-depth crossings around the minimum
        let half = baseline_level - 0.5 * depth;
        let mut left = i_min;
        while left > 0 && values[left] < half {
            left -= 1;
        }
        let mut right = i_min;
        while right + 1 < n && values[right] < half {
            right += 1;
        }
        let width = (detuning[right] - detuning[left]).abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            if (detuning[k] - detuning[i_min]).abs() > 3.0 * width {
                baseline_idx.push(k);
            }
        }
    }
    if baseline_idx.len() < 8 {
        baseline_idx = (0..n).collect();
    }
    let mut base: Vec<f64> = baseline_idx.iter().map(|&k| values[k]).collect();
    let med = median_of(&mut base);
    let mut dev: Vec<f64> = baseline_idx
        .iter()
        .map(|&k| (values[k] - med).abs())
        .collect();
    (1.4826 * median_of(&mut dev)).max(1e-12)
}

/// One emitter as the fit sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DotParams {
    pub beta: f64,
    pub sigma_sd: f64,
    pub gamma_d: f64,
    pub z: Complex64,
    /// Transition detuning from the data's zero, rad/ns.
    pub center: f64,
}

impl DotParams {
    fn physical(&self) -> bool {
        (0.0..=1.0).contains(&self.beta)
            && self.sigma_sd >= 0.0
            && self.sigma_sd.is_finite()
            && self.gamma_d >= 0.0
            && self.gamma_d.is_finite()
            && self.z.re.is_finite()
            && self.z.im.is_finite()
            && self.z.norm_sqr() > 0.0
            && self.center.is_finite()
    }

    fn emitter(&self, gamma_tot: f64) -> EmitterParams {
        EmitterParams {
            delta0: self.center,
            gamma_tot,
            gamma_d: self.gamma_d,
            beta: self.beta,
            sigma_sd: self.sigma_sd,
            phase: 0.0,
        }
    }
}

/// Everything about the forward model that is not fitted.
#[derive(Debug, Clone, Copy)]
pub struct ModelConfig {
    /// Total radiative decay rate, rad/ns; known independently from
    /// pulsed correlation measurements, so fixed here.
    pub gamma_tot: f64,
    /// Incident photon flux per ns during the measurement.
    pub flux: f64,
    pub convention: ZConvention,
    pub layout: DecayLayout,
    /// Spectral-diffusion draws per likelihood evaluation.
    pub n_sd_samples: usize,
    /// Seed of the common-random-number draws.
    pub seed: u64,
}

impl ModelConfig {
    fn validate(&self) -> Result<(), FittingError> {
        if !(self.gamma_tot > 0.0 && self.gamma_tot.is_finite()) {
            return Err(FittingError::BadConfig(format!(
                "gamma_tot must be positive, got {}",
                self.gamma_tot
            )));
        }
        if !(self.flux > 0.0 && self.flux.is_finite()) {
            return Err(FittingError::BadConfig(format!(
                "flux must be positive, got {}",
                self.flux
            )));
        }
        if self.n_sd_samples == 0 {
            return Err(FittingError::BadConfig(
                "need at least one spectral-diffusion sample".into(),
            ));
        }
        Ok(())
    }
}

/// Standard-normal draws with antithetic pairing, the shared noise
/// basis every likelihood evaluation rescales by its own sigma_sd.
/// The set is standardized to exact zero mean and unit variance so the
/// fitted width is not biased by the realized spread of a finite
/// sample; a single draw sits at the distribution center.
fn antithetic_standard_draws(n: usize, seed: u64) -> Vec<f64> {
    if n < 2 {
        return vec![0.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z: f64 = StandardNormal.sample(&mut rng);
        out.push(z);
        if out.len() < n {
            out.push(-z);
        }
    }
    let nf = n as f64;
    let mean = out.iter().sum::<f64>() / nf;
    let var = out.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / nf;
    if var > 0.0 {
        let s = var.sqrt();
        for z in out.iter_mut() {
            *z = (*z - mean) / s;
        }
    }
    out
}

/// Averaged forward model at each grid point; assumes `p` is physical
/// and the facet coefficient valid.
fn spectrum_values(p: &DotParams, fano: &WaveguideFano, cfg: &ModelConfig, grid: &[f64]) -> Vec<f64> {
    let em = p.emitter(cfg.gamma_tot);
    let draws = if p.sigma_sd == 0.0 {
        vec![0.0]
    } else {
        antithetic_standard_draws(cfg.n_sd_samples, cfg.seed)
    };
    let inv_n = 1.0 / draws.len() as f64;
    grid.iter()
        .map(|delta| {
            draws
                .iter()
                .map(|z| {
                    single_emitter_intensity(
                        &em,
                        fano,
                        cfg.convention,
                        cfg.flux,
                        *delta,
                        p.sigma_sd * z,
                    )
                })
                .sum::<f64>()
                * inv_n
        })
        .collect()
}

/// The likelihood's forward model on an arbitrary detuning grid: the
/// spectral-diffusion-averaged single-emitter transmission with the
/// common-random-number draws pinned by `cfg`. Used to overlay a
/// fitted model on its data.
pub fn model_spectrum(
    p: &DotParams,
    cfg: &ModelConfig,
    detuning_grid: &[f64],
) -> Result<Vec<f64>, FittingError> {
    cfg.validate()?;
    if !p.physical() {
        return Err(FittingError::BadConfig(
            "dot parameters outside the physical range".into(),
        ));
    }
    let fano = WaveguideFano::from_z(p.z)?;
    Ok(spectrum_values(p, &fano, cfg, detuning_grid))
}

/// Gaussian log-likelihood sum_k -(model_k - data_k)^2 / (2 sigma_k^2)
/// of a single-dot model against a measured spectrum. Unphysical
/// parameters return negative infinity instead of an error, so a
/// sampler can propose freely.
pub fn log_likelihood(p: &DotParams, data: &MeasuredSpectrum, cfg: &ModelConfig) -> f64 {
    if !p.physical() {
        return f64::NEG_INFINITY;
    }
    let fano = match WaveguideFano::from_z(p.z) {
        Ok(f) => f,
        Err(_) => return f64::NEG_INFINITY,
    };
    let model = spectrum_values(p, &fano, cfg, &data.detuning);
    let mut ll = 0.0;
    for ((m, y), sigma) in model
        .iter()
        .zip(data.t_over_t0.iter())
        .zip(data.sigma_noise.iter())
    {
        let r = m - y;
        ll -= r * r / (2.0 * sigma * sigma);
    }
    ll
}

/// One scalar parameter of the fit: either frozen at `init` or sampled
/// inside [lo, hi] with the given initial proposal scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub free: bool,
    pub init: f64,
    pub lo: f64,
    pub hi: f64,
    pub scale: f64,
}

impl ParamSpec {
    pub fn fitted(init: f64, lo: f64, hi: f64, scale: f64) -> Self {
        ParamSpec {
            free: true,
            init,
            lo,
            hi,
            scale,
        }
    }

    pub fn fixed(value: f64) -> Self {
        ParamSpec {
            free: false,
            init: value,
            lo: value,
            hi: value,
            scale: 0.0,
        }
    }
}

/// Full sampler configuration. `seed` drives the proposal stream; the
/// spectral-diffusion draws use `model.seed`.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub beta: ParamSpec,
    pub sigma_sd: ParamSpec,
    /// Defaults to fixed at zero: dephasing is assumed negligible
    /// unless deliberately freed.
    pub gamma_d: ParamSpec,
    pub z_re: ParamSpec,
    pub z_im: ParamSpec,
    pub center: ParamSpec,
    pub chain_length: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

impl FitConfig {
    /// Everything fixed at a neutral starting point; callers free the
    /// parameters they want sampled.
    pub fn new(model: ModelConfig) -> Self {
        FitConfig {
            beta: ParamSpec::fixed(0.1),
            sigma_sd: ParamSpec::fixed(0.0),
            gamma_d: ParamSpec::fixed(0.0),
            z_re: ParamSpec::fixed(1.0),
            z_im: ParamSpec::fixed(0.0),
            center: ParamSpec::fixed(0.0),
            chain_length: 5000,
            burn_in: 1000,
            seed: 1,
            model,
        }
    }

    fn specs(&self) -> [(&'static str, &ParamSpec); 6] {
        [
            ("beta", &self.beta),
            ("sigma_sd", &self.sigma_sd),
            ("gamma_d", &self.gamma_d),
            ("z_re", &self.z_re),
            ("z_im", &self.z_im),
            ("center", &self.center),
        ]
    }

    fn assemble(&self, free_values: &[f64]) -> DotParams {
        let mut vals = [0.0f64; 6];
        let mut k = 0;
        for (i, (_, spec)) in self.specs().iter().enumerate() {
            vals[i] = if spec.free {
                let v = free_values[k];
                k += 1;
                v
            } else {
                spec.init
            };
        }
        DotParams {
            beta: vals[0],
            sigma_sd: vals[1],
            gamma_d: vals[2],
            z: Complex64::new(vals[3], vals[4]),
            center: vals[5],
        }
    }

    fn validate(&self) -> Result<(), FittingError> {
        self.model.validate()?;
        if self.chain_length <= self.burn_in {
            return Err(FittingError::BadConfig(format!(
                "chain_length {} must exceed burn_in {}",
                self.chain_length, self.burn_in
            )));
        }
        if self.chain_length - self.burn_in < 2 {
            return Err(FittingError::BadConfig(
                "need at least 2 retained samples".into(),
            ));
        }
        let physical: [(f64, f64); 6] = [
            (0.0, 1.0),
            (0.0, f64::INFINITY),
            (0.0, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
            (f64::NEG_INFINITY, f64::INFINITY),
        ];
        let mut any_free = false;
        for ((name, spec), (plo, phi)) in self.specs().iter().zip(physical.iter()) {
            if !spec.init.is_finite() {
                return Err(FittingError::BadConfig(format!("{} init not finite", name)));
            }
            if spec.free {
                any_free = true;
                if spec.lo.is_nan() || spec.hi.is_nan() || spec.lo >= spec.hi {
                    return Err(FittingError::BadConfig(format!(
                        "{} bounds [{}, {}] are empty",
                        name, spec.lo, spec.hi
                    )));
                }
                if spec.lo < *plo || spec.hi > *phi {
                    return Err(FittingError::BadConfig(format!(
                        "{} bounds [{}, {}] leave the physical range",
                        name, spec.lo, spec.hi
                    )));
                }
                if !(spec.init >= spec.lo && spec.init <= spec.hi) {
                    return Err(FittingError::BadConfig(format!(
                        "{} init {} outside bounds",
                        name, spec.init
                    )));
                }
                if !(spec.scale > 0.0 && spec.scale.is_finite()) {
                    return Err(FittingError::BadConfig(format!(
                        "{} proposal scale must be positive",
                        name
                    )));
                }
            } else if spec.init < *plo || spec.init > *phi {
                return Err(FittingError::BadConfig(format!(
                    "{} fixed at {} outside the physical range",
                    name, spec.init
                )));
            }
        }
        if !any_free {
            return Err(FittingError::BadConfig("no free parameters".into()));
        }
        if self.z_re.init == 0.0 && self.z_im.init == 0.0 && !self.z_re.free && !self.z_im.free {
            return Err(FittingError::BadConfig("z fixed at zero".into()));
        }
        Ok(())
    }
}

/// Posterior summary of one fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Names of the sampled parameters, canonical order.
    pub parameter_names: Vec<&'static str>,
    /// Retained post-burn-in samples, one row per step.
    pub chain: Vec<Vec<f64>>,
    /// Log-likelihood per retained step.
    pub log_likelihood: Vec<f64>,
    /// Fraction of accepted proposals after burn-in.
    pub acceptance_rate: f64,
    /// Highest-likelihood retained sample.
    pub map_estimate: DotParams,
    /// Posterior means folded back into a parameter set.
    pub posterior_mean: DotParams,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub p16: Vec<f64>,
    pub p84: Vec<f64>,
}

struct ChainRun {
    samples: Vec<Vec<f64>>,
    lls: Vec<f64>,
    acceptance_rate: f64,
}

/// Random-walk Metropolis core. Gaussian proposals per coordinate, a
/// global scale factor adapted every 50 burn-in steps toward 20-40%
/// acceptance, frozen afterwards. Out-of-bounds proposals are rejected
/// without evaluating the target.
#[allow(clippy::too_many_arguments)]
fn mh_core<F: FnMut(&[f64]) -> f64>(
    mut target: F,
    init: &[f64],
    lo: &[f64],
    hi: &[f64],
    scales: &[f64],
    chain_length: usize,
    burn_in: usize,
    seed: u64,
) -> ChainRun {
    let dim = init.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = init.to_vec();
    let mut lx = target(&x);
    let mut g = 1.0f64;
    let mut window_acc = 0usize;
    let mut window_n = 0usize;
    let mut acc_post = 0usize;
    let kept = chain_length - burn_in;
    let mut samples = Vec::with_capacity(kept);
    let mut lls = Vec::with_capacity(kept);
    for step in 0..chain_length {
        let mut prop = x.clone();
        for j in 0..dim {
            let n: f64 = StandardNormal.sample(&mut rng);
            prop[j] += g * scales[j] * n;
        }
        let in_bounds = prop
            .iter()
            .zip(lo.iter())
            .zip(hi.iter())
            .all(|((p, l), h)| p >= l && p <= h);
        let lp = if in_bounds {
            target(&prop)
        } else {
            f64::NEG_INFINITY
        };
        let u: f64 = rng.gen();
        let accept = lp.is_finite() && (lp >= lx || u.ln() < lp - lx);
        if accept {
            x = prop;
            lx = lp;
        }
        if step < burn_in {
            window_n += 1;
            if accept {
                window_acc += 1;
            }
            if window_n == 50 {
                let rate = window_acc as f64 / 50.0;
                if rate < 0.2 {
                    g *= 0.7;
                } else if rate > 0.4 {
                    g *= 1.3;
                }
                window_acc = 0;
                window_n = 0;
            }
        } else {
            if accept {
                acc_post += 1;
            }
            samples.push(x.clone());
            lls.push(lx);
        }
    }
    ChainRun {
        samples,
        lls,
        acceptance_rate: acc_post as f64 / kept as f64,
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Fits the free parameters of `config` to the spectrum by
/// Metropolis-Hastings sampling. Deterministic for a fixed config.
pub fn mh_fit(data: &MeasuredSpectrum, config: &FitConfig) -> Result<FitResult, FittingError> {
    config.validate()?;
    let free: Vec<(&'static str, ParamSpec)> = config
        .specs()
        .iter()
        .filter(|(_, s)| s.free)
        .map(|(n, s)| (*n, **s))
        .collect();
    let init: Vec<f64> = free.iter().map(|(_, s)| s.init).collect();
    let lo: Vec<f64> = free.iter().map(|(_, s)| s.lo).collect();
    let hi: Vec<f64> = free.iter().map(|(_, s)| s.hi).collect();
    let scales: Vec<f64> = free.iter().map(|(_, s)| s.scale).collect();

    let run = mh_core(
        |v| log_likelihood(&config.assemble(v), data, &config.model),
        &init,
        &lo,
        &hi,
        &scales,
        config.chain_length,
        config.burn_in,
        config.seed,
    );
    if run.acceptance_rate == 0.0 {
        return Err(FittingError::NoAcceptedMoves);
    }

    let n = run.samples.len();
    let dim = init.len();
    let mut mean = vec![0.0; dim];
    for s in &run.samples {
        for (m, v) in mean.iter_mut().zip(s.iter()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut sd = vec![0.0; dim];
    for s in &run.samples {
        for ((acc, v), m) in sd.iter_mut().zip(s.iter()).zip(mean.iter()) {
            *acc += (v - m) * (v - m);
        }
    }
    for acc in sd.iter_mut() {
        *acc = (*acc / (n - 1) as f64).sqrt();
    }
    let mut p16 = vec![0.0; dim];
    let mut p84 = vec![0.0; dim];
    for j in 0..dim {
        let mut col: Vec<f64> = run.samples.iter().map(|s| s[j]).collect();
        col.sort_by(f64::total_cmp);
        p16[j] = percentile(&col, 0.16);
        p84[j] = percentile(&col, 0.84);
    }
    let best = run
        .lls
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();

    Ok(FitResult {
        parameter_names: free.iter().map(|(n, _)| *n).collect(),
        map_estimate: config.assemble(&run.samples[best]),
        posterior_mean: config.assemble(&mean),
        chain: run.samples,
        log_likelihood: run.lls,
        acceptance_rate: run.acceptance_rate,
        mean,
        sd,
        p16,
        p84,
    })
}

/// Transmission spectrum of the resonant pair built from two
/// independently fitted dots, with no refit: both emitters are placed
/// at zero mutual detuning (their fitted centers describe where each
/// line sat during its own measurement, not a physical splitting).
/// The end-facet coefficient is taken from the first dot; under the
/// default scaled output normalization it cancels anyway.
pub fn predict_two_dot(
    dot1: &DotParams,
    dot2: &DotParams,
    model: &ModelConfig,
    detuning_grid: &[f64],
) -> Result<SpectrumResult, FittingError> {
    model.validate()?;
    if !dot1.physical() || !dot2.physical() {
        return Err(FittingError::BadConfig(
            "dot parameters outside the physical range".into(),
        ));
    }
    let mut e1 = dot1.emitter(model.gamma_tot);
    let mut e2 = dot2.emitter(model.gamma_tot);
    e1.delta0 = 0.0;
    e2.delta0 = 0.0;
    let fano = WaveguideFano::from_z(dot1.z)?;
    let system = ScatteringSystem::new(
        vec![e1, e2],
        fano,
        model.layout,
        model.convention,
        model.flux,
    )?;
    Ok(transmission_spectrum(
        &system,
        detuning_grid,
        model.n_sd_samples,
        model.seed,
    )?)
}
