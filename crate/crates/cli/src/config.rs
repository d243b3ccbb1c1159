//! Configuration schema and its translation into library types.
//!
//! Config files speak laboratory units: ordinary frequencies in GHz,
//! delays in ns, wavelengths in nm, powers in uW. The translation to
//! the library's angular rad/ns happens here and nowhere else; every
//! section rejects unknown keys so typos fail loudly instead of
//! silently falling back to defaults.

use serde::Deserialize;
use std::path::Path;

use num_complex::Complex64;
use wgqed::emission::PumpParams;
use wgqed::fitting::{FitConfig, ModelConfig, ParamSpec};
use wgqed::scattering::{DecayLayout, G2Averaging, ScatteringSystem, WaveguideFano, ZConvention};
use wgqed::units::ghz_to_radns;
use wgqed::waveguide::power_to_flux;
use wgqed::EmitterParams;

use crate::run::AppError;

fn input(msg: impl Into<String>) -> AppError {
    AppError::Input(msg.into())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub emitters: Vec<RawEmitter>,
    pub waveguide: Option<RawWaveguide>,
    pub drive: Option<RawDrive>,
    pub grids: Option<RawGrids>,
    pub sampling: Option<RawSampling>,
    pub decay: Option<RawDecay>,
    pub pump: Option<RawPump>,
    pub fit: Option<RawFit>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawEmitter {
    #[serde(default)]
    pub delta0_ghz: f64,
    pub gamma_tot_ghz: f64,
    #[serde(default)]
    pub gamma_d_ghz: f64,
    pub beta: f64,
    #[serde(default)]
    pub sigma_sd_ghz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWaveguide {
    pub z_re: Option<f64>,
    pub z_im: Option<f64>,
    /// Real facet coefficient written as a single number; mutually
    /// exclusive with z_re/z_im.
    pub zeta: Option<f64>,
    pub convention: Option<String>,
    pub length_um: Option<f64>,
    pub coupling_efficiency: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDrive {
    pub flux_per_ns: Option<f64>,
    pub power_uw: Option<f64>,
    pub wavelength_nm: Option<f64>,
    pub laser_detuning_ghz: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    #[serde(default)]
    pub log: bool,
}

impl RawGrid {
    fn to_vec(&self, key: &str) -> Result<Vec<f64>, AppError> {
        if self.points == 0 {
            return Err(input(format!("{key}.points must be at least 1")));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(input(format!("{key}.start/stop must be finite")));
        }
        if self.points > 1 && self.stop <= self.start {
            return Err(input(format!("{key}.stop must exceed {key}.start")));
        }
        if self.log {
            if self.start <= 0.0 {
                return Err(input(format!("{key}.start must be positive on a log grid")));
            }
            let (a, b) = (self.start.ln(), self.stop.ln());
            Ok((0..self.points)
                .map(|k| {
                    if self.points == 1 {
                        self.start
                    } else {
                        (a + (b - a) * k as f64 / (self.points - 1) as f64).exp()
                    }
                })
                .collect())
        } else {
            Ok((0..self.points)
                .map(|k| {
                    if self.points == 1 {
                        self.start
                    } else {
                        self.start
                            + (self.stop - self.start) * k as f64 / (self.points - 1) as f64
                    }
                })
                .collect())
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrids {
    pub detuning_ghz: Option<RawGrid>,
    pub tau_ns: Option<RawGrid>,
    pub flux_per_ns: Option<RawGrid>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSampling {
    pub n_sd_samples: Option<usize>,
    pub seed: Option<u64>,
    pub g2_averaging: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDecay {
    pub layout: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPump {
    pub pump_rate_ghz: f64,
    #[serde(default)]
    pub distinguishable: bool,
    #[serde(default)]
    pub detector_phases_rad: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFit {
    pub chain_length: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub n_sd_samples: Option<usize>,
    pub beta: Option<RawParam>,
    pub sigma_sd_ghz: Option<RawParam>,
    pub gamma_d_ghz: Option<RawParam>,
    pub z_re: Option<RawParam>,
    pub z_im: Option<RawParam>,
    pub center_ghz: Option<RawParam>,
}

/// Either `fixed = value`, or all of init/lo/hi/scale for a sampled
/// parameter.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParam {
    pub fixed: Option<f64>,
    pub init: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub scale: Option<f64>,
}

impl RawParam {
    /// `unit`: conversion from config units into library units,
    /// applied to every field (1.0 for dimensionless parameters).
    fn to_spec(&self, key: &str, unit: f64) -> Result<ParamSpec, AppError> {
        match (self.fixed, self.init, self.lo, self.hi, self.scale) {
            (Some(v), None, None, None, None) => Ok(ParamSpec::fixed(v * unit)),
            (None, Some(init), Some(lo), Some(hi), Some(scale)) => {
                Ok(ParamSpec::fitted(init * unit, lo * unit, hi * unit, scale * unit))
            }
            _ => Err(input(format!(
                "fit.{key} needs either fixed, or all of init/lo/hi/scale"
            ))),
        }
    }
}

pub fn load(path: &Path) -> Result<RawConfig, AppError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| input(format!("config {}: {e}", path.display())))
}

impl RawConfig {
    pub fn emitters(&self) -> Vec<EmitterParams> {
        self.emitters
            .iter()
            .map(|e| EmitterParams {
                delta0: ghz_to_radns(e.delta0_ghz),
                gamma_tot: ghz_to_radns(e.gamma_tot_ghz),
                gamma_d: ghz_to_radns(e.gamma_d_ghz),
                beta: e.beta,
                sigma_sd: ghz_to_radns(e.sigma_sd_ghz),
                phase: e.phase_rad,
            })
            .collect()
    }

    pub fn fano(&self) -> Result<WaveguideFano, AppError> {
        let Some(w) = &self.waveguide else {
            return Ok(WaveguideFano::unity());
        };
        match (w.zeta, w.z_re, w.z_im) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(input(
                "waveguide.zeta and waveguide.z_re/z_im are mutually exclusive",
            )),
            (Some(zeta), None, None) => {
                WaveguideFano::from_zeta(zeta).map_err(|e| input(format!("waveguide.zeta: {e}")))
            }
            (None, re, im) => {
                let z = Complex64::new(re.unwrap_or(1.0), im.unwrap_or(0.0));
                WaveguideFano::from_z(z).map_err(|e| input(format!("waveguide.z_re/z_im: {e}")))
            }
        }
    }

    pub fn convention(&self) -> Result<ZConvention, AppError> {
        let name = self
            .waveguide
            .as_ref()
            .and_then(|w| w.convention.as_deref())
            .unwrap_or("scaled");
        match name {
            "scaled" => Ok(ZConvention::Scaled),
            "bare" => Ok(ZConvention::Bare),
            other => Err(input(format!(
                "waveguide.convention must be \"scaled\" or \"bare\", got \"{other}\""
            ))),
        }
    }

    pub fn layout(&self) -> Result<DecayLayout, AppError> {
        match self.decay.as_ref().map(|d| d.layout.as_str()) {
            None | Some("independent") => Ok(DecayLayout::Independent),
            Some("collective") => Ok(DecayLayout::Collective),
            Some(other) => Err(input(format!(
                "decay.layout must be \"independent\" or \"collective\", got \"{other}\""
            ))),
        }
    }

    pub fn flux(&self) -> Result<f64, AppError> {
        let Some(d) = &self.drive else {
            return Err(input("missing section [drive] (drive.flux_per_ns or drive.power_uw)"));
        };
        match (d.flux_per_ns, d.power_uw) {
            (Some(_), Some(_)) => Err(input(
                "drive.flux_per_ns and drive.power_uw are mutually exclusive",
            )),
            (Some(f), None) => Ok(f),
            (None, Some(p)) => {
                let lambda = d.wavelength_nm.ok_or_else(|| {
                    input("drive.wavelength_nm is required to convert drive.power_uw")
                })?;
                power_to_flux(p, lambda).map_err(|e| input(format!("drive: {e}")))
            }
            (None, None) => Err(input("drive needs flux_per_ns or power_uw")),
        }
    }

    pub fn wavelength_nm(&self) -> Result<f64, AppError> {
        self.drive
            .as_ref()
            .and_then(|d| d.wavelength_nm)
            .ok_or_else(|| input("missing key drive.wavelength_nm"))
    }

    /// Laser detuning for fixed-frequency runs; defaults to the mean
    /// emitter frequency (on resonance).
    pub fn laser_detuning(&self) -> f64 {
        if let Some(d) = self.drive.as_ref().and_then(|d| d.laser_detuning_ghz) {
            return ghz_to_radns(d);
        }
        let ems = &self.emitters;
        if ems.is_empty() {
            0.0
        } else {
            ems.iter().map(|e| e.delta0_ghz).sum::<f64>() / ems.len() as f64 * ghz_to_radns(1.0)
        }
    }

    pub fn scattering_system(&self) -> Result<ScatteringSystem, AppError> {
        ScatteringSystem::new(
            self.emitters(),
            self.fano()?,
            self.layout()?,
            self.convention()?,
            self.flux()?,
        )
        .map_err(AppError::from)
    }

    pub fn n_sd_samples(&self) -> usize {
        self.sampling
            .as_ref()
            .and_then(|s| s.n_sd_samples)
            .unwrap_or(400)
    }

    pub fn seed(&self, cli_override: Option<u64>) -> u64 {
        cli_override
            .or_else(|| self.sampling.as_ref().and_then(|s| s.seed))
            .unwrap_or(1)
    }

    pub fn g2_averaging(&self) -> Result<G2Averaging, AppError> {
        match self
            .sampling
            .as_ref()
            .and_then(|s| s.g2_averaging.as_deref())
        {
            None | Some("detector-counts") => Ok(G2Averaging::DetectorCounts),
            Some("per-realization") => Ok(G2Averaging::PerRealization),
            Some(other) => Err(input(format!(
                "sampling.g2_averaging must be \"detector-counts\" or \"per-realization\", got \"{other}\""
            ))),
        }
    }

    fn grids(&self) -> Result<&RawGrids, AppError> {
        self.grids
            .as_ref()
            .ok_or_else(|| input("missing section [grids]"))
    }

    pub fn detuning_grid(&self) -> Result<Vec<f64>, AppError> {
        let g = self
            .grids()?
            .detuning_ghz
            .as_ref()
            .ok_or_else(|| input("missing key grids.detuning_ghz"))?;
        Ok(g.to_vec("grids.detuning_ghz")?
            .into_iter()
            .map(ghz_to_radns)
            .collect())
    }

    pub fn tau_grid(&self) -> Result<Vec<f64>, AppError> {
        self.grids()?
            .tau_ns
            .as_ref()
            .ok_or_else(|| input("missing key grids.tau_ns"))?
            .to_vec("grids.tau_ns")
    }

    pub fn flux_grid(&self) -> Result<Vec<f64>, AppError> {
        self.grids()?
            .flux_per_ns
            .as_ref()
            .ok_or_else(|| input("missing key grids.flux_per_ns"))?
            .to_vec("grids.flux_per_ns")
    }

    pub fn pump(&self) -> Result<PumpParams, AppError> {
        let p = self
            .pump
            .as_ref()
            .ok_or_else(|| input("missing section [pump] (pump.pump_rate_ghz)"))?;
        Ok(PumpParams {
            pump_rate: ghz_to_radns(p.pump_rate_ghz),
            detector_phases: p.detector_phases_rad.clone(),
            distinguishable: p.distinguishable,
        })
    }

    /// Fit setup: sampled parameters come from [fit]; anything not
    /// listed there is pinned at the value implied by the first
    /// [[emitters]] entry and the [waveguide] section.
    pub fn fit_config(&self, cli_seed: Option<u64>) -> Result<FitConfig, AppError> {
        let raw = self
            .fit
            .as_ref()
            .ok_or_else(|| input("missing section [fit]"))?;
        let em = self
            .emitters
            .first()
            .ok_or_else(|| input("fit needs one [[emitters]] entry for the fixed parameters"))?;
        let z_default = self.fano()?.z();
        let ghz = ghz_to_radns(1.0);

        let model = ModelConfig {
            gamma_tot: ghz_to_radns(em.gamma_tot_ghz),
            flux: self.flux()?,
            convention: self.convention()?,
            layout: self.layout()?,
            n_sd_samples: raw.n_sd_samples.unwrap_or_else(|| self.n_sd_samples()),
            seed: 7,
        };
        let mut cfg = FitConfig::new(model);
        cfg.chain_length = raw.chain_length.unwrap_or(20_000);
        cfg.burn_in = raw.burn_in.unwrap_or(cfg.chain_length / 5);
        cfg.seed = cli_seed.or(raw.seed).unwrap_or(1);

        cfg.beta = match &raw.beta {
            Some(p) => p.to_spec("beta", 1.0)?,
            None => ParamSpec::fixed(em.beta),
        };
        cfg.sigma_sd = match &raw.sigma_sd_ghz {
            Some(p) => p.to_spec("sigma_sd_ghz", ghz)?,
            None => ParamSpec::fixed(ghz_to_radns(em.sigma_sd_ghz)),
        };
        cfg.gamma_d = match &raw.gamma_d_ghz {
            Some(p) => p.to_spec("gamma_d_ghz", ghz)?,
            None => ParamSpec::fixed(ghz_to_radns(em.gamma_d_ghz)),
        };
        cfg.z_re = match &raw.z_re {
            Some(p) => p.to_spec("z_re", 1.0)?,
            None => ParamSpec::fixed(z_default.re),
        };
        cfg.z_im = match &raw.z_im {
            Some(p) => p.to_spec("z_im", 1.0)?,
            None => ParamSpec::fixed(z_default.im),
        };
        cfg.center = match &raw.center_ghz {
            Some(p) => p.to_spec("center_ghz", ghz)?,
            None => ParamSpec::fixed(ghz_to_radns(em.delta0_ghz)),
        };
        Ok(cfg)
    }

    pub fn length_um(&self) -> Result<f64, AppError> {
        self.waveguide
            .as_ref()
            .and_then(|w| w.length_um)
            .ok_or_else(|| input("missing key waveguide.length_um"))
    }

    pub fn coupling_efficiency(&self) -> f64 {
        self.waveguide
            .as_ref()
            .and_then(|w| w.coupling_efficiency)
            .unwrap_or(1.0)
    }
}
