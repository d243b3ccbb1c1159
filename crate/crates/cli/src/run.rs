//! Command implementations and the exit-code contract: 0 on success,
//! 2 for input problems (config, data files, schema), 3 for numerical
//! failures (solver breakdown, a chain that never moves).

use std::fmt;
use std::path::{Path, PathBuf};

use wgqed::emission::{pl_g2, EmissionError};
use wgqed::fitting::{
    mh_fit, model_spectrum, FittingError, MeasuredSpectrum,
};
use wgqed::scattering::{
    g2_transmitted_with, saturation_curve, transmission_spectrum, ScatteringError,
};
use wgqed::units::{ghz_to_radns, radns_to_ghz};
use wgqed::waveguide::{fringe_analysis, group_index, power_to_flux, WaveguideGeometry};

use crate::config::{self, RawConfig};
use crate::plot::{line_plot, Series, COLORS};
use crate::{FitArgs, RunArgs, WaveguideArgs};

#[derive(Debug)]
pub enum AppError {
    /// Bad config, bad data file, bad schema: exit code 2.
    Input(String),
    /// The computation itself failed: exit code 3.
    Numerical(String),
}

impl AppError {
    pub fn code(&self) -> u8 {
        match self {
            AppError::Input(_) => 2,
            AppError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Input(m) => write!(f, "{m}"),
            AppError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ScatteringError> for AppError {
    fn from(e: ScatteringError) -> Self {
        match e {
            ScatteringError::Dynamics(_) => AppError::Numerical(e.to_string()),
            _ => AppError::Input(e.to_string()),
        }
    }
}

impl From<EmissionError> for AppError {
    fn from(e: EmissionError) -> Self {
        match e {
            EmissionError::Dynamics(_) | EmissionError::FitDiverged => {
                AppError::Numerical(e.to_string())
            }
            _ => AppError::Input(e.to_string()),
        }
    }
}

impl From<FittingError> for AppError {
    fn from(e: FittingError) -> Self {
        match e {
            FittingError::NoAcceptedMoves => AppError::Numerical(e.to_string()),
            FittingError::Scattering(inner) => AppError::from(inner),
            _ => AppError::Input(e.to_string()),
        }
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), AppError> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(AppError::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Input(format!("--threads: {e}")))?;
    }
    Ok(())
}

fn prepare(args: &RunArgs) -> Result<(RawConfig, PathBuf), AppError> {
    configure_threads(args.threads)?;
    let cfg = config::load(&args.config)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| AppError::Input(format!("cannot create {}: {e}", args.out.display())))?;
    Ok((cfg, args.out.clone()))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), AppError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| AppError::Input(format!("cannot write {}: {e}", path.display())))?;
    let io_err = |e: csv::Error| AppError::Input(format!("cannot write {}: {e}", path.display()));
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        w.write_record(&cells).map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| AppError::Input(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn cmd_spectrum(args: &RunArgs) -> Result<(), AppError> {
    let (cfg, out) = prepare(args)?;
    let system = cfg.scattering_system()?;
    let grid = cfg.detuning_grid()?;
    let spec = transmission_spectrum(&system, &grid, cfg.n_sd_samples(), cfg.seed(args.seed))?;

    let ghz: Vec<f64> = spec.detuning.iter().map(|d| radns_to_ghz(*d)).collect();
    let rows: Vec<Vec<f64>> = ghz
        .iter()
        .zip(spec.intensity.iter())
        .map(|(&d, &t)| vec![d, t])
        .collect();
    write_csv(&out.join("spectrum.csv"), &["detuning_GHz", "T_over_T0"], &rows)?;
    line_plot(
        &out.join("spectrum.svg"),
        "Normalized transmission",
        "detuning (GHz)",
        "T / T0",
        &[Series {
            x: &ghz,
            y: &spec.intensity,
            label: "T/T0",
            color: COLORS[0],
            markers: false,
        }],
    )?;

    println!("dip: {:.6}", spec.dip);
    match spec.fwhm {
        Some(w) => println!("fwhm_GHz: {:.6}", radns_to_ghz(w)),
        None => println!("fwhm_GHz: absent"),
    }
    Ok(())
}

pub fn cmd_g2(args: &RunArgs) -> Result<(), AppError> {
    let (cfg, out) = prepare(args)?;
    let system = cfg.scattering_system()?;
    let taus = cfg.tau_grid()?;
    let g2 = g2_transmitted_with(
        &system,
        cfg.laser_detuning(),
        &taus,
        cfg.n_sd_samples(),
        cfg.seed(args.seed),
        cfg.g2_averaging()?,
    )?;

    let rows: Vec<Vec<f64>> = g2
        .tau
        .iter()
        .zip(g2.g2.iter())
        .map(|(&t, &g)| vec![t, g])
        .collect();
    write_csv(&out.join("g2.csv"), &["tau_ns", "g2"], &rows)?;
    line_plot(
        &out.join("g2.svg"),
        "Transmitted-light intensity correlation",
        "delay (ns)",
        "g2",
        &[Series {
            x: &g2.tau,
            y: &g2.g2,
            label: "g2",
            color: COLORS[0],
            markers: false,
        }],
    )?;

    println!("g2_zero: {:.6}", g2.g2_zero);
    Ok(())
}

pub fn cmd_saturate(args: &RunArgs) -> Result<(), AppError> {
    let (cfg, out) = prepare(args)?;
    let system = cfg.scattering_system()?;
    let fluxes = cfg.flux_grid()?;
    let lambda = cfg.wavelength_nm()?;
    let curve = saturation_curve(&system, &fluxes, None, cfg.n_sd_samples(), cfg.seed(args.seed))?;

    // photons/ns carried by 1 uW sets the flux-to-power conversion
    let flux_per_uw = power_to_flux(1.0, lambda).map_err(|e| AppError::Input(e.to_string()))?;
    let rows: Vec<Vec<f64>> = curve
        .flux
        .iter()
        .zip(curve.dip.iter())
        .map(|(&f, &d)| vec![f, f / flux_per_uw, d])
        .collect();
    write_csv(
        &out.join("saturation.csv"),
        &["flux_per_ns", "power_uW", "dip"],
        &rows,
    )?;
    let log_flux: Vec<f64> = curve.flux.iter().map(|f| f.log10()).collect();
    line_plot(
        &out.join("saturation.svg"),
        "Resonant dip versus drive strength",
        "log10 flux (photons/ns)",
        "dip 1 - T/T0",
        &[Series {
            x: &log_flux,
            y: &curve.dip,
            label: "dip",
            color: COLORS[0],
            markers: false,
        }],
    )?;

    match curve.critical_flux {
        Some(f) => println!("critical_flux_per_ns: {f:.6}"),
        None => println!("critical_flux_per_ns: absent"),
    }
    Ok(())
}

fn read_measured_csv(path: &Path) -> Result<MeasuredSpectrum, AppError> {
    let bad = |msg: String| AppError::Input(format!("data {}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| AppError::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    let with_sigma = match cols.as_slice() {
        ["detuning_GHz", "T_over_T0"] => false,
        ["detuning_GHz", "T_over_T0", "sigma"] => true,
        _ => {
            return Err(bad(
                "header must be detuning_GHz,T_over_T0[,sigma]".to_string(),
            ))
        }
    };
    let mut detuning = Vec::new();
    let mut values = Vec::new();
    let mut sigma = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |j: usize| -> Result<f64, AppError> {
            rec.get(j)
                .ok_or_else(|| bad(format!("row {}: missing column {j}", i + 2)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", i + 2)))
        };
        detuning.push(ghz_to_radns(field(0)?));
        values.push(field(1)?);
        if with_sigma {
            sigma.push(field(2)?);
        }
    }
    MeasuredSpectrum::new(detuning, values, with_sigma.then_some(sigma)).map_err(AppError::from)
}

/// Chain and posterior columns in config-facing units: GHz for rates
/// and centers, plain numbers elsewhere.
fn to_config_units(name: &str, v: f64) -> f64 {
    match name {
        "sigma_sd" | "gamma_d" | "center" => radns_to_ghz(v),
        _ => v,
    }
}

fn config_facing_name(name: &str) -> String {
    match name {
        "sigma_sd" => "sigma_sd_ghz".to_string(),
        "gamma_d" => "gamma_d_ghz".to_string(),
        "center" => "center_ghz".to_string(),
        other => other.to_string(),
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), AppError> {
    let (cfg, out) = prepare(&args.run)?;
    let data = read_measured_csv(&args.data)?;
    let fit_cfg = cfg.fit_config(args.run.seed)?;
    let model = fit_cfg.model;
    let res = mh_fit(&data, &fit_cfg)?;

    let mut header: Vec<String> = res
        .parameter_names
        .iter()
        .map(|n| config_facing_name(n))
        .collect();
    header.push("log_likelihood".to_string());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<f64>> = res
        .chain
        .iter()
        .zip(res.log_likelihood.iter())
        .map(|(sample, ll)| {
            let mut row: Vec<f64> = sample
                .iter()
                .zip(res.parameter_names.iter())
                .map(|(&v, n)| to_config_units(n, v))
                .collect();
            row.push(*ll);
            row
        })
        .collect();
    write_csv(&out.join("chain.csv"), &header_refs, &rows)?;

    let mut posterior = csv::Writer::from_path(out.join("posterior.csv"))
        .map_err(|e| AppError::Input(format!("cannot write posterior.csv: {e}")))?;
    let perr = |e: csv::Error| AppError::Input(format!("cannot write posterior.csv: {e}"));
    posterior
        .write_record(["parameter", "mean", "p16", "p84"])
        .map_err(perr)?;
    for (j, name) in res.parameter_names.iter().enumerate() {
        posterior
            .write_record([
                config_facing_name(name),
                format!("{}", to_config_units(name, res.mean[j])),
                format!("{}", to_config_units(name, res.p16[j])),
                format!("{}", to_config_units(name, res.p84[j])),
            ])
            .map_err(perr)?;
    }
    posterior
        .flush()
        .map_err(|e| AppError::Input(format!("cannot write posterior.csv: {e}")))?;

    // overlay: measured points and the highest-likelihood model curve
    let map_curve = model_spectrum(&res.map_estimate, &model, &data.detuning)?;
    let data_ghz: Vec<f64> = data.detuning.iter().map(|d| radns_to_ghz(*d)).collect();
    line_plot(
        &out.join("fit.svg"),
        "Measured spectrum and fitted model",
        "detuning (GHz)",
        "T / T0",
        &[
            Series {
                x: &data_ghz,
                y: &data.t_over_t0,
                label: "data",
                color: COLORS[0],
                markers: true,
            },
            Series {
                x: &data_ghz,
                y: &map_curve,
                label: "model",
                color: COLORS[1],
                markers: false,
            },
        ],
    )?;

    println!("acceptance_rate: {:.4}", res.acceptance_rate);
    for (j, name) in res.parameter_names.iter().enumerate() {
        println!(
            "{}: {:.6} (p16 {:.6}, p84 {:.6})",
            config_facing_name(name),
            to_config_units(name, res.mean[j]),
            to_config_units(name, res.p16[j]),
            to_config_units(name, res.p84[j]),
        );
    }
    Ok(())
}

pub fn cmd_pl_g2(args: &RunArgs) -> Result<(), AppError> {
    let (cfg, out) = prepare(args)?;
    let emitters = cfg.emitters();
    let pump = cfg.pump()?;
    let taus = cfg.tau_grid()?;
    let g2 = pl_g2(&emitters, &pump, &taus)?;

    let rows: Vec<Vec<f64>> = g2
        .tau
        .iter()
        .zip(g2.g2.iter())
        .map(|(&t, &g)| vec![t, g])
        .collect();
    write_csv(&out.join("pl_g2.csv"), &["tau_ns", "g2"], &rows)?;
    line_plot(
        &out.join("pl_g2.svg"),
        "Photoluminescence intensity correlation",
        "delay (ns)",
        "g2",
        &[Series {
            x: &g2.tau,
            y: &g2.g2,
            label: "g2",
            color: COLORS[0],
            markers: false,
        }],
    )?;

    println!("g2_zero: {:.6}", g2.g2_zero);
    Ok(())
}

fn read_white_light_csv(path: &Path) -> Result<Vec<(f64, f64)>, AppError> {
    let bad = |msg: String| AppError::Input(format!("data {}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| AppError::Input(format!("cannot read {}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    if cols != ["wavelength_nm", "intensity"] {
        return Err(bad("header must be wavelength_nm,intensity".to_string()));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |j: usize| -> Result<f64, AppError> {
            rec.get(j)
                .ok_or_else(|| bad(format!("row {}: missing column {j}", i + 2)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", i + 2)))
        };
        out.push((field(0)?, field(1)?));
    }
    Ok(out)
}

pub fn cmd_waveguide(args: &WaveguideArgs) -> Result<(), AppError> {
    let cfg = config::load(&args.config)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| AppError::Input(format!("cannot create {}: {e}", args.out.display())))?;
    let spectrum = read_white_light_csv(&args.white_light)?;
    let fringes = fringe_analysis(&spectrum).map_err(|e| AppError::Input(e.to_string()))?;

    let lambda = cfg.wavelength_nm()?;
    let length = cfg.length_um()?;
    let n_g = group_index(lambda, length, fringes.delta_lambda_nm)
        .map_err(|e| AppError::Input(e.to_string()))?;
    let geometry = WaveguideGeometry::new(
        length,
        lambda,
        n_g,
        fringes.reflectivity,
        cfg.coupling_efficiency(),
    )
    .map_err(|e| AppError::Input(e.to_string()))?;
    let lifetime = geometry.photon_lifetime_ns();

    let mut quantities = vec![
        ("delta_lambda_nm", fringes.delta_lambda_nm),
        ("visibility", fringes.visibility),
        ("reflectivity", fringes.reflectivity),
        ("n_periods", fringes.n_periods as f64),
        ("group_index", n_g),
        ("photon_lifetime_ns", lifetime),
    ];
    // photon number needs a drive level; optional for pure geometry runs
    if let Ok(flux) = cfg.flux() {
        let n_mean = geometry
            .mean_photons(flux)
            .map_err(|e| AppError::Input(e.to_string()))?;
        quantities.push(("mean_photon_number", n_mean));
    }

    let mut w = csv::Writer::from_path(args.out.join("waveguide.csv"))
        .map_err(|e| AppError::Input(format!("cannot write waveguide.csv: {e}")))?;
    let werr = |e: csv::Error| AppError::Input(format!("cannot write waveguide.csv: {e}"));
    w.write_record(["quantity", "value"]).map_err(werr)?;
    for (name, value) in &quantities {
        w.write_record([name.to_string(), format!("{value}")])
            .map_err(werr)?;
    }
    w.flush()
        .map_err(|e| AppError::Input(format!("cannot write waveguide.csv: {e}")))?;

    for (name, value) in &quantities {
        println!("{name}: {value:.6}");
    }
    Ok(())
}
