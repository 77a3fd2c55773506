//! Command-line front end: loads a scenario, runs one computation and
//! renders the result as CSV or a `key = value` report.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qrelay_core::components::{coupler_ratio, spdc_spectral_density};
use qrelay_core::config::{self, ScenarioConfig};
use qrelay_core::error::{Error, Result};
use qrelay_core::interference::{v_statistics, visibility_map};
use qrelay_core::link::{distance_gain, max_distance, sweep, LinkModel};
use qrelay_core::montecarlo::{expected_counts, run, scan_dip};
use qrelay_core::report::{Cell, Report, Table};
use qrelay_core::statistics::{herald_condition, HeraldModel};
use qrelay_core::units::{coherence_time, path_to_delay, Millimetres};

/// Laser pulses simulated by `mc-run` when `--pulses` is not given.
pub const DEFAULT_MC_PULSES: u64 = 100_000_000;

/// Visibility the bench operating point was designed for.
const DESIGN_VISIBILITY: f64 = 0.75;

#[derive(Debug, Parser)]
#[command(name = "qrelay", version, about = "Quantum relay chip simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Emission envelope of the chip source.
    SpdcSpectrum,
    /// Cross ratio of both couplers against voltage.
    CouplerCurve,
    /// Statistical visibility over a grid of mean pair numbers.
    VisibilityMap,
    /// Three-fold rate against path difference, with a gaussian fit.
    HomDip,
    /// Normalised key rate against distance for the four link models.
    KeyrateSweep,
    /// Monte Carlo run at the configured delay and at a reference delay.
    McRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    StructuredText,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Scenario document (JSON).
    #[arg(long, global = true, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled scenario.
    #[arg(long, global = true, value_parser = config::PRESET_NAMES)]
    pub preset: Option<String>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Laser pulses to simulate; 0 asks hom-dip for exact expectations.
    #[arg(long, global = true)]
    pub pulses: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

impl Options {
    pub fn scenario_config(&self) -> Result<ScenarioConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ScenarioConfig::load(path),
            (None, Some(name)) => config::preset(name),
            (None, None) => Ok(ScenarioConfig::default()),
        }
    }
}

/// Runs `command` and returns its report.
pub fn execute(command: Command, options: &Options) -> Result<Report> {
    let cfg = options.scenario_config()?;
    match command {
        Command::SpdcSpectrum => spdc_spectrum(&cfg),
        Command::CouplerCurve => coupler_curve(&cfg),
        Command::VisibilityMap => visibility(&cfg),
        Command::HomDip => hom_dip(&cfg, options),
        Command::KeyrateSweep => keyrate_sweep(&cfg),
        Command::McRun => mc_run(&cfg, options),
    }
}

/// Renders a report in the requested format.
pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Csv => report.to_csv(),
        Format::StructuredText => report.to_structured_text(),
    }
}

/// Runs `command` on a pool of `options.workers` threads, or rayon's default.
pub fn execute_with_workers(command: Command, options: &Options) -> Result<Report> {
    match options.workers {
        Some(n) => {
            if n == 0 {
                return Err(Error::Configuration("--workers must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Configuration(e.to_string()))?;
            pool.install(|| execute(command, options))
        }
        None => execute(command, options),
    }
}

fn spdc_spectrum(cfg: &ScenarioConfig) -> Result<Report> {
    let source = cfg.sources.chip.source();
    source.validate()?;
    let mut table = Table::new(["wavelength_nm", "relative_density"]);
    for l in cfg.spectrum.wavelengths_nm.values()? {
        table.push_values(&[l, spdc_spectral_density(&source, l)])?;
    }
    let mut r = Report::new("spdc-spectrum");
    r.push("center_wavelength_nm", source.spectrum.center_wavelength_nm);
    r.push("fwhm_bandwidth_pm", source.spectrum.fwhm_bandwidth_pm);
    r.push("mean_pairs_per_pulse", source.mean_pairs());
    r.table = Some(table);
    Ok(r)
}

fn coupler_curve(cfg: &ScenarioConfig) -> Result<Report> {
    let couplers = [("c1", cfg.coupler_c1()?), ("c2", cfg.coupler_c2()?)];
    let mut table = Table::new(["coupler", "voltage_V", "cross_ratio"]);
    let voltages = cfg.coupler_curve.voltages_v.values()?;
    let mut r = Report::new("coupler-curve");
    for (name, model) in &couplers {
        for &v in &voltages {
            table.push_row(vec![name.to_string(), v.cell(), coupler_ratio(model, v).cell()])?;
        }
        r.push(
            format!("{name}.coupling_strength_times_length_rad"),
            model.coupling_strength_times_length,
        );
        r.push(format!("{name}.detuning_rad_per_v"), model.detuning_per_volt);
        r.push(format!("{name}.cross_ratio_at_0_v"), model.cross_ratio(0.0));
        r.push(format!("{name}.cross_ratio_at_30_v"), model.cross_ratio(30.0));
        r.push(format!("{name}.detuning_ratio_at_30_v"), model.detuning_ratio(30.0));
    }
    r.table = Some(table);
    Ok(r)
}

fn visibility(cfg: &ScenarioConfig) -> Result<Report> {
    let vm = &cfg.visibility_map;
    let herald = vm.herald.model();
    let map = visibility_map(&vm.n_a.values()?, &vm.n_b.values()?, herald.as_ref())?;
    let mut table = Table::new(["N_a", "N_b", "visibility"]);
    for (a, b, v) in map.rows() {
        table.push_values(&[a, b, v])?;
    }

    // Operating point of the configured sources under both herald limits.
    let n_max = cfg.hom.n_max;
    let ext = cfg.sources.external.source();
    let chip = cfg.sources.chip.source();
    let a = cfg
        .sources
        .external
        .pair_statistics
        .distribution(ext.mean_pairs(), n_max)?;
    let b = cfg
        .sources
        .chip
        .pair_statistics
        .distribution(chip.mean_pairs(), n_max)?;
    let mut r = Report::new("visibility-map");
    r.push("operating_point.n_a", ext.mean_pairs());
    r.push("operating_point.n_b", chip.mean_pairs());
    r.push("operating_point.unheralded", v_statistics(&a, &b)?);
    for (name, model) in [
        ("vanishing_efficiency", HeraldModel::vanishing_efficiency()),
        ("ideal", HeraldModel::ideal()),
    ] {
        let v = v_statistics(&a, &herald_condition(&b, &model)?)?;
        r.push(format!("operating_point.{name}"), v);
        r.push(format!("operating_point.{name}.gap_to_design"), DESIGN_VISIBILITY - v);
    }
    r.push("design_visibility", DESIGN_VISIBILITY);
    r.table = Some(table);
    Ok(r)
}

fn hom_dip(cfg: &ScenarioConfig, options: &Options) -> Result<Report> {
    let scenario = cfg.scenario()?;
    let pulses = options.pulses.unwrap_or(0);
    let scan = scan_dip(&scenario, &cfg.hom.positions_mm.values()?, pulses, options.seed)?;
    let mut table = Table::new(["position_mm", "rate", "error"]);
    for s in &scan.profile.samples {
        table.push_values(&[s.position_mm, s.rate, s.error])?;
    }
    let channels = scenario.channels()?;
    let mut r = Report::new("hom-dip");
    r.push("mode", if pulses == 0 { "analytic" } else { "monte-carlo" });
    r.push("seed", options.seed);
    r.push("pulses_per_point", pulses);
    r.push("expected_fwhm_mm", channels.dip_fwhm_mm);
    r.push("v_timing", channels.v_timing);
    r.push_opt(
        "predicted_visibility",
        channels.predicted_visibility().ok().map(|v| v.v_total),
    );
    let exact = 1.0
        - expected_counts(&channels, channels.v_timing).photon_threefold
            / expected_counts(&channels, 0.0).photon_threefold;
    r.push("expected_net_visibility", exact);
    match (&scan.profile.fit, &scan.profile.fit_failure) {
        (Some(fit), _) => {
            r.push("fit.baseline", fit.baseline);
            r.push("fit.baseline_error", fit.baseline_error);
            r.push("fit.visibility", fit.visibility);
            r.push("fit.visibility_error", fit.visibility_error);
            r.push("fit.fwhm_mm", fit.fwhm_mm);
            r.push("fit.fwhm_error_mm", fit.fwhm_error_mm);
            r.push("fit.fwhm_ps", path_to_delay(Millimetres(fit.fwhm_mm)).0);
            r.push("fit.center_mm", fit.center_mm);
            r.push("fit.center_error_mm", fit.center_error_mm);
            r.push("fit.reduced_chi_squared", fit.reduced_chi_squared);
        }
        (None, reason) => r.push_opt("fit.failure", reason.as_deref()),
    }
    r.table = Some(table);
    Ok(r)
}

fn keyrate_sweep(cfg: &ScenarioConfig) -> Result<Report> {
    let params = cfg.link_params()?;
    let criterion = cfg.link.criterion;
    let models = [
        LinkModel::direct(),
        LinkModel::standard_relay(),
        LinkModel::folded_relay_lossless(),
        LinkModel::folded_relay(),
    ];
    let result = sweep(&models, &params, &cfg.link.distances_km.values()?)?;
    let mut columns = vec!["distance_km".to_string()];
    columns.extend(models.iter().map(|m| m.name().to_string()));
    let mut table = Table::new(columns);
    for (i, &l) in result.distances_km.iter().enumerate() {
        let mut row = vec![l];
        row.extend(result.rates[i].iter().map(|x| x.normalized_rate));
        table.push_values(&row)?;
    }
    let mut r = Report::new("keyrate-sweep");
    r.push("criterion", format!("{criterion:?}"));
    let direct = max_distance(&models[0], &params, criterion)?;
    r.push_opt("direct.max_distance_km", direct.distance_km);
    for m in &models[1..] {
        let g = distance_gain(m, &params, criterion)?;
        let name = m.name();
        r.push_opt(format!("{name}.max_distance_km"), g.relay.distance_km);
        r.push_opt(format!("{name}.relay_position"), g.relay.relay_position);
        r.push_opt(format!("{name}.midpoint_distance_km"), g.relay.midpoint_distance_km);
        r.push_opt(format!("{name}.gain"), g.gain);
    }
    r.table = Some(table);
    Ok(r)
}

fn mc_run(cfg: &ScenarioConfig, options: &Options) -> Result<Report> {
    let scenario = cfg.scenario()?;
    let pulses = options.pulses.unwrap_or(DEFAULT_MC_PULSES);
    let report = run(&scenario, pulses, options.seed)?;
    let channels = scenario.channels()?;
    let mut table = Table::new([
        "stream",
        "gated_pulses",
        "singles_a",
        "singles_b",
        "singles_c",
        "monitor",
        "twofold_ab",
        "twofold_ac",
        "twofold_bc",
        "threefold_abc",
        "accidentals",
        "net_threefold",
        "net_error",
    ]);
    for (name, t, acc) in [
        ("at_delay", &report.at_delay, &report.accidentals_at_delay),
        ("reference", &report.reference, &report.accidentals_reference),
    ] {
        let counts = [
            t.gated_pulses,
            t.singles.a,
            t.singles.b,
            t.singles.c,
            t.singles.monitor,
            t.twofold_ab,
            t.twofold_ac,
            t.twofold_bc,
            t.threefold_abc,
        ];
        let mut row = vec![name.to_string()];
        row.extend(counts.iter().map(u64::to_string));
        row.extend([acc.accidentals, acc.net, acc.net_error].iter().map(Cell::cell));
        table.push_row(row)?;
    }
    let mut r = Report::new("mc-run");
    r.push("seed", report.seed);
    r.push("pulses_simulated", report.pulses_simulated);
    r.push("gated_pulses", report.gated_pulses());
    r.push("delay_mm", report.delay_mm);
    r.push("overlap", channels.overlap_at(report.delay_mm));
    r.push_opt("raw_visibility", report.raw_visibility.map(|v| v.value));
    r.push_opt("raw_visibility_error", report.raw_visibility.map(|v| v.error));
    r.push_opt("net_visibility", report.net_visibility.map(|v| v.value));
    r.push_opt("net_visibility_error", report.net_visibility.map(|v| v.error));
    r.push_opt(
        "predicted_visibility",
        channels.predicted_visibility().ok().map(|v| v.v_total),
    );
    let overlap = channels.overlap_at(report.delay_mm);
    let expected =
        1.0 - expected_counts(&channels, overlap).photon_threefold / expected_counts(&channels, 0.0).photon_threefold;
    r.push("expected_net_visibility", expected);
    r.push("coherence_time_ps", coherence_time(&scenario.output_filter_a.mode())?.0);
    r.table = Some(table);
    Ok(r)
}
