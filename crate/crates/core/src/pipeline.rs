//! Named pipelines: run the stages a figure or table needs and write CSV
//! products plus a `manifest.json` into the output directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bohmian::BohmianEnsemble;
use crate::classical::{arch_curves, arch_table_csv};
use crate::config::{RunConfig, Variant};
use crate::eigen::bound_spectrum;
use crate::error::{Error, Result};
use crate::grid::{TimeSeries, Trajectory};
use crate::potential::PotentialSpec;
use crate::spectral::{
    band_pass, cutoff_estimate, gabor_map, median_peak_spacing, power_spectrum, CutoffEstimate,
    CutoffOptions,
};
use crate::tdse::{ground_state, propagate_with, PropagationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Eigen,
    Propagate,
    Bohmian,
    Classical,
    Spectrum,
    Gabor,
    Fig1,
    Fig3,
}

impl Pipeline {
    pub const ALL: [Pipeline; 8] = [
        Pipeline::Eigen,
        Pipeline::Propagate,
        Pipeline::Bohmian,
        Pipeline::Classical,
        Pipeline::Spectrum,
        Pipeline::Gabor,
        Pipeline::Fig1,
        Pipeline::Fig3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Eigen => "eigen",
            Pipeline::Propagate => "propagate",
            Pipeline::Bohmian => "bohmian",
            Pipeline::Classical => "classical",
            Pipeline::Spectrum => "spectrum",
            Pipeline::Gabor => "gabor",
            Pipeline::Fig1 => "fig1",
            Pipeline::Fig3 => "fig3",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Pipeline::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown pipeline `{s}`")))
    }
}

/// What a pipeline wrote, with the parameters it ran with.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub pipeline: Pipeline,
    pub version: &'static str,
    pub parameters: BTreeMap<String, String>,
    /// File names relative to the output directory, in write order.
    pub outputs: Vec<String>,
    /// Scalar results (energies, cutoffs, drifts) keyed by name.
    pub results: BTreeMap<String, String>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "pipeline": self.pipeline.name(),
            "version": self.version,
            "parameters": self.parameters,
            "outputs": self.outputs,
            "results": self.results,
        });
        let mut s = serde_json::to_string_pretty(&v).expect("manifest is plain data");
        s.push('\n');
        s
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Tracks written files so a failed run can remove them.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    results: BTreeMap<String, String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let probe = dir.join(".bhhg-write-test");
        File::create(&probe).map_err(|e| {
            Error::Config(format!("output directory {} is not writable: {e}", dir.display()))
        })?;
        std::fs::remove_file(&probe)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            results: BTreeMap::new(),
        })
    }

    fn claim(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.claim(name);
        std::fs::write(path, contents)?;
        Ok(())
    }

    fn note(&mut self, key: &str, value: impl fmt::Display) {
        self.results.insert(key.to_string(), value.to_string());
    }

    fn remove_all(&self) {
        for f in &self.files {
            let _ = std::fs::remove_file(self.dir.join(f));
        }
        let _ = std::fs::remove_file(self.dir.join(MANIFEST_FILE));
    }
}

/// Runs `pipeline` with `config`, writing into `config.output`. On failure
/// every file written by this run is removed and the error names the stage.
pub fn run_pipeline(config: &RunConfig, pipeline: Pipeline) -> Result<Manifest> {
    config.validate()?;
    let mut out = Outputs::new(&config.output)?;
    match run_stages(config, pipeline, &mut out) {
        Ok(()) => {
            let mut parameters = config.to_pairs();
            parameters.remove("output.dir");
            let manifest = Manifest {
                pipeline,
                version: env!("CARGO_PKG_VERSION"),
                parameters,
                outputs: out.files.clone(),
                results: out.results.clone(),
            };
            if let Err(e) = std::fs::write(out.dir.join(MANIFEST_FILE), manifest.to_json()) {
                out.remove_all();
                return Err(e.into());
            }
            Ok(manifest)
        }
        Err(e) => {
            out.remove_all();
            Err(e)
        }
    }
}

fn run_stages(cfg: &RunConfig, pipeline: Pipeline, out: &mut Outputs) -> Result<()> {
    let spec = cfg.potential_spec()?;
    match pipeline {
        Pipeline::Eigen => eigen_stage(cfg, out),
        Pipeline::Propagate => simulate(cfg, &spec, false, "", out).map(|_| ()),
        Pipeline::Bohmian => simulate(cfg, &spec, true, "", out).map(|_| ()),
        Pipeline::Classical => classical_stage(cfg, &[cfg.potential.variant], out),
        Pipeline::Spectrum | Pipeline::Fig1 => {
            let run = simulate(cfg, &spec, true, "", out)?;
            spectrum_stage(cfg, &run, "", out)
        }
        Pipeline::Gabor => {
            let run = simulate(cfg, &spec, true, "", out)?;
            gabor_stage(cfg, &run, "", out)
        }
        Pipeline::Fig3 => {
            for variant in [Variant::Softcore, Variant::Truncated] {
                let spec = cfg.potential.spec_for(variant)?;
                let prefix = format!("{}_", variant.label());
                let run = simulate(cfg, &spec, true, &prefix, out)?;
                gabor_stage(cfg, &run, &prefix, out)?;
            }
            classical_stage(cfg, &[Variant::Softcore, Variant::Truncated], out)?;
            out.write("fig3_windows.csv", &window_presets_csv(cfg.pulse.period()))
        }
    }
}

/// Peripheral-trajectory windows, in optical cycles: near and far excursions
/// for each potential.
pub const PERIPHERAL_WINDOWS: [(Variant, &str, f64, f64); 4] = [
    (Variant::Softcore, "near", 5.0, 6.0),
    (Variant::Softcore, "far", 9.0, 10.0),
    (Variant::Truncated, "near", 4.0, 5.0),
    (Variant::Truncated, "far", 6.0, 7.0),
];

fn window_presets_csv(period: f64) -> String {
    let mut s = String::from("potential,window,cycle_from,cycle_to,t_from,t_to\n");
    for (v, name, a, b) in PERIPHERAL_WINDOWS {
        s.push_str(&format!("{},{name},{a},{b},{},{}\n", v.label(), a * period, b * period));
    }
    s
}

fn eigen_stage(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let grid = cfg.grid()?;
    for variant in [Variant::Softcore, Variant::Truncated] {
        let spec = cfg.potential.spec_for(variant).map_err(|e| e.in_stage("eigen"))?;
        let bs = bound_spectrum(&grid, &spec, variant.label(), cfg.eigen_states);
        out.write(&format!("eigen_{}.csv", variant.label()), &bs.to_csv())?;
        out.note(&format!("eigen.{}.bound_states", variant.label()), bs.energies.len());
        if let Some(e0) = bs.energies.first() {
            out.note(&format!("eigen.{}.epsilon0", variant.label()), format!("{e0:.8}"));
        }
        out.note(&format!("eigen.{}.complete", variant.label()), bs.is_complete());
    }
    Ok(())
}

/// Products of one TDSE run.
struct Simulation {
    epsilon0: f64,
    record: PropagationRecord,
    trajectories: Vec<Trajectory>,
}

impl Simulation {
    /// First trajectory started within `1e-6` of `x0`.
    fn trajectory_at(&self, x0: f64) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| (t.x0 - x0).abs() < 1e-6)
    }
}

const CENTRAL_X0: f64 = 0.0;
const PERIPHERAL_X0: f64 = 1.8;

fn series_csv(header: &str, ts: &TimeSeries) -> String {
    let mut s = format!("{header}\n");
    for (t, v) in ts.iter() {
        s.push_str(&format!("{t:.10e},{v:.12e}\n"));
    }
    s
}

fn simulate(
    cfg: &RunConfig,
    spec: &PotentialSpec,
    with_bohmian: bool,
    prefix: &str,
    out: &mut Outputs,
) -> Result<Simulation> {
    let grid = cfg.grid()?;
    let (psi0, epsilon0) = ground_state(&grid, spec).map_err(|e| e.in_stage("ground-state"))?;
    out.note(&format!("{prefix}epsilon0"), format!("{epsilon0:.8}"));

    let mut ensemble = with_bohmian.then(|| BohmianEnsemble::new(&cfg.bohmian.x0, cfg.bohmian.rho_floor));
    let mut snapshots = if cfg.schedule.write_snapshots {
        let path = out.claim(&format!("{prefix}snapshots.bhh"));
        Some(BufWriter::new(File::create(path)?))
    } else {
        None
    };
    let schedule = cfg.propagation_schedule();
    let record = propagate_with(&psi0, &schedule, spec, Some(&cfg.pulse), |psi| {
        if let Some(w) = snapshots.as_mut() {
            psi.write_snapshot(w).map_err(|e| e.in_stage("propagate"))?;
        }
        if let Some(ens) = ensemble.as_mut() {
            ens.push(psi).map_err(|e| e.in_stage("bohmian"))?;
        }
        Ok(())
    })
    .map_err(|e| e.in_stage("propagate"))?;
    if let Some(mut w) = snapshots {
        w.flush()?;
    }

    out.write(&format!("{prefix}accel.csv"), &series_csv("t,a", &record.accel))?;
    out.write(&format!("{prefix}field.csv"), &series_csv("t,E", &record.field))?;
    out.write(&format!("{prefix}norm.csv"), &series_csv("t,norm", &record.norm))?;
    let norms = record.norm.values();
    out.note(
        &format!("{prefix}norm_final"),
        format!("{:.12}", norms[norms.len() - 1]),
    );

    let trajectories = match ensemble {
        Some(ens) => ens.finish().map_err(|e| e.in_stage("bohmian"))?,
        None => Vec::new(),
    };
    if !trajectories.is_empty() {
        let mut listing = String::from("index,x0,exited,n_samples,file\n");
        for (i, tr) in trajectories.iter().enumerate() {
            let name = format!("{prefix}traj_bohmian_{i:03}_x0_{:+.4}.csv", tr.x0);
            out.write(&name, &tr.to_csv())?;
            listing.push_str(&format!("{i},{},{},{},{name}\n", tr.x0, tr.exited, tr.len()));
        }
        out.write(&format!("{prefix}bohmian_ensemble.csv"), &listing)?;
        let exited = trajectories.iter().filter(|t| t.exited).count();
        out.note(&format!("{prefix}bohmian.exited"), exited);
    }
    Ok(Simulation {
        epsilon0,
        record,
        trajectories,
    })
}

fn describe(est: &CutoffEstimate) -> (String, String) {
    match est {
        CutoffEstimate::Cutoff { harmonic, .. } => ("cutoff".into(), format!("{harmonic:.3}")),
        CutoffEstimate::NoPlateau { .. } => ("no-plateau".into(), String::new()),
    }
}

fn spectrum_stage(cfg: &RunConfig, run: &Simulation, prefix: &str, out: &mut Outputs) -> Result<()> {
    let omega = cfg.pulse.omega;
    let mut series: Vec<(&str, &TimeSeries)> = vec![("accel", &run.record.accel)];
    if let Some(t) = run.trajectory_at(CENTRAL_X0) {
        series.push(("central", &t.positions));
    }
    if let Some(t) = run.trajectory_at(PERIPHERAL_X0) {
        series.push(("peripheral", &t.positions));
    }
    let mut table = String::from("series,result,harmonic,contrast_db\n");
    for (name, ts) in series {
        let ps = power_spectrum(ts, cfg.spectral.window);
        out.write(&format!("{prefix}spectrum_{name}.csv"), &ps.to_csv(omega))?;
        let est = cutoff_estimate(&ps, run.epsilon0, &cfg.pulse, &CutoffOptions::default())
            .map_err(|e| e.in_stage("spectrum"))?;
        let (kind, h) = describe(&est);
        table.push_str(&format!("{name},{kind},{h},{:.3}\n", est.contrast_db()));
        out.note(&format!("{prefix}cutoff.{name}"), if h.is_empty() { kind } else { h });
    }
    if let Some(t) = run.trajectory_at(CENTRAL_X0) {
        let fast = band_pass(&t.positions, omega, (BURST_CUT, f64::INFINITY));
        let flat = (cfg.pulse.tau_on(), cfg.pulse.tau_off());
        if let Some(gap) = median_peak_spacing(&fast, flat) {
            out.note(&format!("{prefix}burst_spacing_cycles"), format!("{:.5}", gap / cfg.pulse.period()));
        }
    }
    out.write(&format!("{prefix}cutoffs.csv"), &table)
}

/// High-pass edge, in harmonic orders, isolating the fast oscillation of the
/// central trajectory.
pub const BURST_CUT: f64 = 15.0;

fn gabor_stage(cfg: &RunConfig, run: &Simulation, prefix: &str, out: &mut Outputs) -> Result<()> {
    let omega = cfg.pulse.omega;
    let sigma = cfg.sigma();
    let s = &cfg.spectral;
    let n_harm = (s.harmonic_max / s.harmonic_step).round() as usize;
    let omega_axis: Vec<f64> = (0..=n_harm).map(|i| i as f64 * s.harmonic_step * omega).collect();
    for (name, x0) in [("central", CENTRAL_X0), ("peripheral", PERIPHERAL_X0)] {
        let Some(tr) = run.trajectory_at(x0) else {
            continue;
        };
        let h = &tr.positions;
        let step = cfg.pulse.period() / s.t_points_per_cycle as f64;
        let n_t = ((h.t_end() - h.t0()) / step).floor() as usize + 1;
        let t_axis: Vec<f64> = (0..n_t).map(|i| h.t0() + i as f64 * step).collect();
        let map = gabor_map(h, sigma, &t_axis, &omega_axis).map_err(|e| e.in_stage("gabor"))?;
        out.write(&format!("{prefix}gabor_{name}.csv"), &map.to_csv(omega))?;
    }
    Ok(())
}

fn classical_stage(cfg: &RunConfig, variants: &[Variant], out: &mut Outputs) -> Result<()> {
    let carrier = cfg.carrier();
    let scan = cfg.arch_scan();
    let eps = cfg.classical.epsilon0;
    let free = arch_curves::<PotentialSpec>(&carrier, None, eps, &scan).map_err(|e| e.in_stage("classical"))?;
    let apex = free.iter().map(|p| p.harmonic_order).fold(f64::NEG_INFINITY, f64::max);
    out.note("classical.field_only.apex_harmonic", format!("{apex:.4}"));
    out.write("arches_field_only.csv", &arch_table_csv(&free))?;
    for v in variants {
        let spec = cfg.potential.spec_for(*v)?;
        let table = arch_curves(&carrier, Some(&spec), eps, &scan).map_err(|e| e.in_stage("classical"))?;
        out.write(&format!("arches_{}.csv", v.label()), &arch_table_csv(&table))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn small(dir: &Path, extra: &str) -> RunConfig {
        let text = format!(
            "grid.x_min = -100\ngrid.x_max = 100\ngrid.n_points = 1024\n\
             pulse.n_ramp = 0.5\npulse.n_flat = 0.5\nschedule.dt = 0.2\n\
             schedule.absorber_width = 20\nbohmian.x0 = -1, 0, 1.8\n\
             classical.n_points = 200\nspectral.harmonic_max = 60\n\
             spectral.harmonic_step = 1\noutput.dir = {}\n{extra}",
            dir.display()
        );
        parse_config_str(&text, Path::new("small.cfg")).unwrap()
    }

    #[test]
    fn pipeline_names_round_trip() {
        for p in Pipeline::ALL {
            assert_eq!(p.name().parse::<Pipeline>().unwrap(), p);
        }
        assert!("fig2".parse::<Pipeline>().is_err());
    }

    #[test]
    fn manifest_lists_every_output() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path(), "");
        let m = run_pipeline(&cfg, Pipeline::Gabor).unwrap();
        let mut on_disk: Vec<String> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n != MANIFEST_FILE)
            .collect();
        on_disk.sort();
        let mut listed = m.outputs.clone();
        listed.sort();
        assert_eq!(on_disk, listed);
        assert!(listed.contains(&"gabor_central.csv".to_string()));
        assert!(listed.contains(&"gabor_peripheral.csv".to_string()));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(json["pipeline"], "gabor");
        assert_eq!(json["outputs"].as_array().unwrap().len(), m.outputs.len());
    }

    #[test]
    fn failure_removes_partial_outputs() {
        let dir = tempfile::tempdir().unwrap();
        // a floor above every density fails the Bohmian stage on its first
        // snapshot
        let cfg = small(dir.path(), "bohmian.rho_floor = 10\n");
        let err = run_pipeline(&cfg, Pipeline::Bohmian).unwrap_err();
        match &err {
            Error::Stage { stage, .. } => assert_eq!(stage, "bohmian"),
            other => panic!("{other:?}"),
        }
        assert_eq!(err.exit_code(), 3);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
