//! The `run` subcommand: trains every replica of the configured machine,
//! writes figures, models, metrics.csv, and manifest.json under the
//! output directory. Reruns with identical config produce byte-identical
//! outputs.

use std::fmt::Display;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use genlab_core::builtin::{builtin_dataset, BuiltinData};
use genlab_core::grid::{split_by_mask, ImageGrid, Mask};
use genlab_core::introspect::{eval_grid, first_layer_zero_lines, render_zero_lines, Viewport};
use genlab_core::metrics::{masked_mse, nu_property_report, reports_to_csv, RegionReport};
use genlab_core::mlp::{
    encode_network, init_network, init_network_uniform, train, MlpError, NetworkSpec, TrainConfig,
};
use genlab_core::pgm::{encode_pgm, load_pgm};
use genlab_core::rng::Rng;
use genlab_core::svm::{binarize, decision_grid, encode_model, solve_nu_svc, NuSvcConfig, SvmError};

use crate::config::{ExperimentConfig, FnnMachine, InitSpec, MachineConfig, NusvcMachine, Source};
use crate::output::{sha256_hex, CliError, OutputTracker};

/// Opacity used for hyperplane diagrams; about four overlapping lines
/// reach near-black.
const LINE_OPACITY: f64 = 0.25;

pub struct RunOptions {
    pub seed_override: Option<u64>,
    pub out_override: Option<PathBuf>,
    pub quiet: bool,
}

fn config_err(e: impl Display) -> CliError {
    CliError::Config(e.to_string())
}

fn numeric_err(e: impl Display) -> CliError {
    CliError::Numeric(e.to_string())
}

/// Loads a PGM whose absence is a config problem, not an I/O failure.
pub fn load_pgm_file(path: &Path) -> Result<ImageGrid, CliError> {
    load_pgm(path).map_err(|e| match e {
        genlab_core::pgm::PgmError::Io(io_err) if io_err.kind() == io::ErrorKind::NotFound => {
            CliError::Config(format!("{}: file not found", path.display()))
        }
        genlab_core::pgm::PgmError::Io(io_err) => CliError::io(io_err, path.display()),
        other => CliError::Config(format!("{}: {other}", path.display())),
    })
}

fn resolve_dataset(source: &Source) -> Result<ImageGrid, CliError> {
    match source {
        Source::Builtin(name) => match builtin_dataset(name).map_err(config_err)? {
            BuiltinData::Image(img) => Ok(img),
            BuiltinData::Mask(_) => Err(CliError::Config(format!(
                "builtin {name:?} is a mask, not a dataset image"
            ))),
        },
        Source::File(file) => load_pgm_file(&file.pgm),
    }
}

fn resolve_mask(source: &Source) -> Result<Mask, CliError> {
    match source {
        Source::Builtin(name) => match builtin_dataset(name).map_err(config_err)? {
            BuiltinData::Mask(mask) => Ok(mask),
            BuiltinData::Image(img) => Ok(Mask::from_image(&img)),
        },
        Source::File(file) => Ok(Mask::from_image(&load_pgm_file(&file.pgm)?)),
    }
}

pub fn cmd_run(config_path: &Path, options: &RunOptions) -> Result<(), CliError> {
    let config_bytes = fs::read(config_path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            CliError::Config(format!("{}: config file not found", config_path.display()))
        } else {
            CliError::io(e, config_path.display())
        }
    })?;
    let config_hash = sha256_hex(&config_bytes);
    let text = String::from_utf8(config_bytes)
        .map_err(|_| CliError::Config("config file is not UTF-8".into()))?;
    let mut config = ExperimentConfig::from_json(&text).map_err(CliError::Config)?;
    if let Some(seed) = options.seed_override {
        config.seed = seed;
    }
    if let Some(out) = &options.out_override {
        config.output_dir = out.clone();
    }

    let dataset = resolve_dataset(&config.dataset)?;
    let mask = resolve_mask(&config.mask)?;
    if dataset.width() != mask.width() || dataset.height() != mask.height() {
        return Err(CliError::Config(format!(
            "dataset is {}x{} but mask is {}x{}",
            dataset.width(),
            dataset.height(),
            mask.width(),
            mask.height()
        )));
    }

    let mut tracker = OutputTracker::new(config.output_dir.clone());
    let result = run_machines(&config, &dataset, &mask, &mut tracker, options)
        .and_then(|()| tracker.write_manifest(&config_hash, config.seed));
    if result.is_err() {
        tracker.cleanup();
    }
    result
}

fn run_machines(
    config: &ExperimentConfig,
    dataset: &ImageGrid,
    mask: &Mask,
    tracker: &mut OutputTracker,
    options: &RunOptions,
) -> Result<(), CliError> {
    let rows = match &config.machine {
        MachineConfig::Fnn(fnn) => run_fnn(config, fnn, dataset, mask, tracker, options)?,
        MachineConfig::Nusvc(svc) => run_nusvc(config, svc, dataset, mask, tracker, options)?,
    };
    tracker.write("metrics.csv", reports_to_csv(&rows).as_bytes())
}

fn run_fnn(
    config: &ExperimentConfig,
    fnn: &FnnMachine,
    dataset: &ImageGrid,
    mask: &Mask,
    tracker: &mut OutputTracker,
    options: &RunOptions,
) -> Result<Vec<(String, RegionReport)>, CliError> {
    let spec = NetworkSpec::new(fnn.layer_sizes.clone()).map_err(config_err)?;
    let snapshots = fnn.snapshots.resolve().map_err(CliError::Config)?;
    let (train_set, _) = split_by_mask(dataset, mask).map_err(config_err)?;

    let mut rows = Vec::new();
    for replica in 0..config.replicas {
        let replica_seed = config.seed.wrapping_add(replica as u64);
        let mut master = Rng::new(replica_seed);
        let mut init_rng = master.fork();
        let sample_seed = master.next_u64();

        let params = match &fnn.init {
            InitSpec::Uniform(u) => init_network_uniform(&spec, &mut init_rng, u.uniform),
            InitSpec::Named(_) => init_network(&spec, &mut init_rng),
        };
        let mut train_config = TrainConfig::new(fnn.iterations);
        train_config.learning_rate = fnn.learning_rate;
        train_config.weight_decay = fnn.weight_decay;
        train_config.seed = sample_seed;
        train_config.snapshot_iterations = snapshots.clone();

        let mut taken = Vec::new();
        train(&params, &train_set, &train_config, |iter, snapshot| {
            taken.push((iter, snapshot));
        })
        .map_err(|e| match e {
            MlpError::Divergence { iteration } => CliError::Numeric(format!(
                "replica {replica} diverged at iteration {iteration}"
            )),
            other => config_err(other),
        })?;

        for (iteration, snapshot) in taken {
            let surface = eval_grid(
                |x1, x2| snapshot.predict2(x1, x2),
                dataset.width(),
                dataset.height(),
                &Viewport::data(),
            )
            .map_err(numeric_err)?;
            let zero_lines = first_layer_zero_lines(&snapshot).map_err(config_err)?;
            let diagram = render_zero_lines(
                &zero_lines.lines,
                dataset.width(),
                dataset.height(),
                &Viewport::diagram(),
                LINE_OPACITY,
            )
            .map_err(numeric_err)?;

            let dir = format!("{replica}/{iteration}");
            tracker.write(
                &format!("{dir}/surface.pgm"),
                &encode_pgm(&surface).map_err(numeric_err)?,
            )?;
            tracker.write(
                &format!("{dir}/hyperplanes.pgm"),
                &encode_pgm(&diagram).map_err(numeric_err)?,
            )?;
            tracker.write(&format!("{dir}/model.txt"), encode_network(&snapshot).as_bytes())?;

            let report = masked_mse(&surface, dataset, mask).map_err(config_err)?;
            if !options.quiet {
                eprintln!(
                    "fnn replica {replica} iteration {iteration}: train_mse {:.6} test_mse {:.6}",
                    report.train_mse, report.test_mse
                );
            }
            rows.push((format!("fnn-r{replica}-i{iteration}"), report));
        }
    }
    Ok(rows)
}

fn run_nusvc(
    config: &ExperimentConfig,
    svc: &NusvcMachine,
    dataset: &ImageGrid,
    mask: &Mask,
    tracker: &mut OutputTracker,
    options: &RunOptions,
) -> Result<Vec<(String, RegionReport)>, CliError> {
    let labeled = binarize(dataset, svc.threshold, Some(mask)).map_err(|e| match e {
        SvmError::SingleClass => numeric_err("binarized training set has a single class"),
        other => config_err(other),
    })?;
    let mut solver_config = NuSvcConfig::new(svc.gamma);
    solver_config.nu = svc.nu;
    solver_config.cost = svc.cost;
    solver_config.epsilon = svc.epsilon;
    solver_config.max_iterations = svc.max_iterations;

    let mut rows = Vec::new();
    for replica in 0..config.replicas {
        let model = solve_nu_svc(&labeled, &solver_config).map_err(|e| match e {
            SvmError::Infeasible { .. } | SvmError::NonConvergence { .. } => numeric_err(e),
            other => config_err(other),
        })?;
        let (continuous, binary) =
            decision_grid(&model, dataset.width(), dataset.height(), &Viewport::data())
                .map_err(numeric_err)?;

        let dir = format!("{replica}/final");
        tracker.write(
            &format!("{dir}/surface.pgm"),
            &encode_pgm(&continuous).map_err(numeric_err)?,
        )?;
        tracker.write(
            &format!("{dir}/binary.pgm"),
            &encode_pgm(&binary).map_err(numeric_err)?,
        )?;
        tracker.write(&format!("{dir}/model.txt"), encode_model(&model).as_bytes())?;

        let report = masked_mse(&continuous, dataset, mask).map_err(config_err)?;
        if !options.quiet {
            // cost rescales the box, so the defining bounds apply to
            // nu/cost rather than nu itself.
            let effective_nu = (svc.nu / svc.cost).min(1.0);
            let nu_report =
                nu_property_report(&model, &labeled, effective_nu).map_err(numeric_err)?;
            eprintln!(
                "nusvc replica {replica}: train_mse {:.6} test_mse {:.6} sv_fraction {:.3} \
                 bounded_fraction {:.3} nu_bounds_hold({effective_nu:.3}) {}",
                report.train_mse,
                report.test_mse,
                nu_report.sv_fraction,
                nu_report.bounded_fraction,
                nu_report.holds
            );
        }
        rows.push((format!("nusvc-r{replica}-final"), report));
    }
    Ok(rows)
}
