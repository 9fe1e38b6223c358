//! The `gen-data`, `render`, and `metrics` subcommands.

use std::fs;
use std::path::Path;

use genlab_core::builtin::{builtin_dataset, builtin_mask, is_builtin_name, BuiltinData};
use genlab_core::grid::{ImageGrid, Mask};
use genlab_core::introspect::{
    distance_to_training_map, eval_grid, first_layer_zero_lines, render_zero_lines, Viewport,
};
use genlab_core::metrics::{compare_report, masked_mse, reports_to_csv};
use genlab_core::mlp::decode_network;
use genlab_core::pgm::save_pgm;
use genlab_core::scene::{render_scene, SceneSpec};
use genlab_core::svm::{decision_grid, decode_model};

use crate::output::CliError;
use crate::run::load_pgm_file;

fn save(img: &ImageGrid, path: &Path) -> Result<(), CliError> {
    save_pgm(img, path).map_err(|e| match e {
        genlab_core::pgm::PgmError::Io(io_err) => CliError::io(io_err, path.display()),
        other => CliError::Numeric(other.to_string()),
    })
}

/// `gen-data <name-or-scene.json> <out.pgm>`: writes a builtin dataset,
/// the builtin mask, or a rendered scene file.
pub fn cmd_gen_data(
    name: &str,
    out_path: &Path,
    width: usize,
    height: usize,
) -> Result<(), CliError> {
    let img = if is_builtin_name(name) {
        if width == 64 && height == 64 {
            match builtin_dataset(name).map_err(|e| CliError::Config(e.to_string()))? {
                BuiltinData::Image(img) => img,
                BuiltinData::Mask(mask) => mask.to_image(),
            }
        } else {
            // Builtins scale: scenes re-render, the mask band keeps its
            // proportions.
            match name {
                "theta_l" => render_scene(&genlab_core::theta_l_scene(), width, height)
                    .map_err(|e| CliError::Config(e.to_string()))?,
                "theta_c" => render_scene(&genlab_core::theta_c_scene(), width, height)
                    .map_err(|e| CliError::Config(e.to_string()))?,
                _ => builtin_mask(width, height).to_image(),
            }
        }
    } else if name.ends_with(".json") && Path::new(name).exists() {
        let text = fs::read_to_string(name).map_err(|e| CliError::io(e, name))?;
        let spec = SceneSpec::from_json(&text).map_err(|e| CliError::Config(e.to_string()))?;
        render_scene(&spec, width, height).map_err(|e| CliError::Config(e.to_string()))?
    } else {
        return Err(CliError::Config(format!(
            "unknown dataset {name:?}: expected theta_l, theta_c, mask, or a scene .json path"
        )));
    };
    save(&img, out_path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderKind {
    Surface,
    Hyperplanes,
    DistanceMap,
    Binary,
}

enum LoadedModel {
    Network(genlab_core::mlp::NetworkParams),
    Svm(genlab_core::svm::SvmModel),
    MaskImage(Mask),
}

fn load_model_file(path: &Path) -> Result<LoadedModel, CliError> {
    let head = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Config(format!("{}: model file not found", path.display()))
        } else {
            CliError::io(e, path.display())
        }
    })?;
    if head.starts_with(b"FNN 1") {
        let text = String::from_utf8(head)
            .map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
        Ok(LoadedModel::Network(decode_network(&text).map_err(|e| {
            CliError::Config(format!("{}: {e}", path.display()))
        })?))
    } else if head.starts_with(b"NUSVC 1") {
        let text = String::from_utf8(head)
            .map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
        Ok(LoadedModel::Svm(decode_model(&text).map_err(|e| {
            CliError::Config(format!("{}: {e}", path.display()))
        })?))
    } else if head.starts_with(b"P5") {
        Ok(LoadedModel::MaskImage(Mask::from_image(&load_pgm_file(
            path,
        )?)))
    } else {
        Err(CliError::Config(format!(
            "{}: unrecognized model file (expected FNN, NUSVC, or P5 header)",
            path.display()
        )))
    }
}

/// `render <model> <kind> <out.pgm>`: renders the requested figure for a
/// saved network, a saved nu-SVC model, or a mask PGM.
pub fn cmd_render(
    model_path: &Path,
    kind: RenderKind,
    out_path: &Path,
    width: usize,
    height: usize,
) -> Result<(), CliError> {
    let mismatch = |what: &str| {
        Err(CliError::Config(format!(
            "render kind does not apply to {what}"
        )))
    };
    let img = match (load_model_file(model_path)?, kind) {
        (LoadedModel::Network(net), RenderKind::Surface) => {
            if net.input_size() != 2 || net.output_size() != 1 {
                return Err(CliError::Config(
                    "surface rendering needs a 2-input, 1-output network".into(),
                ));
            }
            eval_grid(|x1, x2| net.predict2(x1, x2), width, height, &Viewport::data())
                .map_err(|e| CliError::Numeric(e.to_string()))?
        }
        (LoadedModel::Network(net), RenderKind::Hyperplanes) => {
            let lines = first_layer_zero_lines(&net)
                .map_err(|e| CliError::Config(e.to_string()))?;
            render_zero_lines(&lines.lines, width, height, &Viewport::diagram(), 0.25)
                .map_err(|e| CliError::Numeric(e.to_string()))?
        }
        (LoadedModel::Network(_), _) => return mismatch("a network model"),
        (LoadedModel::Svm(model), RenderKind::Surface) => {
            decision_grid(&model, width, height, &Viewport::data())
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .0
        }
        (LoadedModel::Svm(model), RenderKind::Binary) => {
            decision_grid(&model, width, height, &Viewport::data())
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .1
        }
        (LoadedModel::Svm(_), _) => return mismatch("an svm model"),
        (LoadedModel::MaskImage(mask), RenderKind::DistanceMap) => {
            distance_to_training_map(&mask)
                .map_err(|e| CliError::Numeric(e.to_string()))?
                .normalized
        }
        (LoadedModel::MaskImage(_), _) => return mismatch("a mask image"),
    };
    save(&img, out_path)
}

/// `metrics --pred --truth --mask`: prints the region-wise MSE table and
/// optionally writes it as CSV.
pub fn cmd_metrics(
    pred: &Path,
    truth: &Path,
    mask: &Path,
    name: &str,
    csv_out: Option<&Path>,
) -> Result<(), CliError> {
    let pred_img = load_pgm_file(pred)?;
    let truth_img = load_pgm_file(truth)?;
    let mask_grid = Mask::from_image(&load_pgm_file(mask)?);
    let report = masked_mse(&pred_img, &truth_img, &mask_grid)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let rows = vec![(name.to_string(), report)];
    print!("{}", compare_report(&rows));
    if let Some(path) = csv_out {
        fs::write(path, reports_to_csv(&rows)).map_err(|e| CliError::io(e, path.display()))?;
    }
    Ok(())
}
