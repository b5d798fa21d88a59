use std::path::{Path, PathBuf};
use std::time::Instant;

use optree::evalsuite::{generate, oracle_check, GeneratorName, GeneratorSpec, OracleReport};
use optree::format::FORMAT_VERSION;
use optree::sampler::draws_to_json;
use optree::{
    conditional_mean_density, hmap_tree, hutter_point_density, mean_density_dichotomous, sample_many,
    Dataset, GridCell, ParamsSource, PhiEngine, PiecewiseDensity, PriorSpec, TreeTopology,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EstimatorKind, RunConfig, SchemeKind, Settings};
use crate::error::{CliError, CliResult};
use crate::io::{grid_csv, points_csv, read_csv, sha256_hex, write_json, write_text};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AxisRescale {
    pub dim: usize,
    pub min: f64,
    pub max: f64,
}

/// Maps every coordinate onto `[0, 1]` through `(x - min) / (max - min)`; a
/// constant coordinate is mapped to `1/2`.
fn rescale(rows: &mut [Vec<f64>], dim: usize) -> Vec<AxisRescale> {
    (0..dim)
        .map(|d| {
            let min = rows.iter().map(|r| r[d]).fold(f64::INFINITY, f64::min);
            let max = rows.iter().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max);
            for r in rows.iter_mut() {
                r[d] = if max > min { ((r[d] - min) / (max - min)).clamp(0.0, 1.0) } else { 0.5 };
            }
            AxisRescale { dim: d, min, max }
        })
        .collect()
}

#[derive(Serialize)]
struct InputInfo<'a> {
    path: &'a str,
    sha256: &'a str,
    rows: usize,
}

#[derive(Serialize)]
struct Results {
    log_phi_root: f64,
    num_leaves: usize,
    tree_max_level: u32,
    table_entries: usize,
    total_mass: Option<f64>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    format_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    config_hash: String,
    input: InputInfo<'a>,
    rescale: Option<Vec<AxisRescale>>,
    results: Results,
    artifacts: Vec<&'static str>,
    flags: Vec<String>,
}

fn estimator_flags(cfg: &RunConfig) -> Vec<String> {
    let mut flags = Vec::new();
    match cfg.estimator {
        EstimatorKind::Hmap | EstimatorKind::Hutter => flags.push(
            "hmap: a posterior stopping probability of exactly 1/2 stops the tree".to_string(),
        ),
        EstimatorKind::StandardPt => flags.push(
            "standard-pt: rho = 0 and Beta(k^2, k^2) splits at child level k; refinement ends only at the precision threshold"
                .to_string(),
        ),
        EstimatorKind::Mean => {}
    }
    if cfg.estimator == EstimatorKind::Hutter {
        flags.push("hutter: tree.json holds the hierarchical MAP partition; grid values are point densities at cell centres".into());
    }
    flags
}

/// Values of the predictive density at the centre of each grid cell.
fn hutter_grid(engine: &PhiEngine, cfg: &RunConfig) -> CliResult<Vec<GridCell>> {
    let template = PiecewiseDensity::uniform(engine.scheme().root()).grid(cfg.grid);
    let values: Vec<f64> = template
        .par_iter()
        .map(|c| {
            let x: Vec<f64> = c.lower.iter().zip(&c.upper).map(|(a, b)| 0.5 * (a + b)).collect();
            hutter_point_density(engine, &x)
        })
        .collect::<Result<_, _>>()?;
    Ok(template
        .into_iter()
        .zip(values)
        .map(|(c, density)| GridCell { density, ..c })
        .collect())
}

pub fn estimate(settings: Settings) -> CliResult<()> {
    let started = Instant::now();
    // Scalar settings are checked before the input is opened.
    RunConfig::resolve(&settings, None, false)?;
    let input = settings
        .input
        .clone()
        .ok_or_else(|| CliError::Config("an input CSV is required (--input)".into()))?;
    let out_dir = settings.output.clone().unwrap_or_else(|| PathBuf::from("optree-out"));
    let table = read_csv(&input, settings.dim)?;
    let inferred = table.rows.first().map(Vec::len);
    let cfg = RunConfig::resolve(&settings, inferred, false)?;
    let mut rows = table.rows;
    let rescaled = (cfg.rescale && !rows.is_empty()).then(|| rescale(&mut rows, cfg.dim));
    let data = Dataset::from_points(cfg.dim, &rows)?;
    let scheme = cfg.partition();
    if let Err(e) = data.validate_for(&scheme) {
        let hint = if cfg.scheme == SchemeKind::Table { "" } else { " (use --rescale to map the data onto [0, 1]^p)" };
        return Err(CliError::Data(format!("{e}{hint}")));
    }
    let spec = match cfg.estimator {
        EstimatorKind::StandardPt => PriorSpec::standard_polya(scheme)?,
        _ => cfg.prior()?,
    };
    let engine = PhiEngine::new(data, spec, cfg.limits()?)?;
    let log_phi_root = engine.log_phi_root()?;

    let (tree, density, cells): (TreeTopology, Option<PiecewiseDensity>, Vec<GridCell>) = match cfg.estimator {
        EstimatorKind::Mean | EstimatorKind::StandardPt => {
            let m = mean_density_dichotomous(&engine, cfg.max_level)?;
            let cells = m.density.grid(cfg.grid);
            (m.tree, Some(m.density), cells)
        }
        EstimatorKind::Hmap => {
            let tree = hmap_tree(&engine)?;
            let f = conditional_mean_density(&tree, &engine)?;
            let cells = f.grid(cfg.grid);
            (tree, Some(f), cells)
        }
        EstimatorKind::Hutter => {
            let tree = hmap_tree(&engine)?;
            let cells = hutter_grid(&engine, &cfg)?;
            (tree, None, cells)
        }
    };

    let mut artifacts = vec!["density_grid.csv", "tree.json", "phi_table.json"];
    write_text(&out_dir.join("density_grid.csv"), &grid_csv(&cells, cfg.dim, cfg.scheme == SchemeKind::Table))?;
    write_text(&out_dir.join("tree.json"), &tree.to_json()?)?;
    write_text(&out_dir.join("phi_table.json"), &engine.table().to_json()?)?;
    if let Some(f) = &density {
        write_text(&out_dir.join("density.json"), &f.to_json()?)?;
        artifacts.push("density.json");
    }
    artifacts.push("metadata.json");
    let input_str = input.display().to_string();
    let meta = Metadata {
        format_version: FORMAT_VERSION,
        tool: "optree",
        tool_version: TOOL_VERSION,
        command: "estimate",
        config: &cfg,
        config_hash: sha256_hex(optree::format::to_json_string(&cfg)?.as_bytes()),
        input: InputInfo {
            path: &input_str,
            sha256: &table.sha256,
            rows: engine.data().len(),
        },
        rescale: rescaled,
        results: Results {
            log_phi_root,
            num_leaves: tree.num_leaves(),
            tree_max_level: tree.max_level(),
            table_entries: engine.table().len(),
            total_mass: density.as_ref().map(PiecewiseDensity::total_mass),
        },
        artifacts,
        flags: estimator_flags(&cfg),
    };
    write_json(&out_dir.join("metadata.json"), &meta)?;
    eprintln!(
        "estimate: n = {}, {} leaves, wrote {} in {:.3} s",
        engine.data().len(),
        tree.num_leaves(),
        out_dir.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulationMeta<'a> {
    format_version: u32,
    tool: &'static str,
    tool_version: &'static str,
    command: &'static str,
    generator: &'a GeneratorSpec,
    n: usize,
    rejections: u64,
    csv_sha256: String,
    notes: Vec<String>,
}

/// Companion metadata path: `data.csv` becomes `data.meta.json`.
pub fn simulation_meta_path(out: &Path) -> PathBuf {
    out.with_extension("meta.json")
}

pub fn simulate(generator: &str, n: usize, seed: u64, out: &Path) -> CliResult<()> {
    let name = GeneratorName::parse(generator)?;
    let spec = GeneratorSpec::named(name, seed)?;
    let sample = generate(&spec, n)?;
    let csv = points_csv(sample.data.points());
    write_text(out, &csv)?;
    let meta = SimulationMeta {
        format_version: FORMAT_VERSION,
        tool: "optree",
        tool_version: TOOL_VERSION,
        command: "simulate",
        generator: &spec,
        n,
        rejections: sample.rejections,
        csv_sha256: sha256_hex(csv.as_bytes()),
        notes: spec.notes(),
    };
    write_json(&simulation_meta_path(out), &meta)?;
    eprintln!("simulate: wrote {n} rows to {} ({} rejected draws)", out.display(), sample.rejections);
    Ok(())
}

pub fn sample_prior(settings: Settings, draws: u64, max_depth: u32) -> CliResult<()> {
    let cfg = RunConfig::resolve(&settings, None, true)?;
    if draws == 0 {
        return Err(CliError::Config("at least one draw is required".into()));
    }
    let spec = PriorSpec::for_sampling(cfg.partition(), cfg.rho, cfg.alpha_rule())?;
    let result = sample_many(ParamsSource::Prior(&spec), max_depth, cfg.seed, draws)?;
    let json = draws_to_json(&result)?;
    match &settings.output {
        Some(path) => write_text(path, &json)?,
        None => print!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleDoc<'a> {
    format_version: u32,
    passed: bool,
    reports: &'a [OracleReport],
}

/// Compares the recursion with exact enumeration. With `sweep`, every table
/// dimension up to `p` and every sample size up to `n` is checked.
pub fn oracle(p: usize, n: usize, trials: usize, seed: u64, sweep: bool, out: Option<&Path>) -> CliResult<()> {
    let cases: Vec<(usize, usize)> = if sweep {
        (1..=p).flat_map(|pp| (0..=n).map(move |nn| (pp, nn))).collect()
    } else {
        vec![(p, n)]
    };
    let reports = cases
        .into_par_iter()
        .map(|(pp, nn)| oracle_check(pp, nn, trials, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let passed = reports.iter().all(|r| r.passed);
    let json = optree::format::to_json_string(&OracleDoc {
        format_version: FORMAT_VERSION,
        passed,
        reports: &reports,
    })?;
    match out {
        Some(path) => write_text(path, &json)?,
        None => print!("{json}"),
    }
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    if passed {
        eprintln!("oracle-check: {} case(s), max relative error {worst:e}", reports.len());
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("max relative error {worst:e} exceeds the tolerance")))
    }
}
