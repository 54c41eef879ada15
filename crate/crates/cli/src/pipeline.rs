//! The pipeline commands and their artifacts.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use flate2::write::GzEncoder;
use flate2::Compression;
use log::{info, warn};

use riskflow_core::features::{assemble_dataset, category_vocab, AssembleOptions, Dataset};
use riskflow_core::ingest::{
    bin_crimes, parse_crimes, parse_movements, parse_venues, resolve_movements, write_rejects, CellCounts, OdAggregate,
    Parsed, Reject, Venue,
};
use riskflow_core::model::ablation::run_ablation;
use riskflow_core::model::suite::{read_eval_csv, score_models, write_eval_csv};
use riskflow_core::model::{evaluate_suite, train_suite, AblationReport, EvalRow};
use riskflow_core::risk::build_risk_table;
use riskflow_core::synth::generate_city;

use crate::config::Resolved;
use crate::error::{CliError, Result};
use crate::report::{self, Metric};

pub const FEATURES: &str = "features.csv";
pub const RISK_TABLE: &str = "risk_table.csv";
pub const CELL_COUNTS: &str = "cell_counts.csv";
pub const OD_COUNTS: &str = "od_counts.csv";
pub const MODELS: &str = "models.json.gz";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const EVALUATION: &str = "mae_rmse.csv";
pub const ABLATION: &str = "ablation.csv";
pub const REPORT: &str = "report.md";
pub const MAE_SVG: &str = "mae.svg";
pub const RMSE_SVG: &str = "rmse.svg";
pub const PVALUES: &str = "pvalues.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Command {
    Ingest,
    Features,
    Train,
    Evaluate,
    Ablate,
    Synth,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Features => "features",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Ablate => "ablate",
            Command::Synth => "synth",
            Command::Report => "report",
        }
    }
}

/// Files a command read and wrote, plus human-readable notes.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn run(cmd: Command, cfg: &Resolved) -> Result<Outcome> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    match cmd {
        Command::Synth => synth(cfg),
        Command::Ingest => ingest(cfg),
        Command::Features => features(cfg),
        Command::Train => train(cfg),
        Command::Evaluate => evaluate(cfg),
        Command::Ablate => ablate(cfg),
        Command::Report => report(cfg),
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> riskflow_core::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    write_bytes(path, &buf)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn synth(cfg: &Resolved) -> Result<Outcome> {
    let city = generate_city(&cfg.config.synth)?;
    let mut o = Outcome::default();
    for (path, body) in [
        (cfg.venues_path(), &city.venues_csv),
        (cfg.movements_path(), &city.movements_csv),
        (cfg.crimes_path(), &city.crimes_csv),
    ] {
        write_bytes(&path, body.as_bytes())?;
        o.outputs.push(path);
    }
    o.notes.push(format!(
        "generated {} venues, {} movements and {} crimes on a {}x{} grid",
        cfg.config.synth.n_venues,
        city.total_movement(),
        city.total_crimes(),
        city.grid.n_rows(),
        city.grid.n_cols()
    ));
    Ok(o)
}

struct Inputs {
    venues: Vec<Venue>,
    od: OdAggregate,
    cc: CellCounts,
}

fn rejects_path(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    input.with_file_name(format!("{stem}.rejects.csv"))
}

fn note_parse<T>(o: &mut Outcome, what: &str, p: &Parsed<T>) {
    o.notes.push(format!("{what}: {} rows, {} accepted, {} rejected", p.rows, p.records.len(), p.rejects.len()));
}

fn load_inputs(cfg: &Resolved, o: &mut Outcome) -> Result<Inputs> {
    let grid = cfg.grid()?;
    let (vp, mp, cp) = (cfg.venues_path(), cfg.movements_path(), cfg.crimes_path());
    let venues = parse_venues(open(&vp)?)?;
    let moves = parse_movements(open(&mp)?)?;
    let crimes = parse_crimes(open(&cp)?, &grid)?;
    note_parse(o, "venues", &venues);
    note_parse(o, "movements", &moves);
    note_parse(o, "crimes", &crimes);
    let (od, unresolved) = resolve_movements(&moves.records, &venues.records, &grid);
    if !unresolved.is_empty() {
        o.notes.push(format!("movements: {} records not resolved to grid cells", unresolved.len()));
    }
    if cfg.rejects {
        let mut move_rejects = moves.rejects.clone();
        move_rejects.extend(unresolved.iter().map(|r| Reject { line_no: r.line_no, reason: r.reason.clone() }));
        move_rejects.sort_by_key(|r| r.line_no);
        for (input, rejects) in [(&vp, &venues.rejects), (&mp, &move_rejects), (&cp, &crimes.rejects)] {
            let path = rejects_path(input);
            write_with(&path, |w| write_rejects(rejects, w))?;
            o.outputs.push(path);
        }
    }
    o.inputs.extend([vp, mp, cp]);
    let cc = bin_crimes(&crimes.records, &grid, &cfg.bounds());
    Ok(Inputs { venues: venues.records, od, cc })
}

fn ingest(cfg: &Resolved) -> Result<Outcome> {
    let mut o = Outcome::default();
    let inputs = load_inputs(cfg, &mut o)?;
    let out = cfg.out_dir();
    let (cp, op) = (out.join(CELL_COUNTS), out.join(OD_COUNTS));
    write_with(&cp, |w| inputs.cc.write_csv(w))?;
    write_with(&op, |w| inputs.od.write_csv(w))?;
    o.outputs.extend([cp, op]);
    Ok(o)
}

fn features(cfg: &Resolved) -> Result<Outcome> {
    let (train, _) = cfg.split()?;
    let mut o = Outcome::default();
    let inputs = load_inputs(cfg, &mut o)?;
    let grid = cfg.grid()?;
    let rt = build_risk_table(&inputs.cc, &inputs.od, &train)?;
    let opts = AssembleOptions {
        min_moves: cfg.config.features.min_moves,
        risk_mode: cfg.config.features.risk_mode,
        ..AssembleOptions::new(train)
    };
    let rows = assemble_dataset(&inputs.cc, &inputs.od, &inputs.venues, &rt, &grid, &opts)?;
    let ds = Dataset::from_rows(&rows, &category_vocab(&inputs.venues))?;
    let out = cfg.out_dir();
    let (fp, rp) = (out.join(FEATURES), out.join(RISK_TABLE));
    write_with(&fp, |w| ds.write_csv(w))?;
    write_with(&rp, |w| rt.write_csv(w))?;
    o.notes.push(format!("{} feature rows with {} columns", ds.len(), ds.x.n_cols()));
    o.outputs.extend([fp, rp]);
    Ok(o)
}

fn read_features(cfg: &Resolved, o: &mut Outcome) -> Result<Dataset> {
    let path = cfg.out_dir().join(FEATURES);
    if !path.is_file() {
        return Err(CliError::MissingArtifact { what: "features", path });
    }
    let ds = Dataset::read_csv(open(&path)?)?;
    o.inputs.push(path);
    Ok(ds)
}

fn train(cfg: &Resolved) -> Result<Outcome> {
    let mut o = Outcome::default();
    let ds = read_features(cfg, &mut o)?;
    let (train, test) = cfg.split()?;
    let split = ds.split_by_month(&train, &test)?;
    let models = train_suite(&split.train, &cfg.config.models.kinds, &cfg.model_params())?;
    let log = score_models(&models, &split.train)?;
    let out = cfg.out_dir();
    let mp = out.join(MODELS);
    let file = File::create(&mp).map_err(|e| CliError::io(&mp, e))?;
    let mut gz = GzEncoder::new(BufWriter::new(file), Compression::fast());
    serde_json::to_writer(&mut gz, &models)?;
    gz.finish().and_then(|mut w| w.flush()).map_err(|e| CliError::io(&mp, e))?;
    let lp = out.join(TRAIN_LOG);
    write_with(&lp, |w| write_eval_csv(&log, w))?;
    o.notes.push(format!("trained {} models on {} rows", models.len(), split.train.len()));
    o.outputs.extend([mp, lp]);
    Ok(o)
}

fn evaluate(cfg: &Resolved) -> Result<Outcome> {
    let mut o = Outcome::default();
    let ds = read_features(cfg, &mut o)?;
    let (train, test) = cfg.split()?;
    let split = ds.split_by_month(&train, &test)?;
    let rows = evaluate_suite(&split, &cfg.config.models.kinds, &cfg.model_params())?;
    let path = cfg.out_dir().join(EVALUATION);
    write_with(&path, |w| write_eval_csv(&rows, w))?;
    o.notes.push(format!("{} evaluation rows on {} test samples", rows.len(), split.test.len()));
    o.outputs.push(path);
    Ok(o)
}

fn ablate(cfg: &Resolved) -> Result<Outcome> {
    let mut o = Outcome::default();
    let ds = read_features(cfg, &mut o)?;
    let (train, test) = cfg.split()?;
    let split = ds.split_by_month(&train, &test)?;
    let report = run_ablation(&split.train, &cfg.config.ablation.groups, &cfg.ablation_params())?;
    let path = cfg.out_dir().join(ABLATION);
    write_with(&path, |w| report.write_csv(w))?;
    o.notes.push(format!("{} ablation rows, direction {}", report.rows.len(), report.direction));
    o.outputs.push(path);
    Ok(o)
}

fn read_evaluation(path: &Path) -> Result<Vec<EvalRow>> {
    if !path.is_file() {
        return Err(CliError::MissingArtifact { what: "evaluation", path: path.to_path_buf() });
    }
    let rows = read_eval_csv(open(path)?)?;
    if rows.is_empty() {
        return Err(CliError::MissingArtifact { what: "evaluation", path: path.to_path_buf() });
    }
    Ok(rows)
}

fn report(cfg: &Resolved) -> Result<Outcome> {
    let mut o = Outcome::default();
    let out = cfg.out_dir();
    let ep = out.join(EVALUATION);
    let rows = read_evaluation(&ep)?;
    o.inputs.push(ep);
    let ap = out.join(ABLATION);
    let ablation = if ap.is_file() {
        let a = AblationReport::read_csv(open(&ap)?)?;
        o.inputs.push(ap);
        Some(a)
    } else {
        let msg = format!("no ablation artifact at {}; report omits the p-value grid", ap.display());
        warn!("{msg}");
        o.warnings.push(msg);
        None
    };
    if cfg.config.report.markdown {
        let path = out.join(REPORT);
        write_bytes(&path, report::markdown(&rows, ablation.as_ref()).as_bytes())?;
        o.outputs.push(path);
    }
    if cfg.config.report.svg {
        for (name, metric) in [(MAE_SVG, Metric::Mae), (RMSE_SVG, Metric::Rmse)] {
            let path = out.join(name);
            write_bytes(&path, report::bar_chart(&rows, metric).as_bytes())?;
            o.outputs.push(path);
        }
    }
    if let Some(a) = &ablation {
        let path = out.join(PVALUES);
        write_with(&path, |w| a.write_pvalue_grid(w))?;
        o.outputs.push(path);
    }
    info!("report written to {}", out.display());
    Ok(o)
}
