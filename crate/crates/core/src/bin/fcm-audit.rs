use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fcm_audit::association::{build_association_matrix, AssociationMatrix};
use fcm_audit::audit::{
    load_dataset, run_audit, select_instances, summary_table, train_model, write_artifacts, AuditConfig,
};
use fcm_audit::dataset::stratified_split;
use fcm_audit::fcm::simulate;
use fcm_audit::forest::ForestModel;
use fcm_audit::shapley::{explain, BackgroundSet};

#[derive(Parser)]
#[command(
    name = "fcm-audit",
    version,
    about = "Implicit-bias audit with Shapley values and fuzzy cognitive maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Audit config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the top-level seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<AuditConfig> {
        let mut cfg = AuditConfig::from_file(&self.config)
            .with_context(|| format!("reading config {}", self.config.display()))?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Load the dataset, print a summary and write the split.
    Ingest(Common),
    /// Build the association matrix on train ∪ validation.
    Associate(Common),
    /// Tune the forest grid and refit the best configuration.
    Train(Common),
    /// Explain a dataset row, or the selected test instances.
    Explain {
        #[command(flatten)]
        common: Common,
        /// Model written by `train`; retrained when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dataset row index to explain.
        #[arg(long)]
        row: Option<usize>,
    },
    /// Run the reasoning rule from a SHAP CSV over a weight matrix.
    Simulate {
        /// Association matrix JSON.
        #[arg(long)]
        weights: PathBuf,
        /// SHAP CSV (feature, attribution, abs_attribution).
        #[arg(long)]
        shap: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.2, 0.4, 0.6, 0.8])]
        phi: Vec<f64>,
        #[arg(long, value_enum, default_value = "absolute")]
        mode: Mode,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Full pipeline.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Override the phi grid (comma separated).
        #[arg(long, value_delimiter = ',')]
        phi: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    Absolute,
    Signed,
    MaxNormalized,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn ingest(cfg: &AuditConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let split = stratified_split(&ds, cfg.split.fractions, cfg.seeds().split)?;
    println!("rows {}  features {}", ds.n_rows(), ds.n_features());
    for (name, n) in ds.class_names().iter().zip(ds.class_counts()) {
        println!("class {name}: {n}");
    }
    println!(
        "split train {} / validation {} / test {}",
        split.train.len(),
        split.validation.len(),
        split.test.len()
    );
    write(&cfg.out_dir.join("split.json"), serde_json::to_string_pretty(&split)?)
}

fn associate(cfg: &AuditConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let split = stratified_split(&ds, cfg.split.fractions, cfg.seeds().split)?;
    let pool = ds.subset(&split.train_validation())?;
    let res = build_association_matrix(&pool, &cfg.association, cfg.seeds().association)?;
    let mut buf = Vec::new();
    res.matrix.write_csv(&mut buf)?;
    write(&cfg.out_dir.join("association.csv"), buf)?;
    write(&cfg.out_dir.join("association.json"), res.matrix.to_json()?)?;
    write(
        &cfg.out_dir.join("discretization.json"),
        serde_json::to_string_pretty(&res.discretizations)?,
    )?;
    println!(
        "wrote association matrix ({} features) to {}",
        res.matrix.dim(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn train(cfg: &AuditConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let split = stratified_split(&ds, cfg.split.fractions, cfg.seeds().split)?;
    let (tuning, model) = train_model(cfg, &ds, &split)?;
    let test = ds.subset(&split.test)?;
    let mut buf = Vec::new();
    tuning.write_csv(&mut buf)?;
    write(&cfg.out_dir.join("tuning.csv"), buf)?;
    write(&cfg.out_dir.join("model.json"), model.to_json()?)?;
    println!(
        "best {}  test accuracy {:.4}",
        tuning.best.label(),
        model.accuracy(&test)?
    );
    Ok(())
}

fn explain_cmd(cfg: &AuditConfig, model_path: Option<&Path>, row: Option<usize>) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let seeds = cfg.seeds();
    let split = stratified_split(&ds, cfg.split.fractions, seeds.split)?;
    let model = match model_path {
        Some(p) => ForestModel::from_json(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => train_model(cfg, &ds, &split)?.1,
    };
    let positive = ds
        .class_index(&cfg.positive_class)
        .with_context(|| format!("unknown positive class `{}`", cfg.positive_class))?;
    let pool = ds.subset(&split.train_validation())?;
    let bg = BackgroundSet::sample(&pool, cfg.shap.background, seeds.background)?;
    let rows: Vec<(String, usize)> = match row {
        Some(r) => {
            if r >= ds.n_rows() {
                bail!("row {r} out of range for {} rows", ds.n_rows());
            }
            vec![(format!("r{r}"), r)]
        }
        None => {
            let test = ds.subset(&split.test)?;
            select_instances(&model, &test, positive, seeds.selection)?
                .into_iter()
                .map(|s| {
                    let tag = if s.class == positive { "pos" } else { "neg" };
                    (format!("{tag}_r{}", split.test[s.row]), split.test[s.row])
                })
                .collect()
        }
    };
    for (k, (name, r)) in rows.iter().enumerate() {
        let method = cfg
            .shap
            .method(cfg.shap.n_coalitions, seeds.kernel.wrapping_add(k as u64));
        let e = explain(&model, ds.row(*r), &bg, positive, &method)?;
        let mut buf = Vec::new();
        e.write_csv(&ds.feature_ids(), &mut buf)?;
        write(&cfg.out_dir.join(format!("shap_{name}.csv")), buf)?;
        println!("{name}: prediction {:.4}  base {:.4}", e.prediction, e.base_value);
    }
    Ok(())
}

fn read_activation(path: &Path, mode: Mode) -> Result<(Vec<String>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let id = rec.get(0).context("missing feature column")?.to_string();
        let a: f64 = rec.get(1).context("missing attribution column")?.parse()?;
        ids.push(id);
        values.push(a);
    }
    let out = match mode {
        Mode::Signed => values,
        Mode::Absolute => values.iter().map(|v| v.abs()).collect(),
        Mode::MaxNormalized => {
            let max = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
            values
                .iter()
                .map(|v| if max > 0.0 { v.abs() / max } else { 0.0 })
                .collect()
        }
    };
    Ok((ids, out))
}

fn simulate_cmd(weights: &Path, shap: &Path, phis: &[f64], mode: Mode, max_iter: usize, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(weights).with_context(|| format!("reading {}", weights.display()))?;
    let w = AssociationMatrix::from_json(&text)?;
    let (ids, a0) = read_activation(shap, mode)?;
    if ids != w.feature_ids {
        bail!("feature ids in {} do not match the weight matrix", shap.display());
    }
    fs::create_dir_all(out_dir)?;
    let stem = shap.file_stem().and_then(|s| s.to_str()).unwrap_or("instance");
    let stem = stem.strip_prefix("shap_").unwrap_or(stem);
    for &phi in phis {
        let cfg = fcm_audit::fcm::SimulationConfig {
            max_iter,
            ..fcm_audit::fcm::SimulationConfig::with_phi(phi)
        };
        let trace = simulate(&w.weights, &a0, &cfg)?;
        let mut buf = Vec::new();
        trace.write_csv(&ids, &mut buf)?;
        write(&out_dir.join(format!("trace_{stem}_phi{phi}.csv")), buf)?;
        write(
            &out_dir.join(format!("trace_{stem}_phi{phi}.json")),
            serde_json::to_string_pretty(&trace.metadata())?,
        )?;
        println!("phi {phi}: {:?} after {} steps", trace.termination, trace.t_end());
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest(c) => ingest(&c.load()?),
        Command::Associate(c) => associate(&c.load()?),
        Command::Train(c) => train(&c.load()?),
        Command::Explain { common, model, row } => explain_cmd(&common.load()?, model.as_deref(), row),
        Command::Simulate {
            weights,
            shap,
            phi,
            mode,
            max_iter,
            out_dir,
        } => simulate_cmd(&weights, &shap, &phi, mode, max_iter, &out_dir),
        Command::Audit { common, phi } => {
            let mut cfg = common.load()?;
            if let Some(phis) = phi {
                cfg.fcm.phis = phis;
            }
            let bundle = run_audit(&cfg)?;
            let files = write_artifacts(&cfg, &bundle, &cfg.out_dir)?;
            print!("{}", summary_table(&bundle));
            println!("\n{} files written to {}", files.len(), cfg.out_dir.display());
            Ok(())
        }
    }
}
