use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::Args;
use ctxrank::data::load_corpus;
use ctxrank::eval::write_metrics_csv;
use ctxrank::model::{Checkpoint, DocEncoder, Variant};
use ctxrank::train::{train_runs, TrainConfig};

use crate::manifest::{FileRecord, RunManifest, RunRecord};
use crate::Exit;

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training corpus (JSONL).
    #[arg(long, required_unless_present = "from_manifest", conflicts_with = "from_manifest")]
    corpus: Option<PathBuf>,
    /// Development corpus evaluated after every epoch.
    #[arg(long, required_unless_present = "from_manifest", conflicts_with = "from_manifest")]
    dev: Option<PathBuf>,
    /// base, loc_t, loc_e, glob_b, glob_e or dual.
    #[arg(long)]
    variant: Option<Variant>,
    /// JSON training configuration; flags below override it.
    #[arg(long, conflicts_with = "from_manifest")]
    config: Option<PathBuf>,
    /// Rerun exactly the configuration and inputs of an earlier run.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
    #[arg(long, conflicts_with = "from_manifest")]
    epochs: Option<usize>,
    #[arg(long, conflicts_with = "from_manifest")]
    runs: Option<usize>,
    #[arg(long, conflicts_with = "from_manifest")]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "from_manifest")]
    lr: Option<f64>,
    #[arg(long, conflicts_with = "from_manifest")]
    batch_size: Option<usize>,
    /// Base-model checkpoint used as glob_e's frozen document encoder.
    #[arg(long, conflicts_with = "from_manifest")]
    doc_encoder: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

struct Plan {
    config: TrainConfig,
    corpus: PathBuf,
    dev: PathBuf,
    doc_encoder: Option<PathBuf>,
}

fn plan(args: &TrainArgs) -> Result<Plan> {
    if let Some(m) = &args.from_manifest {
        let manifest = RunManifest::load(m)?;
        manifest.corpus.verify()?;
        manifest.dev.verify()?;
        if let Some(e) = &manifest.doc_encoder {
            e.verify()?;
        }
        let config = manifest.config;
        if let Some(v) = args.variant {
            if v != config.variant {
                return Err(Exit::compatibility(format!("manifest trains {}, not {v}", config.variant)).into());
            }
        }
        return Ok(Plan {
            config,
            corpus: manifest.corpus.path,
            dev: manifest.dev.path,
            doc_encoder: manifest.doc_encoder.map(|r| r.path),
        });
    }
    let mut config = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<TrainConfig>(&text).map_err(|e| ctxrank::Error::Parse {
                location: p.display().to_string(),
                message: e.to_string(),
            })?
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = args.variant {
        config.variant = v;
    }
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(r) = args.runs {
        config.runs = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(lr) = args.lr {
        config.lr_peak = lr;
    }
    if let Some(b) = args.batch_size {
        config.batch_size = b;
    }
    Ok(Plan {
        config,
        corpus: args.corpus.clone().expect("clap requires --corpus"),
        dev: args.dev.clone().expect("clap requires --dev"),
        doc_encoder: args.doc_encoder.clone(),
    })
}

fn load_doc_encoder(path: &Path) -> Result<DocEncoder> {
    let ck = Checkpoint::load_variant(path, Variant::Base)?;
    Ok(DocEncoder::new(ck.to_model()?.0)?)
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let started = Instant::now();
    let started_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let plan = plan(args)?;
    plan.config.validate()?;
    let train = load_corpus(&plan.corpus)?;
    let dev = load_corpus(&plan.dev)?;
    if train.groups.is_empty() {
        bail!("{} holds no questions", plan.corpus.display());
    }
    let config = plan.config.resolved(train.pairs())?;
    let doc_encoder = match (&plan.doc_encoder, config.variant) {
        (Some(p), Variant::GlobE) => Some(load_doc_encoder(p)?),
        (Some(_), v) => {
            log::warn!("--doc-encoder is ignored for {v}");
            None
        }
        (None, _) => None,
    };
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    log::info!(
        "training {} on {} pairs, {} run(s) x {} epoch(s)",
        config.variant,
        train.pairs(),
        config.runs,
        config.epochs
    );

    let multi = train_runs(&train, &dev, &config, doc_encoder)?;
    let mut runs = Vec::new();
    for (i, r) in multi.runs.iter().enumerate() {
        let csv = args.out.join(format!("run{i}.csv"));
        let fin = args.out.join(format!("run{i}.final.json"));
        let best = args.out.join(format!("run{i}.best.json"));
        write_metrics_csv(&csv, &r.metrics)?;
        r.final_checkpoint().save(&fin)?;
        r.best_checkpoint().save(&best)?;
        runs.push(RunRecord {
            seed: r.seed,
            metrics_csv: csv,
            final_checkpoint: fin,
            best_checkpoint: best,
            best_epoch: r.best_epoch,
            train_loss: r.train_loss.clone(),
            divergence: r.divergence.clone(),
        });
    }
    let aggregate_csv = if multi.aggregate.is_empty() {
        None
    } else {
        let p = args.out.join("aggregate.csv");
        write_metrics_csv(&p, &multi.aggregate)?;
        Some(p)
    };
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        corpus: FileRecord::of(&plan.corpus)?,
        dev: FileRecord::of(&plan.dev)?,
        doc_encoder: plan.doc_encoder.as_deref().map(FileRecord::of).transpose()?,
        seeds: multi.runs.iter().map(|r| r.seed).collect(),
        runs,
        aggregate_csv,
        started_unix_secs,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    manifest.save(&args.out.join("manifest.json"))?;

    println!("epo  map     ±std    p@1     ±std");
    for m in &multi.aggregate {
        println!("{:<4} {:.4}  {:.4}  {:.4}  {:.4}", m.epoch, m.map, m.map_std, m.p1, m.p1_std);
    }
    println!("wrote {}", args.out.display());
    if let Some(r) = multi.diverged() {
        return Err(ctxrank::Error::Divergence(format!(
            "run with seed {}: {}; last finite parameters saved",
            r.seed,
            r.divergence.as_deref().unwrap_or("")
        ))
        .into());
    }
    Ok(())
}
