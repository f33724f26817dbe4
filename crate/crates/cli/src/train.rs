use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use m3s_core::metrics::evaluate;
use m3s_core::model::{
    load_checkpoint, save_checkpoint, train_with, write_loss_log, FusionPolicy, TrainConfig,
    WeightMode,
};
use m3s_core::spectra::{split_dataset_grouped, Dataset, SplitMode, DEFAULT_SEQUENCE_LEN};
use m3s_core::Execution;

use crate::manifest::RunManifest;
use crate::{load_data, Cli};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightsArg {
    Adaptive,
    Fixed,
    /// Spectral-only: the history branch is bypassed.
    None,
}

impl From<WeightsArg> for WeightMode {
    fn from(w: WeightsArg) -> Self {
        match w {
            WeightsArg::Adaptive => WeightMode::Adaptive,
            WeightsArg::Fixed => WeightMode::Fixed,
            WeightsArg::None => WeightMode::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FusionArg {
    Masked,
    Global,
}

impl From<FusionArg> for FusionPolicy {
    fn from(f: FusionArg) -> Self {
        match f {
            FusionArg::Masked => FusionPolicy::Masked,
            FusionArg::Global => FusionPolicy::Global,
        }
    }
}

/// Training options that override the `--config` file.
#[derive(Debug, Clone, Args)]
pub struct TrainOverrides {
    #[arg(long, value_enum)]
    pub weights: Option<WeightsArg>,
    /// Share of the spectral row in the fixed weight matrix.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<usize>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub fusion: Option<FusionArg>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Keep all spectra of a patient on the same side of the split.
    #[arg(long)]
    pub group_by_patient: bool,
    /// Run every loop on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

impl TrainOverrides {
    pub fn build(&self, cli: &Cli) -> Result<TrainConfig> {
        let mut c = match &cli.config {
            Some(path) => TrainConfig::from_json_file(path)?,
            None => TrainConfig::default(),
        };
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        if let Some(w) = self.weights {
            c.weights = w.into();
        }
        if let Some(r) = self.ratio {
            c.fixed_ratio = r;
        }
        if let Some(s) = &self.scales {
            c.scales = s.clone();
        }
        if let Some(e) = self.epochs {
            c.epochs = e;
        }
        if let Some(lr) = self.lr {
            c.lr = lr;
        }
        if let Some(b) = self.batch_size {
            c.batch_size = b;
        }
        if let Some(f) = self.fusion {
            c.fusion = f.into();
        }
        if let Some(f) = self.train_fraction {
            c.train_fraction = f;
        }
        if self.group_by_patient {
            c.split_mode = SplitMode::Patient;
        }
        if self.sequential {
            c.execution = Execution::Sequential;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Train/test split fully determined by the config.
pub fn split(data: &Dataset, c: &TrainConfig) -> Result<(Dataset, Dataset)> {
    Ok(split_dataset_grouped(
        data,
        c.train_fraction,
        c.seed,
        c.split_mode,
    )?)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled dataset (CSV or JSON).
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    /// Points per spectrum.
    #[arg(long, default_value_t = DEFAULT_SEQUENCE_LEN)]
    pub length: usize,
}

pub fn run_train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::start("train");
    let config = args.overrides.build(cli)?;
    if let Some(path) = &cli.config {
        manifest.input(path)?;
    }
    manifest.input(&args.data)?;
    let data = load_data(&args.data, args.length)?;
    let (train_set, test_set) = split(&data, &config)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    std::fs::create_dir_all(&out)?;

    eprintln!(
        "training on {} samples ({} held out), {} epochs",
        train_set.len(),
        test_set.len(),
        config.epochs
    );
    let every = (config.epochs / 10).max(1);
    let outcome = train_with(&train_set, &config, |e| {
        if e.epoch % every == 0 || e.epoch == config.epochs {
            eprintln!(
                "epoch {:>4}  loss {:.5}  train acc {:.4}",
                e.epoch, e.loss, e.train_accuracy
            );
        }
    })?;

    let checkpoint = out.join("checkpoint.json");
    let loss_log = out.join("loss.csv");
    save_checkpoint(&outcome.model, &checkpoint)?;
    write_loss_log(&outcome.log, &loss_log)?;
    manifest.config_hash = Some(config.hash());
    manifest.seed = Some(config.seed);
    manifest.output(&checkpoint);
    manifest.output(&loss_log);
    manifest.finish(&out.join("manifest.json"))?;
    eprintln!("wrote {}", checkpoint.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    All,
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled dataset; the split is recomputed from the checkpoint's config.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub subset: Subset,
}

pub fn run_evaluate(cli: &Cli, args: &EvaluateArgs) -> Result<()> {
    let mut manifest = RunManifest::start("evaluate");
    manifest.input(&args.checkpoint)?;
    manifest.input(&args.data)?;
    let model = load_checkpoint(&args.checkpoint)?;
    let data = load_data(
        &args.data,
        model.sequence_len.unwrap_or(DEFAULT_SEQUENCE_LEN),
    )?;
    let subset = match args.subset {
        Subset::All => data,
        Subset::Train => split(&data, &model.config)?.0,
        Subset::Test => split(&data, &model.config)?.1,
    };
    let report = evaluate(&model, &subset, Execution::Parallel)?;

    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("eval"));
    std::fs::create_dir_all(&out)?;
    let metrics = out.join("metrics.json");
    let confusion = out.join("confusion.csv");
    std::fs::write(&metrics, report.to_json())?;
    report.write_confusion_csv(&confusion)?;
    manifest.config_hash = Some(model.config.hash());
    manifest.seed = Some(model.config.seed);
    manifest.output(&metrics);
    manifest.output(&confusion);
    manifest.finish(&out.join("manifest.json"))?;
    print!("{}", report.to_table());
    Ok(())
}
