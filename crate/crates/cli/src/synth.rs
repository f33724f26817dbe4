use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use m3s_core::spectra::{synth_generate, write_dataset, DataFormat, SynthConfig};
use sha2::{Digest, Sha256};

use crate::manifest::RunManifest;
use crate::Cli;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    /// Four separable peak templates with overlapping history distributions.
    Default,
    /// AF and CON share one template and differ only in their history flags.
    Confounded,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Built-in generator settings, used when `--config` is absent.
    #[arg(long, value_enum, default_value = "default")]
    pub preset: Preset,
}

pub fn run(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let mut manifest = RunManifest::start("synth");
    let config = match &cli.config {
        Some(path) => {
            manifest.input(path)?;
            SynthConfig::from_json_file(path)?
        }
        None => match args.preset {
            Preset::Default => SynthConfig::default(),
            Preset::Confounded => SynthConfig::confounded_history(),
        },
    };
    let seed = cli.seed.unwrap_or(1);
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("synth.csv"));
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }

    let data = synth_generate(&config, seed)?;
    write_dataset(&data, &out, DataFormat::from_path(&out))?;

    let config_json = serde_json::to_string(&config)?;
    manifest.config_hash = Some(hex::encode(Sha256::digest(config_json.as_bytes())));
    manifest.seed = Some(seed);
    manifest.output(&out);
    let mut manifest_path = out.clone().into_os_string();
    manifest_path.push(".manifest.json");
    manifest.finish(&PathBuf::from(manifest_path))?;
    eprintln!("wrote {} samples to {}", data.len(), out.display());
    Ok(())
}
