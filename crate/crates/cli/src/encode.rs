use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use m3s_core::gaf::encode_dataset;
use m3s_core::Execution;

use crate::manifest::RunManifest;
use crate::{load_data, Cli};

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Dataset to encode (CSV or JSON).
    #[arg(long)]
    pub data: PathBuf,
    /// Image sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [32, 64])]
    pub scales: Vec<usize>,
    /// Write one grayscale PNG per sample and scale instead of CSV rows.
    #[arg(long)]
    pub png: bool,
    /// Encode only the first N samples.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Points per spectrum.
    #[arg(long, default_value_t = m3s_core::spectra::DEFAULT_SEQUENCE_LEN)]
    pub length: usize,
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn run(cli: &Cli, args: &EncodeArgs) -> Result<()> {
    let mut manifest = RunManifest::start("encode");
    manifest.input(&args.data)?;
    let mut data = load_data(&args.data, args.length)?;
    if let Some(n) = args.limit {
        let samples = data.samples().iter().take(n.max(1)).cloned().collect();
        data = m3s_core::spectra::Dataset::new(samples, data.meta.clone())?;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("gaf"));
    std::fs::create_dir_all(&out)?;

    let images = encode_dataset(&data, &args.scales, Execution::Parallel)?;
    if args.png {
        for (sample, per_scale) in data.samples().iter().zip(&images) {
            for img in per_scale {
                let path = out.join(format!("{}_{}.png", file_stem(&sample.id), img.scale));
                let size = img.scale as u32;
                image::GrayImage::from_raw(size, size, img.to_gray_u8())
                    .context("image buffer size")?
                    .save(&path)
                    .with_context(|| format!("writing {}", path.display()))?;
                manifest.output(&path);
            }
        }
    } else {
        for (k, &scale) in args.scales.iter().enumerate() {
            let mut text = String::from("id");
            for p in 0..scale * scale {
                write!(text, ",p{p}")?;
            }
            text.push('\n');
            for (sample, per_scale) in data.samples().iter().zip(&images) {
                text.push_str(&sample.id);
                for v in &per_scale[k].pixels {
                    write!(text, ",{v}")?;
                }
                text.push('\n');
            }
            let path = out.join(format!("gaf_{scale}.csv"));
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            manifest.output(&path);
        }
    }
    manifest.finish(&out.join("manifest.json"))?;
    eprintln!(
        "encoded {} samples at scales {:?} into {}",
        data.len(),
        args.scales,
        out.display()
    );
    Ok(())
}
