use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use m3s_core::metrics::{evaluate, MetricReport};
use m3s_core::model::{train, FusionPolicy, TrainConfig, WeightMode};
use m3s_core::spectra::{Dataset, DEFAULT_SEQUENCE_LEN};
use m3s_core::Execution;

use crate::manifest::RunManifest;
use crate::report::{mean_std, row, COLUMNS};
use crate::train::{split, FusionArg, TrainOverrides, WeightsArg};
use crate::{load_data, Cli};

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Scale sets separated by `;`, scales within a set by `,`.
    #[arg(long, default_value = "32;64;128;32,64;32,128;64,128")]
    pub scale_sets: String,
    #[arg(long = "weight-modes", value_enum, value_delimiter = ',', default_values_t = [WeightsArg::Fixed, WeightsArg::Adaptive])]
    pub weight_modes: Vec<WeightsArg>,
    #[arg(long = "fusion-policies", value_enum, value_delimiter = ',', default_values_t = [FusionArg::Masked])]
    pub fusion_policies: Vec<FusionArg>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    pub seeds: Vec<u64>,
    #[command(flatten)]
    pub base: TrainOverrides,
    #[arg(long, default_value_t = DEFAULT_SEQUENCE_LEN)]
    pub length: usize,
}

fn parse_scale_sets(spec: &str) -> Result<Vec<Vec<usize>>> {
    let mut sets = Vec::new();
    for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let set = part
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| anyhow::anyhow!("bad scale set `{part}`: {e}"))?;
        sets.push(set);
    }
    if sets.is_empty() {
        bail!("no scale sets given");
    }
    Ok(sets)
}

fn join(scales: &[usize]) -> String {
    scales
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("+")
}

fn mode_name(w: WeightMode) -> &'static str {
    match w {
        WeightMode::Adaptive => "adaptive",
        WeightMode::Fixed => "fixed",
        WeightMode::None => "none",
    }
}

fn fusion_name(f: FusionPolicy) -> &'static str {
    match f {
        FusionPolicy::Masked => "masked",
        FusionPolicy::Global => "global",
    }
}

fn run_cell(data: &Dataset, config: &TrainConfig) -> m3s_core::Result<MetricReport> {
    let (train_set, test_set) = split_core(data, config)?;
    let model = train(&train_set, config)?.model;
    evaluate(&model, &test_set, Execution::Sequential)
}

fn split_core(data: &Dataset, c: &TrainConfig) -> m3s_core::Result<(Dataset, Dataset)> {
    m3s_core::spectra::split_dataset_grouped(data, c.train_fraction, c.seed, c.split_mode)
}

pub fn run(cli: &Cli, args: &AblateArgs) -> Result<()> {
    let mut manifest = RunManifest::start("ablate");
    let base = args.base.build(cli)?;
    manifest.input(&args.data)?;
    let data = load_data(&args.data, args.length)?;
    // fail early on an unusable split rather than inside every cell
    split(&data, &base)?;

    let mut groups = Vec::new();
    for scales in parse_scale_sets(&args.scale_sets)? {
        for &w in &args.weight_modes {
            for &f in &args.fusion_policies {
                let mut c = base.clone();
                c.scales = scales.clone();
                c.weights = w.into();
                c.fusion = f.into();
                c.execution = Execution::Sequential;
                c.validate()?;
                groups.push(c);
            }
        }
    }
    let cells: Vec<TrainConfig> = groups
        .iter()
        .flat_map(|g| {
            args.seeds.iter().map(move |&s| TrainConfig {
                seed: s,
                ..g.clone()
            })
        })
        .collect();
    eprintln!(
        "running {} cells ({} configurations x {} seeds)",
        cells.len(),
        groups.len(),
        args.seeds.len()
    );

    let exec = if args.base.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let reports = exec.try_map(&cells, |c| run_cell(&data, c))?;

    let header = COLUMNS.join(",");
    let mut runs = format!("scales,weights,fusion,seed,{header},params,flops\n");
    for (c, r) in cells.iter().zip(&reports) {
        write!(
            runs,
            "{},{},{},{}",
            join(&c.scales),
            mode_name(c.weights),
            fusion_name(c.fusion),
            c.seed
        )?;
        for v in row(r) {
            write!(runs, ",{v}")?;
        }
        writeln!(runs, ",{},{}", r.params, r.flops)?;
    }

    let mut summary = String::from("scales,weights,fusion,seeds");
    for name in COLUMNS {
        write!(summary, ",{name}_mean,{name}_std")?;
    }
    summary.push_str(",params,flops\n");
    let per_group = args.seeds.len();
    for (g, chunk) in groups.iter().zip(reports.chunks(per_group)) {
        write!(
            summary,
            "{},{},{},{}",
            join(&g.scales),
            mode_name(g.weights),
            fusion_name(g.fusion),
            per_group
        )?;
        let rows: Vec<[f64; 9]> = chunk.iter().map(row).collect();
        for k in 0..COLUMNS.len() {
            let (m, s) = mean_std(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
            write!(summary, ",{m},{s}")?;
        }
        writeln!(summary, ",{},{}", chunk[0].params, chunk[0].flops)?;
    }

    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("ablation"));
    std::fs::create_dir_all(&out)?;
    let summary_path = out.join("ablation.csv");
    let runs_path = out.join("ablation_runs.csv");
    std::fs::write(&summary_path, &summary)?;
    std::fs::write(&runs_path, &runs)?;
    manifest.config_hash = Some(base.hash());
    manifest.seed = args.seeds.first().copied();
    manifest.output(&summary_path);
    manifest.output(&runs_path);
    manifest.finish(&out.join("manifest.json"))?;
    print!("{summary}");
    Ok(())
}
