//! Subcommand implementations behind the `scldpc` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::protograph::{design_rate, rate_to_f64, Rate};
use crate::simulator::{
    errdist_report, metrics_csv, run_campaign, trace_csv, FrameFilter, FrameResult, SimError,
};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "SCLDPC_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub snr_db: Option<Vec<f64>>,
    pub frames: Option<usize>,
    pub seed: Option<u64>,
}

impl Overrides {
    /// Applies the overrides and revalidates.
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig, ConfigError> {
        if let Some(snr) = &self.snr_db {
            cfg.campaign.snr_points_db = snr.clone();
        }
        if let Some(frames) = self.frames {
            cfg.campaign.frames = frames;
        }
        if let Some(seed) = self.seed {
            cfg.campaign.master_seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    overrides.apply(RunConfig::from_file(path)?)
}

fn fmt_rate(r: Rate) -> String {
    format!("{} ({:.6})", r, rate_to_f64(r))
}

/// Design rates of the configured chain, exact and in decimal.
pub fn cmd_rate(cfg: &RunConfig) -> Result<String, CliError> {
    let chain = cfg.chain()?;
    let r = design_rate(&chain);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "L = {}, m = {}, doping = {} (d = {})",
        chain.length(),
        chain.m(),
        cfg.doping.kind,
        cfg.doping.d()
    );
    let _ = writeln!(s, "R        {}", fmt_rate(r.uncoupled));
    let _ = writeln!(s, "R_L      {}", fmt_rate(r.coupled));
    let _ = writeln!(s, "R_doped  {}", fmt_rate(r.doped));
    let _ = writeln!(s, "loss     {}", fmt_rate(r.rate_loss()));
    Ok(s)
}

/// Summary of a validated config.
pub fn cmd_validate(cfg: &RunConfig) -> Result<String, CliError> {
    let chain = cfg.chain()?;
    Ok(format!(
        "ok: {} blocks of {} variables, {} check times, lift {}\n",
        chain.length(),
        chain.n_v(),
        chain.n_cn_times(),
        cfg.lift.lift
    ))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs the campaign and writes `metrics.csv` (and `trace.csv` on request)
/// into `out`. Returns the summary table.
pub fn cmd_simulate(
    cfg: &RunConfig,
    out: &Path,
    workers: usize,
    trace: bool,
) -> Result<String, CliError> {
    let sim = cfg.build()?;
    create_dir(out)?;
    let res = run_campaign(&sim, &cfg.campaign, workers)?;
    write_file(&out.join("metrics.csv"), &metrics_csv(&res.metrics))?;
    if trace {
        let all: Vec<FrameResult> = res.frames.iter().flatten().cloned().collect();
        write_file(&out.join("trace.csv"), &trace_csv(&all))?;
    }
    let mut s = format!(
        "{:>8} {:>8} {:>12} {:>12} {:>25} {:>9} {:>6}\n",
        "snr_db", "frames", "ber", "bler", "bler 95% CI", "mean_w", "ep"
    );
    for m in &res.metrics {
        let (lo, hi) = m.bler_ci95();
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>12.4e} {:>12.4e} {:>25} {:>9.3} {:>6}",
            m.snr_db,
            m.frames,
            m.ber(),
            m.bler(),
            format!("[{lo:.3e}, {hi:.3e}]"),
            m.mean_window_size(),
            m.ep_frames
        );
    }
    Ok(s)
}

/// Re-runs frames and writes one `errdist_<frame>.csv` per selected frame.
///
/// With `frames` given only those indices are decoded, otherwise the whole
/// campaign is run. With several SNR points each gets its own `snr<i>`
/// subdirectory. Returns the written paths.
pub fn cmd_errdist(
    cfg: &RunConfig,
    filter: FrameFilter,
    frames: Option<&[usize]>,
    out: &Path,
    workers: usize,
) -> Result<Vec<PathBuf>, CliError> {
    let sim = cfg.build()?;
    let c = &cfg.campaign;
    let per_snr: Vec<Vec<FrameResult>> = match frames {
        Some(list) => c
            .snr_points_db
            .iter()
            .enumerate()
            .map(|(i, &snr)| {
                list.iter()
                    .map(|&f| {
                        sim.run_frame(
                            snr,
                            i,
                            c.master_seed,
                            f,
                            c.burst.as_ref(),
                            c.ep_run_threshold,
                        )
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?,
        None => run_campaign(&sim, c, workers)?.frames,
    };
    let mut written = Vec::new();
    let mut any = false;
    for (i, results) in per_snr.iter().enumerate() {
        let reports = match errdist_report(results, filter) {
            Ok(r) => r,
            Err(SimError::NoMatchingFrames) => continue,
            Err(e) => return Err(e.into()),
        };
        any = true;
        let dir = if per_snr.len() == 1 {
            out.to_path_buf()
        } else {
            out.join(format!("snr{i}"))
        };
        create_dir(&dir)?;
        for rep in reports {
            let path = dir.join(format!("errdist_{}.csv", rep.frame));
            write_file(&path, &rep.to_csv())?;
            written.push(path);
        }
    }
    if !any {
        return Err(SimError::NoMatchingFrames.into());
    }
    Ok(written)
}
