//! Plot-ready series derived from a finished run directory.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use flockmf::io::Table;
use flockmf::metrics::japanese;
use flockmf::RateTable;

use crate::config::ExperimentConfig;
use crate::run::{RunManifest, CONFIG};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    /// `log V` against `log⟨t⟩` with the predicted slope.
    Decay,
    /// `V` divided by its predicted rate.
    Compensated,
    /// Coupling proxy against `N` with a slope −1/2 guide.
    PocScaling,
    /// Stochastic coupling error against `N` at each fit time.
    StochasticScaling,
    /// Stability ratio with its fitted envelope.
    Stability,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Decay => "decay",
            PlotKind::Compensated => "compensated",
            PlotKind::PocScaling => "poc-scaling",
            PlotKind::StochasticScaling => "stochastic-scaling",
            PlotKind::Stability => "stability",
        }
    }

    fn source(self) -> &'static str {
        match self {
            PlotKind::Decay | PlotKind::Compensated => "trajectory.csv",
            PlotKind::PocScaling | PlotKind::StochasticScaling => "scaling.csv",
            PlotKind::Stability => "stability.csv",
        }
    }
}

fn read_table(dir: &Path, name: &str) -> Result<Table, CliError> {
    let path = dir.join(name);
    let f = fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(Table::read_from(BufReader::new(f))?)
}

fn column<'a>(t: &'a Table, name: &str, file: &str) -> Result<&'a [f64], CliError> {
    t.get(name).ok_or_else(|| CliError::MissingInput(format!("{file} has no column {name}")))
}

/// Writes `<run_dir>/plots/<kind>.csv` and returns its path.
pub fn emit_plot_data(run_dir: &Path, kind: PlotKind) -> Result<PathBuf, CliError> {
    let manifest = RunManifest::load(run_dir)?;
    if manifest.files.is_empty() {
        return Err(CliError::MissingInput(format!("{} lists no output files", run_dir.display())));
    }
    let src = kind.source();
    if !manifest.files.iter().any(|f| f.path == src) {
        return Err(CliError::MissingInput(format!("{} run has no {src}", manifest.experiment)));
    }
    let cfg_path = run_dir.join(CONFIG);
    let cfg_text = fs::read_to_string(&cfg_path).map_err(|e| CliError::io(&cfg_path, e))?;
    let cfg = ExperimentConfig::from_toml(&cfg_text)?;
    let t = read_table(run_dir, src)?;
    let rates = RateTable::for_params(cfg.model.p, cfg.model.alpha);
    let out = match kind {
        PlotKind::Decay => {
            let (ts, v) = (column(&t, "t", src)?, column(&t, "V", src)?);
            let keep: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] > 0.0 && v[i] > 0.0).collect();
            let x: Vec<f64> = keep.iter().map(|&i| japanese(ts[i]).ln()).collect();
            let y: Vec<f64> = keep.iter().map(|&i| v[i].ln()).collect();
            let mut table = Table::new().column("log_t", x.clone()).column("log_v", y.clone());
            if let (Some(e), Some(&x1), Some(&y1)) = (rates.v_exponent, x.last(), y.last()) {
                table = table.meta("reference_slope", e).column("reference", x.iter().map(|s| y1 + e * (s - x1)).collect());
            }
            table
        }
        PlotKind::Compensated => {
            let e = rates
                .v_exponent
                .ok_or_else(|| CliError::MissingInput(format!("no algebraic rate for p = {}", cfg.model.p)))?;
            let (ts, v) = (column(&t, "t", src)?, column(&t, "V", src)?);
            let keep: Vec<usize> = (0..ts.len()).filter(|&i| ts[i] > 0.0).collect();
            let comp = keep
                .iter()
                .map(|&i| {
                    let b = japanese(ts[i]);
                    let log = if rates.v_log_power != 0.0 { b.ln().max(f64::MIN_POSITIVE).powf(rates.v_log_power) } else { 1.0 };
                    v[i] / (b.powf(e) * log)
                })
                .collect();
            Table::new()
                .meta("exponent", e)
                .meta("log_power", rates.v_log_power)
                .column("log_t", keep.iter().map(|&i| japanese(ts[i]).ln()).collect())
                .column("compensated", comp)
        }
        PlotKind::PocScaling => {
            let (n, proxy) = (column(&t, "n", src)?, column(&t, "proxy", src)?);
            let x: Vec<f64> = n.iter().map(|v| v.ln()).collect();
            let y: Vec<f64> = proxy.iter().map(|v| v.ln()).collect();
            let reference = x.iter().map(|s| y[0] - 0.5 * (s - x[0])).collect();
            Table::new().meta("reference_slope", -0.5).column("log_n", x).column("log_proxy", y).column("reference", reference)
        }
        PlotKind::StochasticScaling => {
            let n = column(&t, "n", src)?;
            let mut table = Table::new().column("log_n", n.iter().map(|v| v.ln()).collect());
            let mut any = false;
            for (name, col) in t.names.iter().zip(&t.columns) {
                if let Some(time) = name.strip_prefix("E_t") {
                    table = table.column(format!("log_E_t{time}"), col.iter().map(|v| v.ln()).collect());
                    any = true;
                }
            }
            if !any {
                return Err(CliError::MissingInput(format!("{src} has no E_t columns")));
            }
            table
        }
        PlotKind::Stability => {
            let mut table = Table::new().column("t", column(&t, "t", src)?.to_vec()).column("ratio", column(&t, "ratio", src)?.to_vec());
            if let Some(env) = t.get("envelope") {
                table = table.column("envelope", env.to_vec());
            }
            table
        }
    };
    let table = Table {
        meta: [("config_hash".to_string(), manifest.config_hash.clone()), ("kind".to_string(), kind.name().to_string())]
            .into_iter()
            .chain(out.meta)
            .collect(),
        ..out
    };
    let dir = run_dir.join("plots");
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let target = dir.join(format!("{}.csv", kind.name()));
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::io(&dir, e))?;
    table.write_to(&mut tmp)?;
    tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
    Ok(target)
}
