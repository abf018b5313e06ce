use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::td::Method;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let mut f = fs::File::create(tmp).map_err(|e| Error::io(tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(tmp, e))?;
    f.sync_all().map_err(|e| Error::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| Error::io(path, e))
}

/// Streams output through `fill` into a temporary file, then renames it.
pub fn write_atomic_with(
    path: &Path,
    fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    let f = fs::File::create(tmp).map_err(|e| Error::io(tmp, e))?;
    let mut w = std::io::BufWriter::new(f);
    fill(&mut w).map_err(|e| Error::io(tmp, e))?;
    let f = w.into_inner().map_err(|e| Error::io(tmp, e.into_error()))?;
    f.sync_all().map_err(|e| Error::io(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| Error::io(path, e))
}

/// One measurement of one run. `measurement` is `None` on the row that
/// flags divergence; `lambda` is `None` for tasks with a state-dependent λ.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub experiment: &'static str,
    pub method: Method,
    pub lambda: Option<f64>,
    pub alpha: f64,
    pub trial: u32,
    pub episode: u64,
    pub measurement: Option<f64>,
    pub diverged: bool,
}

pub const RUN_HEADER: &str = "experiment,method,lambda,alpha,trial,episode,measurement,diverged";

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.experiment,
            self.method,
            fmt_opt(self.lambda),
            fmt_f64(self.alpha),
            self.trial,
            self.episode,
            fmt_opt(self.measurement),
            self.diverged
        )
    }
}

/// AUC statistics of one (method, λ, α) cell across trials.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRecord {
    pub experiment: &'static str,
    pub method: Method,
    pub lambda: Option<f64>,
    pub alpha: f64,
    /// `None` when every trial diverged.
    pub auc_mean: Option<f64>,
    pub auc_se: Option<f64>,
    pub trials_used: u32,
    pub diverged_count: u32,
}

pub const SUMMARY_HEADER: &str =
    "experiment,method,lambda,alpha,auc_mean,auc_se,trials_used,diverged_count";

impl SummaryRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.experiment,
            self.method,
            fmt_opt(self.lambda),
            fmt_f64(self.alpha),
            fmt_opt(self.auc_mean),
            fmt_opt(self.auc_se),
            self.trials_used,
            self.diverged_count
        )
    }
}

pub fn csv_document<'a>(header: &str, rows: impl IntoIterator<Item = String> + 'a) -> String {
    let mut out = String::with_capacity(1024);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}
