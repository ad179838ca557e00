//! Output writers: sweep CSV (9 significant digits, deterministic), sidecar
//! metadata JSON, and small helpers shared by the subcommands.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use zeno_core::zeno::{CellResult, PhaseDiagram};

use crate::CliError;

/// Nine significant digits, locale-free.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.8e}")
    }
}

pub fn sweep_csv(pd: &PhaseDiagram) -> String {
    let mut out = String::from("tau,x_value,gamma_tau,gamma_0,ratio,regime\n");
    for (i, &tau) in pd.tau_axis.iter().enumerate() {
        for (j, &x) in pd.x_axis.iter().enumerate() {
            match pd.cell(i, j) {
                CellResult::Ok {
                    gamma_tau,
                    gamma_0,
                    ratio,
                    regime,
                } => {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        fmt_float(tau),
                        fmt_float(x),
                        fmt_float(*gamma_tau),
                        fmt_float(*gamma_0),
                        fmt_float(*ratio),
                        regime.as_str()
                    ));
                }
                CellResult::Error { .. } => {
                    out.push_str(&format!(
                        "{},{},NaN,NaN,NaN,ERROR\n",
                        fmt_float(tau),
                        fmt_float(x)
                    ));
                }
            }
        }
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", parent.display())))?;
        }
    }
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

#[derive(Serialize)]
pub struct Metadata<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: &'a C,
    pub assumptions: &'a [String],
}

/// Sidecar metadata so every output file embeds the resolved configuration.
pub fn write_metadata<C: Serialize>(
    out_path: &Path,
    config: &C,
    assumptions: &[String],
) -> Result<(), CliError> {
    let meta = Metadata {
        tool: "zeno",
        version: env!("CARGO_PKG_VERSION"),
        config,
        assumptions,
    };
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| CliError::Io(format!("metadata serialization: {e}")))?;
    let mut meta_path = out_path.as_os_str().to_owned();
    meta_path.push(".meta.json");
    write_file(Path::new(&meta_path), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_float(1.0), "1.00000000e0");
        assert_eq!(fmt_float(0.0316301), "3.16301000e-2");
        assert_eq!(fmt_float(f64::NAN), "NaN");
    }
}
