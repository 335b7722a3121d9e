use std::io::{self, Write};

use sha2::{Digest, Sha256};

use binsis::weights::{format_log_scientific, WeightSummary};

use crate::input::Problem;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `# key=value` lines that identify a run.
pub fn header(problem: &Problem, seed: u64, draws: u64) -> Vec<(String, String)> {
    let mut lines = vec![
        ("version".to_string(), VERSION.to_string()),
        ("margins_sha256".to_string(), sha256_hex(&problem.margins.to_text())),
    ];
    if let Some(mask) = problem.mask() {
        lines.push(("zeros_sha256".into(), sha256_hex(&mask.to_text())));
    }
    lines.extend([
        ("heuristic".to_string(), problem.heuristic.to_string()),
        (
            "column_order".to_string(),
            if problem.config.keep_column_order { "keep" } else { "sorted" }.to_string(),
        ),
        ("seed".to_string(), seed.to_string()),
        ("n".to_string(), draws.to_string()),
    ]);
    lines
}

pub fn write_header(out: &mut impl Write, lines: &[(String, String)]) -> io::Result<()> {
    for (k, v) in lines {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

/// `x` from `log x` as six significant digits.
pub fn big(log_x: f64) -> String {
    format_log_scientific(log_x, 6)
}

/// Human-readable table row followed by machine-readable lines.
pub fn write_summary(out: &mut impl Write, prefix: &str, s: &WeightSummary) -> io::Result<()> {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    writeln!(out, "{}={}", key("n"), s.len())?;
    writeln!(out, "{}={}", key("w_bar"), big(s.log_mean))?;
    writeln!(out, "{}={:.16e}", key("log_w_bar"), s.log_mean)?;
    writeln!(out, "{}={}", key("se"), big(s.log_se))?;
    writeln!(out, "{}={:.16e}", key("log_se"), s.log_se)?;
    writeln!(out, "{}={}", key("delta_hat"), fmt_ratio(s.delta_hat, s.log_delta_hat))?;
    writeln!(out, "{}={:.16e}", key("log_delta_hat"), s.log_delta_hat)?;
    writeln!(out, "{}={:.6e}", key("cv2_hat"), s.cv2_hat)
}

pub fn fmt_ratio(ratio: f64, log_ratio: f64) -> String {
    if ratio.is_finite() {
        format!("{ratio:.6}")
    } else {
        big(log_ratio)
    }
}

pub fn table_header(out: &mut impl Write) -> io::Result<()> {
    writeln!(
        out,
        "{:<12} {:>14} {:>14} {:>14} {:>12}",
        "heuristic", "W_bar", "S_W_bar", "delta_hat", "cv2_hat"
    )
}

pub fn table_row(out: &mut impl Write, name: &str, s: &WeightSummary) -> io::Result<()> {
    writeln!(
        out,
        "{:<12} {:>14} {:>14} {:>14} {:>12.4e}",
        name,
        big(s.log_mean),
        big(s.log_se),
        fmt_ratio(s.delta_hat, s.log_delta_hat),
        s.cv2_hat
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_string() {
        assert_eq!(
            sha256_hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn ratios_fall_back_to_log_form() {
        assert_eq!(fmt_ratio(1.5, 1.5f64.ln()), "1.500000");
        assert_eq!(fmt_ratio(f64::INFINITY, 1000.0 * 10f64.ln()), "1.00000e1000");
    }
}
