//! CSV rendering of reports and oracle tables.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::scenario::{GapRow, SensitivityReport};

pub const REPORT_HEADER: &str = "sweep_value,qcrb_var_minus,qcrb_var_plus,realized_var,snl,sqz,hl,oracle_gap,well_posed";
pub const GAP_HEADER: &str = "sweep_value,cutoff,mean_gap,cov_gap,qfi_gap,norm_deficit";

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// `#` lines carrying the engine version and config hash.
pub fn metadata(config_bytes: &[u8]) -> String {
    format!(
        "# squeezelab {}\n# config sha256 {}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash(config_bytes)
    )
}

pub fn render_report(report: &SensitivityReport, config_bytes: &[u8]) -> String {
    let mut out = metadata(config_bytes);
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in &report.rows {
        let fields = [
            num(r.sweep_value),
            num(r.qcrb_var_minus),
            opt(r.qcrb_var_plus),
            opt(r.realized_var),
            num(r.snl),
            num(r.sqz),
            num(r.hl),
            opt(r.oracle_gap),
            r.well_posed.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn render_gaps(rows: &[GapRow], config_bytes: &[u8]) -> String {
    let mut out = metadata(config_bytes);
    out.push_str(GAP_HEADER);
    out.push('\n');
    for g in rows {
        let c = &g.comparison;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(g.sweep_value),
            g.cutoff,
            num(c.mean_gap),
            num(c.cov_gap),
            num(c.qfi_gap),
            num(c.norm_deficit)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.0 / 36.0), "2.7777777777777776e-2");
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(config_hash(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
