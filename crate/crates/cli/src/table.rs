//! CSV result tables.

use std::io::Write;

use borrowkit::design::SweepRow;

pub const HEADER: [&str; 9] =
    ["rule", "w", "n", "sampling_mean", "type_one_error", "expected_power", "integrated_risk", "rsl", "min_n"];

/// `%g`-style formatting with six significant digits.
pub fn fmt_g(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn record(row: &SweepRow) -> [String; 9] {
    [
        row.rule.clone(),
        row.w.map(fmt_g).unwrap_or_default(),
        row.n.to_string(),
        fmt_g(row.sampling_mean),
        fmt_g(row.type_one_error),
        fmt_g(row.expected_power),
        fmt_g(row.integrated_risk),
        row.rsl.map_or_else(|| "NA".to_string(), fmt_g),
        match row.min_n {
            None => String::new(),
            Some(s) => s.n.map_or_else(|| "-1".to_string(), |n| n.to_string()),
        },
    ]
}

/// Writes `rows` as CSV with the fixed header.
pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use borrowkit::design::SampleSize;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(0.025), "0.025");
        assert_eq!(fmt_g(0.1249780866), "0.124978");
        assert_eq!(fmt_g(214.0), "214");
        assert_eq!(fmt_g(1.0), "1");
        assert_eq!(fmt_g(-0.17426406871192853), "-0.174264");
        assert_eq!(fmt_g(1.234567e-7), "1.23457e-07");
        assert_eq!(fmt_g(9.999996e5), "1e+06");
        assert_eq!(fmt_g(123456.4), "123456");
        assert_eq!(fmt_g(0.000123456789), "0.000123457");
        assert_eq!(fmt_g(4.834839e-5), "4.83484e-05");
    }

    #[test]
    fn rows_encode_missing_values() {
        let row = SweepRow {
            rule: "FD".into(),
            w: None,
            n: 250,
            sampling_mean: 0.25,
            type_one_error: 0.025,
            expected_power: 0.7,
            integrated_risk: 0.01,
            rsl: None,
            min_n: Some(SampleSize { n: None, expected_power: 0.7 }),
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "rule,w,n,sampling_mean,type_one_error,expected_power,integrated_risk,rsl,min_n\nFD,,250,0.25,0.025,0.7,0.01,NA,-1\n"
        );
    }
}
