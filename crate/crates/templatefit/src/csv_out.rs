//! CSV tables of toy studies.

use std::io::Write;

use crate::study::{PullRecord, PullStats};

pub const RECORDS_HEADER: [&str; 8] = [
    "method",
    "n_mc",
    "toy_index",
    "signal_estimate",
    "signal_error",
    "pull",
    "qmin",
    "converged",
];
pub const SUMMARY_HEADER: [&str; 7] = [
    "method",
    "n_mc",
    "n_converged",
    "mean_z",
    "sem_mean",
    "std_z",
    "sem_std",
];

/// `%.9g`: nine significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e9)`. Non-finite values are written as `nan`, `inf`
/// and `-inf`.
pub fn format_g9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_records<W: Write>(out: W, records: &[PullRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORDS_HEADER)?;
    for r in records {
        w.write_record([
            r.method.name().to_string(),
            r.n_mc.to_string(),
            r.toy_index.to_string(),
            format_g9(r.signal_estimate),
            format_g9(r.signal_error),
            format_g9(r.pull),
            format_g9(r.qmin),
            r.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Groups without statistics get `nan` in the statistics columns.
pub fn write_summary<W: Write>(out: W, stats: &[PullStats]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for s in stats {
        let m = s.moments;
        let field =
            |f: fn(&crate::study::Moments) -> f64| format_g9(m.as_ref().map_or(f64::NAN, f));
        w.write_record([
            s.method.name().to_string(),
            s.n_mc.to_string(),
            s.n_converged.to_string(),
            field(|m| m.mean_z),
            field(|m| m.sem_mean),
            field(|m| m.std_z),
            field(|m| m.sem_std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_g9(1.0), "1");
        assert_eq!(format_g9(250.123456789), "250.123457");
        assert_eq!(format_g9(-0.5), "-0.5");
        assert_eq!(format_g9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_g9(1e-5), "1e-05");
        assert_eq!(format_g9(1.2345678912e-7), "1.23456789e-07");
        assert_eq!(format_g9(123456789.0), "123456789");
        assert_eq!(format_g9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_g9(0.0001), "0.0001");
        assert_eq!(format_g9(999999999.5), "1e+09");
        assert_eq!(format_g9(f64::NAN), "nan");
    }

    #[test]
    fn headers() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,n_mc,toy_index,signal_estimate,signal_error,pull,qmin,converged\n"
        );
        let mut buf = Vec::new();
        write_summary(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,n_mc,n_converged,mean_z,sem_mean,std_z,sem_std\n"
        );
    }
}
