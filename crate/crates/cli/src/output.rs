//! CSV rows and number formatting.

use std::io::Write;

use platform_qbd::{Model, ModelParams};

use crate::CliError;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const COLUMNS: [&str; 21] = [
    "model",
    "lambda",
    "mu",
    "gamma",
    "n_owners",
    "price",
    "share",
    "rho",
    "stable",
    "eq1",
    "eq2",
    "ew_little",
    "ew_rg",
    "f1",
    "f2",
    "f1_throughput_based",
    "throughput",
    "source",
    "residual_R",
    "tail_mass",
    "seed",
];

/// `%.12g`: fixed notation for exponents in `[-5, 12)`, scientific otherwise,
/// trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// One row of the results table. Absent values are written as empty cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultRow {
    pub model: String,
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub n_owners: usize,
    pub price: f64,
    pub share: f64,
    pub rho: f64,
    pub stable: bool,
    pub eq1: Option<f64>,
    pub eq2: Option<f64>,
    pub ew_little: Option<f64>,
    pub ew_rg: Option<f64>,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    pub f1_throughput_based: Option<f64>,
    pub throughput: Option<f64>,
    pub source: String,
    pub residual_r: Option<f64>,
    pub tail_mass: Option<f64>,
    pub seed: Option<u64>,
}

impl ResultRow {
    pub fn new(model: Model, params: &ModelParams, rho: f64, source: &str) -> Self {
        Self {
            model: model.as_str().into(),
            lambda: params.lambda,
            mu: params.mu,
            gamma: params.gamma,
            n_owners: params.n_owners,
            price: params.price,
            share: params.share,
            rho,
            stable: rho < 1.0,
            source: source.into(),
            ..Self::default()
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.model.clone(),
            fmt_num(self.lambda),
            fmt_num(self.mu),
            fmt_num(self.gamma),
            self.n_owners.to_string(),
            fmt_num(self.price),
            fmt_num(self.share),
            fmt_num(self.rho),
            self.stable.to_string(),
            fmt_opt(self.eq1),
            fmt_opt(self.eq2),
            fmt_opt(self.ew_little),
            fmt_opt(self.ew_rg),
            fmt_opt(self.f1),
            fmt_opt(self.f2),
            fmt_opt(self.f1_throughput_based),
            fmt_opt(self.throughput),
            self.source.clone(),
            fmt_opt(self.residual_r),
            fmt_opt(self.tail_mass),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
        ]
    }
}

pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<(), CliError> {
    let fields: Vec<Vec<String>> = rows.iter().map(ResultRow::fields).collect();
    write_table(out, &COLUMNS, &fields)
}
