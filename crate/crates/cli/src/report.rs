use std::fmt::Write as _;

use carnot::geodesics::QUADRATURE_TOL;
use carnot::jmaps::{INVERTIBLE_BOUND, SINGULAR_WITNESS_TOL};
use carnot::linalg::TAU_RANK;
use sha2::{Digest, Sha256};

use crate::args::Format;

pub const SHOOTING_RESIDUAL: f64 = 1e-8;

/// Report text with a fixed header.
pub struct Report {
    format: Format,
    out: String,
}

impl Report {
    pub fn new(format: Format, command: &str, spec_name: &str, spec_text: &str, seed: u64, budget: usize) -> Self {
        let hash = hex(&Sha256::digest(spec_text.as_bytes()));
        let mut out = String::new();
        let _ = writeln!(out, "# carnot {command}");
        let _ = writeln!(out, "# spec: {spec_name}");
        let _ = writeln!(out, "# spec_sha256: {hash}");
        let _ = writeln!(out, "# seed: {seed}");
        let _ = writeln!(out, "# budget: {budget}");
        let _ = writeln!(
            out,
            "# tolerances: tau_rank={TAU_RANK:e} singular_witness={SINGULAR_WITNESS_TOL:e} \
             invertible_bound={INVERTIBLE_BOUND:e} quadrature={QUADRATURE_TOL:e} \
             shooting_residual={SHOOTING_RESIDUAL:e}"
        );
        Report { format, out }
    }

    pub fn format(&self) -> Format {
        self.format
    }

    /// `key: value` in text, `# key: value` in csv.
    pub fn field(&mut self, key: &str, value: impl std::fmt::Display) {
        match self.format {
            Format::Text => writeln!(self.out, "{key}: {value}"),
            Format::Csv => writeln!(self.out, "# {key}: {value}"),
        }
        .expect("string write");
    }

    pub fn line(&mut self, line: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{line}");
    }

    pub fn num(&self, x: f64) -> String {
        num(self.format, x)
    }

    pub fn vec(&self, v: impl IntoIterator<Item = f64>) -> String {
        v.into_iter().map(|x| self.num(x)).collect::<Vec<_>>().join(",")
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// 17 significant digits in csv, shortest round-trip form in text
/// (exponent form outside [1e-4, 1e15)).
pub fn num(format: Format, x: f64) -> String {
    match format {
        Format::Csv if x.is_finite() => format!("{x:.16e}"),
        _ if x != 0.0 && x.is_finite() && !(1e-4..1e15).contains(&x.abs()) => format!("{x:e}"),
        _ => format!("{x}"),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
