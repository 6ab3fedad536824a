use clap::ValueEnum;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Aligned text, numbers to 6 significant digits.
    Human,
    /// Pretty-printed JSON at full precision.
    Json,
    Csv,
}

/// One command's result in every output format.
pub struct Rendered {
    pub human: String,
    pub json: Value,
    pub csv: String,
}

impl Rendered {
    pub fn emit(&self, format: Format) -> String {
        let mut out = match format {
            Format::Human => self.human.clone(),
            Format::Json => serde_json::to_string_pretty(&self.json).expect("values serialize"),
            Format::Csv => self.csv.clone(),
        };
        if !out.ends_with('\n') {
            out.push('\n');
        }
        out
    }
}

/// `x` to 6 significant digits, trailing zeros trimmed.
pub fn sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        let s = format!("{x:.5e}");
        let (mant, exp) = s.split_once('e').expect("exponent form");
        return format!("{}e{exp}", trim(mant));
    }
    trim(&format!("{:.*}", (5 - mag).max(0) as usize, x)).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn sig_opt(x: Option<f64>) -> String { x.map_or_else(|| "-".into(), sig) }

/// Quotes a CSV field when needed.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Left-aligned columns separated by two spaces.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out += &line(r.iter().map(String::as_str).collect());
    }
    out
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",") + "\n";
    for r in rows {
        out += &(r.iter().map(|c| field(c)).collect::<Vec<_>>().join(",") + "\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig(0.32), "0.32");
        assert_eq!(sig(0.7455904), "0.74559");
        assert_eq!(sig(6.228818690495881), "6.22882");
        assert_eq!(sig(-0.0649), "-0.0649");
        assert_eq!(sig(1.0), "1");
        assert_eq!(sig(123456789.0), "1.23457e8");
        assert_eq!(sig(0.0000123), "1.23e-5");
        assert_eq!(sig(-0.0), "0");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(field("0.5::a :- b."), "0.5::a :- b.");
        assert_eq!(field("p(a,b)"), "\"p(a,b)\"");
        assert_eq!(field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
