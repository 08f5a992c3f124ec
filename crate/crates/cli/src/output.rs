use std::io::Write;

use anyhow::Result;
use borrowsize::design::{SizeConvention, SweepRow};
use borrowsize::report::WeightRow;
use borrowsize::{CollectivePrior, SampleSizeResult, SimulationResult};
use serde_json::Value;

/// Number formatting: 6 significant digits unless `exact`.
#[derive(Debug, Clone, Copy)]
pub struct Fmt {
    pub exact: bool,
}

impl Fmt {
    pub fn num(self, x: f64) -> String {
        if self.exact || !x.is_finite() || x == 0.0 {
            return format!("{x}");
        }
        format!("{}", round_sig(x))
    }

    /// Rounds every non-integer number in `v` in place.
    pub fn json(self, v: &mut Value) {
        if self.exact {
            return;
        }
        match v {
            Value::Number(n) if n.is_f64() => {
                if let Some(r) = n
                    .as_f64()
                    .map(round_sig)
                    .and_then(serde_json::Number::from_f64)
                {
                    *n = r;
                }
            }
            Value::Array(xs) => xs.iter_mut().for_each(|x| self.json(x)),
            Value::Object(m) => m.values_mut().for_each(|x| self.json(x)),
            _ => {}
        }
    }

    pub fn to_json(self, value: &impl serde::Serialize) -> Result<String> {
        let mut v = serde_json::to_value(value)?;
        self.json(&mut v);
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }
}

fn round_sig(x: f64) -> f64 {
    format!("{x:.5e}").parse().unwrap_or(x)
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(k, (c, w))| {
                if k == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec()) + "\n";
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
        out.push('\n');
    }
    out
}

pub fn weights_table(rows: &[WeightRow], f: Fmt) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.id.clone(), f.num(r.w), f.num(r.w_transformed)])
        .collect();
    table(&["source", "w", "w_transformed"], &body)
}

pub fn prior_text(prior: &CollectivePrior, ids: &[String], weights: &[f64], f: Fmt) -> String {
    let body: Vec<Vec<String>> = ids
        .iter()
        .zip(weights)
        .zip(&prior.synthesis_weights)
        .map(|((id, &w), &p)| vec![id.clone(), f.num(w), f.num(p)])
        .collect();
    let mut out = table(&["source", "weight", "synthesis_weight"], &body);
    out += &format!(
        "\nmethod     {}\nweights    {}\nmean       {}\nvariance   {}\nprecision  {}\n",
        serde_json::to_value(prior.method)
            .map(|v| v.as_str().unwrap_or("").to_string())
            .unwrap_or_default(),
        serde_json::to_value(prior.weight_kind)
            .map(|v| v.as_str().unwrap_or("").to_string())
            .unwrap_or_default(),
        f.num(prior.mean),
        f.num(prior.variance),
        f.num(prior.precision()),
    );
    for q in &prior.degenerate_sources {
        out += &format!("warning: source {} has near-zero variance\n", ids[*q]);
    }
    out
}

fn convention_label(c: SizeConvention) -> &'static str {
    match c {
        SizeConvention::TotalSubjects => "total subjects",
        SizeConvention::SubjectsPerArm => "subjects per arm",
        SizeConvention::TotalEvents => "total events",
    }
}

pub fn sample_size_text(label: &str, r: &SampleSizeResult, f: Fmt) -> String {
    let mut out = format!("{label}: n = {} {}\n", r.n, convention_label(r.convention));
    out += &format!("  n_real          {}\n", f.num(r.n_real));
    if let Some(arms) = r.arms {
        out += &format!(
            "  arms            {} treatment, {} control\n",
            arms.treatment, arms.control
        );
    }
    out += &format!("  prior precision {}\n", f.num(r.prior_precision_used));
    if r.decisive_by_prior {
        out += "  the prior alone is decisive\n";
    }
    for w in &r.warnings {
        out += &format!("  warning: {w}\n");
    }
    out
}

pub fn simulation_table(results: &[SimulationResult], f: Fmt) -> String {
    let body: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                f.num(r.true_mu_delta),
                format!("{:.1}", r.pct_efficacious),
                format!("{:.1}", r.pct_futile),
                format!("{:.1}", r.pct_inconclusive),
                format!(
                    "{:.0}",
                    r.pct_efficacious + r.pct_futile + r.pct_inconclusive
                ),
                format!("{:.2}", r.mc_stderr),
                r.replicates.to_string(),
            ]
        })
        .collect();
    table(
        &[
            "n",
            "mu_delta",
            "% Eff.",
            "% Fut.",
            "% Inc.",
            "Total %",
            "MC s.e.",
            "replicates",
        ],
        &body,
    )
}

pub fn write_simulation_csv(results: &[SimulationResult], out: impl Write, f: Fmt) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "n",
        "true_mu_delta",
        "replicates",
        "seed",
        "efficacious",
        "futile",
        "inconclusive",
        "pct_efficacious",
        "pct_futile",
        "pct_inconclusive",
        "mc_stderr",
    ])?;
    for r in results {
        w.write_record([
            r.n.to_string(),
            f.num(r.true_mu_delta),
            r.replicates.to_string(),
            r.seed.to_string(),
            r.efficacious.to_string(),
            r.futile.to_string(),
            r.inconclusive.to_string(),
            f.num(r.pct_efficacious),
            f.num(r.pct_futile),
            f.num(r.pct_inconclusive),
            f.num(r.mc_stderr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(
    axis_names: &[String],
    rows: &[SweepRow],
    out: impl Write,
    f: Fmt,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header: Vec<&str> = axis_names.iter().map(String::as_str).collect();
    header.extend([
        "precision_star",
        "precision_legacy",
        "n_star_raw",
        "n_star_linearized",
    ]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec: Vec<String> = r.weights.iter().map(|&x| f.num(x)).collect();
        rec.extend([
            f.num(r.precision_star),
            f.num(r.precision_legacy),
            f.num(r.n_star_raw),
            f.num(r.n_star_linearized),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        let f = Fmt { exact: false };
        assert_eq!(f.num(336.729_312), "336.729");
        assert_eq!(f.num(0.000_766_123_4), "0.000766123");
        assert_eq!(f.num(204.0), "204");
        assert_eq!(f.num(-0.130_612_3), "-0.130612");
        assert_eq!(Fmt { exact: true }.num(0.1 + 0.2), "0.30000000000000004");
    }

    #[test]
    fn json_rounding_keeps_integers() {
        let mut v = serde_json::json!({"n": 204, "x": [1.23456789, 2.0], "s": "a"});
        Fmt { exact: false }.json(&mut v);
        assert_eq!(
            v,
            serde_json::json!({"n": 204, "x": [1.23457, 2.0], "s": "a"})
        );
    }
}
