use std::cmp::Ordering;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{DatasetSummary, MixtureSummary, RunConfig, VarEntry};
use crate::calibration::{CalibrationChoice, CalibrationMethod};
use crate::classifiers::ModelTag;
use crate::metrics::ClassificationReport;
use crate::mixture::DistributionSource;

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSummary {
    pub method: CalibrationMethod,
    #[serde(with = "crate::serde_float")]
    pub platt_ece: f64,
    #[serde(with = "crate::serde_float")]
    pub isotonic_ece: f64,
}

impl CalibrationSummary {
    /// Validation ECE of the chosen map.
    pub fn chosen_ece(&self) -> f64 {
        match self.method {
            CalibrationMethod::Platt => self.platt_ece,
            CalibrationMethod::Isotonic => self.isotonic_ece,
        }
    }
}

impl From<CalibrationChoice> for CalibrationSummary {
    fn from(c: CalibrationChoice) -> Self {
        Self {
            method: c.method,
            platt_ece: c.platt_ece,
            isotonic_ece: c.isotonic_ece,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub tag: ModelTag,
    pub metrics: ClassificationReport,
    /// Absent for logistic regression, which is not recalibrated.
    pub calibration: Option<CalibrationSummary>,
    pub mixture: MixtureSummary,
}

/// Everything a run produced, in the order the models are listed in
/// [`ModelTag::ALL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub models: Vec<ModelReport>,
    pub var: Vec<VarEntry>,
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), num)
}

fn alpha_key(alpha: f64) -> String {
    format!("{alpha}")
}

impl RunReport {
    pub fn model(&self, tag: ModelTag) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.tag == tag)
    }

    pub fn var_of(&self, tag: ModelTag, source: DistributionSource, d: usize, alpha: f64) -> Option<usize> {
        self.var
            .iter()
            .find(|e| e.model == tag && e.source == source && e.d == d && e.alpha == alpha)
            .map(|e| e.count)
    }

    /// One `key = value` pair per line, keys dotted and stable, floats in
    /// shortest round-trip form. Two runs of the same configuration produce
    /// identical text.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: String, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("format_version".into(), self.format_version.to_string());
        kv("config".into(), serde_json::to_string(&self.config).unwrap_or_default());
        kv("seed.split".into(), self.config.split.seed.to_string());
        kv("seed.model".into(), self.config.model_seed.to_string());
        let ds = &self.dataset;
        kv("data.source".into(), ds.source.clone());
        for (k, v) in [
            ("n", ds.n),
            ("m", ds.m),
            ("n_default", ds.n_default),
            ("n_non_default", ds.n_non_default),
            ("n_fit", ds.n_fit),
            ("n_validation", ds.n_validation),
            ("n_test", ds.n_test),
        ] {
            kv(format!("data.{k}"), v.to_string());
        }
        for (k, v) in [
            ("default_rate", ds.default_rate),
            ("fit_default_rate", ds.fit_default_rate),
            ("validation_default_rate", ds.validation_default_rate),
            ("test_default_rate", ds.test_default_rate),
        ] {
            kv(format!("data.{k}"), num(v));
        }
        for m in &self.models {
            let t = m.tag.as_str();
            let r = &m.metrics;
            let cm = &r.confusion;
            kv(format!("model.{t}.confusion"), format!("tp={} fp={} tn={} fn={}", cm.tp, cm.fp, cm.tn, cm.fn_));
            for (avg, s) in [("positive", &r.positive), ("weighted", &r.weighted)] {
                kv(format!("model.{t}.{avg}.precision"), num(s.precision));
                kv(format!("model.{t}.{avg}.recall"), num(s.recall));
                kv(format!("model.{t}.{avg}.f1"), num(s.f1));
            }
            kv(format!("model.{t}.auc"), num(r.auc));
            match &m.calibration {
                Some(c) => {
                    kv(format!("model.{t}.calibration.method"), c.method.to_string());
                    kv(format!("model.{t}.calibration.platt_ece"), num(c.platt_ece));
                    kv(format!("model.{t}.calibration.isotonic_ece"), num(c.isotonic_ece));
                }
                None => kv(format!("model.{t}.calibration.method"), "none".into()),
            }
            let mx = &m.mixture;
            kv(format!("model.{t}.mixture.n"), mx.n.to_string());
            kv(format!("model.{t}.mixture.p"), num(mx.p));
            kv(format!("model.{t}.mixture.pi2"), num(mx.pi2));
            kv(format!("model.{t}.mixture.rho"), opt(mx.rho));
            kv(format!("model.{t}.beta.a"), opt(mx.beta.map(|b| b.a)));
            kv(format!("model.{t}.beta.b"), opt(mx.beta.map(|b| b.b)));
            for e in &mx.kl {
                kv(format!("model.{t}.kl.d{}", e.d), num(e.value));
            }
            kv(format!("model.{t}.ks.statistic"), opt(mx.ks.map(|k| k.statistic)));
            kv(format!("model.{t}.ks.p_value"), opt(mx.ks.map(|k| k.p_value)));
            for c in &mx.moment_route {
                kv(format!("model.{t}.moment_route.d{}.max_abs_diff", c.d), opt(c.max_abs_diff));
            }
        }
        for e in &self.var {
            kv(
                format!("var.{}.{}.d{}.alpha{}", e.model.as_str(), e.source.as_str(), e.d, alpha_key(e.alpha)),
                e.count.to_string(),
            );
        }
        out
    }

    /// Aligned plain-text tables, one per quantity.
    pub fn tables(&self) -> String {
        let mut out = String::new();
        let ds = &self.dataset;
        let _ = writeln!(out, "Data: {} ({} rows, {} covariates)", ds.source, ds.n, ds.m);
        let _ = writeln!(
            out,
            "Defaults: {} of {} ({:.2}%); fit {} rows, validation {}, test {}\n",
            ds.n_default,
            ds.n,
            100.0 * ds.default_rate,
            ds.n_fit,
            ds.n_validation,
            ds.n_test
        );

        let models: Vec<String> = self.models.iter().map(|m| m.tag.to_string()).collect();
        let mut table = |title: &str, rows: Vec<(String, Vec<String>)>| {
            let _ = writeln!(out, "{title}");
            let label_w = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0).max(6);
            let col_w = rows
                .iter()
                .flat_map(|r| r.1.iter().map(|c| c.chars().count()))
                .chain(models.iter().map(|s| s.len()))
                .max()
                .unwrap_or(0)
                .max(8);
            let _ = write!(out, "{:<label_w$}", "");
            for m in &models {
                let _ = write!(out, "  {m:>col_w$}");
            }
            out.push('\n');
            for (label, cells) in rows {
                let _ = write!(out, "{label:<label_w$}");
                for c in cells {
                    let _ = write!(out, "  {c:>col_w$}");
                }
                out.push('\n');
            }
            out.push('\n');
        };

        let col = |f: &dyn Fn(&ModelReport) -> String| self.models.iter().map(f).collect::<Vec<_>>();
        let f4 = |v: f64| format!("{v:.4}");
        table(
            "Classification on the test set (threshold 0.5)",
            vec![
                ("precision (default class)".into(), col(&|m| f4(m.metrics.positive.precision))),
                ("recall (default class)".into(), col(&|m| f4(m.metrics.positive.recall))),
                ("F1 (default class)".into(), col(&|m| f4(m.metrics.positive.f1))),
                ("precision (weighted)".into(), col(&|m| f4(m.metrics.weighted.precision))),
                ("recall (weighted)".into(), col(&|m| f4(m.metrics.weighted.recall))),
                ("F1 (weighted)".into(), col(&|m| f4(m.metrics.weighted.f1))),
                ("AUC".into(), col(&|m| f4(m.metrics.auc))),
            ],
        );
        let pct = |v: f64| if v.is_finite() { format!("{:.2}%", 100.0 * v) } else { "failed".into() };
        table(
            "Calibration (validation ECE)",
            vec![
                ("method".into(), col(&|m| m.calibration.map_or("none".into(), |c| c.method.to_string()))),
                ("Platt".into(), col(&|m| m.calibration.map_or("-".into(), |c| pct(c.platt_ece)))),
                ("isotonic".into(), col(&|m| m.calibration.map_or("-".into(), |c| pct(c.isotonic_ece)))),
            ],
        );
        let or_dash = |v: Option<f64>| v.map_or("-".into(), f4);
        table(
            "Moments of the mixing sample",
            vec![
                ("p".into(), col(&|m| f4(m.mixture.p))),
                ("pi2".into(), col(&|m| f4(m.mixture.pi2))),
                ("rho".into(), col(&|m| or_dash(m.mixture.rho))),
            ],
        );
        table(
            "Beta fit",
            vec![
                ("a".into(), col(&|m| m.mixture.beta.map_or("-".into(), |b| format!("{:.2}", b.a)))),
                ("b".into(), col(&|m| m.mixture.beta.map_or("-".into(), |b| format!("{:.2}", b.b)))),
                ("KS statistic".into(), col(&|m| or_dash(m.mixture.ks.map(|k| k.statistic)))),
                ("KS p-value".into(), col(&|m| m.mixture.ks.map_or("-".into(), |k| format!("{:.3e}", k.p_value)))),
            ],
        );
        let kl_sizes: Vec<usize> = self.models.first().map(|m| m.mixture.kl.iter().map(|e| e.d).collect()).unwrap_or_default();
        if !kl_sizes.is_empty() {
            table(
                "KL divergence D(non-parametric || beta-binomial)",
                kl_sizes
                    .iter()
                    .map(|&d| {
                        let cells = col(&|m| {
                            m.mixture.kl.iter().find(|e| e.d == d).map_or("-".into(), |e| format!("{:.4}", e.value))
                        });
                        (format!("d = {d}"), cells)
                    })
                    .collect(),
            );
        }
        for &d in &self.config.portfolio_sizes {
            let mut rows = Vec::new();
            for &alpha in &self.config.alphas {
                for source in [DistributionSource::Nonparametric, DistributionSource::BetaBinomial] {
                    let cells = col(&|m| self.var_of(m.tag, source, d, alpha).map_or("-".into(), |v| v.to_string()));
                    if cells.iter().any(|c| c != "-") {
                        rows.push((format!("alpha {alpha} {}", source.as_str()), cells));
                    }
                }
            }
            if !rows.is_empty() {
                table(&format!("VaR of the number of defaults, d = {d}"), rows);
            }
        }
        out.push_str(&compare_models(self).to_string());
        out
    }
}

/// How a model's value compares with the reference one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Above,
    Tie,
    Below,
}

impl Relation {
    pub fn of<T: PartialOrd>(value: T, reference: T) -> Option<Self> {
        value.partial_cmp(&reference).map(|o| match o {
            Ordering::Greater => Relation::Above,
            Ordering::Equal => Relation::Tie,
            Ordering::Less => Relation::Below,
        })
    }

    fn symbol(&self) -> &'static str {
        match self {
            Relation::Above => ">",
            Relation::Tie => "=",
            Relation::Below => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsLogistic {
    pub model: ModelTag,
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    pub relation: Option<Relation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaVsNonparametric {
    pub model: ModelTag,
    pub d: usize,
    pub alpha: f64,
    pub beta: usize,
    pub nonparametric: usize,
    pub relation: Relation,
}

/// The qualitative orderings between models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    /// Each machine-learning model against logistic regression: `rho`, `p`,
    /// `auc` and `var.<source>.d<d>.alpha<α>`.
    pub vs_logistic: Vec<VsLogistic>,
    pub beta_vs_nonparametric: Vec<BetaVsNonparametric>,
    /// The machine-learning model with the smallest divergence from its
    /// beta fit, per portfolio size.
    pub best_kl: Vec<(usize, ModelTag)>,
}

impl ModelComparison {
    pub fn relation(&self, model: ModelTag, quantity: &str) -> Option<Relation> {
        self.vs_logistic
            .iter()
            .find(|v| v.model == model && v.quantity == quantity)
            .and_then(|v| v.relation)
    }

    pub fn best_kl_at(&self, d: usize) -> Option<ModelTag> {
        self.best_kl.iter().find(|(k, _)| *k == d).map(|(_, t)| *t)
    }
}

pub fn var_quantity(source: DistributionSource, d: usize, alpha: f64) -> String {
    format!("var.{}.d{d}.alpha{}", source.as_str(), alpha_key(alpha))
}

pub fn compare_models(report: &RunReport) -> ModelComparison {
    let mut vs_logistic = Vec::new();
    let mut beta_vs_nonparametric = Vec::new();
    let mut best_kl = Vec::new();
    if let Some(lr) = report.model(ModelTag::Lr) {
        for m in report.models.iter().filter(|m| m.tag != ModelTag::Lr) {
            let mut push = |quantity: String, value: Option<f64>, reference: Option<f64>| {
                if let (Some(value), Some(reference)) = (value, reference) {
                    vs_logistic.push(VsLogistic {
                        model: m.tag,
                        quantity,
                        value,
                        reference,
                        relation: Relation::of(value, reference),
                    });
                }
            };
            push("rho".into(), m.mixture.rho, lr.mixture.rho);
            push("p".into(), Some(m.mixture.p), Some(lr.mixture.p));
            push("auc".into(), Some(m.metrics.auc), Some(lr.metrics.auc));
            for &d in &report.config.portfolio_sizes {
                for &alpha in &report.config.alphas {
                    for source in [DistributionSource::Nonparametric, DistributionSource::BetaBinomial] {
                        push(
                            var_quantity(source, d, alpha),
                            report.var_of(m.tag, source, d, alpha).map(|v| v as f64),
                            report.var_of(ModelTag::Lr, source, d, alpha).map(|v| v as f64),
                        );
                    }
                }
            }
        }
    }
    for m in &report.models {
        for &d in &report.config.portfolio_sizes {
            for &alpha in &report.config.alphas {
                let beta = report.var_of(m.tag, DistributionSource::BetaBinomial, d, alpha);
                let np = report.var_of(m.tag, DistributionSource::Nonparametric, d, alpha);
                if let (Some(beta), Some(nonparametric)) = (beta, np) {
                    beta_vs_nonparametric.push(BetaVsNonparametric {
                        model: m.tag,
                        d,
                        alpha,
                        beta,
                        nonparametric,
                        relation: Relation::of(beta, nonparametric).unwrap_or(Relation::Tie),
                    });
                }
            }
        }
    }
    for &d in &report.config.portfolio_sizes {
        let best = report
            .models
            .iter()
            .filter(|m| m.tag.is_calibrated())
            .filter_map(|m| m.mixture.kl.iter().find(|e| e.d == d).map(|e| (m.tag, e.value)))
            .filter(|(_, v)| !v.is_nan())
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((tag, _)) = best {
            best_kl.push((d, tag));
        }
    }
    ModelComparison {
        vs_logistic,
        beta_vs_nonparametric,
        best_kl,
    }
}

impl std::fmt::Display for ModelComparison {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Comparisons with LR")?;
        for v in &self.vs_logistic {
            let rel = v.relation.map_or("?", |r| r.symbol());
            writeln!(f, "  {:<4} {:<30} {} {} {}", v.model, v.quantity, v.value, rel, v.reference)?;
        }
        if !self.beta_vs_nonparametric.is_empty() {
            writeln!(f, "Beta-binomial vs non-parametric VaR")?;
            for b in &self.beta_vs_nonparametric {
                writeln!(
                    f,
                    "  {:<4} d = {:<6} alpha {:<5} beta {} {} nonparam {}",
                    b.model,
                    b.d,
                    b.alpha,
                    b.beta,
                    b.relation.symbol(),
                    b.nonparametric
                )?;
            }
        }
        for (d, tag) in &self.best_kl {
            writeln!(f, "Smallest KL among ML models at d = {d}: {tag}")?;
        }
        Ok(())
    }
}
