//! Ordinary least squares with backward-stepwise elimination.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, NumericTable, ParticipantProfile};
use crate::stats;

pub const INTERCEPT: &str = "Constant";

/// Relative size of a QR diagonal below which a column counts as dependent.
const RANK_TOL: f64 = 1e-9;

/// Regressors and a response. Columns exclude the intercept, which is added
/// by the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub response: String,
    pub y: Vec<f64>,
    pub columns: Vec<String>,
    /// Column-major values, one vector per column.
    pub x: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(
        response: impl Into<String>,
        y: Vec<f64>,
        columns: Vec<String>,
        x: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let d = Self {
            response: response.into(),
            y,
            columns,
            x,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn from_table(table: &NumericTable, response: &str, columns: &[String]) -> Result<Self> {
        let y = table
            .column(response)
            .ok_or_else(|| Error::UnknownVariable(response.to_string()))?;
        let x = columns
            .iter()
            .map(|c| {
                table
                    .column(c)
                    .ok_or_else(|| Error::UnknownVariable(c.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(response, y, columns.to_vec(), x)
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.y.is_empty() {
            return Err(Error::EmptyInput("regression rows"));
        }
        if self.columns.len() != self.x.len() {
            return Err(Error::LengthMismatch(self.columns.len(), self.x.len()));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if c == INTERCEPT || self.columns[..i].contains(c) {
                return Err(Error::DuplicateId {
                    kind: "column",
                    id: c.clone(),
                });
            }
        }
        for col in &self.x {
            if col.len() != self.y.len() {
                return Err(Error::LengthMismatch(self.y.len(), col.len()));
            }
        }
        if self
            .y
            .iter()
            .chain(self.x.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Parse(
                "design contains missing or non-finite cells".into(),
            ));
        }
        Ok(())
    }

    /// Copy without the named column.
    pub fn without(&self, column: &str) -> Self {
        let mut d = self.clone();
        if let Some(j) = d.columns.iter().position(|c| c == column) {
            d.columns.remove(j);
            d.x.remove(j);
        }
        d
    }

    fn matrix(&self) -> DMatrix<f64> {
        let n = self.n_rows();
        DMatrix::from_fn(n, self.columns.len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.x[j - 1][i]
            }
        })
    }

    fn names(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string())
            .chain(self.columns.iter().cloned())
            .collect()
    }
}

mod nan_scalar {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        v.is_finite().then_some(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub response: String,
    /// Coefficient names, intercept first.
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    #[serde(with = "crate::discrete_choice::nan_as_null")]
    pub std_err: Vec<f64>,
    #[serde(with = "crate::discrete_choice::nan_as_null")]
    pub t_stat: Vec<f64>,
    #[serde(with = "crate::discrete_choice::nan_as_null")]
    pub p_value: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r2: f64,
    pub r2_adj: f64,
    /// Undefined (null in JSON) for an intercept-only model.
    #[serde(with = "nan_scalar")]
    pub f_stat: f64,
    #[serde(with = "nan_scalar")]
    pub f_p: f64,
    pub n: usize,
    /// Regressors excluding the intercept.
    pub k: usize,
}

impl RegressionResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn regressors(&self) -> &[String] {
        &self.names[1..]
    }
}

/// Looks for a column that is a linear combination of earlier ones, given
/// the R factor of the full matrix. Returns its index and the earlier
/// columns it depends on.
fn dependent_column(r: &DMatrix<f64>, x: &DMatrix<f64>) -> Option<(usize, Vec<usize>)> {
    for j in 0..r.ncols() {
        let norm = x.column(j).norm();
        if r[(j, j)].abs() > RANK_TOL * norm.max(f64::MIN_POSITIVE) {
            continue;
        }
        if j == 0 || norm == 0.0 {
            return Some((j, Vec::new()));
        }
        let r11 = r.view((0, 0), (j, j)).into_owned();
        let r12 = r.view((0, j), (j, 1)).into_owned();
        let deps = r11
            .solve_upper_triangular(&r12)
            .map(|c| {
                (0..j)
                    .filter(|&i| c[i].abs() * x.column(i).norm() > 1e-8 * norm)
                    .collect()
            })
            .unwrap_or_default();
        return Some((j, deps));
    }
    None
}

/// Least-squares fit through a Householder QR decomposition.
pub fn ols_fit(design: &DesignMatrix) -> Result<RegressionResult> {
    design.validate()?;
    let n = design.n_rows();
    let p = design.columns.len() + 1;
    if n <= p {
        return Err(Error::NotEstimable { rows: n, params: p });
    }
    let x = design.matrix();
    let y = DVector::from_column_slice(&design.y);
    let qr = x.clone().qr();
    let r = qr.r();
    let names = design.names();
    if let Some((j, deps)) = dependent_column(&r, &x) {
        return Err(Error::RankDeficient {
            column: names[j].clone(),
            dependents: deps.into_iter().map(|i| names[i].clone()).collect(),
        });
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::NotEstimable { rows: n, params: p })?;
    let fitted = &x * &beta;
    let resid = &y - &fitted;
    let rss = resid.norm_squared();
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::InvalidSpec(format!(
            "response `{}` has zero variance",
            design.response
        )));
    }
    let k = p - 1;
    let df_resid = (n - p) as f64;
    let sigma2 = rss / df_resid;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| Error::NotEstimable { rows: n, params: p })?;
    let std_err: Vec<f64> = (0..p)
        .map(|j| (sigma2 * rinv.row(j).norm_squared()).sqrt())
        .collect();
    let t_stat: Vec<f64> = beta.iter().zip(&std_err).map(|(b, s)| b / s).collect();
    let p_value: Vec<f64> = t_stat
        .iter()
        .map(|t| stats::student_t_two_sided(*t, df_resid))
        .collect();
    let r2 = 1.0 - rss / tss;
    let r2_adj = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / df_resid;
    let (f_stat, f_p) = if k == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let f = (r2 / k as f64) / ((1.0 - r2) / df_resid);
        (f, stats::f_sf(f, k as f64, df_resid))
    };
    Ok(RegressionResult {
        response: design.response.clone(),
        names,
        beta: beta.iter().copied().collect(),
        std_err,
        t_stat,
        p_value,
        residuals: resid.iter().copied().collect(),
        r2,
        r2_adj,
        f_stat,
        f_p,
        n,
        k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub variable: String,
    pub f_to_remove: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseResult {
    pub result: RegressionResult,
    pub removals: Vec<Removal>,
}

/// Backward elimination: drops the regressor with the largest p-value while
/// that p-value exceeds `alpha_remove`. Ties remove the later column.
pub fn backward_stepwise(design: &DesignMatrix, alpha_remove: f64) -> Result<StepwiseResult> {
    let mut current = design.clone();
    let mut removals = Vec::new();
    loop {
        let fit = ols_fit(&current)?;
        let mut worst: Option<usize> = None;
        for j in 1..fit.names.len() {
            let p = fit.p_value[j];
            match worst {
                Some(w) if p < fit.p_value[w] => {}
                _ => worst = Some(j),
            }
        }
        match worst {
            Some(w) if fit.p_value[w] > alpha_remove => {
                log::debug!("removing {} (p = {})", fit.names[w], fit.p_value[w]);
                removals.push(Removal {
                    variable: fit.names[w].clone(),
                    f_to_remove: fit.t_stat[w].powi(2),
                    p_value: fit.p_value[w],
                });
                current = current.without(&fit.names[w]);
            }
            _ => {
                return Ok(StepwiseResult {
                    result: fit,
                    removals,
                })
            }
        }
    }
}

/// Response columns of the behavior models.
pub const BEHAVIORS: [&str; 3] = ["avg_speed_mps", "hesitations", "head_rotation_dps"];

/// Reference levels dropped from each dummy group.
pub const REFERENCE_LEVELS: [&str; 6] = [
    "task_1",
    "education_MSc",
    "familiar_not",
    "gaming_not",
    "VR_sometimes",
    "orientation_good",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeModelConfig {
    pub infra_columns: Vec<String>,
    pub personal_columns: Vec<String>,
    pub reference_levels: Vec<String>,
    pub alpha_remove: f64,
}

impl Default for ThreeModelConfig {
    fn default() -> Self {
        Self {
            infra_columns: FeatureVector::NAMES.iter().map(|s| s.to_string()).collect(),
            personal_columns: ParticipantProfile::NAMES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            reference_levels: REFERENCE_LEVELS.iter().map(|s| s.to_string()).collect(),
            alpha_remove: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenedColumn {
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub screened: Vec<ScreenedColumn>,
    pub fit: StepwiseResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreeModels {
    pub response: String,
    pub infra: Variant,
    pub personal: Variant,
    pub combined: Variant,
}

impl ThreeModels {
    pub fn variants(&self) -> [&Variant; 3] {
        [&self.infra, &self.personal, &self.combined]
    }
}

/// Drops reference levels, constant columns, and columns that are exact
/// linear combinations of earlier kept ones.
fn screen(
    table: &NumericTable,
    response: &str,
    columns: &[String],
    references: &[String],
) -> Result<(DesignMatrix, Vec<ScreenedColumn>)> {
    let y = table
        .column(response)
        .ok_or_else(|| Error::UnknownVariable(response.to_string()))?;
    let mut kept: Vec<String> = Vec::new();
    let mut kept_x: Vec<Vec<f64>> = Vec::new();
    let mut screened = Vec::new();
    for c in columns {
        if references.contains(c) {
            screened.push(ScreenedColumn {
                column: c.clone(),
                reason: "reference level".into(),
            });
            continue;
        }
        let col = table
            .column(c)
            .ok_or_else(|| Error::UnknownVariable(c.clone()))?;
        if col.iter().all(|v| *v == col[0]) {
            screened.push(ScreenedColumn {
                column: c.clone(),
                reason: "constant".into(),
            });
            continue;
        }
        let mut trial = kept_x.clone();
        trial.push(col.clone());
        let n = y.len();
        let x = DMatrix::from_fn(n, trial.len() + 1, |i, j| {
            if j == 0 {
                1.0
            } else {
                trial[j - 1][i]
            }
        });
        let r = x.clone().qr().r();
        let last = trial.len();
        let norm = x.column(last).norm();
        if n <= last || r[(last, last)].abs() <= RANK_TOL * norm {
            screened.push(ScreenedColumn {
                column: c.clone(),
                reason: "collinear with retained columns".into(),
            });
            continue;
        }
        kept.push(c.clone());
        kept_x.push(col);
    }
    Ok((DesignMatrix::new(response, y, kept, kept_x)?, screened))
}

fn variant(
    label: &str,
    table: &NumericTable,
    response: &str,
    columns: &[String],
    config: &ThreeModelConfig,
) -> Result<Variant> {
    let (design, screened) = screen(table, response, columns, &config.reference_levels)?;
    Ok(Variant {
        label: label.to_string(),
        screened,
        fit: backward_stepwise(&design, config.alpha_remove)?,
    })
}

/// Fits the infrastructure, personal, and combined models for one response.
pub fn run_three_models(
    table: &NumericTable,
    response: &str,
    config: &ThreeModelConfig,
) -> Result<ThreeModels> {
    let combined_cols: Vec<String> = config
        .infra_columns
        .iter()
        .chain(config.personal_columns.iter())
        .cloned()
        .collect();
    Ok(ThreeModels {
        response: response.to_string(),
        infra: variant("MLR infra", table, response, &config.infra_columns, config)?,
        personal: variant(
            "MLR personal char",
            table,
            response,
            &config.personal_columns,
            config,
        )?,
        combined: variant(
            "MLR infra + personal char",
            table,
            response,
            &combined_cols,
            config,
        )?,
    })
}

fn fmt_p(p: f64) -> String {
    if p.is_nan() {
        "-".into()
    } else if p < 0.001 {
        "<0.001".into()
    } else if p < 0.01 {
        "<0.01".into()
    } else {
        format!("{p:.3}")
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else if v != 0.0 && v.abs() < 1e-3 {
        format!("{v:.3e}")
    } else if v.abs() < 0.01 {
        format!("{v:.5}")
    } else {
        format!("{v:.3}")
    }
}

/// Side-by-side markdown table: Beta, Std and p-value per model, then the
/// adjusted R squared, F statistic and its significance.
pub fn results_markdown(models: &[(&str, &RegressionResult)]) -> String {
    let mut rows: Vec<String> = vec![INTERCEPT.to_string()];
    for (_, m) in models {
        for n in m.regressors() {
            if !rows.contains(n) {
                rows.push(n.clone());
            }
        }
    }
    let mut s = String::from("| Variable |");
    for (label, _) in models {
        s.push_str(&format!(" {label} Beta | Std | p-value |"));
    }
    s.push_str("\n|---|");
    for _ in models {
        s.push_str("---|---|---|");
    }
    s.push('\n');
    for r in &rows {
        s.push_str(&format!("| {r} |"));
        for (_, m) in models {
            match m.index(r) {
                Some(i) => s.push_str(&format!(
                    " {} | {} | {} |",
                    fmt_num(m.beta[i]),
                    fmt_num(m.std_err[i]),
                    fmt_p(m.p_value[i])
                )),
                None => s.push_str(" | | |"),
            }
        }
        s.push('\n');
    }
    let summary: [(&str, &dyn Fn(&RegressionResult) -> String); 3] = [
        ("Adj. R square", &|m| format!("{:.3}", m.r2_adj)),
        ("F stat", &|m| fmt_num(m.f_stat)),
        ("Significance", &|m| fmt_p(m.f_p)),
    ];
    for (label, f) in summary {
        s.push_str(&format!("| {label} |"));
        for (_, m) in models {
            s.push_str(&format!(" | {} | |", f(m)));
        }
        s.push('\n');
    }
    s
}

pub fn three_models_markdown(t: &ThreeModels) -> String {
    let models: Vec<(&str, &RegressionResult)> = t
        .variants()
        .iter()
        .map(|v| (v.label.as_str(), &v.fit.result))
        .collect();
    format!("### {}\n\n{}", t.response, results_markdown(&models))
}
