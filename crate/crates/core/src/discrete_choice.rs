//! Multinomial and path-size logit route-choice models: utilities,
//! probabilities, maximum-likelihood estimation and fit statistics.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{route_features, FeatureVector, ParticipantProfile};
use crate::netgraph::Network;
use crate::optimize::{maximizers, Objective, StopRule, DEFAULT_MAXIMIZER};
use crate::registry::{Named, Registry};
use crate::routeset::RouteSet;
use crate::stats::{self, TestResult};

/// Distance variables enter the model in units of 10 m.
pub const DISTANCE_SCALE: f64 = 1000.0;

/// Name of the structural log path-size term appended by the PSL family.
pub const PATH_SIZE_TERM: &str = "ln_path_size";

/// Name separator for route-by-person interaction terms.
pub const INTERACTION_SEP: &str = " x ";

// ---------------------------------------------------------------------------
// Families

/// A logit family: decides which structural terms are appended to the
/// searched terms and how they are evaluated.
pub trait ChoiceFamily: Named + Send + Sync {
    fn structural_terms(&self) -> &'static [&'static str];

    /// Values of the structural terms for route `r` of `obs`.
    fn structural_values(&self, obs: &ChoiceObservation, r: usize) -> Result<Vec<f64>>;
}

pub struct Mnl;

impl Named for Mnl {
    fn name(&self) -> &'static str {
        "mnl"
    }
}

impl ChoiceFamily for Mnl {
    fn structural_terms(&self) -> &'static [&'static str] {
        &[]
    }
    fn structural_values(&self, _: &ChoiceObservation, _: usize) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }
}

pub struct Psl;

impl Named for Psl {
    fn name(&self) -> &'static str {
        "psl"
    }
}

impl ChoiceFamily for Psl {
    fn structural_terms(&self) -> &'static [&'static str] {
        &[PATH_SIZE_TERM]
    }
    fn structural_values(&self, obs: &ChoiceObservation, r: usize) -> Result<Vec<f64>> {
        let ps = obs.path_sizes[r];
        if !(ps > 0.0) {
            return Err(Error::NonPositivePathSize(ps));
        }
        Ok(vec![ps.ln()])
    }
}

pub fn families() -> Registry<dyn ChoiceFamily> {
    let mut r: Registry<dyn ChoiceFamily> = Registry::new("model family");
    r.register(Arc::new(Mnl)).register(Arc::new(Psl));
    r
}

// ---------------------------------------------------------------------------
// Specification

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    #[serde(default)]
    pub terms: Vec<String>,
    /// (route variable, person variable) pairs.
    #[serde(default)]
    pub interactions: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
enum Column {
    Route(usize),
    Interaction(usize, String),
    Structural(usize),
}

fn route_index(name: &str) -> Result<usize> {
    FeatureVector::NAMES
        .iter()
        .position(|n| *n == name)
        .ok_or_else(|| Error::UnknownVariable(name.to_string()))
}

fn term_scale(route_var: &str) -> f64 {
    if FeatureVector::DISTANCES.contains(&route_var) {
        DISTANCE_SCALE
    } else {
        1.0
    }
}

pub fn interaction_name(route: &str, person: &str) -> String {
    format!("{route}{INTERACTION_SEP}{person}")
}

impl ModelSpec {
    pub fn new(family: &str, terms: &[&str]) -> Self {
        Self {
            family: family.to_string(),
            terms: terms.iter().map(|s| s.to_string()).collect(),
            interactions: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn family_impl(&self) -> Result<Arc<dyn ChoiceFamily>> {
        families().get(&self.family)
    }

    pub fn validate(&self) -> Result<()> {
        let family = self.family_impl()?;
        let mut seen = BTreeSet::new();
        for t in &self.terms {
            route_index(t)?;
            if !seen.insert(t.clone()) {
                return Err(Error::InvalidSpec(format!("duplicate term `{t}`")));
            }
        }
        for (r, p) in &self.interactions {
            route_index(r)?;
            if !ParticipantProfile::is_variable(p) {
                return Err(Error::UnknownVariable(p.clone()));
            }
            let name = interaction_name(r, p);
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidSpec(format!("duplicate term `{name}`")));
            }
        }
        if seen.is_empty() && family.structural_terms().is_empty() {
            return Err(Error::InvalidSpec("model has no parameters".into()));
        }
        Ok(())
    }

    /// Searched term names: route terms, then interactions.
    pub fn searched_terms(&self) -> Vec<String> {
        self.terms
            .iter()
            .cloned()
            .chain(
                self.interactions
                    .iter()
                    .map(|(r, p)| interaction_name(r, p)),
            )
            .collect()
    }

    /// All parameter names in estimation order.
    pub fn parameter_names(&self) -> Result<Vec<String>> {
        let fam = self.family_impl()?;
        let mut names = self.searched_terms();
        names.extend(fam.structural_terms().iter().map(|s| s.to_string()));
        Ok(names)
    }

    pub fn n_params(&self) -> Result<usize> {
        Ok(self.parameter_names()?.len())
    }

    fn columns(&self) -> Result<(Vec<Column>, Vec<f64>)> {
        self.validate()?;
        let fam = self.family_impl()?;
        let mut cols = Vec::new();
        let mut scale = Vec::new();
        for t in &self.terms {
            cols.push(Column::Route(route_index(t)?));
            scale.push(term_scale(t));
        }
        for (r, p) in &self.interactions {
            cols.push(Column::Interaction(route_index(r)?, p.clone()));
            scale.push(term_scale(r));
        }
        for i in 0..fam.structural_terms().len() {
            cols.push(Column::Structural(i));
            scale.push(1.0);
        }
        Ok((cols, scale))
    }

    /// Order-independent identity of the term set.
    pub fn canonical_key(&self) -> String {
        let mut t: Vec<String> = self.searched_terms();
        t.sort();
        format!("{}:{}", self.family.to_ascii_lowercase(), t.join("|"))
    }

    pub fn with_term(&self, term: &str) -> Self {
        let mut s = self.clone();
        s.terms.push(term.to_string());
        s
    }

    pub fn with_interaction(&self, route: &str, person: &str) -> Self {
        let mut s = self.clone();
        s.interactions.push((route.to_string(), person.to_string()));
        s
    }

    /// Design matrix of one observation (routes by parameters), with
    /// distance columns divided by their scale.
    pub fn design(&self, obs: &ChoiceObservation) -> Result<DMatrix<f64>> {
        let (cols, scale) = self.columns()?;
        self.design_with(&cols, &scale, obs)
    }

    fn design_with(
        &self,
        cols: &[Column],
        scale: &[f64],
        obs: &ChoiceObservation,
    ) -> Result<DMatrix<f64>> {
        let fam = self.family_impl()?;
        let r = obs.features.len();
        let mut x = DMatrix::zeros(r, cols.len());
        for i in 0..r {
            let fv = obs.features[i].values();
            let structural = fam.structural_values(obs, i)?;
            for (j, c) in cols.iter().enumerate() {
                x[(i, j)] = match c {
                    Column::Route(k) => fv[*k] / scale[j],
                    Column::Interaction(k, p) => {
                        let pv = obs
                            .profile
                            .get(p)
                            .ok_or_else(|| Error::UnknownVariable(p.clone()))?;
                        fv[*k] * pv / scale[j]
                    }
                    Column::Structural(s) => structural[*s],
                };
            }
        }
        Ok(x)
    }
}

// ---------------------------------------------------------------------------
// Observations

/// One participant-task choice among a set of alternative routes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceObservation {
    #[serde(default)]
    pub participant: u32,
    #[serde(default)]
    pub task: u32,
    /// Link ids of each alternative, kept for traceability.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub routes: Vec<Vec<String>>,
    pub features: Vec<FeatureVector>,
    pub path_sizes: Vec<f64>,
    pub chosen_index: usize,
    pub profile: ParticipantProfile,
}

impl ChoiceObservation {
    pub fn from_route_set(
        network: &Network,
        set: &RouteSet,
        chosen_index: usize,
        participant: u32,
        task: u32,
        profile: ParticipantProfile,
    ) -> Result<Self> {
        let features = set
            .routes()
            .iter()
            .map(|r| route_features(r, network, task))
            .collect::<Result<Vec<_>>>()?;
        let obs = Self {
            participant,
            task,
            routes: set.routes().iter().map(|r| r.links.clone()).collect(),
            features,
            path_sizes: set.path_sizes(),
            chosen_index,
            profile,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn n_alternatives(&self) -> usize {
        self.features.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.features.len();
        if r == 0 {
            return Err(Error::EmptyInput("choice set"));
        }
        if self.path_sizes.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: self.path_sizes.len(),
            });
        }
        if !self.routes.is_empty() && self.routes.len() != r {
            return Err(Error::DimensionMismatch {
                expected: r,
                got: self.routes.len(),
            });
        }
        if self.chosen_index >= r {
            return Err(Error::InvalidSpec(format!(
                "chosen index {} out of {} alternatives",
                self.chosen_index, r
            )));
        }
        if let Some(ps) = self
            .path_sizes
            .iter()
            .find(|p| !(**p > 0.0 && **p <= 1.0 + 1e-12))
        {
            return Err(Error::NonPositivePathSize(*ps));
        }
        Ok(())
    }
}

/// Reads observations from JSON, validating each one.
pub fn observations_from_json(text: &str) -> Result<Vec<ChoiceObservation>> {
    let data: Vec<ChoiceObservation> = serde_json::from_str(text)?;
    for o in &data {
        o.validate()?;
    }
    Ok(data)
}

// ---------------------------------------------------------------------------
// Likelihood

fn check_beta(spec: &ModelSpec, beta: &[f64]) -> Result<()> {
    let k = spec.n_params()?;
    if beta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: beta.len(),
        });
    }
    Ok(())
}

/// Utility of a single route. `beta` is on the internal scale (distance
/// coefficients per 10 m); the path size is used only by PSL.
pub fn utility(
    spec: &ModelSpec,
    beta: &[f64],
    features: &FeatureVector,
    profile: &ParticipantProfile,
    path_size: f64,
) -> Result<f64> {
    check_beta(spec, beta)?;
    let obs = ChoiceObservation {
        participant: 0,
        task: 0,
        routes: Vec::new(),
        features: vec![*features],
        path_sizes: vec![path_size],
        chosen_index: 0,
        profile: *profile,
    };
    let x = spec.design(&obs)?;
    Ok((0..beta.len()).map(|j| beta[j] * x[(0, j)]).sum())
}

fn softmax_shifted(u: &DVector<f64>) -> (DVector<f64>, f64) {
    let m = u.max();
    let e = u.map(|v| (v - m).exp());
    let s = e.sum();
    (e / s, m + s.ln())
}

/// Choice probabilities of every alternative in `obs`.
pub fn choice_probabilities(
    spec: &ModelSpec,
    beta: &[f64],
    obs: &ChoiceObservation,
) -> Result<Vec<f64>> {
    check_beta(spec, beta)?;
    obs.validate()?;
    let x = spec.design(obs)?;
    let u = &x * DVector::from_column_slice(beta);
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteUtility(0));
    }
    Ok(softmax_shifted(&u).0.iter().copied().collect())
}

/// Per-observation designs ready for repeated likelihood evaluation.
pub struct PreparedData {
    pub terms: Vec<String>,
    pub scale: Vec<f64>,
    designs: Vec<DMatrix<f64>>,
    chosen: Vec<usize>,
}

struct ObsEval {
    ll: f64,
    grad: DVector<f64>,
    hess: Option<DMatrix<f64>>,
}

impl PreparedData {
    pub fn new(spec: &ModelSpec, data: &[ChoiceObservation]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyInput("choice observations"));
        }
        let (cols, scale) = spec.columns()?;
        let designs = data
            .iter()
            .map(|o| {
                o.validate()?;
                spec.design_with(&cols, &scale, o)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            terms: spec.parameter_names()?,
            scale,
            designs,
            chosen: data.iter().map(|o| o.chosen_index).collect(),
        })
    }

    pub fn n_obs(&self) -> usize {
        self.designs.len()
    }

    /// Log-likelihood of equal choice shares.
    pub fn null_log_likelihood(&self) -> f64 {
        self.designs.iter().map(|x| -(x.nrows() as f64).ln()).sum()
    }

    fn eval_one(&self, n: usize, beta: &DVector<f64>, hess: bool) -> ObsEval {
        let x = &self.designs[n];
        let c = self.chosen[n];
        let u = x * beta;
        let (p, lse) = softmax_shifted(&u);
        let ll = u[c] - lse;
        let xbar = x.transpose() * &p;
        let grad = x.row(c).transpose() - &xbar;
        let hess = hess.then(|| {
            let mut h = DMatrix::zeros(beta.len(), beta.len());
            for r in 0..x.nrows() {
                let d = x.row(r).transpose() - &xbar;
                h -= (&d * d.transpose()) * p[r];
            }
            h
        });
        ObsEval { ll, grad, hess }
    }

    /// Sum of per-observation terms, computed in parallel and reduced in
    /// observation order.
    fn eval(&self, beta: &DVector<f64>, hess: bool) -> (f64, DVector<f64>, Option<DMatrix<f64>>) {
        let parts: Vec<ObsEval> = (0..self.n_obs())
            .into_par_iter()
            .map(|n| self.eval_one(n, beta, hess))
            .collect();
        let k = beta.len();
        let mut ll = 0.0;
        let mut g = DVector::zeros(k);
        let mut h = hess.then(|| DMatrix::zeros(k, k));
        for p in parts {
            ll += p.ll;
            g += p.grad;
            if let (Some(h), Some(ph)) = (h.as_mut(), p.hess) {
                *h += ph;
            }
        }
        (ll, g, h)
    }

    pub fn log_likelihood(&self, beta: &[f64]) -> f64 {
        let b = DVector::from_column_slice(beta);
        self.eval(&b, false).0
    }

    /// Rank check of the within-choice-set centred design. Returns the
    /// most collinear pair when the information matrix cannot be full rank.
    pub fn check_identified(&self) -> Result<()> {
        let k = self.terms.len();
        let mut gram = DMatrix::<f64>::zeros(k, k);
        for x in &self.designs {
            let mean = x.row_mean();
            for r in 0..x.nrows() {
                let d = x.row(r) - &mean;
                gram += d.transpose() * &d;
            }
        }
        let diag: Vec<f64> = (0..k).map(|j| gram[(j, j)]).collect();
        let top = diag.iter().copied().fold(0.0, f64::max).max(1e-300);
        for j in 0..k {
            if diag[j] <= 1e-14 * top {
                return Err(Error::SingularHessian(
                    self.terms[j].clone(),
                    "(constant within every choice set)".into(),
                ));
            }
        }
        let corr = DMatrix::from_fn(k, k, |i, j| gram[(i, j)] / (diag[i] * diag[j]).sqrt());
        let min_eig = corr
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < 1e-10 {
            let mut best = (0, 1, -1.0);
            for i in 0..k {
                for j in i + 1..k {
                    if corr[(i, j)].abs() > best.2 {
                        best = (i, j, corr[(i, j)].abs());
                    }
                }
            }
            return Err(Error::SingularHessian(
                self.terms[best.0].clone(),
                self.terms[best.1].clone(),
            ));
        }
        Ok(())
    }
}

impl Objective for PreparedData {
    fn dim(&self) -> usize {
        self.terms.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval(x, false).0
    }
    fn value_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (v, g, _) = self.eval(x, false);
        (v, g)
    }
    fn value_grad_hess(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let (v, g, h) = self.eval(x, true);
        (v, g, h.unwrap())
    }
}

/// Log-likelihood and its gradient (internal scale) at `beta`.
pub fn log_likelihood(
    spec: &ModelSpec,
    beta: &[f64],
    data: &[ChoiceObservation],
) -> Result<(f64, Vec<f64>)> {
    check_beta(spec, beta)?;
    let prep = PreparedData::new(spec, data)?;
    let (ll, g) = prep.value_grad(&DVector::from_column_slice(beta));
    if !ll.is_finite() {
        let n = (0..prep.n_obs())
            .find(|&n| {
                !prep
                    .eval_one(n, &DVector::from_column_slice(beta), false)
                    .ll
                    .is_finite()
            })
            .unwrap_or(0);
        return Err(Error::NonFiniteUtility(n));
    }
    Ok((ll, g.iter().copied().collect()))
}

// ---------------------------------------------------------------------------
// Estimation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Starting point on the internal scale; zeros when absent.
    pub start: Option<Vec<f64>>,
    pub maximizer: String,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-6,
            start: None,
            maximizer: DEFAULT_MAXIMIZER.to_string(),
        }
    }
}

/// Goodness-of-fit statistics derived from a log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStatistics {
    pub rho2: f64,
    pub rho2_adj: f64,
    pub aic: f64,
    pub bic: f64,
}

impl FitStatistics {
    pub fn from_ll(ll: f64, ll0: f64, k: usize, n: usize) -> Self {
        let k = k as f64;
        Self {
            rho2: 1.0 - ll / ll0,
            rho2_adj: 1.0 - (ll - k) / ll0,
            aic: 2.0 * k - 2.0 * ll,
            bic: k * (n as f64).ln() - 2.0 * ll,
        }
    }
}

pub(crate) mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub spec: ModelSpec,
    pub terms: Vec<String>,
    /// Coefficients on the internal scale (distances per 10 m).
    pub beta: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub std_err: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub t_stat: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub p_value: Vec<f64>,
    /// Divisor applied to each term's raw values.
    pub scale: Vec<f64>,
    /// Coefficients per raw unit (distances per cm).
    pub beta_raw: Vec<f64>,
    #[serde(with = "nan_as_null")]
    pub std_err_raw: Vec<f64>,
    pub log_likelihood: f64,
    pub null_log_likelihood: f64,
    pub rho2: f64,
    pub rho2_adj: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_obs: usize,
    pub k: usize,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_max_norm: f64,
}

impl EstimationResult {
    pub fn fit(&self) -> FitStatistics {
        information_criteria(self)
    }

    /// Index of a term by name.
    pub fn term_index(&self, name: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == name)
    }

    /// True when every term named in `names` has p < `alpha`.
    pub fn all_significant<S: AsRef<str>>(&self, names: &[S], alpha: f64) -> bool {
        names.iter().all(|n| {
            self.term_index(n.as_ref())
                .map(|i| self.p_value[i] < alpha)
                .unwrap_or(false)
        })
    }
}

pub fn information_criteria(r: &EstimationResult) -> FitStatistics {
    FitStatistics::from_ll(r.log_likelihood, r.null_log_likelihood, r.k, r.n_obs)
}

/// Log-likelihood must drop at least this much when probing far along the
/// flattest direction; otherwise the optimum is at infinity.
fn recedes(prep: &PreparedData, beta: &DVector<f64>, ll: f64, hess: &DMatrix<f64>) -> bool {
    let info = -hess;
    let eig = info.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc },
        );
    let d = eig.eigenvectors.column(imin).into_owned();
    let t = 10.0 * (1.0 + beta.amax());
    let tol = 1e-9 * (1.0 + ll.abs());
    [1.0, -1.0].iter().any(|s| {
        let probe = beta + &d * (s * t);
        prep.value(&probe) >= ll - tol
    })
}

/// Maximum-likelihood estimation. A failure to converge is reported
/// through `converged = false` with the last iterate returned.
pub fn estimate(
    spec: &ModelSpec,
    data: &[ChoiceObservation],
    opts: &EstimateOptions,
) -> Result<EstimationResult> {
    let prep = PreparedData::new(spec, data)?;
    prep.check_identified()?;
    let k = prep.terms.len();
    let start = match &opts.start {
        Some(s) if s.len() != k => {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: s.len(),
            })
        }
        Some(s) => DVector::from_column_slice(s),
        None => DVector::zeros(k),
    };
    let maximizer = maximizers().get(&opts.maximizer)?;
    let out = maximizer.maximize(
        &prep,
        start,
        StopRule {
            max_iter: opts.max_iter,
            tol: opts.tol,
        },
    );
    let (ll, _, hess) = prep.value_grad_hess(&out.x);
    let mut converged = out.converged && ll.is_finite();
    let std_err: Vec<f64> = match (-&hess).cholesky() {
        Some(ch) => {
            let cov = ch.inverse();
            (0..k).map(|j| cov[(j, j)].sqrt()).collect()
        }
        None => {
            converged = false;
            vec![f64::NAN; k]
        }
    };
    if converged && recedes(&prep, &out.x, ll, &hess) {
        converged = false;
    }
    let beta: Vec<f64> = out.x.iter().copied().collect();
    let t_stat: Vec<f64> = beta.iter().zip(&std_err).map(|(b, s)| b / s).collect();
    let p_value: Vec<f64> = t_stat
        .iter()
        .map(|t| {
            if t.is_finite() {
                stats::normal_two_sided(*t)
            } else {
                f64::NAN
            }
        })
        .collect();
    let ll0 = prep.null_log_likelihood();
    let n = prep.n_obs();
    let fit = FitStatistics::from_ll(ll, ll0, k, n);
    Ok(EstimationResult {
        spec: spec.clone(),
        terms: prep.terms.clone(),
        beta_raw: beta.iter().zip(&prep.scale).map(|(b, s)| b / s).collect(),
        std_err_raw: std_err
            .iter()
            .zip(&prep.scale)
            .map(|(e, s)| e / s)
            .collect(),
        beta,
        std_err,
        t_stat,
        p_value,
        scale: prep.scale.clone(),
        log_likelihood: ll,
        null_log_likelihood: ll0,
        rho2: fit.rho2,
        rho2_adj: fit.rho2_adj,
        aic: fit.aic,
        bic: fit.bic,
        n_obs: n,
        k,
        converged,
        iterations: out.iterations,
        gradient_max_norm: out.gradient.amax(),
    })
}

/// Likelihood-ratio test from two log-likelihoods.
pub fn lr_statistic(ll_restricted: f64, ll_full: f64, df: usize) -> Result<TestResult> {
    let chi2 = 2.0 * (ll_full - ll_restricted);
    let p_value = if df == 0 {
        1.0
    } else {
        stats::chi_square_sf(chi2.max(0.0), df as f64)
    };
    Ok(TestResult {
        statistic: chi2,
        df: vec![df as f64],
        p_value,
    })
}

/// Likelihood-ratio test of a restricted model nested in a full one.
pub fn lr_test(restricted: &EstimationResult, full: &EstimationResult) -> Result<TestResult> {
    let fam = |r: &EstimationResult| r.spec.family.to_ascii_lowercase();
    if fam(restricted) != fam(full) {
        return Err(Error::NotNested(format!(
            "families differ ({} vs {})",
            restricted.spec.family, full.spec.family
        )));
    }
    if restricted.n_obs != full.n_obs {
        return Err(Error::NotNested(format!(
            "different data ({} vs {} observations)",
            restricted.n_obs, full.n_obs
        )));
    }
    if let Some(t) = restricted.terms.iter().find(|t| !full.terms.contains(t)) {
        return Err(Error::NotNested(format!(
            "`{t}` missing from the full model"
        )));
    }
    lr_statistic(
        restricted.log_likelihood,
        full.log_likelihood,
        full.k - restricted.k,
    )
}

/// Side-by-side markdown table of several models: Beta and p-value per
/// model, then the fit-statistic rows.
pub fn results_markdown(models: &[(String, &EstimationResult)]) -> String {
    let mut terms: Vec<String> = Vec::new();
    for (_, m) in models {
        for t in &m.terms {
            if !terms.contains(t) {
                terms.push(t.clone());
            }
        }
    }
    let mut s = String::new();
    let _ = write!(s, "| Variable |");
    for (name, _) in models {
        let _ = write!(s, " {name} Beta | {name} p-value |");
    }
    s.push('\n');
    s.push_str("|---|");
    for _ in models {
        s.push_str("---:|---:|");
    }
    s.push('\n');
    let num = |v: f64, d: usize| {
        if v.is_finite() {
            format!("{v:.d$}")
        } else {
            "n/a".into()
        }
    };
    for t in &terms {
        let _ = write!(s, "| {t} |");
        for (_, m) in models {
            match m.term_index(t) {
                Some(i) => {
                    let p = m.p_value[i];
                    let p = if p < 0.001 {
                        "<0.001".into()
                    } else if p < 0.01 {
                        "<0.01".into()
                    } else {
                        num(p, 3)
                    };
                    let _ = write!(s, " {} | {p} |", num(m.beta[i], 3));
                }
                None => s.push_str("  |  |"),
            }
        }
        s.push('\n');
    }
    let rows: [(&str, fn(&EstimationResult) -> f64, usize); 6] = [
        ("Log-likelihood", |m| m.log_likelihood, 2),
        ("Rho2", |m| m.rho2, 3),
        ("Rho2 adj", |m| m.rho2_adj, 3),
        ("AIC", |m| m.aic, 1),
        ("BIC", |m| m.bic, 1),
        ("N", |m| m.n_obs as f64, 0),
    ];
    for (label, f, d) in rows {
        let _ = write!(s, "| {label} |");
        for (_, m) in models {
            let _ = write!(s, " {} |  |", num(f(m), d));
        }
        s.push('\n');
    }
    s
}
