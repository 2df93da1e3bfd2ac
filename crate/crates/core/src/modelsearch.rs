//! Stepwise combinatory search over choice-model specifications.
//!
//! Stage 1 estimates one model per candidate variable and keeps those whose
//! term is significant. Each later stage extends every survivor by one
//! unused candidate; an extension survives when it converged, all of its
//! searched terms are significant, and a likelihood-ratio test shows a
//! significant improvement over every nested survivor. An optional second
//! phase starts from the best infrastructure model and adds route-by-person
//! interaction terms the same way.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete_choice::{
    estimate, interaction_name, lr_test, ChoiceObservation, EstimateOptions, EstimationResult,
    ModelSpec,
};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, ParticipantProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Infra,
    Personal,
}

/// Which phases a search runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchPhases {
    InfraOnly,
    InfraThenPersonal,
}

impl std::str::FromStr for SearchPhases {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "infra" | "infra-only" => Ok(Self::InfraOnly),
            "both" | "personal" | "infra-then-personal" => Ok(Self::InfraThenPersonal),
            _ => Err(Error::Parse(format!(
                "unknown phase `{s}` (expected infra or both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub route_candidates: Vec<String>,
    pub personal_candidates: Vec<String>,
    pub alpha_t: f64,
    pub alpha_chi2: f64,
    /// Largest number of searched terms a model may reach.
    pub max_stage: usize,
    /// Test each extension against every proper subset model instead of
    /// only the nested survivors already estimated.
    pub powerset_lrt: bool,
    pub estimate: EstimateOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            route_candidates: Vec::new(),
            personal_candidates: Vec::new(),
            alpha_t: 0.05,
            alpha_chi2: 0.05,
            max_stage: 8,
            powerset_lrt: false,
            estimate: EstimateOptions::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.route_candidates.is_empty() {
            return Err(Error::EmptyInput("route candidates"));
        }
        for c in &self.route_candidates {
            if !FeatureVector::is_variable(c) {
                return Err(Error::UnknownVariable(c.clone()));
            }
        }
        for p in &self.personal_candidates {
            if !ParticipantProfile::is_variable(p) {
                return Err(Error::UnknownVariable(p.clone()));
            }
        }
        for a in [self.alpha_t, self.alpha_chi2] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "significance level {a} not in (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    InsignificantT { term: String, p_value: f64 },
    FailedLrt { against: String, p_value: f64 },
    NonConvergence,
    EstimationError { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub key: String,
    pub phase: Phase,
    /// Number of searched terms.
    pub stage: usize,
    pub spec: ModelSpec,
    pub result: Option<EstimationResult>,
    pub survived: bool,
    pub rejection: Option<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub phase: Phase,
    pub stage: usize,
    pub models: Vec<ModelRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModel {
    pub key: String,
    pub terms: Vec<String>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub rank_aic: usize,
    pub rank_bic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub family: String,
    pub stages: Vec<StageRecord>,
    /// Every survivor, ordered by BIC.
    pub ranking: Vec<RankedModel>,
    pub best_infra: Option<EstimationResult>,
    pub best: Option<EstimationResult>,
    pub diagnostic: Option<String>,
}

impl SearchTrace {
    pub fn survivors(&self) -> impl Iterator<Item = &ModelRecord> {
        self.stages
            .iter()
            .flat_map(|s| s.models.iter())
            .filter(|m| m.survived)
    }

    pub fn stage_one_survivors(&self) -> usize {
        self.stages
            .iter()
            .filter(|s| s.phase == Phase::Infra && s.stage == 1)
            .flat_map(|s| s.models.iter())
            .filter(|m| m.survived)
            .count()
    }

    /// Searched terms of the best model, empty when nothing survived.
    pub fn best_terms(&self) -> Vec<String> {
        self.best
            .as_ref()
            .map(|b| b.spec.searched_terms())
            .unwrap_or_default()
    }
}

struct Searcher<'a> {
    data: &'a [ChoiceObservation],
    config: &'a SearchConfig,
    cache: HashMap<String, std::result::Result<EstimationResult, String>>,
}

impl Searcher<'_> {
    /// Estimates every uncached spec in parallel; results are cached by key.
    fn estimate_all(&mut self, specs: &[ModelSpec]) {
        let todo: Vec<&ModelSpec> = specs
            .iter()
            .filter(|s| !self.cache.contains_key(&s.canonical_key()))
            .collect();
        let results: Vec<(String, std::result::Result<EstimationResult, String>)> = todo
            .par_iter()
            .map(|s| {
                let r = estimate(s, self.data, &self.config.estimate).map_err(|e| e.to_string());
                (s.canonical_key(), r)
            })
            .collect();
        for (k, r) in results {
            self.cache.insert(k, r);
        }
    }

    fn lookup(&self, spec: &ModelSpec) -> &std::result::Result<EstimationResult, String> {
        &self.cache[&spec.canonical_key()]
    }

    /// Applies the survival rules to an estimated spec.
    fn judge(&mut self, spec: &ModelSpec, nested: &[EstimationResult]) -> Option<Rejection> {
        let result = match self.lookup(spec) {
            Ok(r) => r.clone(),
            Err(message) => {
                return Some(Rejection::EstimationError {
                    message: message.clone(),
                })
            }
        };
        if !result.converged {
            return Some(Rejection::NonConvergence);
        }
        for term in spec.searched_terms() {
            let i = result.term_index(&term).expect("term present");
            let p = result.p_value[i];
            if !(p < self.config.alpha_t) {
                return Some(Rejection::InsignificantT { term, p_value: p });
            }
        }
        let mut against: Vec<EstimationResult> = nested.to_vec();
        if self.config.powerset_lrt {
            let subsets = proper_subsets(spec);
            self.estimate_all(&subsets);
            against = subsets
                .iter()
                .filter_map(|s| self.lookup(s).as_ref().ok().cloned())
                .collect();
        }
        for restricted in &against {
            match lr_test(restricted, &result) {
                Ok(t) if t.p_value < self.config.alpha_chi2 => {}
                Ok(t) => {
                    return Some(Rejection::FailedLrt {
                        against: restricted.spec.canonical_key(),
                        p_value: t.p_value,
                    })
                }
                Err(e) => {
                    return Some(Rejection::EstimationError {
                        message: e.to_string(),
                    })
                }
            }
        }
        None
    }

    /// Runs one phase from `seeds`, extending with `extend`.
    fn phase(
        &mut self,
        phase: Phase,
        seeds: Vec<ModelSpec>,
        extensions: &dyn Fn(&ModelSpec) -> Vec<ModelSpec>,
        mut prior: Vec<EstimationResult>,
        stages: &mut Vec<StageRecord>,
    ) -> Vec<EstimationResult> {
        let mut frontier = seeds;
        let mut survivors_all = Vec::new();
        loop {
            let mut cands: Vec<ModelSpec> = Vec::new();
            let mut seen = BTreeMap::new();
            for s in &frontier {
                for c in extensions(s) {
                    let n = c.searched_terms().len();
                    if n > self.config.max_stage {
                        continue;
                    }
                    if seen.insert(c.canonical_key(), ()).is_none() {
                        cands.push(c);
                    }
                }
            }
            if cands.is_empty() {
                break;
            }
            let stage = cands[0].searched_terms().len();
            self.estimate_all(&cands);
            let mut records = Vec::new();
            let mut next = Vec::new();
            for spec in cands {
                let terms = spec.searched_terms();
                let nested: Vec<EstimationResult> = prior
                    .iter()
                    .filter(|p| {
                        let pt = p.spec.searched_terms();
                        pt.len() < terms.len() && pt.iter().all(|t| terms.contains(t))
                    })
                    .cloned()
                    .collect();
                let rejection = self.judge(&spec, &nested);
                let result = self.lookup(&spec).as_ref().ok().cloned();
                let survived = rejection.is_none();
                if survived {
                    next.push(spec.clone());
                }
                records.push(ModelRecord {
                    key: spec.canonical_key(),
                    phase,
                    stage,
                    spec,
                    result,
                    survived,
                    rejection,
                });
            }
            for r in &records {
                if r.survived {
                    let res = r.result.clone().unwrap();
                    prior.push(res.clone());
                    survivors_all.push(res);
                }
            }
            log::info!(
                "{phase:?} stage {stage}: {} estimated, {} survived",
                records.len(),
                next.len()
            );
            stages.push(StageRecord {
                phase,
                stage,
                models: records,
            });
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        survivors_all
    }
}

fn proper_subsets(spec: &ModelSpec) -> Vec<ModelSpec> {
    let items: Vec<(bool, usize)> = (0..spec.terms.len())
        .map(|i| (true, i))
        .chain((0..spec.interactions.len()).map(|i| (false, i)))
        .collect();
    let n = items.len();
    let mut out = Vec::new();
    for mask in 1..(1u64 << n) - 1 {
        let mut s = ModelSpec {
            family: spec.family.clone(),
            terms: Vec::new(),
            interactions: Vec::new(),
        };
        for (b, (is_term, i)) in items.iter().enumerate() {
            if mask & (1 << b) != 0 {
                if *is_term {
                    s.terms.push(spec.terms[*i].clone());
                } else {
                    s.interactions.push(spec.interactions[*i].clone());
                }
            }
        }
        out.push(s);
    }
    out
}

fn rank(survivors: &[EstimationResult]) -> Vec<RankedModel> {
    let mut by_aic: Vec<usize> = (0..survivors.len()).collect();
    by_aic.sort_by(|&a, &b| {
        survivors[a]
            .aic
            .total_cmp(&survivors[b].aic)
            .then(a.cmp(&b))
    });
    let mut by_bic: Vec<usize> = (0..survivors.len()).collect();
    by_bic.sort_by(|&a, &b| {
        survivors[a]
            .bic
            .total_cmp(&survivors[b].bic)
            .then(a.cmp(&b))
    });
    let mut rank_aic = vec![0; survivors.len()];
    for (r, &i) in by_aic.iter().enumerate() {
        rank_aic[i] = r + 1;
    }
    by_bic
        .iter()
        .enumerate()
        .map(|(r, &i)| {
            let m = &survivors[i];
            RankedModel {
                key: m.spec.canonical_key(),
                terms: m.terms.clone(),
                log_likelihood: m.log_likelihood,
                aic: m.aic,
                bic: m.bic,
                rank_aic: rank_aic[i],
                rank_bic: r + 1,
            }
        })
        .collect()
}

fn min_bic(models: &[EstimationResult]) -> Option<EstimationResult> {
    models
        .iter()
        .min_by(|a, b| a.bic.total_cmp(&b.bic))
        .cloned()
}

/// Runs the stepwise search for one model family.
pub fn stepwise_search(
    config: &SearchConfig,
    data: &[ChoiceObservation],
    family: &str,
    phases: SearchPhases,
) -> Result<SearchTrace> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("choice observations"));
    }
    let base = ModelSpec {
        family: family.to_ascii_lowercase(),
        terms: Vec::new(),
        interactions: Vec::new(),
    };
    crate::discrete_choice::families().get(&base.family)?;
    let mut searcher = Searcher {
        data,
        config,
        cache: HashMap::new(),
    };
    let mut stages = Vec::new();

    let route_cands = config.route_candidates.clone();
    let extend_route = move |s: &ModelSpec| -> Vec<ModelSpec> {
        route_cands
            .iter()
            .filter(|c| !s.terms.contains(c))
            .map(|c| s.with_term(c))
            .collect()
    };
    let infra = searcher.phase(
        Phase::Infra,
        vec![base.clone()],
        &extend_route,
        Vec::new(),
        &mut stages,
    );

    let mut all = infra.clone();
    let best_infra = min_bic(&infra);
    let mut diagnostic = None;
    if infra.is_empty() {
        diagnostic = Some("no single-variable model survived stage 1".to_string());
    }

    if let (SearchPhases::InfraThenPersonal, Some(bi)) = (phases, &best_infra) {
        if !config.personal_candidates.is_empty() {
            let persons = config.personal_candidates.clone();
            let extend_personal = move |s: &ModelSpec| -> Vec<ModelSpec> {
                let mut out = Vec::new();
                for r in &s.terms {
                    for p in &persons {
                        let name = interaction_name(r, p);
                        if !s.searched_terms().contains(&name) {
                            out.push(s.with_interaction(r, p));
                        }
                    }
                }
                out
            };
            let personal = searcher.phase(
                Phase::Personal,
                vec![bi.spec.clone()],
                &extend_personal,
                vec![bi.clone()],
                &mut stages,
            );
            all.extend(personal);
        }
    }

    Ok(SearchTrace {
        family: base.family,
        stages,
        ranking: rank(&all),
        best_infra,
        best: min_bic(&all),
        diagnostic,
    })
}
