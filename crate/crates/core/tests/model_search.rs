use std::collections::BTreeMap;

use wayfind::discrete_choice::{estimate, ChoiceObservation, ModelSpec, PATH_SIZE_TERM};
use wayfind::modelsearch::{stepwise_search, Phase, SearchConfig, SearchPhases};
use wayfind::synth::{desk_network, desk_tasks, simulate_choices, GenerativeConfig};

const CANDIDATES: [&str; 6] = [
    "distot",
    "turns_tot",
    "window",
    "ratio_wide",
    "floorsigns",
    "firedoor",
];

fn simulate(spec: ModelSpec, values: &[f64], seed: u64) -> Vec<ChoiceObservation> {
    let names = spec.parameter_names().unwrap();
    let true_beta: BTreeMap<String, f64> = names.into_iter().zip(values.iter().copied()).collect();
    let config = GenerativeConfig {
        spec,
        true_beta,
        seed,
        ..Default::default()
    };
    simulate_choices(&desk_network(), &desk_tasks(), &config).unwrap()
}

fn planted(seed: u64) -> Vec<ChoiceObservation> {
    simulate(
        ModelSpec::new("psl", &["distot", "turns_tot"]),
        &[-1.0, -0.8, 1.0],
        seed,
    )
}

fn config(candidates: &[&str]) -> SearchConfig {
    SearchConfig {
        route_candidates: candidates.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    }
}

#[test]
fn single_strong_candidate_stops_at_stage_one() {
    let data = planted(3);
    let trace =
        stepwise_search(&config(&["distot"]), &data, "psl", SearchPhases::InfraOnly).unwrap();
    assert_eq!(trace.stages.len(), 1);
    assert_eq!(trace.best_terms(), vec!["distot"]);
    assert!(trace.diagnostic.is_none());
}

#[test]
fn planted_pair_is_found() {
    let hits = (0..5)
        .filter(|&seed| {
            let trace = stepwise_search(
                &config(&CANDIDATES),
                &planted(100 + seed),
                "psl",
                SearchPhases::InfraOnly,
            )
            .unwrap();
            let mut best = trace.best_terms();
            best.sort();
            best == ["distot", "turns_tot"]
        })
        .count();
    assert!(hits >= 4, "{hits}/5");
}

#[test]
fn survivors_are_significant_and_stages_grow_by_one_term() {
    let data = planted(7);
    let cfg = config(&CANDIDATES);
    let trace = stepwise_search(&cfg, &data, "psl", SearchPhases::InfraOnly).unwrap();
    assert!(trace.survivors().count() >= 2);
    for stage in &trace.stages {
        for m in &stage.models {
            assert_eq!(m.spec.searched_terms().len(), stage.stage);
            assert_eq!(m.stage, stage.stage);
            assert_eq!(m.survived, m.rejection.is_none());
        }
    }
    for m in trace.survivors() {
        let again = estimate(&m.spec, &data, &cfg.estimate).unwrap();
        assert!(again.converged);
        for t in m.spec.searched_terms() {
            let j = again.term_index(&t).unwrap();
            assert!(again.p_value[j] < cfg.alpha_t, "{} in {}", t, m.key);
        }
        assert!(again.terms.contains(&PATH_SIZE_TERM.to_string()));
    }
}

#[test]
fn best_model_has_the_minimum_bic() {
    let trace = stepwise_search(
        &config(&CANDIDATES),
        &planted(8),
        "psl",
        SearchPhases::InfraOnly,
    )
    .unwrap();
    let best = trace.best.as_ref().unwrap();
    let min = trace
        .survivors()
        .map(|m| m.result.as_ref().unwrap().bic)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(best.bic, min);
    assert_eq!(trace.ranking[0].bic, min);
    assert!(trace.ranking.windows(2).all(|w| w[0].bic <= w[1].bic));
    assert_eq!(trace.ranking.len(), trace.survivors().count());
}

#[test]
fn trace_is_deterministic() {
    let data = planted(9);
    let cfg = config(&CANDIDATES);
    let a = stepwise_search(&cfg, &data, "psl", SearchPhases::InfraOnly).unwrap();
    let b = stepwise_search(&cfg, &data, "psl", SearchPhases::InfraOnly).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn null_data_mostly_has_no_stage_one_survivor() {
    let empty = (0..10)
        .filter(|&seed| {
            let data = simulate(ModelSpec::new("psl", &["distot"]), &[0.0, 1.0], 300 + seed);
            let trace =
                stepwise_search(&config(&CANDIDATES), &data, "psl", SearchPhases::InfraOnly)
                    .unwrap();
            trace.stage_one_survivors() == 0
        })
        .count();
    assert!(empty >= 5, "{empty}/10");
}

#[test]
fn personal_phase_extends_the_best_infrastructure_model() {
    let spec = ModelSpec::new("psl", &["distot", "turns_tot"]).with_interaction("distot", "gender");
    let data = simulate(spec, &[-1.0, -0.8, -1.5, 1.0], 11);
    let mut cfg = config(&CANDIDATES);
    cfg.personal_candidates = vec!["gender".into(), "age_young".into()];
    let trace = stepwise_search(&cfg, &data, "psl", SearchPhases::InfraThenPersonal).unwrap();
    let infra = trace.best_infra.as_ref().unwrap().spec.searched_terms();
    let personal: Vec<_> = trace
        .stages
        .iter()
        .filter(|s| s.phase == Phase::Personal)
        .collect();
    assert!(!personal.is_empty());
    for m in personal.iter().flat_map(|s| s.models.iter()) {
        for t in &infra {
            assert!(m.spec.terms.contains(t));
        }
        assert!(!m.spec.interactions.is_empty());
    }
    let best = trace.best.as_ref().unwrap();
    assert!(
        best.spec
            .interactions
            .contains(&("distot".to_string(), "gender".to_string())),
        "{:?}",
        best.spec
    );
}
