//! Staged construction of a tower `F = F₀ ⊇ F₁ ⊇ …` and relator sets
//! `R₁, R₂, …` along which the normalized first Betti numbers oscillate
//! between `> d − 1 − ε` (even levels) and `< δ_n` (odd levels).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::excess::{kill_excess_homology, ExcessReport, FieldMode};
use super::regularity::{is_p_regular, pregular_subgroup, RegularityCertificate};
use crate::chains::{derived_p_series, level_homology};
use crate::error::{Error, Result};
use crate::presentations::Presentation;
use crate::quotients::{self, puchta_counts, FiniteQuotientMap, SchreierSystem};
use crate::rational::Exact;
use crate::words::{is_prime, Alphabet, Word};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriverParams {
    pub d: usize,
    pub p: u64,
    pub epsilon: Exact,
    /// `δ_1, δ_2, …`, at least one per stage.
    pub deltas: Vec<Exact>,
    pub stages: usize,
    pub mode: FieldMode,
    pub index_budget: u64,
    pub depth_budget: usize,
    /// Largest `e` tried for the odd step `[F_2N, F_2N] F_2N^(p^e)`.
    pub max_exponent: u32,
    pub seed: u64,
}

/// `δ_n = (3/4) · 2^(1−n)`.
pub fn default_deltas(stages: usize) -> Vec<Exact> {
    (0..stages)
        .map(|n| Exact::new(3, BigInt::from(4) * BigInt::from(2).pow(n as u32)))
        .collect()
}

impl DriverParams {
    pub fn new(d: usize, p: u64, epsilon: BigRational, stages: usize) -> Self {
        DriverParams {
            d,
            p,
            epsilon: Exact(epsilon),
            deltas: default_deltas(stages),
            stages,
            mode: FieldMode::Rational,
            index_budget: quotients::DEFAULT_INDEX_BUDGET,
            depth_budget: 3,
            max_exponent: 8,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Domain("d must be at least 2".into()));
        }
        if !is_prime(self.p) {
            return Err(Error::Domain(format!("{} is not prime", self.p)));
        }
        let eps = self.epsilon.value();
        if *eps <= BigRational::zero() || *eps >= BigRational::one() {
            return Err(Error::Domain("epsilon must lie strictly between 0 and 1".into()));
        }
        if self.stages == 0 {
            return Err(Error::Domain("at least one stage is required".into()));
        }
        if self.deltas.len() < self.stages {
            return Err(Error::Domain(format!(
                "{} deltas for {} stages",
                self.deltas.len(),
                self.stages
            )));
        }
        if self.deltas.iter().any(|d| *d.value() <= BigRational::zero()) {
            return Err(Error::Domain("deltas must be positive".into()));
        }
        if self.deltas.windows(2).any(|w| w[1].value() > w[0].value()) {
            return Err(Error::Domain("deltas must be non-increasing".into()));
        }
        Ok(())
    }

    fn target(&self) -> BigRational {
        BigRational::from_integer(BigInt::from(self.d as i64 - 1)) - self.epsilon.value()
    }
}

/// The six stage conditions, as re-checked by the builder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionChecks {
    /// (i) `b₁/index > d − 1 − ε` at the new even level.
    pub even_ratio: bool,
    /// (ii) `b₁/index < δ_n` at the new odd level.
    pub odd_ratio: bool,
    /// (iii) new relators lie in `[F_{2n−2}, F_{2n−2}]`.
    pub commutator_containment: bool,
    /// (iv) `F_{2n} ⊆ Φ_n`.
    pub neighborhood: bool,
    /// (v) `def_p > d − 1 − ε`.
    pub p_deficiency: bool,
    /// (vi) the presentation is certified `p`-regular.
    pub p_regular: bool,
}

impl ConditionChecks {
    pub fn all(&self) -> bool {
        self.even_ratio
            && self.odd_ratio
            && self.commutator_containment
            && self.neighborhood
            && self.p_deficiency
            && self.p_regular
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub delta: Exact,
    pub exponent: u32,
    pub odd_index: u64,
    /// `d(F_{2n−2}) / [G : G_{2n−1}]`, the bound that fixes `e`.
    pub odd_bound: Exact,
    pub excess: ExcessReport,
    pub odd_b1: usize,
    pub odd_ratio: Exact,
    pub p_deficiency: Exact,
    pub witness_index: u64,
    pub witness_level: Option<usize>,
    pub witness_exponent: Option<u32>,
    /// `(def(H) − 1) / [G : H]` for the witness kernel `H`.
    pub witness_normalized: Exact,
    pub phi_index: u64,
    pub even_index: u64,
    pub even_generators: u64,
    pub even_relators: u64,
    pub even_deficiency: i64,
    /// `(def − 1) / index`, a lower bound for the even-level ratio.
    pub even_ratio_lower: Exact,
    pub checks: ConditionChecks,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: usize,
    pub condition: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub stage: usize,
    pub action: String,
    pub detail: serde_json::Value,
    /// Conditions the action bears on.
    pub conditions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructionState {
    pub params: DriverParams,
    pub presentation: Presentation,
    pub relator_sets: Vec<Vec<Word>>,
    /// `F_0, F_1, …, F_{2n}` as quotients of the current presentation.
    pub tower: Vec<FiniteQuotientMap>,
    /// `Φ_1, …, Φ_n`.
    pub phi: Vec<FiniteQuotientMap>,
    pub certificate: RegularityCertificate,
    pub stages: Vec<StageRecord>,
    pub failure: Option<StageFailure>,
    pub log: Vec<LogRecord>,
}

/// Plain-data view of a state for independent verification.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub d: usize,
    pub p: u64,
    pub epsilon: Exact,
    pub deltas: Vec<Exact>,
    pub mode: FieldMode,
    pub completed_stages: usize,
    pub relator_sets: Vec<Vec<Vec<i32>>>,
    pub tower: Vec<Vec<Vec<u32>>>,
    pub phi: Vec<Vec<Vec<u32>>>,
    pub witness: Option<Vec<Vec<u32>>>,
}

impl ConstructionState {
    pub fn completed_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn snapshot(&self) -> StateSnapshot {
        let perms = |q: &FiniteQuotientMap| q.permutations().to_vec();
        StateSnapshot {
            d: self.params.d,
            p: self.params.p,
            epsilon: self.params.epsilon.clone(),
            deltas: self.params.deltas.clone(),
            mode: self.params.mode,
            completed_stages: self.stages.len(),
            relator_sets: self
                .relator_sets
                .iter()
                .map(|set| set.iter().map(|w| w.letters().to_vec()).collect())
                .collect(),
            tower: self.tower.iter().map(perms).collect(),
            phi: self.phi.iter().map(perms).collect(),
            witness: self.certificate.witness.as_ref().map(perms),
        }
    }

    /// The log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        self.log
            .iter()
            .map(|r| serde_json::to_string(r).expect("log records serialize") + "\n")
            .collect()
    }

    fn record(&mut self, stage: usize, action: &str, detail: serde_json::Value, conditions: &[&str]) {
        self.log.push(LogRecord {
            stage,
            action: action.to_string(),
            detail,
            conditions: conditions.iter().map(|c| c.to_string()).collect(),
        });
    }

    fn fail(&mut self, stage: usize, condition: &str, error: impl ToString) {
        let error = error.to_string();
        self.record(stage, "failure", json!({ "error": error }), &[condition]);
        self.failure = Some(StageFailure {
            stage,
            condition: condition.to_string(),
            error,
        });
    }

    /// Runs further stages on a (possibly reloaded) state until
    /// `params.stages` are complete or a stage fails.
    pub fn resume(mut self) -> Result<Self> {
        self.params.validate()?;
        while self.failure.is_none() && self.stages.len() < self.params.stages {
            run_stage(&mut self)?;
        }
        Ok(self)
    }
}

/// Runs the construction for `params.stages` stages. Budget exhaustion is
/// reported in [`ConstructionState::failure`], naming the condition that
/// could not be established.
pub fn tower_driver(params: DriverParams) -> Result<ConstructionState> {
    params.validate()?;
    let alphabet = Alphabet::numbered("x", params.d);
    let presentation = Presentation::new(alphabet, Vec::new())?;
    let certificate = is_p_regular(&presentation, params.p, params.depth_budget, params.index_budget)?;
    let mut state = ConstructionState {
        tower: vec![FiniteQuotientMap::trivial(params.d)],
        params,
        presentation,
        relator_sets: Vec::new(),
        phi: Vec::new(),
        certificate,
        stages: Vec::new(),
        failure: None,
        log: Vec::new(),
    };
    state.record(
        0,
        "start",
        json!({ "d": state.params.d, "p": state.params.p, "epsilon": state.params.epsilon, "seed": state.params.seed }),
        &["i"],
    );
    state.resume()
}

fn ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// `w ∈ [K, K]` for `K = ker(k)`: `w ∈ K` with zero abelianized image.
fn in_commutator(k: &FiniteQuotientMap, system: &SchreierSystem, w: &Word) -> bool {
    k.membership(w) && system.rewrite_abelian(k, w, 0).iter().all(|&x| x == 0)
}

fn run_stage(state: &mut ConstructionState) -> Result<()> {
    let params = state.params.clone();
    let (d, p) = (params.d, params.p);
    let n = state.stages.len() + 1;
    let delta = params.deltas[n - 1].value().clone();
    let target = params.target();
    let presentation = state.presentation.clone();
    let even = state.tower.last().unwrap().clone();
    let d_even = 1 + even.order() as u64 * (d as u64 - 1);

    // odd level: smallest e with d(F_{2n-2}) / [G : G_{2n-1}] < δ_n
    let mut chosen = None;
    for e in 1..=params.max_exponent {
        match quotients::derived_step(&presentation, &even, p, e, params.index_budget) {
            Ok(q) => {
                let bound = ratio(d_even, q.order() as u64);
                let ok = bound < delta;
                state.record(
                    n,
                    "odd_step_trial",
                    json!({ "exponent": e, "index": q.order(), "bound": Exact(bound.clone()) }),
                    &["ii"],
                );
                if ok {
                    chosen = Some((e, q, bound));
                    break;
                }
            }
            Err(err @ Error::ResourceLimit { .. }) => {
                state.fail(n, "ii", err);
                return Ok(());
            }
            Err(err) => return Err(err),
        }
    }
    let Some((exponent, odd, odd_bound)) = chosen else {
        state.fail(
            n,
            "ii",
            format!(
                "no exponent up to {} makes the odd level small enough",
                params.max_exponent
            ),
        );
        return Ok(());
    };

    // relators killing the excess homology of the odd level
    let def_p = presentation.p_deficiency(p)?;
    let spend = &def_p - &target;
    let excess = match kill_excess_homology(
        &presentation,
        &state.certificate,
        &even,
        &odd,
        &spend,
        params.mode,
        params.depth_budget,
        params.index_budget,
    ) {
        Ok(r) => r,
        Err(err @ Error::ResourceLimit { .. }) => {
            state.fail(n, "vi", err);
            return Ok(());
        }
        Err(err) => return Err(err),
    };
    for step in &excess.steps {
        state.record(
            n,
            "adjoin_power",
            json!({ "f": step.f_text, "n": step.n, "weight": step.weight, "b1_before": step.b1_before, "b1_after": step.b1_after, "witness_index": step.witness_index }),
            &["ii", "iii", "v", "vi"],
        );
    }
    if !excess.complete {
        let reason = excess.stop_reason.clone().unwrap_or_default();
        state.fail(n, "ii", reason);
        return Ok(());
    }
    let extended = excess.presentation.clone();
    let certificate = excess.certificate.clone();
    let new_relators = excess.added.clone();

    let primes: Vec<u64> = match params.mode {
        FieldMode::Rational => Vec::new(),
        FieldMode::Prime(q) => vec![q],
    };
    let odd_h = match level_homology(&extended, &odd, &primes, params.index_budget.max(4000)) {
        Ok(h) => h,
        Err(err @ Error::ResourceLimit { .. }) => {
            state.fail(n, "ii", err);
            return Ok(());
        }
        Err(err) => return Err(err),
    };
    let odd_b1 = match params.mode {
        FieldMode::Rational => odd_h.invariants.free_rank,
        FieldMode::Prime(q) => odd_h.invariants.betti_mod[&q],
    };
    let odd_ratio = ratio(odd_b1 as u64, odd.order() as u64);
    state.record(
        n,
        "odd_level",
        json!({ "index": odd.order(), "b1": odd_b1, "ratio": Exact(odd_ratio.clone()) }),
        &["ii"],
    );

    // even level: witness kernel ∩ odd level ∩ Φ_n
    let subgroup = pregular_subgroup(&extended, p, &certificate)?;
    state.record(
        n,
        "pregular_subgroup",
        json!({ "index": subgroup.quotient.order(), "deficiency": subgroup.deficiency, "normalized": subgroup.normalized, "p_deficiency": subgroup.p_deficiency }),
        &["i"],
    );
    let phi_chain = derived_p_series(&extended, p, n, params.index_budget)?;
    if phi_chain.levels().len() <= n {
        let reason = phi_chain
            .truncation()
            .and_then(|t| t.required.clone())
            .unwrap_or_else(|| "series stabilized".into());
        state.fail(n, "iv", format!("derived series level {n} unavailable: {reason}"));
        return Ok(());
    }
    let phi = phi_chain.levels()[n].clone();
    let even_next = match subgroup
        .quotient
        .intersect(&odd, params.index_budget)
        .and_then(|q| q.intersect(&phi, params.index_budget))
    {
        Ok(q) => q,
        Err(err @ Error::ResourceLimit { .. }) => {
            state.fail(n, "i", err);
            return Ok(());
        }
        Err(err) => return Err(err),
    };
    let index = even_next.order() as u64;
    let counts = puchta_counts(&extended, &even_next, p)?;
    let generators = 1 + index * (d as u64 - 1);
    let relators: u64 = counts.iter().sum();
    let deficiency = generators as i64 - relators as i64;
    let even_ratio_lower = ratio(deficiency - 1, index);
    state.record(
        n,
        "even_level",
        json!({ "index": index, "generators": generators, "relators": relators, "ratio_lower": Exact(even_ratio_lower.clone()) }),
        &["i", "iv"],
    );

    // re-check all six conditions from the new data
    let sys_even = SchreierSystem::new(&even);
    let new_def_p = extended.p_deficiency(p)?;
    let checks = ConditionChecks {
        even_ratio: even_ratio_lower > target,
        odd_ratio: odd_ratio < delta,
        commutator_containment: new_relators.iter().all(|r| in_commutator(&even, &sys_even, r)),
        neighborhood: even_next.factoring_map(&phi).is_some(),
        p_deficiency: new_def_p > target,
        p_regular: certificate.recheck(&extended)?,
    };
    state.record(
        n,
        "checks",
        serde_json::to_value(&checks).unwrap(),
        &["i", "ii", "iii", "iv", "v", "vi"],
    );
    let record = StageRecord {
        stage: n,
        delta: Exact(delta),
        exponent,
        odd_index: odd.order() as u64,
        odd_bound: Exact(odd_bound),
        odd_b1,
        odd_ratio: Exact(odd_ratio),
        p_deficiency: Exact(new_def_p),
        witness_index: subgroup.quotient.order() as u64,
        witness_level: certificate.witness_level,
        witness_exponent: certificate.witness_exponent,
        witness_normalized: subgroup.normalized.clone(),
        phi_index: phi.order() as u64,
        even_index: index,
        even_generators: generators,
        even_relators: relators,
        even_deficiency: deficiency,
        even_ratio_lower: Exact(even_ratio_lower),
        checks: checks.clone(),
        excess,
    };
    state.presentation = extended;
    state.certificate = certificate;
    state.relator_sets.push(new_relators);
    state.tower.push(odd);
    state.tower.push(even_next);
    state.phi.push(phi);
    state.stages.push(record);
    if !checks.all() {
        return Err(Error::InvariantViolation(format!(
            "stage {n} conditions failed: {checks:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::verify::verify_snapshot;

    fn params(stages: usize) -> DriverParams {
        DriverParams::new(2, 2, BigRational::new(9.into(), 10.into()), stages)
    }

    #[test]
    fn first_stage() {
        let s = tower_driver(params(1)).unwrap();
        assert!(s.failure.is_none());
        let st = &s.stages[0];
        assert_eq!((st.exponent, st.odd_index, st.odd_b1), (1, 4, 2));
        assert_eq!(
            (st.witness_index, st.even_index, st.even_generators, st.even_relators),
            (4096, 4096, 4097, 1024)
        );
        assert_eq!(st.even_ratio_lower, Exact::new(3, 4));
        assert_eq!(st.p_deficiency, Exact::new(3, 4));
        assert!(st.checks.all());
        assert!(verify_snapshot(&s.snapshot()).all());
    }

    #[test]
    fn second_stage_hits_the_budget() {
        let s = tower_driver(params(2)).unwrap();
        assert_eq!(s.completed_stages(), 1);
        let f = s.failure.as_ref().unwrap();
        assert_eq!((f.stage, f.condition.as_str()), (2, "ii"));
        assert!(f.error.contains("8192"));
    }

    #[test]
    fn state_round_trips_and_resumes() {
        let s = tower_driver(params(1)).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: ConstructionState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let mut more = back;
        more.params.stages = 2;
        more.params.deltas = default_deltas(2);
        let more = more.resume().unwrap();
        assert_eq!(more.failure.unwrap().stage, 2);
        assert!(s
            .log_jsonl()
            .lines()
            .all(|l| serde_json::from_str::<LogRecord>(l).is_ok()));
    }

    #[test]
    fn bad_parameters() {
        let mut p = params(1);
        p.epsilon = Exact::new(1, 1);
        assert!(matches!(tower_driver(p), Err(Error::Domain(_))));
        let mut p = params(2);
        p.deltas = vec![Exact::new(1, 4), Exact::new(1, 2)];
        assert!(tower_driver(p).is_err());
    }
}
