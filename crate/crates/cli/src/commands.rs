use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use betti::chains::{
    check_fp_monotone, check_index_inequality, report_prefix, Chain, ChainReport, ChainSpec, MonotoneCheck,
    ReferenceConstants,
};
use betti::constructions::verify::{verify_snapshot, VerificationReport};
use betti::constructions::{
    default_deltas, free_product_counterexample, is_p_regular, tower_driver, ConstructionState, DriverParams,
    FieldMode, RegularityStatus, StageFailure,
};
use betti::groupring::{run_suite, DEFAULT_SUITE};
use betti::homology::abelian_invariants;
use betti::rational::parse_rational;
use betti::{Exact, Presentation};
use clap::Args;
use serde::Serialize;
use serde_json::json;

use crate::output::{Failure, Output};
use crate::Global;

type Result<T> = std::result::Result<T, Failure>;

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Failure::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Failure::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_presentation(path: &Path) -> Result<Presentation> {
    let text = read(path)?;
    Presentation::parse(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn csv_line(cells: &[String]) -> String {
    cells.join(",") + "\n"
}

pub fn b1(file: &Path, primes: &[u64]) -> Result<Output> {
    let presentation = load_presentation(file)?;
    for &p in primes {
        if !betti::words::is_prime(p) {
            return Err(Failure::Input(format!("{p} is not prime")));
        }
    }
    let inv = abelian_invariants(&presentation, primes);
    let p_deficiency = primes
        .iter()
        .map(|&p| Ok((p, Exact(presentation.p_deficiency(p)?))))
        .collect::<std::result::Result<BTreeMap<_, _>, betti::Error>>()?;
    let value = json!({
        "presentation": presentation.to_string(),
        "generators": presentation.generators(),
        "relators": presentation.relators().len(),
        "deficiency": presentation.deficiency(),
        "p_deficiency": p_deficiency,
        "invariants": inv,
    });
    let factors: Vec<String> = inv.invariant_factors.iter().map(|f| f.to_string()).collect();
    let mut text = format!("presentation  {presentation}\n");
    let _ = writeln!(text, "free_rank     {}", inv.free_rank);
    let _ = writeln!(text, "torsion       [{}]", factors.join(", "));
    let _ = writeln!(text, "d_h1          {}", inv.d_h1);
    for (p, b) in &inv.betti_mod {
        let _ = writeln!(text, "b1 mod {p:<6} {b}");
    }
    for (p, d) in &p_deficiency {
        let _ = writeln!(text, "def_{p:<9} {d}");
    }
    let mut header = vec!["free_rank".to_string(), "d_h1".into(), "invariant_factors".into()];
    header.extend(inv.betti_mod.keys().map(|p| format!("b1_mod_{p}")));
    let mut row = vec![inv.free_rank.to_string(), inv.d_h1.to_string(), factors.join(" ")];
    row.extend(inv.betti_mod.values().map(|b| b.to_string()));
    Ok(Output::new(&value, text).with_csv(csv_line(&header) + &csv_line(&row)))
}

#[derive(Args, Debug)]
pub struct ChainArgs {
    pub file: PathBuf,
    /// Chain description as JSON, e.g. `{"kind":"derived_p","p":2,"depth":2}`,
    /// or the path of a file holding it.
    #[arg(long, conflicts_with_all = ["weights", "derived_p"])]
    pub spec: Option<String>,
    /// Weight per generator for a cyclic chain.
    #[arg(long, value_delimiter = ',', requires = "moduli", allow_hyphen_values = true)]
    pub weights: Vec<i64>,
    #[arg(long, value_delimiter = ',')]
    pub moduli: Vec<u64>,
    /// Prime of a derived p-series.
    #[arg(long, requires = "depth")]
    pub derived_p: Option<u64>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub primes: Vec<u64>,
    /// Known first L²-Betti number, e.g. `1` or `3/4`.
    #[arg(long)]
    pub b1_l2: Option<String>,
}

impl ChainArgs {
    fn spec(&self) -> Result<ChainSpec> {
        if let Some(spec) = &self.spec {
            let text = if Path::new(spec).is_file() {
                read(Path::new(spec))?
            } else {
                spec.clone()
            };
            return serde_json::from_str(&text).map_err(|e| Failure::Input(format!("chain spec: {e}")));
        }
        if let (Some(p), Some(depth)) = (self.derived_p, self.depth) {
            return Ok(ChainSpec::DerivedP { p, depth });
        }
        if !self.weights.is_empty() {
            return Ok(ChainSpec::Cyclic {
                weights: self.weights.clone(),
                moduli: self.moduli.clone(),
            });
        }
        Err(Failure::Input(
            "give --spec, --weights with --moduli, or --derived-p with --depth".into(),
        ))
    }
}

#[derive(Serialize)]
struct ChainChecks {
    /// Per prime with a p-chain: `b₁(𝔽_p)/index` is non-increasing.
    fp_monotone: BTreeMap<u64, MonotoneCheck>,
    /// Per prime with a p-chain: `b₁(H;𝔽_p) − 1 ≤ [G:H](b₁(G;𝔽_p) − 1)` between consecutive levels.
    index_inequality: BTreeMap<u64, bool>,
}

fn chain_checks(chain: &Chain, report: &ChainReport) -> Result<ChainChecks> {
    let mut checks = ChainChecks {
        fp_monotone: BTreeMap::new(),
        index_inequality: BTreeMap::new(),
    };
    for &p in &report.primes {
        if chain.is_p_chain(p) {
            checks.fp_monotone.insert(p, check_fp_monotone(report, p)?);
            let holds = check_index_inequality(report, p)?.iter().all(|c| c.holds);
            checks.index_inequality.insert(p, holds);
        }
    }
    Ok(checks)
}

impl ChainChecks {
    fn failure(&self) -> Option<String> {
        if let Some((p, _)) = self.fp_monotone.iter().find(|(_, m)| !m.monotone) {
            return Some(format!("b1 mod {p} normalized sequence increased along a {p}-chain"));
        }
        if let Some((p, _)) = self.index_inequality.iter().find(|(_, h)| !**h) {
            return Some(format!("index inequality for p = {p} failed"));
        }
        None
    }
}

fn report_text(report: &ChainReport) -> String {
    let mut out = format!("presentation {}\n", report.presentation);
    let mut header = format!("{:>3} {:>8} {:>6}", "i", "index", "b1");
    for p in &report.primes {
        let _ = write!(header, " {:>8}", format!("b1[{p}]"));
    }
    let _ = writeln!(
        header,
        " {:>6} {:>8} {:>10} {:>16}",
        "d_h1", "rank_up", "b1/n", "rg_upper"
    );
    out.push_str(&header);
    for r in &report.rows {
        let _ = write!(out, "{:>3} {:>8} {:>6}", r.i, r.index, r.b1_rational);
        for b in r.b1_mod.values() {
            let _ = write!(out, " {b:>8}");
        }
        let _ = writeln!(
            out,
            " {:>6} {:>8} {:>10} {:>16}",
            r.d_h1,
            r.rank_upper,
            r.ratios.b1_rational.to_string(),
            r.rg_upper.to_string()
        );
    }
    if let Some(t) = &report.truncation {
        let _ = writeln!(
            out,
            "truncated after level {} ({:?}{})",
            t.after_level,
            t.reason,
            t.required.as_ref().map(|r| format!(", needs {r}")).unwrap_or_default()
        );
    }
    out
}

pub fn chain(global: &Global, args: &ChainArgs) -> Result<Output> {
    let presentation = load_presentation(&args.file)?;
    let spec = args.spec()?;
    let refs = ReferenceConstants {
        b1_l2: args.b1_l2.as_deref().map(parse_rational).transpose()?.map(Exact),
    };
    let chain = Chain::build(&presentation, &spec, global.index_budget)?;
    let report = report_prefix(&chain, &args.primes, &refs, global.matrix_budget)?;
    let checks = chain_checks(&chain, &report)?;
    let failure = checks.failure();
    let value = json!({ "spec": spec, "report": report, "checks": checks });
    Ok(Output::new(&value, report_text(&report))
        .with_csv(report.to_csv())
        .violation_if(failure.is_some(), failure.unwrap_or_default()))
}

pub fn gradient(global: &Global, file: &Path, p: u64, depth: usize) -> Result<Output> {
    let presentation = load_presentation(file)?;
    let spec = ChainSpec::DerivedP { p, depth };
    let chain = Chain::build(&presentation, &spec, global.index_budget)?;
    let report = report_prefix(&chain, &[p], &ReferenceConstants::default(), global.matrix_budget)?;
    let monotone = check_fp_monotone(&report, p)?;
    let levels: Vec<_> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "i": r.i,
                "index": r.index,
                "b1_mod_p": r.b1_mod[&p],
                "fp_ratio": r.ratios.b1_mod[&p],
                "rg_upper": r.rg_upper,
            })
        })
        .collect();
    let value = json!({
        "presentation": report.presentation,
        "p": p,
        "levels": levels,
        "fp_monotone": monotone,
        "truncation": report.truncation,
    });
    let mut text = format!(
        "{:>3} {:>10} {:>8} {:>16} {:>16}\n",
        "i", "index", "b1_p", "b1_p/n", "rg_upper"
    );
    let mut csv = format!("# decimal columns are display-only\ni,index,b1_mod_{p},fp_ratio,rg_upper\n");
    for r in &report.rows {
        let ratio = &r.ratios.b1_mod[&p];
        let _ = writeln!(
            text,
            "{:>3} {:>10} {:>8} {:>16} {:>16}",
            r.i,
            r.index,
            r.b1_mod[&p],
            ratio.to_string(),
            r.rg_upper.to_string()
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.i,
            r.index,
            r.b1_mod[&p],
            ratio.to_decimal(12),
            r.rg_upper.to_decimal(12)
        );
    }
    let _ = writeln!(text, "monotone: {}", monotone.monotone);
    Ok(Output::new(&value, text)
        .with_csv(csv)
        .violation_if(!monotone.monotone, format!("b1 mod {p} normalized sequence increased")))
}

pub fn counterexample(global: &Global, p: u64, q: u64, moduli: &[u64]) -> Result<Output> {
    let (presentation, chain) = free_product_counterexample(p, q, moduli, global.index_budget)?;
    let report = report_prefix(&chain, &[p, q], &ReferenceConstants::default(), global.matrix_budget)?;
    let closed_form: Vec<bool> = report
        .rows
        .iter()
        .map(|r| {
            let n = r.index as usize;
            r.b1_rational == 1
                && r.b1_mod[&p] == 1 + n
                && r.b1_mod[&q] == 1 + 2 * n
                && r.d_h1 == 1 + 2 * n
                && r.rank_upper == 1 + 3 * n
        })
        .collect();
    let strict: Vec<bool> = report.rows.iter().map(|r| r.strictly_increasing[&p]).collect();
    let value = json!({
        "presentation": presentation.to_string(),
        "p": p,
        "q": q,
        "report": report,
        "closed_form": closed_form,
        "strictly_increasing": strict,
    });
    let mut text = report_text(&report);
    let _ = writeln!(text, "closed forms hold: {}", closed_form.iter().all(|&b| b));
    let _ = writeln!(
        text,
        "b1/n < b1({p})/n < d(H1)/n < rank_upper/n: {}",
        strict.iter().all(|&b| b)
    );
    let failed = !closed_form.iter().chain(&strict).all(|&b| b);
    Ok(Output::new(&value, text)
        .with_csv(report.to_csv())
        .violation_if(failed, "counterexample values differ from the closed forms"))
}

pub fn oracle_groupring(global: &Global, per_group: usize, groups: &[String]) -> Result<Output> {
    let parsed: Vec<(String, u64)> = groups
        .iter()
        .map(|g| {
            let (name, p) = g
                .split_once(':')
                .ok_or_else(|| Failure::Input(format!("group `{g}` is not NAME:PRIME")))?;
            let p = p.parse().map_err(|_| Failure::Input(format!("bad prime in `{g}`")))?;
            Ok((name.to_string(), p))
        })
        .collect::<Result<_>>()?;
    let suite: Vec<(&str, u64)> = if parsed.is_empty() {
        DEFAULT_SUITE.to_vec()
    } else {
        parsed.iter().map(|(n, p)| (n.as_str(), *p)).collect()
    };
    let report = run_suite(&suite, per_group, global.seed)?;
    let violations = report.violations();
    let demos_ok = report.demos.iter().all(|d| d.matches_catalog);
    let value = json!({ "violations": violations, "demos_match_catalog": demos_ok, "suite": report });
    let mut text = format!(
        "{:<8} {:>5} {:>8} {:>10} {:>8}\n",
        "group", "p", "checked", "violations", "equal"
    );
    let mut csv = String::from("group,prime,checked,violations,equality_cases\n");
    for g in &report.groups {
        let _ = writeln!(
            text,
            "{:<8} {:>5} {:>8} {:>10} {:>8}",
            g.group, g.prime, g.checked, g.violations, g.equality_cases
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            g.group, g.prime, g.checked, g.violations, g.equality_cases
        );
    }
    for d in &report.demos {
        let _ = writeln!(
            text,
            "demo {}: holds {} ({} vs {}), as catalogued: {}",
            d.name, d.result.holds, d.result.lhs, d.result.rhs, d.matches_catalog
        );
    }
    let _ = writeln!(text, "violations: {violations}");
    Ok(Output::new(&value, text)
        .with_csv(csv)
        .violation_if(violations > 0, format!("{violations} dimension-inequality violations"))
        .violation_if(!demos_ok, "a catalogued demo changed outcome"))
}

pub fn regularity(global: &Global, file: &Path, p: u64, depth: usize) -> Result<Output> {
    let presentation = load_presentation(file)?;
    let cert = is_p_regular(&presentation, p, depth, global.index_budget)?;
    let value = json!({ "presentation": presentation.to_string(), "certificate": cert });
    let mut text = format!("presentation {presentation}\n");
    match cert.status {
        RegularityStatus::Certified => {
            let index = cert.witness.as_ref().map_or(0, |w| w.order());
            let _ = writeln!(
                text,
                "Certified: witness index {index} (level {}, exponent {})",
                cert.witness_level.map_or("-".into(), |l| l.to_string()),
                cert.witness_exponent.map_or("-".into(), |e| e.to_string())
            );
        }
        RegularityStatus::Unknown => {
            let _ = writeln!(text, "Unknown: no witness within {} attempts", cert.attempts.len());
        }
    }
    for s in &cert.survivors {
        let _ = writeln!(
            text,
            "  relator {}: root {} has order {}",
            s.relator,
            presentation.alphabet().format_word(&s.root),
            s.root_order
        );
    }
    Ok(Output::new(&value, text))
}

#[derive(Args, Debug)]
pub struct ConstructArgs {
    #[arg(short, default_value_t = 2)]
    pub d: usize,
    #[arg(short, default_value_t = 2)]
    pub p: u64,
    /// `ε`, as a decimal or fraction.
    #[arg(long, default_value = "0.9")]
    pub epsilon: String,
    #[arg(long, default_value_t = 1)]
    pub stages: usize,
    /// Comma-separated `δ_1, δ_2, …`; defaults to `3/4 · 2^(1−n)`.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Vec<String>,
    /// Measure odd levels over 𝔽_q instead of ℚ.
    #[arg(long)]
    pub field_prime: Option<u64>,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 8)]
    pub max_exponent: u32,
    /// Write the action log as JSON lines.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Write the full resumable state as JSON.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Continue from a saved state; `--stages` then sets the new target.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Serialize)]
struct ConstructSummary<'a> {
    params: &'a DriverParams,
    completed_stages: usize,
    stages: Vec<serde_json::Value>,
    failure: &'a Option<StageFailure>,
    verification: &'a VerificationReport,
}

pub fn construct(global: &Global, args: &ConstructArgs) -> Result<Output> {
    let deltas = if args.deltas.is_empty() {
        default_deltas(args.stages)
    } else {
        args.deltas
            .iter()
            .map(|d| parse_rational(d).map(Exact))
            .collect::<std::result::Result<_, _>>()?
    };
    let mode = match args.field_prime {
        None => FieldMode::Rational,
        Some(q) => FieldMode::Prime(q),
    };
    let state = match &args.resume {
        Some(path) => {
            let mut state: ConstructionState =
                serde_json::from_str(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            state.params.stages = args.stages;
            if !args.deltas.is_empty() || state.params.deltas.len() < args.stages {
                state.params.deltas = deltas;
            }
            state.resume()?
        }
        None => {
            let mut params = DriverParams::new(args.d, args.p, parse_rational(&args.epsilon)?, args.stages);
            params.deltas = deltas;
            params.mode = mode;
            params.index_budget = global.index_budget;
            params.depth_budget = args.depth;
            params.max_exponent = args.max_exponent;
            params.seed = global.seed;
            tower_driver(params)?
        }
    };
    if let Some(path) = &args.log {
        write(path, &state.log_jsonl())?;
    }
    if let Some(path) = &args.state {
        write(path, &serde_json::to_string(&state).expect("state serializes"))?;
    }
    let verification = verify_snapshot(&state.snapshot());
    let alphabet = state.presentation.alphabet();
    let stages = state
        .stages
        .iter()
        .zip(&state.relator_sets)
        .map(|(s, rels)| {
            json!({
                "stage": s.stage,
                "delta": s.delta,
                "exponent": s.exponent,
                "odd_index": s.odd_index,
                "odd_b1": s.odd_b1,
                "odd_ratio": s.odd_ratio,
                "new_relators": rels.iter().map(|r| alphabet.format_word(r)).collect::<Vec<_>>(),
                "p_deficiency": s.p_deficiency,
                "witness_index": s.witness_index,
                "phi_index": s.phi_index,
                "even_index": s.even_index,
                "even_generators": s.even_generators,
                "even_relators": s.even_relators,
                "even_ratio_lower": s.even_ratio_lower,
                "checks": s.checks,
            })
        })
        .collect();
    let summary = ConstructSummary {
        params: &state.params,
        completed_stages: state.completed_stages(),
        stages,
        failure: &state.failure,
        verification: &verification,
    };
    let mut text = String::new();
    for s in &state.stages {
        let _ = writeln!(text, "stage {}", s.stage);
        let _ = writeln!(
            text,
            "  odd level   index {:>8}  b1/n = {} < {}",
            s.odd_index, s.odd_ratio, s.delta
        );
        let _ = writeln!(
            text,
            "  even level  index {:>8}  (def - 1)/n = {} > {}",
            s.even_index,
            s.even_ratio_lower,
            Exact(Exact::integer(state.params.d as i64 - 1).value() - state.params.epsilon.value())
        );
        let c = &s.checks;
        for (name, ok) in [
            ("(i) even ratio", c.even_ratio),
            ("(ii) odd ratio", c.odd_ratio),
            ("(iii) commutator containment", c.commutator_containment),
            ("(iv) neighborhood", c.neighborhood),
            ("(v) p-deficiency", c.p_deficiency),
            ("(vi) p-regular", c.p_regular),
        ] {
            let _ = writeln!(text, "  [{}] {name}", if ok { "ok" } else { "FAIL" });
        }
    }
    if let Some(f) = &state.failure {
        let _ = writeln!(
            text,
            "stopped at stage {} on condition ({}): {}",
            f.stage, f.condition, f.error
        );
    }
    let _ = writeln!(
        text,
        "independent verification: {}",
        if verification.all() { "passed" } else { "FAILED" }
    );
    Ok(Output::new(&summary, text).violation_if(
        !verification.all(),
        format!("independent verification failed: {}", verification.messages.join("; ")),
    ))
}
