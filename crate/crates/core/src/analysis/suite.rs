use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::missingness::{missingness_report, MissingnessReport};
use super::sensitivity::{assignment_sensitivity, SensitivityRow};
use super::{arm_summaries, pareto_frontier, population_records, ArmSummary, ParetoPoint, Population};
use crate::corpus::Stimulus;
use crate::design::AllocationTable;
use crate::harness::TrialRecord;
use crate::similarity::{ScoredPair, DEFAULT_THRESHOLD};
use crate::stats::{
    bootstrap_ci, bootstrap_mean_le_zero_p, classic_anova, cohens_d, holm_adjust, kruskal_wallis, levene_test,
    normality_check, pearson_correlation, permutation_test, trimmed_mean, welch_anova, welch_t, BootstrapStatistic,
    ConfidenceInterval, LeveneCenter, Sample, TestReport,
};
use crate::{Arm, Error, Result, TOOLKIT_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub population: Population,
    pub bootstrap_resamples: usize,
    pub permutation_resamples: usize,
    pub seed: u64,
    pub alpha: f64,
    pub similarity_threshold: f64,
    /// Savings fraction an arm must reach for the cost-similarity criterion.
    pub min_savings: f64,
    /// Fraction trimmed from each tail for trimmed means.
    pub trim: f64,
    pub include_control_in_pareto: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            population: Population::CompleteCase,
            bootstrap_resamples: 10_000,
            permutation_resamples: 10_000,
            seed: 20_260_115,
            alpha: 0.05,
            similarity_threshold: DEFAULT_THRESHOLD,
            min_savings: 0.30,
            trim: 0.05,
            include_control_in_pareto: false,
        }
    }
}

pub struct AnalysisInput<'a> {
    pub log: &'a [TrialRecord],
    pub corpus: &'a [Stimulus],
    /// Needed for the missingness and assignment-level tables.
    pub allocation: Option<&'a AllocationTable>,
    pub scores: &'a [ScoredPair],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    Completed,
    Exploratory,
    DirectionalOnly,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTest {
    pub label: String,
    pub report: TestReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_adjusted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub label: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub hypothesis: String,
    pub population: Population,
    pub status: HypothesisStatus,
    pub verdict: Option<String>,
    pub tests: Vec<NamedTest>,
    pub estimates: Vec<NamedEstimate>,
    pub notes: Vec<String>,
}

impl HypothesisResult {
    fn new(hypothesis: &str, population: Population, status: HypothesisStatus) -> Self {
        HypothesisResult {
            hypothesis: hypothesis.into(),
            population,
            status,
            verdict: None,
            tests: Vec::new(),
            estimates: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn skipped(hypothesis: &str, population: Population, reason: impl Into<String>) -> Self {
        let mut r = Self::new(hypothesis, population, HypothesisStatus::Skipped);
        r.notes.push(reason.into());
        r
    }

    fn test(&mut self, label: impl Into<String>, report: TestReport) {
        self.tests.push(NamedTest {
            label: label.into(),
            report,
            p_adjusted: None,
        });
    }

    fn estimate(&mut self, label: impl Into<String>, value: f64, ci: Option<ConfidenceInterval>) {
        self.estimates.push(NamedEstimate {
            label: label.into(),
            value,
            ci,
        });
    }

    pub fn find_test(&self, label: &str) -> Option<&NamedTest> {
        self.tests.iter().find(|t| t.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub arm: Arm,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub pct_preserved: f64,
    pub cohens_d_vs_aggressive: Option<f64>,
    pub p_adj_vs_aggressive: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub toolkit_version: String,
    pub population: Population,
    pub config: AnalysisConfig,
    pub seeds: BTreeMap<String, u64>,
    pub n_records: usize,
    pub arm_summaries: Vec<ArmSummary>,
    pub similarity_by_arm: Vec<SimilarityRow>,
    pub pareto: Vec<ParetoPoint>,
    pub h1: HypothesisResult,
    pub h2: HypothesisResult,
    pub h3: HypothesisResult,
    pub h4: HypothesisResult,
    pub h5: HypothesisResult,
    pub length_cost: HypothesisResult,
    pub assignment_sensitivity: Option<Vec<SensitivityRow>>,
    pub missingness: Option<MissingnessReport>,
    pub notes: Vec<String>,
}

impl ResultsDocument {
    pub fn summary(&self, arm: Arm) -> Option<&ArmSummary> {
        self.arm_summaries.iter().find(|s| s.arm == arm)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }
}

struct Seeds(BTreeMap<String, u64>, u64);

impl Seeds {
    fn get(&mut self, name: &str) -> u64 {
        let next = self.1.wrapping_add(self.0.len() as u64 + 1);
        *self.0.entry(name.to_string()).or_insert(next)
    }
}

fn arm_values(records: &[TrialRecord], arm: Arm, f: impl Fn(&TrialRecord) -> Option<f64>) -> Vec<f64> {
    records.iter().filter(|r| r.arm == arm).filter_map(f).collect()
}

fn sample(label: &str, values: Vec<f64>, min_n: usize) -> Option<Sample> {
    if values.len() < min_n {
        return None;
    }
    Sample::new(label, values).ok()
}

fn input_tokens(r: &TrialRecord) -> Option<f64> {
    r.input_tokens.map(|t| t as f64)
}

fn output_tokens(r: &TrialRecord) -> Option<f64> {
    r.output_tokens.map(|t| t as f64)
}

fn cost(r: &TrialRecord) -> Option<f64> {
    Some(r.cost.total_f64())
}

/// Normality per group and Levene across groups, as notes.
fn assumption_notes(groups: &[Sample], alpha: f64) -> Vec<String> {
    let mut notes = Vec::new();
    for g in groups {
        match normality_check(g) {
            Ok(r) => notes.push(format!(
                "normality {}: K2 = {:.3}, p = {:.4}{}",
                g.label(),
                r.statistic,
                r.p_value,
                if r.p_value < alpha { " (rejected)" } else { "" }
            )),
            Err(e) => notes.push(format!("normality {} not checked: {e}", g.label())),
        }
    }
    match levene_test(groups, LeveneCenter::Median) {
        Ok(r) => notes.push(format!(
            "levene (median): W = {:.3}, p = {:.4}{}",
            r.statistic,
            r.p_value,
            if r.p_value < alpha {
                " (unequal variances; Welch procedures used)"
            } else {
                ""
            }
        )),
        Err(e) => notes.push(format!("levene not computed: {e}")),
    }
    notes
}

fn holm_fill(tests: &mut [NamedTest]) -> Result<()> {
    let p: Vec<f64> = tests.iter().map(|t| t.report.p_value).collect();
    for (t, adj) in tests.iter_mut().zip(holm_adjust(&p)?) {
        t.p_adjusted = Some(adj);
    }
    Ok(())
}

fn h1(records: &[TrialRecord], cfg: &AnalysisConfig, seeds: &mut Seeds) -> Result<HypothesisResult> {
    let pop = cfg.population;
    let groups: Vec<Sample> = Arm::UNIFORM
        .iter()
        .filter_map(|&a| sample(a.name(), arm_values(records, a, input_tokens), 2))
        .collect();
    if groups.len() < 2 {
        return Ok(HypothesisResult::skipped(
            "H1",
            pop,
            "fewer than two uniform arms with at least two trials carrying input tokens",
        ));
    }
    let mut res = HypothesisResult::new("H1", pop, HypothesisStatus::Completed);
    res.notes.extend(assumption_notes(&groups, cfg.alpha));
    let anova_p = match welch_anova(&groups) {
        Ok(r) => {
            let p = r.p_value;
            res.test("welch_anova input_tokens", r);
            Some(p)
        }
        Err(e) => {
            res.notes.push(format!("Welch ANOVA not computed: {e}"));
            None
        }
    };
    let mut pairwise = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let label = format!("{} vs {}", groups[i].label(), groups[j].label());
            match welch_t(&groups[i], &groups[j]) {
                Ok(report) => pairwise.push(NamedTest {
                    label,
                    report,
                    p_adjusted: None,
                }),
                Err(e) => res.notes.push(format!("{label} not computed: {e}")),
            }
        }
    }
    if !pairwise.is_empty() {
        holm_fill(&mut pairwise)?;
        res.notes.push(format!(
            "Holm correction over the {} pairwise Welch contrasts",
            pairwise.len()
        ));
    }
    res.tests.extend(pairwise);
    let find = |name: &str| groups.iter().find(|g| g.label() == name);
    if let (Some(c), Some(a)) = (find("control"), find("aggressive")) {
        let stat = BootstrapStatistic::MeanDifference(c.clone(), a.clone());
        let ci = bootstrap_ci(&stat, cfg.bootstrap_resamples, 0.95, seeds.get("h1_bootstrap"))?;
        res.estimate("control - aggressive input tokens", stat.point_estimate(), Some(ci));
    }
    let monotone = groups.windows(2).all(|w| w[0].mean() > w[1].mean());
    res.verdict = anova_p.map(|p| {
        if p < cfg.alpha && monotone {
            "supported".into()
        } else {
            "not supported".into()
        }
    });
    Ok(res)
}

fn h2(records: &[TrialRecord], cfg: &AnalysisConfig, seeds: &mut Seeds) -> Result<HypothesisResult> {
    let pop = cfg.population;
    let (Some(agg), Some(ctl)) = (
        sample("aggressive", arm_values(records, Arm::Aggressive, output_tokens), 2),
        sample("control", arm_values(records, Arm::Control, output_tokens), 2),
    ) else {
        return Ok(HypothesisResult::skipped(
            "H2",
            pop,
            "aggressive and control arms each need at least two trials carrying output tokens",
        ));
    };
    let mut res = HypothesisResult::new("H2", pop, HypothesisStatus::Completed);
    res.notes
        .extend(assumption_notes(&[agg.clone(), ctl.clone()], cfg.alpha));
    let t = welch_t(&agg, &ctl)?;
    let p = t.p_value;
    res.test("welch_t output_tokens aggressive vs control", t);
    match cohens_d(&agg, &ctl) {
        Ok(d) => res.estimate("cohens_d", d, None),
        Err(e) => res.notes.push(format!("Cohen's d not computed: {e}")),
    }
    let perm = permutation_test(&agg, &ctl, cfg.permutation_resamples, seeds.get("h2_permutation"))?;
    res.test("permutation output_tokens aggressive vs control", perm);
    if ctl.mean() > 0.0 {
        let stat = BootstrapStatistic::RatioOfMeans(agg.clone(), ctl.clone());
        let ci = bootstrap_ci(&stat, cfg.bootstrap_resamples, 0.95, seeds.get("h2_bootstrap"))?;
        res.estimate("expansion_ratio", stat.point_estimate(), Some(ci));
    } else {
        res.notes
            .push("control mean output is zero; expansion ratio undefined".into());
    }
    res.estimate(
        format!("trimmed_mean aggressive ({:.0}%)", cfg.trim * 100.0),
        trimmed_mean(&agg, cfg.trim)?,
        None,
    );
    res.estimate(
        format!("trimmed_mean control ({:.0}%)", cfg.trim * 100.0),
        trimmed_mean(&ctl, cfg.trim)?,
        None,
    );
    res.verdict = Some(if p < cfg.alpha && agg.mean() > ctl.mean() {
        "supported".into()
    } else {
        "not supported".into()
    });
    Ok(res)
}

fn h3(records: &[TrialRecord], types: &HashMap<&str, &str>, cfg: &AnalysisConfig) -> Result<HypothesisResult> {
    let pop = cfg.population;
    let mut by_type: BTreeMap<&str, Vec<TrialRecord>> = BTreeMap::new();
    for r in records {
        let t = types
            .get(r.stimulus_id.as_str())
            .copied()
            .ok_or_else(|| Error::Inconsistent(format!("trial for {} has no corpus entry", r.stimulus_id)))?;
        by_type.entry(t).or_default().push(r.clone());
    }
    let mut res = HypothesisResult::new("H3", pop, HypothesisStatus::Exploratory);
    res.notes
        .push("exploratory one-way arm effects on trial cost within each task type".into());
    for (task_type, recs) in &by_type {
        let groups: Vec<Sample> = Arm::ALL
            .iter()
            .filter_map(|&a| sample(a.name(), arm_values(recs, a, cost), 2))
            .collect();
        if groups.len() < 3 {
            res.notes.push(format!(
                "{task_type}: skipped, {} arm(s) with at least two trials (need 3)",
                groups.len()
            ));
            continue;
        }
        match classic_anova(&groups) {
            Ok(r) => res.test(format!("anova cost within {task_type}"), r),
            Err(e) => res.notes.push(format!("{task_type}: ANOVA not computed: {e}")),
        }
    }
    if res.tests.is_empty() {
        res.status = HypothesisStatus::Skipped;
        res.notes.push("no task type had enough arms for a one-way test".into());
    }
    Ok(res)
}

fn h4(
    summaries: &[ArmSummary],
    scores: &[ScoredPair],
    cfg: &AnalysisConfig,
) -> Result<(HypothesisResult, Vec<SimilarityRow>, Vec<ParetoPoint>)> {
    let pop = cfg.population;
    let groups: Vec<Sample> = Arm::TREATMENTS
        .iter()
        .filter_map(|&a| {
            let v: Vec<f64> = scores.iter().filter(|s| s.arm == a).map(|s| s.value).collect();
            sample(a.name(), v, 1)
        })
        .collect();
    if groups.is_empty() {
        return Ok((
            HypothesisResult::skipped("H4", pop, "no similarity scores for the analysed trials"),
            Vec::new(),
            Vec::new(),
        ));
    }
    let mut res = HypothesisResult::new("H4", pop, HypothesisStatus::Completed);
    let multi: Vec<Sample> = groups.iter().filter(|g| g.len() >= 2).cloned().collect();
    if multi.len() >= 2 {
        res.notes.extend(assumption_notes(&multi, cfg.alpha));
        match classic_anova(&multi) {
            Ok(r) => res.test("anova similarity", r),
            Err(e) => res.notes.push(format!("similarity ANOVA not computed: {e}")),
        }
        match kruskal_wallis(&multi) {
            Ok(r) => res.test("kruskal_wallis similarity", r),
            Err(e) => res.notes.push(format!("Kruskal-Wallis not computed: {e}")),
        }
    }
    let aggressive = multi.iter().find(|g| g.label() == "aggressive");
    let mut contrasts = Vec::new();
    let mut d_by_arm = HashMap::new();
    if let Some(agg) = aggressive {
        for g in multi.iter().filter(|g| g.label() != "aggressive") {
            match welch_t(g, agg) {
                Ok(report) => contrasts.push(NamedTest {
                    label: format!("similarity {} vs aggressive", g.label()),
                    report,
                    p_adjusted: None,
                }),
                Err(e) => res.notes.push(format!("similarity {} vs aggressive: {e}", g.label())),
            }
            if let Ok(d) = cohens_d(g, agg) {
                d_by_arm.insert(g.label().to_string(), d);
            }
        }
        if !contrasts.is_empty() {
            holm_fill(&mut contrasts)?;
        }
    }
    let mut rows = Vec::new();
    for g in &groups {
        let arm: Arm = g.label().parse().map_err(Error::Inconsistent)?;
        let preserved = scores.iter().filter(|s| s.arm == arm && s.preserved).count();
        let contrast = contrasts
            .iter()
            .find(|t| t.label == format!("similarity {} vs aggressive", g.label()));
        rows.push(SimilarityRow {
            arm,
            n: g.len(),
            mean: g.mean(),
            sd: g.sd(),
            pct_preserved: 100.0 * preserved as f64 / g.len() as f64,
            cohens_d_vs_aggressive: d_by_arm.get(g.label()).copied(),
            p_adj_vs_aggressive: contrast.and_then(|t| t.p_adjusted),
        });
    }
    res.tests.extend(contrasts);

    let points: Vec<(Arm, f64, f64)> = summaries
        .iter()
        .filter_map(|s| s.mean_similarity.map(|sim| (s.arm, s.mean_cost, sim)))
        .collect();
    let frontier = pareto_frontier(&points, cfg.include_control_in_pareto);
    let on_frontier: Vec<&str> = frontier.iter().filter(|p| !p.dominated).map(|p| p.arm.name()).collect();
    res.notes
        .push(format!("non-dominated arms: {}", on_frontier.join(", ")));
    let kept: Vec<&str> = frontier
        .iter()
        .filter(|p| !p.dominated && matches!(p.arm, Arm::Light | Arm::Adaptive))
        .map(|p| p.arm.name())
        .collect();
    if !kept.is_empty() {
        res.notes.push(format!(
            "{} non-dominated under strict dominance (no cheaper arm has higher similarity); \
             no further frontier criterion is applied, so {} reported on the frontier",
            kept.join(" and "),
            if kept.len() == 1 { "it is" } else { "they are" }
        ));
    }
    let meeting: Vec<&str> = summaries
        .iter()
        .filter(|s| s.arm != Arm::Control)
        .filter(|s| {
            s.savings.is_some_and(|v| v >= cfg.min_savings)
                && s.mean_similarity.is_some_and(|m| m >= cfg.similarity_threshold)
        })
        .map(|s| s.arm.name())
        .collect();
    res.notes.push(format!(
        "criterion: savings >= {:.0}% and mean similarity >= {:.2}; arms meeting it: {}",
        cfg.min_savings * 100.0,
        cfg.similarity_threshold,
        if meeting.is_empty() {
            "none".to_string()
        } else {
            meeting.join(", ")
        }
    ));
    res.verdict = Some(
        if meeting.is_empty() {
            "not supported"
        } else {
            "supported"
        }
        .into(),
    );
    Ok((res, rows, frontier))
}

fn h5(summaries: &[ArmSummary], cfg: &AnalysisConfig) -> HypothesisResult {
    let pop = cfg.population;
    let get = |a: Arm| summaries.iter().find(|s| s.arm == a);
    let (Some(m), Some(a)) = (get(Arm::Moderate), get(Arm::Aggressive)) else {
        return HypothesisResult::skipped("H5", pop, "moderate and aggressive arms are both required");
    };
    let mut res = HypothesisResult::new("H5", pop, HypothesisStatus::DirectionalOnly);
    let mut ratios = Vec::new();
    for arm in [Arm::Light, Arm::Moderate, Arm::Aggressive] {
        if let Some(s) = get(arm) {
            ratios.push(format!("{}", arm.target_r()));
            if let Some(v) = s.savings {
                res.estimate(format!("savings at r = {}", arm.target_r()), v, None);
            }
            if let Some(v) = s.mean_similarity {
                res.estimate(format!("similarity at r = {}", arm.target_r()), v, None);
            }
        }
    }
    let cost_ok = match (m.savings, a.savings) {
        (Some(sm), Some(sa)) => Some(sm > sa),
        _ => None,
    };
    let sim_ok = match (m.mean_similarity, a.mean_similarity) {
        (Some(sm), Some(sa)) => Some(sm > sa),
        _ => None,
    };
    let checks: Vec<bool> = [cost_ok, sim_ok].into_iter().flatten().collect();
    res.verdict = Some(if checks.is_empty() {
        "inconclusive".into()
    } else if checks.iter().all(|&b| b) {
        "directionally compatible".into()
    } else {
        "not directionally compatible".into()
    });
    res.notes.push(format!(
        "only uniform ratios {{{}}} observed; onset ratio is not identifiable, so quantitative threshold alignment is inconclusive",
        ratios.join(", ")
    ));
    res
}

fn length_cost(records: &[TrialRecord], lengths: &HashMap<&str, f64>, cfg: &AnalysisConfig) -> HypothesisResult {
    let pop = cfg.population;
    let mut res = HypothesisResult::new("length_cost", pop, HypothesisStatus::Exploratory);
    let pairs = |arm: Option<Arm>| -> (Vec<f64>, Vec<f64>) {
        records
            .iter()
            .filter(|r| arm.is_none_or(|a| r.arm == a))
            .filter_map(|r| lengths.get(r.stimulus_id.as_str()).map(|&l| (l, r.cost.total_f64())))
            .unzip()
    };
    let mut run = |label: String, (x, y): (Vec<f64>, Vec<f64>)| {
        if x.len() < 3 {
            res.notes.push(format!("{label}: fewer than three trials"));
            return;
        }
        let r = Sample::new("est_tokens", x)
            .and_then(|xs| Sample::new("cost", y).and_then(|ys| pearson_correlation(&xs, &ys)));
        match r {
            Ok(r) => res.test(label, r),
            Err(e) => res.notes.push(format!("{label}: {e}")),
        }
    };
    run("pearson est_tokens vs cost (all arms)".into(), pairs(None));
    for arm in Arm::ALL {
        run(format!("pearson est_tokens vs cost ({arm})"), pairs(Some(arm)));
    }
    res
}

/// Runs every pre-registered analysis on one population.
///
/// The result is a pure function of the inputs and configuration; all
/// random procedures take seeds derived from `config.seed`, and the seeds
/// are recorded in the document.
pub fn hypothesis_suite(input: &AnalysisInput<'_>, config: &AnalysisConfig) -> Result<ResultsDocument> {
    let records = population_records(input.log, config.population);
    let keys: HashSet<(&str, Arm)> = records.iter().map(|r| (r.stimulus_id.as_str(), r.arm)).collect();
    let scores: Vec<ScoredPair> = input
        .scores
        .iter()
        .filter(|s| s.arm != Arm::Control && keys.contains(&(s.stimulus_id.as_str(), s.arm)))
        .cloned()
        .collect();
    let mut seeds = Seeds(BTreeMap::new(), config.seed);

    let mut summaries = arm_summaries(&records, &scores)?;
    if let Some(control_mean) = summaries.iter().find(|s| s.arm == Arm::Control).map(|s| s.mean_cost) {
        for s in summaries.iter_mut().filter(|s| s.arm != Arm::Control) {
            let per_trial: Vec<f64> = arm_values(&records, s.arm, cost)
                .iter()
                .map(|c| control_mean - c)
                .collect();
            if let Ok(sample) = Sample::new(s.arm.name(), per_trial) {
                let seed = seeds.get(&format!("net_savings_{}", s.arm));
                s.net_savings_p = Some(bootstrap_mean_le_zero_p(&sample, config.bootstrap_resamples, seed)?);
            }
        }
    }

    let types: HashMap<&str, &str> = input
        .corpus
        .iter()
        .map(|s| (s.stimulus_id.as_str(), s.task_type.as_str()))
        .collect();
    let lengths: HashMap<&str, f64> = input
        .corpus
        .iter()
        .map(|s| (s.stimulus_id.as_str(), s.est_tokens as f64))
        .collect();

    let h1 = h1(&records, config, &mut seeds)?;
    let h2 = h2(&records, config, &mut seeds)?;
    let h3 = h3(&records, &types, config)?;
    let (h4, similarity_by_arm, pareto) = h4(&summaries, &scores, config)?;
    let h5 = h5(&summaries, config);
    let length_cost = length_cost(&records, &lengths, config);

    let (assignment_sensitivity, missingness) = match input.allocation {
        Some(alloc) => (
            Some(assignment_sensitivity(alloc, input.log)?),
            Some(missingness_report(alloc, input.corpus, input.log)?),
        ),
        None => (None, None),
    };

    let mut notes = vec![
        format!("analysis population: {}", config.population.label()),
        "control similarity is 1.0 by definition; control rows are not scored".into(),
        "net-savings p values: one-sided bootstrap test that mean per-trial savings against the control mean is <= 0"
            .into(),
        "normality gate: D'Agostino-Pearson K2 (substitute for Shapiro-Wilk)".into(),
    ];
    if config.population == Population::AllSubmitted {
        let missing = records.iter().filter(|r| r.input_tokens.is_none()).count();
        notes.push(format!(
            "{missing} submitted trials carry no token counts and are absent from token outcomes; cost outcomes include them at observed cost"
        ));
    }

    Ok(ResultsDocument {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        population: config.population,
        config: config.clone(),
        seeds: seeds.0,
        n_records: records.len(),
        arm_summaries: summaries,
        similarity_by_arm,
        pareto,
        h1,
        h2,
        h3,
        h4,
        h5,
        length_cost,
        assignment_sensitivity,
        missingness,
        notes,
    })
}
