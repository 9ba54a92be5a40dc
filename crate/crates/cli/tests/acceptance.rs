//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskscale::cohort::{reconstruct_anchor_cohort, PopulationSpec, ANCHOR_NON_SEVERE, ANCHOR_SEVERE};
use riskscale::feedback::{run_feedback, weight_trend, FeedbackSpec, SelectionRule};
use riskscale::metrics::{auc, confusion, metrics, sweep, ScoreDistribution};
use riskscale::psychometrics::{
    chi_squared, cronbach_alpha, cronbach_alpha_columns, item_discrimination, two_sample_t, ContingencyTable,
    ResponseMatrix,
};
use riskscale::scale::{classify_tier, score_responses, ItemResponse, ScaleDefinition, Tier};
use riskscale::{Exact, Label, Scalar};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn close(actual: f64, target: f64, tol: f64, what: &str) -> Result<(), String> {
    check((actual - target).abs() <= tol, || format!("{what} = {actual}, expected {target} ± {tol}"))
}

fn relative_close(a: f64, b: f64, what: &str) -> Result<(), String> {
    let scale = a.abs().max(b.abs()).max(1e-300);
    check((a - b).abs() / scale <= 1e-9 || a == b, || format!("{what}: {a} vs brute force {b}"))
}

fn table_one() -> Outcome {
    let start = Instant::now();
    let dist = reconstruct_anchor_cohort();
    let cm = confusion(&dist, 10).map_err(|e| e.to_string())?;
    let m = metrics::<f64>(&cm).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check((cm.tp, cm.fn_, cm.fp, cm.tn) == (129, 140, 151, 661), || format!("confusion at 10 = {cm:?}"))?;
    close(m.sensitivity.unwrap(), 0.4796, 0.0005, "sensitivity")?;
    close(m.specificity.unwrap(), 0.8140, 0.0005, "specificity")?;
    close(m.accuracy.unwrap(), 0.731, 0.001, "accuracy")?;
    check(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("tp 129 fn 140 fp 151 tn 661, {elapsed:?}"))
}

fn cutoff_zero() -> Outcome {
    let dist = reconstruct_anchor_cohort();
    let m = metrics::<f64>(&confusion(&dist, 0).unwrap()).unwrap();
    close(m.sensitivity.unwrap(), 1.0, 0.0, "sensitivity")?;
    close(m.specificity.unwrap(), 0.0, 0.0, "specificity")?;
    close(m.accuracy.unwrap(), 0.249, 0.001, "accuracy")?;
    for k in 0..=dist.cutoff_limit() {
        let cm = confusion(&dist, k).unwrap();
        check(cm.tp + cm.fn_ == ANCHOR_SEVERE && cm.fp + cm.tn == ANCHOR_NON_SEVERE, || {
            format!("conservation fails at cutoff {k}: {cm:?}")
        })?;
    }
    Ok(format!("accuracy {:.4}; conservation holds at all {} cutoffs", m.accuracy.unwrap(), dist.cutoff_limit() + 1))
}

fn rate_anchors() -> Outcome {
    let dist = reconstruct_anchor_cohort();
    let near = |actual: u64, rate: f64, class: u64, what: &str| {
        let target = (rate * class as f64).round() as i64;
        check((actual as i64 - target).abs() <= 1, || format!("{what}: {actual} vs round({rate} × {class}) = {target}"))
    };
    let at6 = confusion(&dist, 6).unwrap();
    let at12 = confusion(&dist, 12).unwrap();
    near(at6.tp, 0.8327, ANCHOR_SEVERE, "cutoff 6 true positives")?;
    near(at6.tn, 0.4532, ANCHOR_NON_SEVERE, "cutoff 6 true negatives")?;
    near(at12.tp, 0.29, ANCHOR_SEVERE, "cutoff 12 true positives")?;
    near(at12.fp, 0.06, ANCHOR_NON_SEVERE, "cutoff 12 false positives")?;
    Ok(format!("cutoff 6: tp {} tn {}; cutoff 12: tp {} fp {}", at6.tp, at6.tn, at12.tp, at12.fp))
}

fn pairwise_auc(severe: &[u64], non_severe: &[u64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &p) in severe.iter().enumerate() {
        for (j, &n) in non_severe.iter().enumerate() {
            let w = (p * n) as f64;
            pairs += w;
            wins += w * if i > j { 1.0 } else if i == j { 0.5 } else { 0.0 };
        }
    }
    wins / pairs
}

fn auc_checks() -> Outcome {
    let area = auc(&sweep::<f64>(&reconstruct_anchor_cohort()).unwrap()).unwrap();
    close(area, 0.69, 0.05, "reconstructed AUC")?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let max = rng.gen_range(1..=10u32);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<u64> {
            loop {
                let v: Vec<u64> = (0..=max).map(|_| rng.gen_range(0..8)).collect();
                if v.iter().sum::<u64>() > 0 {
                    return v;
                }
            }
        };
        let (s, n) = (draw(&mut rng), draw(&mut rng));
        let dist = ScoreDistribution::new(max, s.clone(), n.clone()).unwrap();
        let trapezoid = auc(&sweep::<f64>(&dist).unwrap()).unwrap();
        let gap = (trapezoid - pairwise_auc(&s, &n)).abs();
        worst = worst.max(gap);
        check(gap <= 0.01, || format!("trapezoid {trapezoid} vs pairwise on {s:?} / {n:?}"))?;
    }
    Ok(format!("AUC {area:.4}; worst oracle gap {worst:.2e} over 20 distributions"))
}

fn scoring_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let scales = [ScaleDefinition::epv(), ScaleDefinition::epv_r()];
    let respond = |points: &[Option<u8>]| -> Vec<ItemResponse> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| p.map_or(ItemResponse::missing(i as u8 + 1), |p| ItemResponse::answered(i as u8 + 1, p)))
            .collect()
    };
    for case in 0..1000 {
        let scale = &scales[case % 2];
        let maxima = scale.max_points();
        let points: Vec<Option<u8>> =
            maxima.iter().map(|&m| (rng.gen_range(0..5) > 0).then(|| rng.gen_range(0..=m))).collect();
        if points.iter().all(Option::is_none) {
            continue;
        }
        let result = score_responses(scale, &respond(&points)).map_err(|e| format!("case {case}: {e}"))?;

        let answered: u64 = points.iter().flatten().map(|&p| u64::from(p)).sum();
        if points.iter().all(Option::is_some) {
            check(u64::from(result.imputed_total) == answered && !result.imputed(), || {
                format!("case {case}: complete total {} vs plain sum {answered}", result.imputed_total)
            })?;
        } else {
            let answered_max: u64 =
                points.iter().zip(&maxima).filter(|(p, _)| p.is_some()).map(|(_, &m)| u64::from(m)).sum();
            let max_total = u64::from(scale.max_total());
            let expected = (2 * answered * max_total + answered_max) / (2 * answered_max);
            check(u64::from(result.imputed_total) == expected && result.imputed(), || {
                format!("case {case}: prorated {} vs {expected}", result.imputed_total)
            })?;
        }

        if let Some(j) = (0..20).find(|&j| matches!(points[j], Some(p) if p < maxima[j])) {
            let mut raised = points.clone();
            raised[j] = raised[j].map(|p| p + 1);
            let after = score_responses(scale, &respond(&raised)).unwrap();
            check(after.imputed_total >= result.imputed_total && after.tier >= result.tier, || {
                format!("case {case}: raising item {} lowered the score", j + 1)
            })?;
        }
    }
    let epv = &scales[0];
    let tiers: Vec<Tier> = [4, 5, 9, 10].iter().map(|&t| classify_tier(t, epv).unwrap()).collect();
    check(tiers == [Tier::Low, Tier::Moderate, Tier::Moderate, Tier::High], || format!("boundary tiers {tiers:?}"))?;
    Ok("1000 assessments; tiers at 4/5 and 9/10 correct".into())
}

/// Independent textbook formulas in plain f64.
mod brute {
    pub fn alpha(cols: &[Vec<f64>]) -> f64 {
        let k = cols.len() as f64;
        let n = cols[0].len();
        let var = |xs: &[f64]| {
            let s: f64 = xs.iter().sum();
            let ss: f64 = xs.iter().map(|x| x * x).sum();
            (ss - s * s / xs.len() as f64) / (xs.len() as f64 - 1.0)
        };
        let totals: Vec<f64> = (0..n).map(|i| cols.iter().map(|c| c[i]).sum()).collect();
        let item_vars: f64 = cols.iter().map(|c| var(c)).sum();
        k / (k - 1.0) * (1.0 - item_vars / var(&totals))
    }

    pub fn pooled_t(a: &[f64], b: &[f64]) -> f64 {
        let stats = |xs: &[f64]| {
            let n = xs.len() as f64;
            let s: f64 = xs.iter().sum();
            let ss: f64 = xs.iter().map(|x| x * x).sum();
            (n, s / n, ss - s * s / n)
        };
        let ((na, ma, ssa), (nb, mb, ssb)) = (stats(a), stats(b));
        let sp2 = (ssa + ssb) / (na + nb - 2.0);
        (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt()
    }

    /// N(ad − bc)² / (r1 r2 c1 c2); `None` when a margin is zero.
    pub fn chi2_2x2([[a, b], [c, d]]: [[u64; 2]; 2]) -> Option<f64> {
        let margins = [(a + b), (c + d), (a + c), (b + d)];
        if margins.contains(&0) {
            return None;
        }
        let (a, b, c, d) = (a as f64, b as f64, c as f64, d as f64);
        let n = a + b + c + d;
        Some(n * (a * d - b * c).powi(2) / margins.iter().map(|&m| m as f64).product::<f64>())
    }
}

fn psychometrics_checks() -> Outcome {
    let col: Vec<Exact> = [0u64, 1, 2, 1, 3, 0].iter().map(|&x| Exact::from_count(x)).collect();
    let alpha = cronbach_alpha_columns(&vec![col; 5]).map_err(|e| e.to_string())?;
    check(alpha == Exact::from_count(1), || format!("identical-column alpha = {alpha}"))?;
    let table = ContingencyTable::new(vec![3, 5, 7], vec![9, 15, 21]).unwrap();
    let chi = chi_squared::<Exact>(&table).unwrap().statistic;
    check(chi == Exact::from_count(0), || format!("proportional chi-squared = {chi}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut evaluated = [0usize; 3];
    for m in 0..10 {
        let (k, n) = (rng.gen_range(3..7usize), rng.gen_range(8..25usize));
        let rows: Vec<Vec<u8>> = (0..n).map(|_| (0..k).map(|_| rng.gen_range(0..=2)).collect()).collect();
        let mut labels: Vec<Label> =
            (0..n).map(|_| if rng.gen_bool(0.4) { Label::Severe } else { Label::NonSevere }).collect();
        labels[0] = Label::Severe;
        labels[1] = Label::NonSevere;
        let matrix = ResponseMatrix::new(rows.clone(), labels.clone()).unwrap();
        let cols: Vec<Vec<f64>> = (0..k).map(|j| rows.iter().map(|r| f64::from(r[j])).collect()).collect();

        if let Ok(alpha) = cronbach_alpha::<f64>(&matrix) {
            relative_close(alpha, brute::alpha(&cols), &format!("matrix {m} alpha"))?;
            evaluated[0] += 1;
        }

        let totals: Vec<f64> = matrix.totals().into_iter().map(f64::from).collect();
        let (a, b): (Vec<f64>, Vec<f64>) = (
            totals.iter().zip(&labels).filter(|(_, l)| l.is_severe()).map(|(t, _)| *t).collect(),
            totals.iter().zip(&labels).filter(|(_, l)| !l.is_severe()).map(|(t, _)| *t).collect(),
        );
        if a.len() >= 2 && b.len() >= 2 {
            if let (Ok(ab), Ok(ba)) = (two_sample_t(&a, &b), two_sample_t(&b, &a)) {
                check(ab.statistic == -ba.statistic, || format!("matrix {m}: t not antisymmetric"))?;
                relative_close(ab.statistic, brute::pooled_t(&a, &b), &format!("matrix {m} t"))?;
                evaluated[1] += 1;
            }
        }

        // Per-item 2 × 2 affirmative-by-label tables.
        let ranked = item_discrimination::<f64>(&matrix).map_err(|e| e.to_string())?;
        let mut defined = 0;
        for d in &ranked {
            let j = usize::from(d.item_id - 1);
            let mut cells = [[0u64; 2]; 2];
            for (row, l) in rows.iter().zip(&labels) {
                cells[usize::from(!l.is_severe())][usize::from(row[j] == 0)] += 1;
            }
            check(d.report.statistic >= 0.0, || format!("matrix {m}: negative chi-squared"))?;
            match brute::chi2_2x2(cells) {
                Some(expected) => {
                    relative_close(d.report.statistic, expected, &format!("matrix {m} item {} chi-squared", d.item_id))?;
                    defined += 1;
                }
                None => check(d.report.statistic == 0.0, || format!("matrix {m}: constant item {} not 0", d.item_id))?,
            }
        }
        evaluated[2] += usize::from(defined > 0);
    }
    check(evaluated.iter().all(|&n| n == 10), || format!("too few statistics defined: {evaluated:?} of 10"))?;
    Ok(format!(
        "alpha 1 on identical columns, chi-squared 0 on proportional table; alpha/t/chi-squared matched on {}/{}/{} of 10 random matrices",
        evaluated[0], evaluated[1], evaluated[2]
    ))
}

fn feedback_checks() -> Outcome {
    let start = Instant::now();
    let scale = ScaleDefinition::epv();
    let mut population = PopulationSpec::illustrative();
    population.n_severe = 500;
    population.n_non_severe = 1500;
    let spec = |rule, bias_1: f64| {
        let mut bias = vec![0.0; 20];
        bias[0] = bias_1;
        FeedbackSpec { population: population.clone(), bias, selection_rule: rule, iterations: 10, cutoff: None }
    };
    let budget = f64::from(scale.max_total());

    let mut drift = 0.0;
    let mut positive = 0;
    for seed in 0..50u64 {
        let stationary = spec(SelectionRule::RetrainOnAll, 0.0).with_seed(seed);
        let trace = run_feedback(&stationary, &scale).map_err(|e| e.to_string())?;
        let last = trace.iterations.last().unwrap();
        drift += last.drift.iter().map(|d| d.abs()).sum::<f64>() / last.drift.len() as f64;
        check(run_feedback(&stationary, &scale).unwrap() == trace, || format!("seed {seed}: trace not reproducible"))?;

        let biased = spec(SelectionRule::RetrainOnPredictedSevere, 0.3).with_seed(seed);
        let trace = run_feedback(&biased, &scale).map_err(|e| e.to_string())?;
        positive += usize::from(weight_trend(&trace, 1).is_some_and(|rho| rho > 0.0));
        check(run_feedback(&biased, &scale).unwrap() == trace, || format!("seed {seed}: trace not reproducible"))?;
    }
    let mean_drift = drift / 50.0;
    let elapsed = start.elapsed();
    check(mean_drift < 0.05 * budget, || format!("mean drift {mean_drift:.4} ≥ {}", 0.05 * budget))?;
    check(positive >= 45, || format!("item-1 trend positive in only {positive}/50 seeds"))?;
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("mean drift {mean_drift:.4} (limit {:.2}); trend positive in {positive}/50; {elapsed:.1?}", 0.05 * budget))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("sim.toml");
    std::fs::write(&config, "selection_rule = \"retrain-on-predicted-severe\"\niterations = 4\n").unwrap();
    let config = config.to_str().unwrap();
    let runs: [&[&str]; 4] = [
        &["reconstruct"],
        &["sweep", "--anchors"],
        &["generate", "--seed", "5"],
        &["simulate", "--config", config, "--seed", "5"],
    ];
    for args in runs {
        let once = || Command::new(env!("CARGO_BIN_EXE_riskscale")).args(args).output().unwrap();
        let (a, b) = (once(), once());
        check(a.status.success() && !a.stdout.is_empty(), || format!("{args:?} failed: {}", String::from_utf8_lossy(&a.stderr)))?;
        check(a.stdout == b.stdout, || format!("{args:?} output differs between runs"))?;
    }
    Ok("reconstruct, sweep --anchors, generate and simulate byte-identical".into())
}

fn primary_only() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let manifest = std::fs::read_to_string(root.join("Cargo.toml")).map_err(|e| e.to_string())?;
    check(!manifest.contains("assessor-ui") && !root.join("assessor-ui").exists(), || {
        "workspace references the assessor UI".into()
    })?;
    for entry in std::fs::read_dir(root.join("crates")).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        check(path.join("Cargo.toml").exists() && !path.join("package.json").exists(), || {
            format!("{} is not a Rust crate", path.display())
        })?;
    }
    Ok("suite built from Rust workspace crates only".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("reference confusion matrix at cutoff 10", table_one),
        ("cutoff-0 anchor and count conservation", cutoff_zero),
        ("cutoff-6 and cutoff-12 rate anchors", rate_anchors),
        ("AUC of reconstruction and pairwise oracle", auc_checks),
        ("scoring properties on 1000 assessments", scoring_properties),
        ("psychometric statistics against brute force", psychometrics_checks),
        ("feedback simulator stationarity, trend, reproducibility", feedback_checks),
        ("CLI determinism", determinism),
        ("primary suite needs no UI build", primary_only),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failures += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
